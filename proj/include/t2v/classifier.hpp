#pragma once

#include <string>
#include <vector>

#include "t2v/data_synth.hpp"
#include "t2v/nn.hpp"

namespace t2v {

struct ClassifierConfig {
    size_t image_size = 32;
    size_t in_channels = 3;  // 3 = visible teacher, 1 = thermal student
    size_t width = 32;
    size_t feat_dim = 64;  // d_f, fixed across modalities

    void validate() const;
};

// Conv backbone ending in global max pooling, then one linear head per
// attribute. Frozen nets reject every training entry point.
struct ClassifierNet {
    ClassifierConfig cfg;
    bool frozen = false;

    // norm-free backbone: the tone cue is a global color offset, which any
    // per-image normalization would cancel before the heads could read it
    Conv2dLayer c1, c2, c3, c4;
    Linear head_gender, head_age, head_tone;

    ClassifierNet() = default;
    ClassifierNet(const ClassifierConfig& cfg, Rng& rng);

    Tensor<float> features(const Tensor<float>& x) const;  // [B,C,S,S] -> [B,d_f]

    struct Logits {
        Tensor<float> gender, age, tone;  // [B,2] [B,9] [B,19]
    };
    Logits heads(const Tensor<float>& f) const;

    ParamList parameters() const;
    void save(const std::string& path) const;
    static ClassifierNet load(const std::string& path);
};

// Teacher copy adapted to thermal input: first conv collapses its 3 input
// channels by mean; everything else is cloned. Result is trainable.
ClassifierNet make_student(const ClassifierNet& teacher);

struct ClassifyResult {
    AttributeLabels labels;   // argmax per head (ties -> lowest index)
    Tensor<float> features;   // [d_f]
    std::vector<float> prob_gender, prob_age, prob_tone;
};

ClassifyResult classify(const ClassifierNet& net, const Tensor<float>& image_chw);

struct HeadAccuracy {
    float gender = 0, age = 0, tone = 0;
    bool all_at_least(float x) const { return gender >= x && age >= x && tone >= x; }
};

// Accuracy of the net against ground-truth labels; visible_input picks which
// modality of each pair is fed.
HeadAccuracy evaluate_classifier(const ClassifierNet& net,
                                 const std::vector<PairedSample>& samples,
                                 bool visible_input);

// Per-head fraction of pairs where student(thermal) and teacher(visible)
// predict the same label.
HeadAccuracy evaluate_agreement(const ClassifierNet& teacher, const ClassifierNet& student,
                                const std::vector<PairedSample>& pairs);

struct TeacherReport {
    std::vector<float> loss_curve;  // per-epoch mean summed-head cross-entropy
    HeadAccuracy train_accuracy;    // measured after the final epoch
};

// Cross-entropy over all three heads on visible images; marks the net frozen
// on return. Requires complete labels.
TeacherReport train_teacher(ClassifierNet& net, const std::vector<PairedSample>& samples,
                            size_t epochs, float lr, uint64_t seed);

struct DistillReport {
    std::vector<float> eq5_curve;    // per-epoch mean feature-matching loss
    std::vector<float> total_curve;  // eq5 + weighted auxiliary cross-entropy
};

// Feature-consistency distillation: mean over pairs of the squared distance
// between teacher(visible) and student(thermal) features, plus 0.1 x
// cross-entropy of the student heads against teacher-predicted labels.
// Gradients reach only the student; the teacher must already be frozen.
DistillReport distill_student(const ClassifierNet& teacher, ClassifierNet& student,
                              const std::vector<PairedSample>& pairs, size_t epochs,
                              float lr, uint64_t seed);

}  // namespace t2v
