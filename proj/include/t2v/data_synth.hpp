#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2v/image.hpp"
#include "t2v/labels.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

// Synthetic paired-face corpus: deterministic in (seed, identity, instance),
// byte-identical across platforms (integer + IEEE add/mul/div only; no libm
// transcendentals on any rendering path).
struct SyntheticSpec {
    size_t identity_count = 100;
    size_t images_per_identity = 10;
    size_t image_size = 32;
    uint64_t seed = 1;
};

// Identity-level geometry, derived from the identity substream. Exposed so
// tests can copy a parameter set and override single fields (e.g. prove the
// thermal render never reads skin_tone).
struct FaceParams {
    float rx = 0, ry = 0;            // face ellipse semi-axes, pixels
    float eye_dx = 0, eye_dy = 0;    // eye centers relative to face center
    float eye_r = 0;
    float mouth_dy = 0, mouth_rx = 0, mouth_ry = 0;
    AttributeLabels labels;
};

// Round-robin attribute assignment; every class of every head appears once
// identity_count reaches 19.
AttributeLabels identity_labels(size_t identity);

// 19-entry skin palette ordered light -> dark (strictly decreasing mean).
void skin_tone_rgb(int tone, uint8_t rgb[3]);

FaceParams face_params(const SyntheticSpec& spec, size_t identity);

struct RenderedPair {
    Image visible;  // RGB
    Image thermal;  // grayscale
};

// Renders one (visible, thermal) pair with per-instance jitter drawn from the
// (seed, identity, instance) substream. Thermal is tone-independent by
// construction.
RenderedPair render_pair(const SyntheticSpec& spec, const FaceParams& p,
                         size_t identity, size_t instance);

struct PairedSample {
    Tensor<float> visible;  // [3,S,S] in [0,1]
    Tensor<float> thermal;  // [1,S,S] in [0,1]
    AttributeLabels labels;
    int64_t identity = -1;
    std::string stem;
};

struct PairedDataset {
    std::vector<PairedSample> train;
    std::vector<PairedSample> test;
};

// Identities [0, 0.8*N) train, the rest test (identity-disjoint).
size_t train_identity_count(const SyntheticSpec& spec);

PairedDataset generate_dataset(const SyntheticSpec& spec);

// Writes <stem>_vis.ppm / <stem>_th.pgm plus manifest.csv
// (stem,split,identity,gender,age_bin,skin_tone) into out_dir.
void write_dataset(const SyntheticSpec& spec, const std::string& out_dir);

// Loads a directory written by write_dataset (manifest.csv drives splits and
// labels) or any ad-hoc directory of *_vis.ppm / *_th.pgm pairs, in which
// case an optional labels.csv (filename,gender,age_bin,skin_tone) supplies
// labels and everything lands in the train split. Orphaned halves of a pair
// are skipped with a warning; an empty result also warns.
PairedDataset load_paired_directory(const std::string& dir);

}  // namespace t2v
