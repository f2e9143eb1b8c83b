#pragma once

#include <vector>

#include "t2v/classifier.hpp"
#include "t2v/diffusion.hpp"
#include "t2v/vqvae.hpp"

namespace t2v {

// Everything the end-to-end thermal-to-visible translator needs. Components
// are borrowed; a missing required piece is reported by name.
struct TranslatePipeline {
    const VQVAE* visible_codec = nullptr;
    const VQVAE* thermal_codec = nullptr;
    const ClassifierNet* student = nullptr;  // required unless prompt mode is none
    const PromptTable* table = nullptr;      // required in table mode
    PromptMode prompt_mode = PromptMode::none;
    const UNet* model = nullptr;
    const NoiseSchedule* sched = nullptr;
};

// classify thermal -> prompt -> conditional latent sampling -> visible decode.
// Input [B,1,S,S]; output [B,3,S,S] in [0,1]. Labels used for conditioning are
// reported through used_labels when given (unlabeled sentinels in none mode).
Tensor<float> translate_batch(const TranslatePipeline& p, const Tensor<float>& thermal, Rng& rng,
                              std::vector<AttributeLabels>* used_labels = nullptr);

// single-image convenience wrapper: [1,S,S] -> [3,S,S]
Tensor<float> translate(const TranslatePipeline& p, const Tensor<float>& thermal_chw, Rng& rng,
                        AttributeLabels* used_labels = nullptr);

}  // namespace t2v
