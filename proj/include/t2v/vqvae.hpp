#pragma once

#include <string>
#include <vector>

#include "t2v/nn.hpp"

namespace t2v {

struct CodecConfig {
    size_t image_size = 32;      // H = W
    size_t image_channels = 3;   // 3 visible, 1 thermal
    size_t downsample = 4;       // f, power of two; latent is (size/f)^2
    size_t latent_channels = 8;  // c
    size_t codebook_size = 256;  // K
    float commitment_weight = 0.25f;
    size_t base_width = 32;

    void validate() const;
    size_t latent_size() const { return image_size / downsample; }
    size_t stages() const;  // log2(downsample)
};

// Nearest-code quantization. z_q carries the straight-through gradient
// (d z_q / d z = identity); codebook_loss pulls codes toward sg(z),
// commitment_loss pulls the encoder toward sg(z_q). Both are
// mean-over-elements, matching the usual mse-loss normalization.
struct QuantizeResult {
    Tensor<float> z_q;            // same shape as z
    std::vector<size_t> indices;  // one code id per spatial vector, row-major
    Tensor<float> codebook_loss;
    Tensor<float> commitment_loss;
};

QuantizeResult quantize_batch(const Tensor<float>& codebook, const Tensor<float>& z);
QuantizeResult quantize(const Tensor<float>& codebook, const Tensor<float>& z_chw);

struct VQVAE {
    CodecConfig cfg;

    Conv2dLayer enc_in, enc_mid, enc_out;
    GroupNormLayer enc_gn_mid, enc_gn_out;
    std::vector<Conv2dLayer> enc_down;
    std::vector<GroupNormLayer> enc_down_gn;

    Conv2dLayer dec_in, dec_mid, dec_out;
    GroupNormLayer dec_gn_mid, dec_gn_out;
    std::vector<Conv2dLayer> dec_up;
    std::vector<GroupNormLayer> dec_up_gn;

    Tensor<float> codebook;  // [K,c]

    VQVAE() = default;
    VQVAE(const CodecConfig& cfg, Rng& rng);

    // Pre-quantization latent; diffusion trains on these.
    Tensor<float> encode_batch(const Tensor<float>& x) const;  // [B,c_img,S,S] -> [B,c,s,s]
    Tensor<float> decode_batch(const Tensor<float>& z) const;  // [B,c,s,s] -> [B,c_img,S,S], in [0,1]
    Tensor<float> encode(const Tensor<float>& image_chw) const;
    Tensor<float> decode(const Tensor<float>& z_chw) const;

    ParamList parameters() const;

    void save(const std::string& path) const;
    static VQVAE load(const std::string& path);
};

struct VQTrainResult {
    std::vector<float> recon_curve;  // per-epoch mean reconstruction MSE
    std::vector<float> total_curve;  // per-epoch mean total loss
    size_t codes_used_final = 0;     // distinct codes hit in the last epoch
};

// Adam over encoder+decoder+codebook on recon MSE + codebook + β_c·commit.
// Codes unused for a full epoch are re-seeded from encoder outputs. Zero
// epochs is a no-op. Writes a checkpoint when ckpt_path is non-empty.
VQTrainResult train_vqvae(VQVAE& codec, const std::vector<Tensor<float>>& images,
                          size_t epochs, float lr, uint64_t seed,
                          const std::string& ckpt_path = "");

}  // namespace t2v
