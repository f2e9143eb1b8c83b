#pragma once

#include <string>
#include <vector>

#include "t2v/labels.hpp"
#include "t2v/nn.hpp"
#include "t2v/ssm.hpp"

namespace t2v {

enum class AttnKind { mhsa, bimamba };

struct DenoiserConfig {
    size_t latent_channels = 8;
    size_t latent_size = 8;
    size_t base = 32;
    std::vector<size_t> mults = {1, 2};  // exactly two resolution levels
    AttnKind attn = AttnKind::mhsa;
    size_t d_ctx = 32;
    size_t temb_dim = 64;
    size_t heads = 4;     // mhsa
    size_t d_state = 16;  // bimamba

    void validate() const;
    size_t ch(size_t level) const { return base * mults[level]; }
};

// GN/SiLU conv pair with a per-block timestep projection added between the
// convolutions; second conv zero-initialized so a fresh block is an identity.
struct ResBlock {
    GroupNormLayer gn1, gn2;
    Conv2dLayer conv1, conv2, skip;
    Linear temb;
    bool has_skip = false;

    ResBlock() = default;
    ResBlock(size_t in, size_t out, size_t temb_dim, Rng& rng);
    Tensor<float> forward(const Tensor<float>& x, const Tensor<float>& emb) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

// One attention resolution: pre-norm self-attention (configured kind) plus
// cross-attention over the prompt tokens with a zero-initialized output
// projection, both residual.
struct AttnSite {
    AttnKind kind = AttnKind::mhsa;
    GroupNormLayer gn;
    MHSAParams<float> mhsa;
    SSMBlockParams<float> fwd, bwd;
    Linear cq, ck, cv, co;

    AttnSite() = default;
    AttnSite(AttnKind kind, size_t ch, const DenoiserConfig& cfg, Rng& rng);
    Tensor<float> forward(const Tensor<float>& x, const Tensor<float>& tokens,
                          const Tensor<float>& null_token) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

// Conditional eps-predictor: thermal latent enters by channel concatenation,
// timestep by sinusoidal embedding + MLP, prompt tokens by cross-attention.
// With no prompt supplied, cross-attention reads a learned null token, so the
// sites (and shapes) are identical across conditioned and unconditioned use.
struct UNet {
    DenoiserConfig cfg;
    Linear temb1, temb2;
    Conv2dLayer conv_in, down, upconv, conv_out;
    ResBlock res1, res2, resm1, resm2, res3;
    AttnSite attn1, attnm;
    GroupNormLayer gn_out;
    Tensor<float> null_token;  // [1, d_ctx]

    UNet() = default;
    UNet(const DenoiserConfig& cfg, Rng& rng);

    // z_t, thermal: [B,c,s,s]; t: one timestep (>= 1) per element;
    // prompt: [B,3,d_ctx] or undefined. Output shape equals z_t.
    Tensor<float> forward(const Tensor<float>& z_t, const std::vector<size_t>& t,
                          const Tensor<float>& thermal, const Tensor<float>& prompt) const;

    ParamList parameters() const;
    size_t param_count() const;
    void save(const std::string& path) const;
    static UNet load(const std::string& path);
};

Tensor<float> denoise_eps(const UNet& model, const Tensor<float>& z_chw, size_t t,
                          const Tensor<float>& thermal_chw, const Tensor<float>& prompt);

// Fixed (non-learned) prompt tokens: each attribute's token is the unit basis
// vector of its row slot. Requires d_ctx >= 30.
Tensor<float> one_hot_prompt(const AttributeLabels& labels, size_t d_ctx);

}  // namespace t2v
