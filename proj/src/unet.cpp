#include "t2v/unet.hpp"

#include <algorithm>
#include <cmath>

#include "t2v/checkpoint.hpp"
#include "t2v/conv.hpp"
#include "t2v/prompt.hpp"

namespace t2v {

namespace {

// largest group count <= 8 that divides the channel count
size_t norm_groups(size_t channels) {
    size_t g = std::min<size_t>(8, channels);
    while (channels % g != 0) --g;
    return g;
}

}  // namespace

void DenoiserConfig::validate() const {
    if (latent_channels == 0) throw ConfigError("latent_channels must be >= 1");
    if (latent_size < 2 || latent_size % 2 != 0)
        throw ConfigError("latent_size must be even and >= 2 for one 2x down/up level, got " +
                          std::to_string(latent_size));
    if (base == 0) throw ConfigError("base width must be >= 1");
    if (mults.size() != 2)
        throw ConfigError("denoiser expects exactly two resolution levels, got " +
                          std::to_string(mults.size()));
    for (size_t m : mults)
        if (m == 0) throw ConfigError("channel multiplier must be >= 1");
    if (d_ctx == 0) throw ConfigError("d_ctx must be >= 1");
    if (temb_dim < 2 || temb_dim % 2 != 0)
        throw ConfigError("temb_dim must be even and >= 2, got " + std::to_string(temb_dim));
    if (attn == AttnKind::mhsa) {
        for (size_t level = 0; level < 2; ++level)
            if (heads == 0 || ch(level) % heads != 0)
                throw ConfigError("attention width " + std::to_string(ch(level)) +
                                  " not divisible by heads " + std::to_string(heads));
    } else if (d_state == 0) {
        throw ConfigError("d_state must be >= 1");
    }
}

// ---------------------------------------------------------------------------

ResBlock::ResBlock(size_t in, size_t out, size_t temb_dim, Rng& rng)
    : gn1(in, norm_groups(in)),
      gn2(out, norm_groups(out)),
      conv1(in, out, 3, 1, 1, rng),
      conv2(out, out, 3, 1, 1, rng, /*zero_init=*/true),
      temb(temb_dim, out, rng),
      has_skip(in != out) {
    if (has_skip) skip = Conv2dLayer(in, out, 1, 1, 0, rng);
}

Tensor<float> ResBlock::forward(const Tensor<float>& x, const Tensor<float>& emb) const {
    Tensor<float> h = conv1(silu(gn1(x)));
    Tensor<float> e = temb(emb);  // [B,out]
    e = reshape(e, {e.dim(0), e.dim(1), 1, 1});
    h = add(h, e);
    h = conv2(silu(gn2(h)));
    return add(has_skip ? skip(x) : x, h);
}

void ResBlock::collect(const std::string& prefix, ParamList& out) const {
    gn1.collect(prefix + ".gn1", out);
    conv1.collect(prefix + ".conv1", out);
    temb.collect(prefix + ".temb", out);
    gn2.collect(prefix + ".gn2", out);
    conv2.collect(prefix + ".conv2", out);
    if (has_skip) skip.collect(prefix + ".skip", out);
}

// ---------------------------------------------------------------------------

AttnSite::AttnSite(AttnKind kind_, size_t ch, const DenoiserConfig& cfg, Rng& rng)
    : kind(kind_),
      gn(ch, norm_groups(ch)),
      cq(ch, ch, rng),
      ck(cfg.d_ctx, ch, rng),
      cv(cfg.d_ctx, ch, rng),
      co(ch, ch, rng) {
    if (kind == AttnKind::mhsa) {
        mhsa = MHSAParams<float>::init(cfg.heads, ch, rng);
    } else {
        fwd = SSMBlockParams<float>::init(cfg.d_state, ch, rng, /*selective=*/true);
        bwd = SSMBlockParams<float>::init(cfg.d_state, ch, rng, /*selective=*/true);
    }
    // residual branch starts silent
    std::fill(co.w.vec().begin(), co.w.vec().end(), 0.0f);
}

Tensor<float> AttnSite::forward(const Tensor<float>& x, const Tensor<float>& tokens,
                                const Tensor<float>& null_token) const {
    const size_t ch = gn.gamma.dim(0);
    if (x.ndim() != 4 || x.dim(1) != ch)
        throw DimensionError("attention input " + shape_str(x.shape()) +
                             " does not match width " + std::to_string(ch));
    const size_t B = x.dim(0), H = x.dim(2), W = x.dim(3), hw = H * W;
    Tensor<float> n = gn(x);
    const float inv_sqrt_d = 1.0f / std::sqrt(float(ch));
    Tensor<float> out;
    for (size_t b = 0; b < B; ++b) {
        Tensor<float> xseq = permute(reshape(slice(x, 0, b, 1), {ch, hw}), {1, 0});
        Tensor<float> nseq = permute(reshape(slice(n, 0, b, 1), {ch, hw}), {1, 0});
        Tensor<float> self_y = kind == AttnKind::mhsa ? mhsa_block(mhsa, nseq)
                                                      : bimamba_block(fwd, bwd, nseq);
        // the blocks add their own input back; keep only the contribution
        Tensor<float> s = add(xseq, sub(self_y, nseq));
        Tensor<float> tok = tokens.defined()
                                ? reshape(slice(tokens, 0, b, 1), {tokens.dim(1), tokens.dim(2)})
                                : null_token;
        Tensor<float> att = softmax_lastdim(scale(matmul_nt(cq(s), ck(tok)), inv_sqrt_d));
        Tensor<float> y = add(s, co(matmul(att, cv(tok))));
        Tensor<float> yb = reshape(permute(y, {1, 0}), {1, ch, H, W});
        out = out.defined() ? concat(out, yb, 0) : yb;
    }
    return out;
}

void AttnSite::collect(const std::string& prefix, ParamList& out) const {
    gn.collect(prefix + ".gn", out);
    if (kind == AttnKind::mhsa) {
        out.emplace_back(prefix + ".Wq", mhsa.Wq);
        out.emplace_back(prefix + ".Wk", mhsa.Wk);
        out.emplace_back(prefix + ".Wv", mhsa.Wv);
        out.emplace_back(prefix + ".Wo", mhsa.Wo);
        out.emplace_back(prefix + ".bq", mhsa.bq);
        out.emplace_back(prefix + ".bk", mhsa.bk);
        out.emplace_back(prefix + ".bv", mhsa.bv);
        out.emplace_back(prefix + ".bo", mhsa.bo);
    } else {
        const char* dir_name[2] = {".fwd", ".bwd"};
        const SSMBlockParams<float>* dirs[2] = {&fwd, &bwd};
        for (size_t i = 0; i < 2; ++i) {
            std::string p = prefix + dir_name[i];
            out.emplace_back(p + ".a", dirs[i]->a);
            out.emplace_back(p + ".B", dirs[i]->B);
            out.emplace_back(p + ".C", dirs[i]->C);
            out.emplace_back(p + ".d", dirs[i]->d);
            out.emplace_back(p + ".Bg", dirs[i]->Bg);
            out.emplace_back(p + ".Cg", dirs[i]->Cg);
        }
    }
    cq.collect(prefix + ".cq", out);
    ck.collect(prefix + ".ck", out);
    cv.collect(prefix + ".cv", out);
    co.collect(prefix + ".co", out);
}

// ---------------------------------------------------------------------------

UNet::UNet(const DenoiserConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    const size_t c = cfg.latent_channels, ch1 = cfg.ch(0), ch2 = cfg.ch(1);
    temb1 = Linear(cfg.temb_dim, cfg.temb_dim, rng);
    temb2 = Linear(cfg.temb_dim, cfg.temb_dim, rng);
    conv_in = Conv2dLayer(2 * c, ch1, 3, 1, 1, rng);
    res1 = ResBlock(ch1, ch1, cfg.temb_dim, rng);
    attn1 = AttnSite(cfg.attn, ch1, cfg, rng);
    down = Conv2dLayer(ch1, ch2, 3, 2, 1, rng);
    res2 = ResBlock(ch2, ch2, cfg.temb_dim, rng);
    resm1 = ResBlock(ch2, ch2, cfg.temb_dim, rng);
    attnm = AttnSite(cfg.attn, ch2, cfg, rng);
    resm2 = ResBlock(ch2, ch2, cfg.temb_dim, rng);
    upconv = Conv2dLayer(ch2, ch1, 3, 1, 1, rng);
    res3 = ResBlock(2 * ch1, ch1, cfg.temb_dim, rng);
    gn_out = GroupNormLayer(ch1, norm_groups(ch1));
    conv_out = Conv2dLayer(ch1, c, 3, 1, 1, rng, /*zero_init=*/true);
    null_token = Tensor<float>::randn({1, cfg.d_ctx}, rng, 0.02f);
}

namespace {

// [B, dim] sinusoidal embedding of integer timesteps
Tensor<float> timestep_embedding(const std::vector<size_t>& t, size_t dim) {
    const size_t half = dim / 2;
    std::vector<float> data(t.size() * dim);
    for (size_t b = 0; b < t.size(); ++b) {
        for (size_t i = 0; i < half; ++i) {
            double f = half > 1 ? std::exp(-std::log(10000.0) * double(i) / double(half - 1))
                                : 1.0;
            double ang = double(t[b]) * f;
            data[b * dim + i] = float(std::sin(ang));
            data[b * dim + half + i] = float(std::cos(ang));
        }
    }
    return Tensor<float>::from_data({t.size(), dim}, data);
}

}  // namespace

Tensor<float> UNet::forward(const Tensor<float>& z_t, const std::vector<size_t>& t,
                            const Tensor<float>& thermal, const Tensor<float>& prompt) const {
    const size_t c = cfg.latent_channels, s = cfg.latent_size;
    if (z_t.shape() != std::vector<size_t>{z_t.dim(0), c, s, s})
        throw DimensionError("latent " + shape_str(z_t.shape()) + " does not match config [B," +
                             std::to_string(c) + "," + std::to_string(s) + "," +
                             std::to_string(s) + "]");
    if (thermal.shape() != z_t.shape())
        throw DimensionError("thermal latent " + shape_str(thermal.shape()) +
                             " does not match target latent " + shape_str(z_t.shape()));
    const size_t B = z_t.dim(0);
    if (t.size() != B)
        throw ContractError("need one timestep per batch element, got " +
                            std::to_string(t.size()) + " for batch " + std::to_string(B));
    for (size_t tb : t)
        if (tb < 1) throw ContractError("timesteps are 1-based");
    if (prompt.defined() &&
        prompt.shape() != std::vector<size_t>{B, kAttributeCount, cfg.d_ctx})
        throw DimensionError("prompt " + shape_str(prompt.shape()) + " does not match [B," +
                             std::to_string(kAttributeCount) + "," + std::to_string(cfg.d_ctx) +
                             "]");

    Tensor<float> e = temb2(silu(temb1(timestep_embedding(t, cfg.temb_dim))));
    Tensor<float> h1 = conv_in(concat(z_t, thermal, 1));
    h1 = res1.forward(h1, e);
    h1 = attn1.forward(h1, prompt, null_token);
    Tensor<float> h2 = res2.forward(down(h1), e);
    Tensor<float> m = resm1.forward(h2, e);
    m = attnm.forward(m, prompt, null_token);
    m = resm2.forward(m, e);
    Tensor<float> u = upconv(upsample_nearest2x(m));
    Tensor<float> h3 = res3.forward(concat(u, h1, 1), e);
    return conv_out(silu(gn_out(h3)));
}

ParamList UNet::parameters() const {
    ParamList ps;
    temb1.collect("temb1", ps);
    temb2.collect("temb2", ps);
    conv_in.collect("conv_in", ps);
    res1.collect("res1", ps);
    attn1.collect("attn1", ps);
    down.collect("down", ps);
    res2.collect("res2", ps);
    resm1.collect("mid.res1", ps);
    attnm.collect("mid.attn", ps);
    resm2.collect("mid.res2", ps);
    upconv.collect("upconv", ps);
    res3.collect("res3", ps);
    gn_out.collect("out.gn", ps);
    conv_out.collect("out.conv", ps);
    ps.emplace_back("null_token", null_token);
    return ps;
}

size_t UNet::param_count() const { return t2v::param_count(parameters()); }

void UNet::save(const std::string& path) const {
    ParamList ps = parameters();
    ps.emplace_back("cfg", Tensor<float>::from_data(
                               {10}, {float(cfg.latent_channels), float(cfg.latent_size),
                                      float(cfg.base), float(cfg.mults[0]), float(cfg.mults[1]),
                                      cfg.attn == AttnKind::bimamba ? 1.0f : 0.0f,
                                      float(cfg.d_ctx), float(cfg.temb_dim), float(cfg.heads),
                                      float(cfg.d_state)}));
    save_checkpoint_f32(path, ps);
}

UNet UNet::load(const std::string& path) {
    NamedEntries entries = load_checkpoint(path);
    NamedEntries::const_iterator cfg_it = entries.end();
    for (auto it = entries.begin(); it != entries.end(); ++it)
        if (it->first == "cfg") cfg_it = it;
    if (cfg_it == entries.end() || cfg_it->second.f32.size() != 10)
        throw FormatError("checkpoint " + path + " lacks a denoiser config entry");
    const auto& cv = cfg_it->second.f32;
    DenoiserConfig cfg;
    cfg.latent_channels = size_t(cv[0]);
    cfg.latent_size = size_t(cv[1]);
    cfg.base = size_t(cv[2]);
    cfg.mults = {size_t(cv[3]), size_t(cv[4])};
    cfg.attn = cv[5] != 0.0f ? AttnKind::bimamba : AttnKind::mhsa;
    cfg.d_ctx = size_t(cv[6]);
    cfg.temb_dim = size_t(cv[7]);
    cfg.heads = size_t(cv[8]);
    cfg.d_state = size_t(cv[9]);
    Rng rng(0);  // immediately overwritten by the restore
    UNet model(cfg, rng);
    restore_into(entries, model.parameters());
    return model;
}

Tensor<float> denoise_eps(const UNet& model, const Tensor<float>& z_chw, size_t t,
                          const Tensor<float>& thermal_chw, const Tensor<float>& prompt) {
    if (z_chw.ndim() != 3)
        throw DimensionError("denoise_eps expects a [c,s,s] latent, got " +
                             shape_str(z_chw.shape()));
    auto lift = [](const Tensor<float>& x) {
        std::vector<size_t> shp = {1};
        for (size_t i = 0; i < x.ndim(); ++i) shp.push_back(x.dim(i));
        return reshape(x, shp);
    };
    Tensor<float> p = prompt.defined() ? lift(prompt) : prompt;
    Tensor<float> out = model.forward(lift(z_chw), {t}, lift(thermal_chw), p);
    return reshape(out, z_chw.shape());
}

Tensor<float> one_hot_prompt(const AttributeLabels& labels, size_t d_ctx) {
    labels.validate();
    if (d_ctx < kPromptRows)
        throw ConfigError("one-hot prompts need d_ctx >= " + std::to_string(kPromptRows) +
                          ", got " + std::to_string(d_ctx));
    std::vector<float> data(kAttributeCount * d_ctx, 0.0f);
    const size_t rows[kAttributeCount] = {kGenderRowOffset + size_t(labels.gender),
                                          kAgeRowOffset + size_t(labels.age_bin),
                                          kToneRowOffset + size_t(labels.skin_tone)};
    for (size_t a = 0; a < kAttributeCount; ++a) data[a * d_ctx + rows[a]] = 1.0f;
    return Tensor<float>::from_data({kAttributeCount, d_ctx}, data);
}

}  // namespace t2v
