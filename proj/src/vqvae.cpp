#include "t2v/vqvae.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "t2v/checkpoint.hpp"
#include "t2v/optim.hpp"

namespace t2v {

void CodecConfig::validate() const {
    if (image_channels != 1 && image_channels != 3)
        throw ConfigError("image_channels must be 1 or 3");
    if (downsample < 2 || (downsample & (downsample - 1)) != 0)
        throw ConfigError("downsample factor must be a power of two >= 2");
    if (image_size % downsample != 0)
        throw ConfigError("image_size must be divisible by the downsample factor");
    if (codebook_size < 2) throw ConfigError("codebook_size must be >= 2");
    if (latent_channels == 0 || base_width == 0)
        throw ConfigError("latent_channels and base_width must be positive");
    if (commitment_weight < 0) throw ConfigError("commitment_weight must be >= 0");
}

size_t CodecConfig::stages() const {
    size_t s = 0;
    for (size_t f = downsample; f > 1; f >>= 1) ++s;
    return s;
}

VQVAE::VQVAE(const CodecConfig& c, Rng& rng) : cfg(c) {
    cfg.validate();
    const size_t b = cfg.base_width;
    const size_t groups = std::min<size_t>(8, b);

    enc_in = Conv2dLayer(cfg.image_channels, b, 3, 1, 1, rng);
    for (size_t s = 0; s < cfg.stages(); ++s) {
        enc_down_gn.emplace_back(b, groups);
        enc_down.emplace_back(b, b, 3, 2, 1, rng);
    }
    enc_gn_mid = GroupNormLayer(b, groups);
    enc_mid = Conv2dLayer(b, b, 3, 1, 1, rng);
    enc_gn_out = GroupNormLayer(b, groups);
    enc_out = Conv2dLayer(b, cfg.latent_channels, 3, 1, 1, rng);

    dec_in = Conv2dLayer(cfg.latent_channels, b, 3, 1, 1, rng);
    dec_gn_mid = GroupNormLayer(b, groups);
    dec_mid = Conv2dLayer(b, b, 3, 1, 1, rng);
    for (size_t s = 0; s < cfg.stages(); ++s) {
        dec_up_gn.emplace_back(b, groups);
        dec_up.emplace_back(b, b, 3, 1, 1, rng);
    }
    dec_gn_out = GroupNormLayer(b, groups);
    dec_out = Conv2dLayer(b, cfg.image_channels, 3, 1, 1, rng);

    codebook = Tensor<float>::randn({cfg.codebook_size, cfg.latent_channels}, rng,
                                    1.0f / std::sqrt(float(cfg.latent_channels)));
}

Tensor<float> VQVAE::encode_batch(const Tensor<float>& x) const {
    if (x.shape().size() != 4 || x.shape()[1] != cfg.image_channels ||
        x.shape()[2] != cfg.image_size || x.shape()[3] != cfg.image_size)
        throw DimensionError("encoder expects [B," + std::to_string(cfg.image_channels) +
                             "," + std::to_string(cfg.image_size) + "," +
                             std::to_string(cfg.image_size) + "], got " +
                             shape_str(x.shape()));
    Tensor<float> h = enc_in(x);
    for (size_t s = 0; s < enc_down.size(); ++s)
        h = enc_down[s](silu(enc_down_gn[s](h)));
    h = add(h, enc_mid(silu(enc_gn_mid(h))));
    return enc_out(silu(enc_gn_out(h)));
}

Tensor<float> VQVAE::decode_batch(const Tensor<float>& z) const {
    const size_t s = cfg.latent_size();
    if (z.shape().size() != 4 || z.shape()[1] != cfg.latent_channels ||
        z.shape()[2] != s || z.shape()[3] != s)
        throw DimensionError("decoder expects [B," + std::to_string(cfg.latent_channels) +
                             "," + std::to_string(s) + "," + std::to_string(s) +
                             "], got " + shape_str(z.shape()));
    Tensor<float> h = dec_in(z);
    h = add(h, dec_mid(silu(dec_gn_mid(h))));
    for (size_t i = 0; i < dec_up.size(); ++i)
        h = dec_up[i](silu(dec_up_gn[i](upsample_nearest2x(h))));
    return sigmoid(dec_out(silu(dec_gn_out(h))));
}

namespace {

Tensor<float> unsqueeze0(const Tensor<float>& t) {
    std::vector<size_t> s = t.shape();
    s.insert(s.begin(), 1);
    return reshape(t, s);
}

Tensor<float> squeeze0(const Tensor<float>& t) {
    std::vector<size_t> s = t.shape();
    s.erase(s.begin());
    return reshape(t, s);
}

}  // namespace

Tensor<float> VQVAE::encode(const Tensor<float>& image_chw) const {
    if (image_chw.shape().size() != 3)
        throw DimensionError("encode expects [c,H,W], got " + shape_str(image_chw.shape()));
    return squeeze0(encode_batch(unsqueeze0(image_chw)));
}

Tensor<float> VQVAE::decode(const Tensor<float>& z_chw) const {
    if (z_chw.shape().size() != 3)
        throw DimensionError("decode expects [c,h,w], got " + shape_str(z_chw.shape()));
    return squeeze0(decode_batch(unsqueeze0(z_chw)));
}

QuantizeResult quantize_batch(const Tensor<float>& codebook, const Tensor<float>& z) {
    if (!codebook.defined() || codebook.numel() == 0)
        throw ConfigError("empty codebook");
    if (codebook.shape().size() != 2)
        throw DimensionError("codebook must be [K,c], got " + shape_str(codebook.shape()));
    const size_t K = codebook.shape()[0], c = codebook.shape()[1];
    if (z.shape().size() != 4 || z.shape()[1] != c)
        throw DimensionError("quantize expects [B," + std::to_string(c) + ",h,w], got " +
                             shape_str(z.shape()));
    const size_t B = z.shape()[0], h = z.shape()[2], w = z.shape()[3];
    const size_t n = B * h * w;

    // [B,c,h,w] -> [n,c] rows, keeping the graph so encoder gradients flow
    Tensor<float> zp = reshape(permute(z, {0, 2, 3, 1}), {n, c});

    QuantizeResult out;
    out.indices.resize(n);
    const auto& zv = zp.vec();
    const auto& cb = codebook.vec();
    for (size_t i = 0; i < n; ++i) {
        size_t best = 0;
        float best_d = 0;
        for (size_t k = 0; k < K; ++k) {
            float d = 0;
            for (size_t j = 0; j < c; ++j) {
                float diff = zv[i * c + j] - cb[k * c + j];
                d += diff * diff;
            }
            if (k == 0 || d < best_d) {  // strict <: ties keep the lowest index
                best_d = d;
                best = k;
            }
        }
        out.indices[i] = best;
    }

    Tensor<float> rows = embed_rows(codebook, out.indices);  // [n,c], grads -> codebook
    out.codebook_loss = mean(square(sub(zp.detach(), rows)));
    out.commitment_loss = mean(square(sub(zp, rows.detach())));

    // straight-through: exact code-row values, identity gradient into zp
    // (zp - detach(zp) is elementwise a-a = +0, so the sum IS the code row)
    Tensor<float> st = add(rows.detach(), sub(zp, zp.detach()));
    out.z_q = permute(reshape(st, {B, h, w, c}), {0, 3, 1, 2});
    return out;
}

QuantizeResult quantize(const Tensor<float>& codebook, const Tensor<float>& z_chw) {
    if (z_chw.shape().size() != 3)
        throw DimensionError("quantize expects [c,h,w], got " + shape_str(z_chw.shape()));
    QuantizeResult r = quantize_batch(codebook, unsqueeze0(z_chw));
    r.z_q = squeeze0(r.z_q);
    return r;
}

ParamList VQVAE::parameters() const {
    ParamList ps;
    enc_in.collect("enc_in", ps);
    for (size_t s = 0; s < enc_down.size(); ++s) {
        enc_down_gn[s].collect("enc_d" + std::to_string(s) + ".gn", ps);
        enc_down[s].collect("enc_d" + std::to_string(s), ps);
    }
    enc_gn_mid.collect("enc_mid.gn", ps);
    enc_mid.collect("enc_mid", ps);
    enc_gn_out.collect("enc_out.gn", ps);
    enc_out.collect("enc_out", ps);
    dec_in.collect("dec_in", ps);
    dec_gn_mid.collect("dec_mid.gn", ps);
    dec_mid.collect("dec_mid", ps);
    for (size_t s = 0; s < dec_up.size(); ++s) {
        dec_up_gn[s].collect("dec_u" + std::to_string(s) + ".gn", ps);
        dec_up[s].collect("dec_u" + std::to_string(s), ps);
    }
    dec_gn_out.collect("dec_out.gn", ps);
    dec_out.collect("dec_out", ps);
    ps.emplace_back("codebook", codebook);
    return ps;
}

void VQVAE::save(const std::string& path) const {
    ParamList ps = parameters();
    ps.emplace_back("cfg", Tensor<float>::from_data(
                               {7}, {float(cfg.image_size), float(cfg.image_channels),
                                     float(cfg.downsample), float(cfg.latent_channels),
                                     float(cfg.codebook_size), cfg.commitment_weight,
                                     float(cfg.base_width)}));
    save_checkpoint_f32(path, ps);
}

VQVAE VQVAE::load(const std::string& path) {
    NamedEntries entries = load_checkpoint(path);
    NamedEntries::const_iterator cfg_it = entries.end();
    for (auto it = entries.begin(); it != entries.end(); ++it)
        if (it->first == "cfg") cfg_it = it;
    if (cfg_it == entries.end() || cfg_it->second.f32.size() != 7)
        throw FormatError("checkpoint " + path + " lacks a codec config entry");
    const auto& cv = cfg_it->second.f32;
    CodecConfig cfg;
    cfg.image_size = size_t(cv[0]);
    cfg.image_channels = size_t(cv[1]);
    cfg.downsample = size_t(cv[2]);
    cfg.latent_channels = size_t(cv[3]);
    cfg.codebook_size = size_t(cv[4]);
    cfg.commitment_weight = cv[5];
    cfg.base_width = size_t(cv[6]);
    Rng rng(0);  // immediately overwritten by the restore
    VQVAE codec(cfg, rng);
    restore_into(entries, codec.parameters());
    return codec;
}

VQTrainResult train_vqvae(VQVAE& codec, const std::vector<Tensor<float>>& images,
                          size_t epochs, float lr, uint64_t seed,
                          const std::string& ckpt_path) {
    if (images.empty()) throw ContractError("empty dataset");
    for (const auto& img : images)
        if (img.shape() !=
            std::vector<size_t>{codec.cfg.image_channels, codec.cfg.image_size,
                                codec.cfg.image_size})
            throw DimensionError("dataset image shape " + shape_str(img.shape()) +
                                 " does not match codec config");

    VQTrainResult result;
    if (epochs == 0) {
        if (!ckpt_path.empty()) codec.save(ckpt_path);
        return result;
    }

    ParamList params = codec.parameters();
    set_requires_grad(params, true);
    Adam<float> opt(param_tensors(params), lr);

    const size_t batch = std::min<size_t>(16, images.size());
    const size_t C = codec.cfg.image_channels, S = codec.cfg.image_size;
    const size_t K = codec.cfg.codebook_size, c = codec.cfg.latent_channels;

    std::vector<size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);

    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng = Rng::stream(seed, "vqvae-shuffle", epoch);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double recon_sum = 0, total_sum = 0;
        size_t n_batches = 0;
        std::vector<size_t> usage(K, 0);
        std::vector<float> refresh_pool;  // encoder rows for dead-code reseeding

        for (size_t start = 0; start < order.size(); start += batch) {
            const size_t bs = std::min(batch, order.size() - start);
            Tensor<float> x = Tensor<float>::zeros({bs, C, S, S});
            for (size_t b = 0; b < bs; ++b)
                std::copy(images[order[start + b]].vec().begin(),
                          images[order[start + b]].vec().end(),
                          x.vec().begin() + b * C * S * S);

            Tape<float> tape;
            Tensor<float> z = codec.encode_batch(x);
            QuantizeResult q = quantize_batch(codec.codebook, z);
            Tensor<float> recon = codec.decode_batch(q.z_q);
            Tensor<float> recon_mse = mean(square(sub(recon, x)));
            Tensor<float> loss =
                add(recon_mse, add(q.codebook_loss,
                                   scale(q.commitment_loss, codec.cfg.commitment_weight)));
            tape.backward(loss);
            opt.step();
            opt.zero_grad();

            recon_sum += recon_mse.item();
            total_sum += loss.item();
            ++n_batches;
            for (size_t idx : q.indices) ++usage[idx];
            refresh_pool.assign(z.vec().begin(),
                                z.vec().begin() + std::min(z.numel(), size_t(64) * c));
        }

        result.recon_curve.push_back(float(recon_sum / double(n_batches)));
        result.total_curve.push_back(float(total_sum / double(n_batches)));
        result.codes_used_final = 0;
        for (size_t k = 0; k < K; ++k)
            if (usage[k]) ++result.codes_used_final;

        // revive codes nothing selected this epoch from fresh encoder output
        if (!refresh_pool.empty()) {
            Rng refresh_rng = Rng::stream(seed, "vqvae-refresh", epoch);
            const size_t pool_rows = refresh_pool.size() / c;
            auto& cb = codec.codebook.vec();
            for (size_t k = 0; k < K; ++k) {
                if (usage[k]) continue;
                const size_t r = refresh_rng.below(pool_rows);
                for (size_t j = 0; j < c; ++j)
                    cb[k * c + j] =
                        refresh_pool[r * c + j] + float(refresh_rng.uniform(-0.01, 0.01));
            }
        }
    }

    set_requires_grad(params, false);
    if (!ckpt_path.empty()) codec.save(ckpt_path);
    return result;
}

}  // namespace t2v
