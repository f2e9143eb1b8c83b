#include "t2v/pipeline.hpp"

namespace t2v {

namespace {

void require(const void* ptr, const char* what) {
    if (ptr == nullptr)
        throw ConfigError(std::string("translation pipeline is missing the ") + what);
}

}  // namespace

Tensor<float> translate_batch(const TranslatePipeline& p, const Tensor<float>& thermal, Rng& rng,
                              std::vector<AttributeLabels>* used_labels) {
    require(p.visible_codec, "visible codec");
    require(p.thermal_codec, "thermal codec");
    require(p.model, "denoiser");
    require(p.sched, "noise schedule");
    if (p.prompt_mode != PromptMode::none) require(p.student, "attribute classifier");
    if (p.prompt_mode == PromptMode::table) require(p.table, "prompt table");

    const CodecConfig& tc = p.thermal_codec->cfg;
    if (thermal.ndim() != 4 || thermal.dim(1) != tc.image_channels ||
        thermal.dim(2) != tc.image_size || thermal.dim(3) != tc.image_size)
        throw DimensionError("thermal batch " + shape_str(thermal.shape()) +
                             " does not match codec input [B," +
                             std::to_string(tc.image_channels) + "," +
                             std::to_string(tc.image_size) + "," + std::to_string(tc.image_size) +
                             "]");
    const CodecConfig& vc = p.visible_codec->cfg;
    const DenoiserConfig& mc = p.model->cfg;
    if (vc.latent_channels != mc.latent_channels || vc.latent_size() != mc.latent_size ||
        tc.latent_channels != mc.latent_channels || tc.latent_size() != mc.latent_size)
        throw ConfigError("codec latents [" + std::to_string(vc.latent_channels) + "," +
                          std::to_string(vc.latent_size()) + "] / [" +
                          std::to_string(tc.latent_channels) + "," +
                          std::to_string(tc.latent_size()) +
                          "] do not match denoiser latent [" +
                          std::to_string(mc.latent_channels) + "," +
                          std::to_string(mc.latent_size) + "]");

    const size_t B = thermal.dim(0);
    NoGradGuard<float> guard;
    Tensor<float> th_lat = p.thermal_codec->encode_batch(thermal);

    std::vector<AttributeLabels> labels(B);
    if (p.prompt_mode != PromptMode::none) {
        for (size_t b = 0; b < B; ++b) {
            Tensor<float> img = reshape(slice(thermal, 0, b, 1),
                                        {tc.image_channels, tc.image_size, tc.image_size});
            labels[b] = classify(*p.student, img).labels;
        }
    }
    if (used_labels) *used_labels = labels;

    Tensor<float> prompt = batch_prompt(p.prompt_mode, p.table, labels, mc.d_ctx);
    EpsFn<float> eps_model = [&](const Tensor<float>& z, size_t t) {
        return p.model->forward(z, std::vector<size_t>(B, t), th_lat, prompt);
    };
    Tensor<float> z0 =
        sample(eps_model, *p.sched, {B, mc.latent_channels, mc.latent_size, mc.latent_size}, rng);
    return p.visible_codec->decode_batch(z0);
}

Tensor<float> translate(const TranslatePipeline& p, const Tensor<float>& thermal_chw, Rng& rng,
                        AttributeLabels* used_labels) {
    if (thermal_chw.ndim() != 3)
        throw DimensionError("translate expects a [c,S,S] thermal image, got " +
                             shape_str(thermal_chw.shape()));
    std::vector<size_t> shp = {1, thermal_chw.dim(0), thermal_chw.dim(1), thermal_chw.dim(2)};
    std::vector<AttributeLabels> labels;
    Tensor<float> out = translate_batch(p, reshape(thermal_chw, shp), rng, &labels);
    if (used_labels) *used_labels = labels[0];
    return reshape(out, {out.dim(1), out.dim(2), out.dim(3)});
}

}  // namespace t2v
