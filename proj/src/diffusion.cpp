#include "t2v/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "t2v/optim.hpp"

namespace t2v {

double NoiseSchedule::beta_at(size_t t) const {
    check_t(t);
    return beta[t - 1];
}

double NoiseSchedule::alpha_at(size_t t) const {
    check_t(t);
    return alpha[t - 1];
}

double NoiseSchedule::alpha_bar_at(size_t t) const {
    check_t(t);
    return alpha_bar[t - 1];
}

void NoiseSchedule::check_t(size_t t) const {
    if (t < 1 || t > T)
        throw ContractError("timestep " + std::to_string(t) + " outside [1," + std::to_string(T) +
                            "]");
}

NoiseSchedule make_schedule(size_t T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ConfigError("need 0 < beta_start <= beta_end < 1, got [" +
                          std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (size_t t = 1; t <= T; ++t) {
        double b = T == 1 ? beta_start
                          : beta_start + (beta_end - beta_start) * double(t - 1) / double(T - 1);
        s.beta[t - 1] = b;
        s.alpha[t - 1] = 1.0 - b;
        prod *= 1.0 - b;
        s.alpha_bar[t - 1] = prod;
    }
    return s;
}

double sigma_at(const NoiseSchedule& s, size_t t) {
    s.check_t(t);
    if (t == 1) return 0.0;  // final step is deterministic
    return std::sqrt(s.beta[t - 1]);
}

SampleSteps respace(const NoiseSchedule& full, size_t steps) {
    if (full.T < 1) throw ContractError("respace: empty schedule");
    if (steps < 1 || steps > full.T)
        throw ContractError("respace: step count " + std::to_string(steps) +
                            " outside [1," + std::to_string(full.T) + "]");
    SampleSteps out;
    out.orig_t.resize(steps);
    if (steps == 1) {
        out.orig_t[0] = full.T;
    } else {
        for (size_t k = 1; k <= steps; ++k)
            out.orig_t[k - 1] =
                1 + size_t(std::llround(double(k - 1) * double(full.T - 1) / double(steps - 1)));
    }
    // coarse alpha_bar matches the full schedule exactly at the kept steps;
    // per-step alpha/beta follow from the ratio of consecutive products
    out.coarse.T = steps;
    out.coarse.beta.resize(steps);
    out.coarse.alpha.resize(steps);
    out.coarse.alpha_bar.resize(steps);
    double prev = 1.0;
    for (size_t k = 1; k <= steps; ++k) {
        double ab = full.alpha_bar_at(out.orig_t[k - 1]);
        out.coarse.alpha_bar[k - 1] = ab;
        out.coarse.alpha[k - 1] = ab / prev;
        out.coarse.beta[k - 1] = 1.0 - ab / prev;
        prev = ab;
    }
    return out;
}

Tensor<float> batch_prompt(PromptMode mode, const PromptTable* table,
                           const std::vector<AttributeLabels>& labels, size_t d_ctx) {
    if (mode == PromptMode::none) return Tensor<float>();
    if (mode == PromptMode::table && table == nullptr)
        throw ContractError("prompt table required for table-mode conditioning");
    Tensor<float> out;
    for (const AttributeLabels& lb : labels) {
        Tensor<float> row = mode == PromptMode::onehot ? one_hot_prompt(lb, d_ctx)
                                                       : table->encode_prompt(lb);
        row = reshape(row, {1, kAttributeCount, d_ctx});
        out = out.defined() ? concat(out, row, 0) : row;
    }
    return out;
}

namespace {

Tensor<float> stack_latents(const std::vector<DiffusionSample>& data,
                            const std::vector<size_t>& order, size_t start, size_t count,
                            bool thermal) {
    const Tensor<float>& first = thermal ? data[order[start]].thermal : data[order[start]].z0;
    std::vector<size_t> shape = {count};
    for (size_t i = 0; i < first.ndim(); ++i) shape.push_back(first.dim(i));
    std::vector<float> buf;
    buf.reserve(count * first.numel());
    for (size_t i = 0; i < count; ++i) {
        const Tensor<float>& t = thermal ? data[order[start + i]].thermal : data[order[start + i]].z0;
        const auto& v = t.vec();
        buf.insert(buf.end(), v.begin(), v.end());
    }
    return Tensor<float>::from_data(shape, buf);
}

}  // namespace

DiffTrainResult train_diffusion(UNet& model, const NoiseSchedule& sched,
                                const std::vector<DiffusionSample>& data, PromptMode prompt_mode,
                                PromptTable* table, const IdentityHooks& id_hooks,
                                const DiffTrainConfig& cfg) {
    if (data.empty()) throw ContractError("diffusion training set is empty");
    if (cfg.lambda_id < 0.0f)
        throw ConfigError("identity loss weight must be >= 0, got " +
                          std::to_string(cfg.lambda_id));
    if (cfg.batch < 1) throw ConfigError("batch size must be >= 1");
    if (sched.T < 1) throw ContractError("empty noise schedule");
    if (prompt_mode == PromptMode::table && table == nullptr)
        throw ConfigError("table-mode conditioning needs a prompt table");

    const std::vector<size_t> lat_shape = {model.cfg.latent_channels, model.cfg.latent_size,
                                           model.cfg.latent_size};
    const bool id_active = cfg.lambda_id > 0.0f && id_hooks.decode && id_hooks.embed &&
                           cfg.id_every > 0 && cfg.id_steps > 0;
    for (size_t i = 0; i < data.size(); ++i) {
        if (data[i].z0.shape() != lat_shape || data[i].thermal.shape() != lat_shape)
            throw DimensionError("sample " + std::to_string(i) + " latents " +
                                 shape_str(data[i].z0.shape()) + " do not match model latent " +
                                 shape_str(lat_shape));
        if (prompt_mode != PromptMode::none && !data[i].labels.labeled())
            throw ContractError("sample " + std::to_string(i) +
                                " lacks attribute labels required for conditioning");
        if (id_active && !data[i].reference.defined())
            throw ContractError("sample " + std::to_string(i) +
                                " lacks a reference image required for the identity term");
    }

    ParamList params = model.parameters();
    if (prompt_mode == PromptMode::table) {
        ParamList tp = table->parameters();
        params.insert(params.end(), tp.begin(), tp.end());
    }
    set_requires_grad(params, true);
    Adam<float> opt(param_tensors(params), cfg.lr);

    DiffTrainResult res;
    if (cfg.epochs == 0) {
        set_requires_grad(params, false);
        return res;
    }

    const size_t n = data.size();
    const size_t bs_max = std::min(cfg.batch, n);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const SampleSteps id_respace =
        id_active ? respace(sched, std::min(cfg.id_steps, sched.T)) : SampleSteps{};
    size_t global_step = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = Rng::stream(cfg.seed, "diff-shuffle", epoch);
        for (size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[size_t(shuffle_rng.below(i))]);
        double eq1_sum = 0.0;
        size_t batches = 0;

        for (size_t start = 0; start < n; start += bs_max) {
            const size_t bs = std::min(bs_max, n - start);
            Rng step_rng = Rng::stream(cfg.seed, "diff-train", epoch, start);
            Tensor<float> z0b = stack_latents(data, order, start, bs, false);
            Tensor<float> thb = stack_latents(data, order, start, bs, true);
            std::vector<AttributeLabels> labels(bs);
            for (size_t i = 0; i < bs; ++i) labels[i] = data[order[start + i]].labels;

            float eq1_val = 0.0f, id_val = 0.0f;
            {
                Tape<float> tape;
                Tensor<float> prompt =
                    batch_prompt(prompt_mode, table, labels, model.cfg.d_ctx);
                BatchEps eps_model = [&](const Tensor<float>& z_t,
                                         const std::vector<size_t>& ts) {
                    return model.forward(z_t, ts, thb, prompt);
                };
                Tensor<float> loss = diffusion_loss(eps_model, sched, z0b, step_rng);
                eq1_val = loss.item();

                const bool id_now = id_active && global_step % cfg.id_every == 0;
                if (id_now) {
                    // abbreviated ancestral chain, kept on the tape so the
                    // identity gradient reaches the model
                    std::vector<size_t> zshape = {bs};
                    for (size_t d : lat_shape) zshape.push_back(d);
                    Tensor<float> z = Tensor<float>::randn(zshape, step_rng);
                    for (size_t k = id_respace.coarse.T; k >= 1; --k) {
                        std::vector<size_t> ts(bs, id_respace.orig_t[k - 1]);
                        Tensor<float> eps_hat = model.forward(z, ts, thb, prompt);
                        z = reverse_mean(id_respace.coarse, z, k, eps_hat);
                        double sig = sigma_at(id_respace.coarse, k);
                        if (sig > 0.0)
                            z = add(z, scale(Tensor<float>::randn(zshape, step_rng), float(sig)));
                    }
                    Tensor<float> gen = id_hooks.embed(id_hooks.decode(z));
                    std::vector<float> ref_buf;
                    std::vector<size_t> ref_shape = {bs};
                    const Tensor<float>& r0 = data[order[start]].reference;
                    for (size_t i = 0; i < r0.ndim(); ++i) ref_shape.push_back(r0.dim(i));
                    for (size_t i = 0; i < bs; ++i) {
                        const auto& v = data[order[start + i]].reference.vec();
                        ref_buf.insert(ref_buf.end(), v.begin(), v.end());
                    }
                    Tensor<float> ref_emb;
                    {
                        NoGradGuard<float> ng;
                        ref_emb = id_hooks.embed(Tensor<float>::from_data(ref_shape, ref_buf));
                    }
                    if (gen.shape() != ref_emb.shape())
                        throw DimensionError("identity embeddings disagree: " +
                                             shape_str(gen.shape()) + " vs " +
                                             shape_str(ref_emb.shape()));
                    // mean over the batch of (1 - cos); embeddings arrive unit-norm
                    Tensor<float> cos_sim = sum_lastdim(mul(gen, ref_emb));
                    Tensor<float> id_loss_t = sub(Tensor<float>::full(cos_sim.shape(), 1.0f),
                                                  cos_sim);
                    Tensor<float> id_scalar = mean(id_loss_t);
                    id_val = id_scalar.item();
                    loss = add(loss, scale(id_scalar, cfg.lambda_id));
                }
                tape.backward(loss);
            }
            opt.step();
            opt.zero_grad();
            res.log.push_back({global_step, eq1_val, id_val});
            eq1_sum += eq1_val;
            ++batches;
            ++global_step;
        }
        res.eq1_epoch_mean.push_back(float(eq1_sum / double(batches)));
    }
    set_requires_grad(params, false);
    return res;
}

void write_step_log(const std::string& path, const std::vector<StepLogRow>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << "step,loss_eq1,loss_id\n";
    for (const StepLogRow& r : log)
        out << r.step << "," << r.loss_eq1 << "," << r.loss_id << "\n";
}

}  // namespace t2v
