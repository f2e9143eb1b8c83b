#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "t2v/error.hpp"
#include "t2v/labels.hpp"
#include "t2v/prompt.hpp"
#include "t2v/rng.hpp"
#include "t2v/tensor_ops.hpp"
#include "t2v/unet.hpp"

namespace t2v {

// Linear-beta DDPM schedule, kept in double so closed-form identities hold to
// tight tolerance regardless of the model precision in use.
struct NoiseSchedule {
    size_t T = 0;
    std::vector<double> beta;       // beta[t-1] is beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // running product of alpha

    double beta_at(size_t t) const;
    double alpha_at(size_t t) const;
    double alpha_bar_at(size_t t) const;
    void check_t(size_t t) const;  // ContractError unless 1 <= t <= T
};

NoiseSchedule make_schedule(size_t T, double beta_start, double beta_end);

// Reverse-process noise scale: sigma_t = sqrt(beta_t), except sigma_1 = 0 so
// the final step is deterministic.
double sigma_at(const NoiseSchedule& s, size_t t);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
template <typename T>
Tensor<T> q_sample(const NoiseSchedule& s, const Tensor<T>& z0, size_t t, const Tensor<T>& eps) {
    s.check_t(t);
    if (eps.shape() != z0.shape())
        throw DimensionError("q_sample: eps shape does not match z0");
    const double ab = s.alpha_bar_at(t);
    return add(scale(z0, static_cast<T>(std::sqrt(ab))),
               scale(eps, static_cast<T>(std::sqrt(1.0 - ab))));
}

// mu_t = (1/sqrt(alpha_t)) (z_t - ((1 - alpha_t)/sqrt(1 - abar_t)) eps_hat)
template <typename T>
Tensor<T> reverse_mean(const NoiseSchedule& s, const Tensor<T>& z_t, size_t t,
                       const Tensor<T>& eps_hat) {
    s.check_t(t);
    if (eps_hat.shape() != z_t.shape())
        throw DimensionError("reverse_mean: eps_hat shape does not match z_t");
    const double ab = s.alpha_bar_at(t);
    if (ab >= 1.0)
        throw DomainError("reverse_mean: alpha_bar_t = 1 makes the noise coefficient singular");
    const double a = s.alpha_at(t);
    const double coef = (1.0 - a) / std::sqrt(1.0 - ab);
    return scale(sub(z_t, scale(eps_hat, static_cast<T>(coef))),
                 static_cast<T>(1.0 / std::sqrt(a)));
}

// Abbreviated reverse trajectory: a coarse schedule over a subsequence of the
// original timesteps whose alpha_bar matches the full schedule at those
// points, plus the original timestep fed to the model at each coarse step.
struct SampleSteps {
    NoiseSchedule coarse;
    std::vector<size_t> orig_t;  // orig_t[k-1] is the model timestep for coarse step k
};

SampleSteps respace(const NoiseSchedule& full, size_t steps);

// Per-timestep eps predictor used by the samplers; t is an original-schedule
// timestep.
template <typename T>
using EpsFn = std::function<Tensor<T>(const Tensor<T>&, size_t)>;

// Ancestral sampling from a supplied z_T (gradients are not recorded).
template <typename T>
Tensor<T> sample_from(const EpsFn<T>& model, const SampleSteps& steps, const Tensor<T>& z_T,
                      Rng& rng) {
    if (steps.coarse.T == 0) throw ContractError("sample_from: empty schedule");
    NoGradGuard<T> guard;
    Tensor<T> z = z_T;
    for (size_t k = steps.coarse.T; k >= 1; --k) {
        Tensor<T> eps_hat = model(z, steps.orig_t[k - 1]);
        z = reverse_mean(steps.coarse, z, k, eps_hat);
        const double sig = sigma_at(steps.coarse, k);
        if (sig > 0.0) {
            Tensor<T> noise = Tensor<T>::randn(z.shape(), rng);
            z = add(z, scale(noise, static_cast<T>(sig)));
        }
    }
    return z;
}

template <typename T>
Tensor<T> sample(const EpsFn<T>& model, const NoiseSchedule& sched,
                 const std::vector<size_t>& shape, Rng& rng) {
    SampleSteps steps = respace(sched, sched.T);
    Tensor<T> z_T = Tensor<T>::randn(shape, rng);
    return sample_from(model, steps, z_T, rng);
}

// Batch eps predictor taking one timestep per batch element.
template <typename T>
using BatchEpsT = std::function<Tensor<T>(const Tensor<T>&, const std::vector<size_t>&)>;
using BatchEps = BatchEpsT<float>;

// Denoising objective on one batch: per-element uniform t in [1,T], fresh
// noise, mean squared eps-prediction error over every element. Differentiable
// through the model (and anything the model closure captures).
template <typename T>
Tensor<T> diffusion_loss(const BatchEpsT<T>& model, const NoiseSchedule& sched,
                         const Tensor<T>& z0, Rng& rng) {
    if (sched.T < 1) throw ContractError("diffusion_loss: empty schedule");
    if (z0.ndim() < 2) throw DimensionError("diffusion_loss expects a batched latent");
    const size_t B = z0.dim(0);
    std::vector<size_t> ts(B);
    std::vector<T> ca(B), cb(B);
    for (size_t b = 0; b < B; ++b) {
        ts[b] = 1 + size_t(rng.below(sched.T));
        double ab = sched.alpha_bar_at(ts[b]);
        ca[b] = T(std::sqrt(ab));
        cb[b] = T(std::sqrt(1.0 - ab));
    }
    std::vector<size_t> cshape(z0.ndim(), 1);
    cshape[0] = B;
    Tensor<T> eps = Tensor<T>::randn(z0.shape(), rng);
    Tensor<T> z_t = add(mul(z0, Tensor<T>::from_data(cshape, ca)),
                        mul(eps, Tensor<T>::from_data(cshape, cb)));
    Tensor<T> eps_hat = model(z_t, ts);
    if (eps_hat.shape() != z0.shape())
        throw DimensionError("eps prediction " + shape_str(eps_hat.shape()) +
                             " does not match latent " + shape_str(z0.shape()));
    return mean(square(sub(eps_hat, eps)));
}

enum class PromptMode { none, onehot, table };

// Per-sample training record: pre-quantization visible latent as the diffusion
// target, thermal latent as conditioning, attribute labels for the prompt, and
// the visible reference image for the identity term.
struct DiffusionSample {
    Tensor<float> z0;          // [c,s,s]
    Tensor<float> thermal;     // [c,s,s]
    AttributeLabels labels;
    Tensor<float> reference;   // [3,S,S], optional (identity term only)
};

struct DiffTrainConfig {
    size_t epochs = 1;
    size_t batch = 16;
    float lr = 1e-3f;
    float lambda_id = 0.1f;
    size_t id_every = 10;    // apply the identity term every this many steps
    size_t id_steps = 5;     // abbreviated sampling steps for the identity term
    uint64_t seed = 1;
};

struct StepLogRow {
    size_t step;
    float loss_eq1;
    float loss_id;  // 0 on steps without the identity term
};

struct DiffTrainResult {
    std::vector<float> eq1_epoch_mean;
    std::vector<StepLogRow> log;
};

// decode: latent batch [B,c,s,s] -> images [B,3,S,S]; embed: images -> [B,d]
// L2-normalized identity embeddings. Both optional; the identity term is
// skipped when lambda_id == 0 or either hook is missing.
struct IdentityHooks {
    std::function<Tensor<float>(const Tensor<float>&)> decode;
    std::function<Tensor<float>(const Tensor<float>&)> embed;
};

DiffTrainResult train_diffusion(UNet& model, const NoiseSchedule& sched,
                                const std::vector<DiffusionSample>& data, PromptMode prompt_mode,
                                PromptTable* table, const IdentityHooks& id_hooks,
                                const DiffTrainConfig& cfg);

void write_step_log(const std::string& path, const std::vector<StepLogRow>& log);

// Builds the [B,3,d_ctx] prompt tensor for a batch of labels, or an undefined
// tensor in PromptMode::none.
Tensor<float> batch_prompt(PromptMode mode, const PromptTable* table,
                           const std::vector<AttributeLabels>& labels, size_t d_ctx);

}  // namespace t2v
