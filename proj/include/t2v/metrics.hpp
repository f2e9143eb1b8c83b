#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t2v/nn.hpp"

namespace t2v {

struct EmbedderConfig {
    size_t image_size = 32;
    size_t in_channels = 3;
    size_t width = 16;
    size_t embed_dim = 32;  // d_id

    void validate() const;
};

// Small conv net mapping an image to a unit-norm identity vector. Stands in
// for a pretrained face recognizer at this scale; values it produces are only
// comparable to themselves.
struct IdentityEmbedder {
    EmbedderConfig cfg;
    Conv2dLayer c1, c2, c3;
    GroupNormLayer g1, g2, g3;
    Linear proj;

    IdentityEmbedder() = default;
    IdentityEmbedder(const EmbedderConfig& cfg, Rng& rng);

    Tensor<float> embed_batch(const Tensor<float>& x) const;  // [B,c,S,S] -> [B,d], unit rows
    Tensor<float> embed(const Tensor<float>& img) const;      // [c,S,S] -> [d]

    ParamList parameters() const;
    void save(const std::string& path) const;
    static IdentityEmbedder load(const std::string& path);
};

// 1 - cos on unit-normalized vectors; value in [0,2], differentiable.
Tensor<float> id_loss_from_embeddings(const Tensor<float>& a, const Tensor<float>& b);
Tensor<float> id_loss(const IdentityEmbedder& F, const Tensor<float>& generated,
                      const Tensor<float>& reference);

struct LabeledEmbeddings {
    Tensor<float> emb;     // [N,d]
    std::vector<int> ids;  // N entries
};

// Fraction (in percent) of queries whose cosine-nearest gallery row shares
// their id. Ties break toward the lowest gallery index. Every query id must
// occur in the gallery.
double rank1(const LabeledEmbeddings& queries, const LabeledEmbeddings& gallery);

struct ScoreMatrix {
    std::vector<double> genuine;   // mated-pair similarities
    std::vector<double> impostor;  // non-mated-pair similarities
};

// Verification rate (percent of genuine scores accepted) at the strictest
// threshold whose impostor acceptance fraction stays <= far. The threshold is
// the floor(far*N)-th largest impostor score; when that count is zero it sits
// just above the largest impostor.
double vr_at_far(const ScoreMatrix& scores, double far);

// All-pairs score matrix over one embedding set (i<j, both orderings counted
// once): same id -> genuine, else impostor.
ScoreMatrix score_matrix(const LabeledEmbeddings& set);

// Mean local SSIM over valid 11x11 Gaussian-weighted windows (sigma 1.5,
// K1=0.01, K2=0.03). RGB input is converted to gray by channel mean. Images
// must measure at least 11x11.
double ssim(const Tensor<float>& a, const Tensor<float>& b, double max_val = 1.0);

// 10*log10(max_val^2 / MSE); +infinity when the images agree exactly.
double psnr(const Tensor<float>& a, const Tensor<float>& b, double max_val = 1.0);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}); covariance square roots
// via Jacobi eigendecomposition of the symmetrized product. cov matrices are
// row-major d*d.
double frechet_from_moments(const std::vector<double>& mu_a, const std::vector<double>& cov_a,
                            const std::vector<double>& mu_b, const std::vector<double>& cov_b);

// Sample moments (unbiased covariance) of two feature sets [Na,d], [Nb,d];
// a ridge of 1e-6 joins both covariances when either side has <= d samples.
double frechet_distance(const Tensor<float>& feats_a, const Tensor<float>& feats_b);

struct IdentityImage {
    Tensor<float> image;  // [c,S,S]
    int identity = -1;
};

struct EmbedderTrainResult {
    std::vector<float> loss_curve;       // per epoch
    std::vector<int> skipped_identities; // single-image ids left out
};

// Contrastive training: mated cosine pulled toward 1, non-mated pushed below
// margin 0.3. Identities with a single image are skipped with a warning.
EmbedderTrainResult train_identity_embedder(IdentityEmbedder& F,
                                            const std::vector<IdentityImage>& data, size_t epochs,
                                            float lr, uint64_t seed);

// embeddings+ids for a labeled image list, in input order
LabeledEmbeddings embed_labeled(const IdentityEmbedder& F, const std::vector<IdentityImage>& data);

void write_metric_report(const std::string& path,
                         const std::vector<std::pair<std::string, double>>& rows);

}  // namespace t2v
