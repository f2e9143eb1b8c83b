#include "t2v/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>

#include "t2v/checkpoint.hpp"
#include "t2v/conv.hpp"
#include "t2v/optim.hpp"
#include "t2v/rng.hpp"

namespace t2v {

namespace {

size_t norm_groups(size_t channels) {
    size_t g = std::min<size_t>(8, channels);
    while (channels % g != 0) --g;
    return g;
}

}  // namespace

void EmbedderConfig::validate() const {
    if (image_size < 8 || image_size % 8 != 0)
        throw ConfigError("embedder image size must be a multiple of 8, got " +
                          std::to_string(image_size));
    if (in_channels != 1 && in_channels != 3)
        throw ConfigError("embedder expects 1 or 3 input channels, got " +
                          std::to_string(in_channels));
    if (width == 0 || embed_dim == 0) throw ConfigError("embedder width and dim must be >= 1");
}

IdentityEmbedder::IdentityEmbedder(const EmbedderConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    const size_t w = cfg.width;
    c1 = Conv2dLayer(cfg.in_channels, w, 3, 2, 1, rng);
    c2 = Conv2dLayer(w, 2 * w, 3, 2, 1, rng);
    c3 = Conv2dLayer(2 * w, 2 * w, 3, 2, 1, rng);
    g1 = GroupNormLayer(w, norm_groups(w));
    g2 = GroupNormLayer(2 * w, norm_groups(2 * w));
    g3 = GroupNormLayer(2 * w, norm_groups(2 * w));
    proj = Linear(2 * w, cfg.embed_dim, rng);
}

Tensor<float> IdentityEmbedder::embed_batch(const Tensor<float>& x) const {
    if (x.ndim() != 4 || x.dim(1) != cfg.in_channels || x.dim(2) != cfg.image_size ||
        x.dim(3) != cfg.image_size)
        throw DimensionError("embedder input " + shape_str(x.shape()) + " does not match [B," +
                             std::to_string(cfg.in_channels) + "," +
                             std::to_string(cfg.image_size) + "," +
                             std::to_string(cfg.image_size) + "]");
    Tensor<float> h = silu(g1(c1(x)));
    h = silu(g2(c2(h)));
    h = silu(g3(c3(h)));
    Tensor<float> e = proj(global_max_pool(h));
    Tensor<float> norm = sqrt(add_const(sum_lastdim(square(e)), 1e-12f));
    return div(e, norm);
}

Tensor<float> IdentityEmbedder::embed(const Tensor<float>& img) const {
    if (img.ndim() != 3)
        throw DimensionError("embed expects a [c,S,S] image, got " + shape_str(img.shape()));
    Tensor<float> out =
        embed_batch(reshape(img, {1, img.dim(0), img.dim(1), img.dim(2)}));
    return reshape(out, {out.dim(1)});
}

ParamList IdentityEmbedder::parameters() const {
    ParamList ps;
    c1.collect("c1", ps);
    g1.collect("g1", ps);
    c2.collect("c2", ps);
    g2.collect("g2", ps);
    c3.collect("c3", ps);
    g3.collect("g3", ps);
    proj.collect("proj", ps);
    return ps;
}

void IdentityEmbedder::save(const std::string& path) const {
    ParamList ps = parameters();
    ps.emplace_back("cfg", Tensor<float>::from_data(
                               {4}, {float(cfg.image_size), float(cfg.in_channels),
                                     float(cfg.width), float(cfg.embed_dim)}));
    save_checkpoint_f32(path, ps);
}

IdentityEmbedder IdentityEmbedder::load(const std::string& path) {
    NamedEntries entries = load_checkpoint(path);
    NamedEntries::const_iterator cfg_it = entries.end();
    for (auto it = entries.begin(); it != entries.end(); ++it)
        if (it->first == "cfg") cfg_it = it;
    if (cfg_it == entries.end() || cfg_it->second.f32.size() != 4)
        throw FormatError("checkpoint " + path + " lacks an embedder config entry");
    const auto& cv = cfg_it->second.f32;
    EmbedderConfig cfg;
    cfg.image_size = size_t(cv[0]);
    cfg.in_channels = size_t(cv[1]);
    cfg.width = size_t(cv[2]);
    cfg.embed_dim = size_t(cv[3]);
    Rng rng(0);  // immediately overwritten by the restore
    IdentityEmbedder F(cfg, rng);
    restore_into(entries, F.parameters());
    return F;
}

Tensor<float> id_loss_from_embeddings(const Tensor<float>& a, const Tensor<float>& b) {
    if (a.shape() != b.shape() || a.ndim() != 1)
        throw DimensionError("id loss expects two equal-length vectors, got " +
                             shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Tensor<float> na = div(a, sqrt(add_const(sum_lastdim(square(a)), 1e-12f)));
    Tensor<float> nb = div(b, sqrt(add_const(sum_lastdim(square(b)), 1e-12f)));
    Tensor<float> cos = sum_lastdim(mul(na, nb));  // [1]
    return sub(Tensor<float>::full({1}, 1.0f), cos);
}

Tensor<float> id_loss(const IdentityEmbedder& F, const Tensor<float>& generated,
                      const Tensor<float>& reference) {
    return id_loss_from_embeddings(F.embed(generated), F.embed(reference));
}

namespace {

void check_labeled(const LabeledEmbeddings& s, const char* what) {
    if (!s.emb.defined() || s.emb.ndim() != 2)
        throw DimensionError(std::string(what) + " embeddings must be [N,d]");
    if (s.ids.size() != s.emb.dim(0))
        throw ContractError(std::string(what) + " has " + std::to_string(s.ids.size()) +
                            " ids for " + std::to_string(s.emb.dim(0)) + " embeddings");
}

// rows of cosine-normalized doubles
std::vector<double> unit_rows(const Tensor<float>& emb) {
    const size_t n = emb.dim(0), d = emb.dim(1);
    std::vector<double> out(n * d);
    for (size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (size_t j = 0; j < d; ++j) {
            double v = emb.vec()[i * d + j];
            out[i * d + j] = v;
            ss += v * v;
        }
        double inv = 1.0 / std::sqrt(std::max(ss, 1e-24));
        for (size_t j = 0; j < d; ++j) out[i * d + j] *= inv;
    }
    return out;
}

}  // namespace

double rank1(const LabeledEmbeddings& queries, const LabeledEmbeddings& gallery) {
    check_labeled(queries, "query");
    check_labeled(gallery, "gallery");
    if (queries.ids.empty() || gallery.ids.empty())
        throw ContractError("rank-1 needs non-empty query and gallery sets");
    if (queries.emb.dim(1) != gallery.emb.dim(1))
        throw DimensionError("query and gallery dims disagree");
    for (int qid : queries.ids)
        if (std::find(gallery.ids.begin(), gallery.ids.end(), qid) == gallery.ids.end())
            throw ContractError("query identity " + std::to_string(qid) +
                                " absent from the gallery");
    const size_t nq = queries.ids.size(), ng = gallery.ids.size(), d = queries.emb.dim(1);
    std::vector<double> q = unit_rows(queries.emb), g = unit_rows(gallery.emb);
    size_t hits = 0;
    for (size_t i = 0; i < nq; ++i) {
        size_t best = 0;
        double best_s = -2.0;
        for (size_t j = 0; j < ng; ++j) {
            double s = 0.0;
            for (size_t k = 0; k < d; ++k) s += q[i * d + k] * g[j * d + k];
            if (s > best_s) {  // strict: ties keep the lowest index
                best_s = s;
                best = j;
            }
        }
        if (gallery.ids[best] == queries.ids[i]) ++hits;
    }
    return 100.0 * double(hits) / double(nq);
}

double vr_at_far(const ScoreMatrix& scores, double far) {
    if (!(far > 0.0) || !(far < 1.0))
        throw ContractError("far must lie strictly inside (0,1), got " + std::to_string(far));
    if (scores.genuine.empty() || scores.impostor.empty())
        throw ContractError("score matrix needs both genuine and impostor scores");
    std::vector<double> imp = scores.impostor;
    std::sort(imp.begin(), imp.end());
    const size_t n = imp.size();
    const size_t allowed = size_t(std::floor(far * double(n)));

    // walk distinct impostor values downward; accepted count only grows as the
    // threshold drops, so the smallest admissible threshold is the last one
    // before the count first exceeds the allowance
    bool found = false;
    double tau = 0.0;
    size_t idx = n;  // first index with value >= current candidate
    while (idx > 0) {
        double v = imp[idx - 1];
        size_t lo = idx;
        while (lo > 0 && imp[lo - 1] == v) --lo;
        size_t count = n - lo;
        if (count > allowed) break;
        tau = v;
        found = true;
        idx = lo;
    }

    size_t accepted = 0;
    for (double gsc : scores.genuine)
        if (found ? gsc >= tau : gsc > imp.back()) ++accepted;
    return 100.0 * double(accepted) / double(scores.genuine.size());
}

ScoreMatrix score_matrix(const LabeledEmbeddings& set) {
    check_labeled(set, "score");
    const size_t n = set.ids.size(), d = set.emb.dim(1);
    if (n < 2) throw ContractError("score matrix needs at least two embeddings");
    std::vector<double> u = unit_rows(set.emb);
    ScoreMatrix out;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (size_t k = 0; k < d; ++k) s += u[i * d + k] * u[j * d + k];
            s = std::clamp(s, -1.0, 1.0);
            (set.ids[i] == set.ids[j] ? out.genuine : out.impostor).push_back(s);
        }
    return out;
}

namespace {

std::vector<double> to_gray(const Tensor<float>& img) {
    if (img.ndim() == 2) return std::vector<double>(img.vec().begin(), img.vec().end());
    if (img.ndim() == 3 && (img.dim(0) == 1 || img.dim(0) == 3)) {
        const size_t c = img.dim(0), hw = img.dim(1) * img.dim(2);
        std::vector<double> out(hw, 0.0);
        for (size_t ch = 0; ch < c; ++ch)
            for (size_t i = 0; i < hw; ++i) out[i] += img.vec()[ch * hw + i];
        for (double& v : out) v /= double(c);
        return out;
    }
    throw DimensionError("ssim expects [H,W], [1,H,W] or [3,H,W], got " + shape_str(img.shape()));
}

}  // namespace

double ssim(const Tensor<float>& a, const Tensor<float>& b, double max_val) {
    if (a.shape() != b.shape())
        throw DimensionError("ssim images differ: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::vector<double> ga = to_gray(a), gb = to_gray(b);
    const size_t H = a.dim(a.ndim() - 2), W = a.dim(a.ndim() - 1);
    constexpr size_t win = 11;
    if (H < win || W < win)
        throw DimensionError("ssim needs images of at least 11x11, got " +
                             std::to_string(H) + "x" + std::to_string(W));

    // normalized 11x11 Gaussian window, sigma 1.5
    double w[win * win];
    double wsum = 0.0;
    for (size_t i = 0; i < win; ++i)
        for (size_t j = 0; j < win; ++j) {
            double dy = double(i) - 5.0, dx = double(j) - 5.0;
            w[i * win + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            wsum += w[i * win + j];
        }
    for (double& v : w) v /= wsum;

    const double c1 = (0.01 * max_val) * (0.01 * max_val);
    const double c2 = (0.03 * max_val) * (0.03 * max_val);
    double acc = 0.0;
    size_t count = 0;
    for (size_t y = 0; y + win <= H; ++y)
        for (size_t x = 0; x + win <= W; ++x) {
            double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (size_t i = 0; i < win; ++i)
                for (size_t j = 0; j < win; ++j) {
                    double wa = ga[(y + i) * W + (x + j)];
                    double wb = gb[(y + i) * W + (x + j)];
                    double wt = w[i * win + j];
                    ma += wt * wa;
                    mb += wt * wb;
                    saa += wt * wa * wa;
                    sbb += wt * wb * wb;
                    sab += wt * wa * wb;
                }
            double va = saa - ma * ma, vb = sbb - mb * mb, cab = sab - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) /
                   ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return acc / double(count);
}

double psnr(const Tensor<float>& a, const Tensor<float>& b, double max_val) {
    if (a.shape() != b.shape())
        throw DimensionError("psnr images differ: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    double mse = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        double d = double(a.vec()[i]) - double(b.vec()[i]);
        mse += d * d;
    }
    mse /= double(a.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

namespace {

// cyclic Jacobi eigendecomposition of a symmetric matrix, A = V diag(e) V^T
void jacobi_eigen(std::vector<double> A, size_t d, std::vector<double>& V,
                  std::vector<double>& e) {
    V.assign(d * d, 0.0);
    for (size_t i = 0; i < d; ++i) V[i * d + i] = 1.0;
    for (size_t sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < d; ++p)
            for (size_t q = p + 1; q < d; ++q) off += A[p * d + q] * A[p * d + q];
        if (off < 1e-24) break;
        for (size_t p = 0; p < d; ++p)
            for (size_t q = p + 1; q < d; ++q) {
                double apq = A[p * d + q];
                if (std::abs(apq) < 1e-300) continue;
                double app = A[p * d + p], aqq = A[q * d + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (size_t k = 0; k < d; ++k) {
                    double akp = A[k * d + p], akq = A[k * d + q];
                    A[k * d + p] = c * akp - s * akq;
                    A[k * d + q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < d; ++k) {
                    double apk = A[p * d + k], aqk = A[q * d + k];
                    A[p * d + k] = c * apk - s * aqk;
                    A[q * d + k] = s * apk + c * aqk;
                }
                for (size_t k = 0; k < d; ++k) {
                    double vkp = V[k * d + p], vkq = V[k * d + q];
                    V[k * d + p] = c * vkp - s * vkq;
                    V[k * d + q] = s * vkp + c * vkq;
                }
            }
    }
    e.resize(d);
    for (size_t i = 0; i < d; ++i) e[i] = A[i * d + i];
}

// principal square root of a PSD matrix (negative eigenvalues clipped)
std::vector<double> sqrt_psd(const std::vector<double>& A, size_t d) {
    std::vector<double> V, e;
    jacobi_eigen(A, d, V, e);
    std::vector<double> out(d * d, 0.0);
    for (size_t k = 0; k < d; ++k) {
        double s = std::sqrt(std::max(e[k], 0.0));
        if (s == 0.0) continue;
        for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j) out[i * d + j] += s * V[i * d + k] * V[j * d + k];
    }
    return out;
}

std::vector<double> matmul_sq(const std::vector<double>& A, const std::vector<double>& B,
                              size_t d) {
    std::vector<double> out(d * d, 0.0);
    for (size_t i = 0; i < d; ++i)
        for (size_t k = 0; k < d; ++k) {
            double a = A[i * d + k];
            if (a == 0.0) continue;
            for (size_t j = 0; j < d; ++j) out[i * d + j] += a * B[k * d + j];
        }
    return out;
}

}  // namespace

double frechet_from_moments(const std::vector<double>& mu_a, const std::vector<double>& cov_a,
                            const std::vector<double>& mu_b, const std::vector<double>& cov_b) {
    const size_t d = mu_a.size();
    if (d == 0 || mu_b.size() != d || cov_a.size() != d * d || cov_b.size() != d * d)
        throw DimensionError("moment sizes disagree: mu " + std::to_string(mu_a.size()) + "/" +
                             std::to_string(mu_b.size()) + ", cov " +
                             std::to_string(cov_a.size()) + "/" + std::to_string(cov_b.size()));
    double mean_gap = 0.0, tr_a = 0.0, tr_b = 0.0;
    for (size_t i = 0; i < d; ++i) {
        double dm = mu_a[i] - mu_b[i];
        mean_gap += dm * dm;
        tr_a += cov_a[i * d + i];
        tr_b += cov_b[i * d + i];
    }
    // Tr((Sa Sb)^{1/2}) via the symmetric congruence sqrt(Sa)^T Sb sqrt(Sa)
    std::vector<double> ra = sqrt_psd(cov_a, d);
    std::vector<double> m = matmul_sq(matmul_sq(ra, cov_b, d), ra, d);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = i + 1; j < d; ++j) {
            double s = 0.5 * (m[i * d + j] + m[j * d + i]);
            m[i * d + j] = s;
            m[j * d + i] = s;
        }
    std::vector<double> r = sqrt_psd(m, d);
    double tr_sqrt = 0.0;
    for (size_t i = 0; i < d; ++i) tr_sqrt += r[i * d + i];
    return std::max(0.0, mean_gap + tr_a + tr_b - 2.0 * tr_sqrt);
}

double frechet_distance(const Tensor<float>& feats_a, const Tensor<float>& feats_b) {
    if (!feats_a.defined() || !feats_b.defined() || feats_a.ndim() != 2 || feats_b.ndim() != 2)
        throw DimensionError("feature sets must be [N,d]");
    if (feats_a.dim(1) != feats_b.dim(1))
        throw DimensionError("feature dims disagree: " + std::to_string(feats_a.dim(1)) +
                             " vs " + std::to_string(feats_b.dim(1)));
    const size_t na = feats_a.dim(0), nb = feats_b.dim(0), d = feats_a.dim(1);
    if (na < 2 || nb < 2)
        throw ContractError("frechet distance needs at least two samples per side");

    auto moments = [d](const Tensor<float>& f, std::vector<double>& mu,
                       std::vector<double>& cov) {
        const size_t n = f.dim(0);
        mu.assign(d, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) mu[j] += f.vec()[i * d + j];
        for (double& v : mu) v /= double(n);
        cov.assign(d * d, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) {
                double cj = double(f.vec()[i * d + j]) - mu[j];
                for (size_t k = j; k < d; ++k)
                    cov[j * d + k] += cj * (double(f.vec()[i * d + k]) - mu[k]);
            }
        for (size_t j = 0; j < d; ++j)
            for (size_t k = j; k < d; ++k) {
                cov[j * d + k] /= double(n - 1);
                cov[k * d + j] = cov[j * d + k];
            }
    };
    std::vector<double> mu_a, cov_a, mu_b, cov_b;
    moments(feats_a, mu_a, cov_a);
    moments(feats_b, mu_b, cov_b);
    if (na <= d || nb <= d) {
        for (size_t i = 0; i < d; ++i) {
            cov_a[i * d + i] += 1e-6;
            cov_b[i * d + i] += 1e-6;
        }
    }
    return frechet_from_moments(mu_a, cov_a, mu_b, cov_b);
}

EmbedderTrainResult train_identity_embedder(IdentityEmbedder& F,
                                            const std::vector<IdentityImage>& data, size_t epochs,
                                            float lr, uint64_t seed) {
    std::map<int, std::vector<size_t>> by_id;
    for (size_t i = 0; i < data.size(); ++i) {
        if (data[i].identity < 0)
            throw ContractError("image " + std::to_string(i) + " lacks an identity label");
        by_id[data[i].identity].push_back(i);
    }
    EmbedderTrainResult res;
    std::vector<int> usable;
    for (const auto& [id, idx] : by_id) {
        if (idx.size() < 2) {
            std::cerr << "warning: identity " << id << " has a single image; skipped\n";
            res.skipped_identities.push_back(id);
        } else {
            usable.push_back(id);
        }
    }
    if (usable.size() < 2)
        throw ContractError("need at least two identities with two or more images, have " +
                            std::to_string(usable.size()));
    if (epochs == 0) return res;

    ParamList params = F.parameters();
    set_requires_grad(params, true);
    Adam<float> opt(param_tensors(params), lr);

    const size_t P = std::min<size_t>(16, data.size());
    const size_t steps = std::max<size_t>(1, data.size() / P);
    const size_t c = F.cfg.in_channels, S = F.cfg.image_size;
    const size_t numel = c * S * S;

    auto stack = [&](const std::vector<size_t>& idx) {
        std::vector<float> buf;
        buf.reserve(idx.size() * numel);
        for (size_t i : idx) {
            const auto& v = data[i].image.vec();
            if (v.size() != numel)
                throw DimensionError("image " + std::to_string(i) + " shape " +
                                     shape_str(data[i].image.shape()) +
                                     " does not match embedder config");
            buf.insert(buf.end(), v.begin(), v.end());
        }
        return Tensor<float>::from_data({idx.size(), c, S, S}, buf);
    };

    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = Rng::stream(seed, "embedder", epoch);
        double epoch_loss = 0.0;
        for (size_t step = 0; step < steps; ++step) {
            std::vector<size_t> ai(P), pi(P), ni(P);
            for (size_t k = 0; k < P; ++k) {
                int id = usable[size_t(rng.below(usable.size()))];
                const auto& pool = by_id[id];
                size_t a = size_t(rng.below(pool.size()));
                size_t p = size_t(rng.below(pool.size() - 1));
                if (p >= a) ++p;
                ai[k] = pool[a];
                pi[k] = pool[p];
                int nid = usable[size_t(rng.below(usable.size() - 1))];
                if (nid >= id) {
                    size_t pos = 0;
                    while (usable[pos] != nid) ++pos;
                    nid = usable[(pos + 1) % usable.size()];
                }
                const auto& npool = by_id[nid];
                ni[k] = npool[size_t(rng.below(npool.size()))];
            }
            float step_loss = 0.0f;
            {
                Tape<float> tape;
                Tensor<float> ea = F.embed_batch(stack(ai));
                Tensor<float> ep = F.embed_batch(stack(pi));
                Tensor<float> en = F.embed_batch(stack(ni));
                Tensor<float> cos_ap = sum_lastdim(mul(ea, ep));
                Tensor<float> cos_an = sum_lastdim(mul(ea, en));
                Tensor<float> pull = mean(sub(Tensor<float>::full(cos_ap.shape(), 1.0f), cos_ap));
                Tensor<float> push = mean(relu(add_const(cos_an, -0.3f)));
                Tensor<float> loss = add(pull, push);
                step_loss = loss.item();
                tape.backward(loss);
            }
            opt.step();
            opt.zero_grad();
            epoch_loss += step_loss;
        }
        res.loss_curve.push_back(float(epoch_loss / double(steps)));
    }
    set_requires_grad(params, false);
    return res;
}

LabeledEmbeddings embed_labeled(const IdentityEmbedder& F, const std::vector<IdentityImage>& data) {
    if (data.empty()) throw ContractError("no images to embed");
    NoGradGuard<float> guard;
    const size_t c = F.cfg.in_channels, S = F.cfg.image_size, numel = c * S * S;
    const size_t d = F.cfg.embed_dim;
    std::vector<float> rows(data.size() * d);
    LabeledEmbeddings out;
    out.ids.resize(data.size());
    const size_t chunk = 32;
    for (size_t start = 0; start < data.size(); start += chunk) {
        const size_t n = std::min(chunk, data.size() - start);
        std::vector<float> buf;
        buf.reserve(n * numel);
        for (size_t i = 0; i < n; ++i) {
            const auto& v = data[start + i].image.vec();
            if (v.size() != numel)
                throw DimensionError("image " + std::to_string(start + i) + " shape " +
                                     shape_str(data[start + i].image.shape()) +
                                     " does not match embedder config");
            buf.insert(buf.end(), v.begin(), v.end());
            out.ids[start + i] = data[start + i].identity;
        }
        Tensor<float> e = F.embed_batch(Tensor<float>::from_data({n, c, S, S}, buf));
        std::copy(e.vec().begin(), e.vec().end(), rows.begin() + start * d);
    }
    out.emb = Tensor<float>::from_data({data.size(), d}, rows);
    return out;
}

void write_metric_report(const std::string& path,
                         const std::vector<std::pair<std::string, double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << "metric,value\n";
    out << std::setprecision(10);
    for (const auto& [name, value] : rows) out << name << "," << value << "\n";
}

}  // namespace t2v
