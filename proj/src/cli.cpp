#include "t2v/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "t2v/checkpoint.hpp"
#include "t2v/classifier.hpp"
#include "t2v/config.hpp"
#include "t2v/conv.hpp"
#include "t2v/data_synth.hpp"
#include "t2v/diffusion.hpp"
#include "t2v/gradcheck.hpp"
#include "t2v/image_tensor.hpp"
#include "t2v/metrics.hpp"
#include "t2v/pipeline.hpp"
#include "t2v/ssm.hpp"
#include "t2v/unet.hpp"
#include "t2v/vqvae.hpp"

namespace fs = std::filesystem;

namespace t2v {
namespace {

const char* kUsage = R"(usage: t2v <command> [--config file] [--key value ...]

commands:
  gen-data                         write the synthetic paired dataset
  train-vqvae --modality M         train a codec, M in {visible, thermal}
  train-classifier --stage S       S in {teacher, student}
  train-diffusion --variant V      V in {baseline, A, B, C, D}
  sample --variant V               translate thermal images to visible
  evaluate --variant V             score translations, write the report csv
  bench-attn                       time attention blocks across sequence lengths
  gradcheck                        finite-difference audit of the autodiff ops

Flags are configuration keys; file values come from t2v.conf (or --config)
and are overridden by the flags. `t2v <command> --help` lists the keys.
)";

const std::set<std::string>& known_keys_impl() {
    static const std::set<std::string> keys = {
        "seed",
        "data.dir", "data.identities", "data.per_identity", "data.image_size",
        "ckpt.dir",
        "vqvae.epochs", "vqvae.batch", "vqvae.lr", "vqvae.downsample",
        "vqvae.latent_channels", "vqvae.codebook", "vqvae.base_width", "vqvae.commitment",
        "classifier.width", "classifier.feat_dim", "classifier.epochs",
        "classifier.distill_epochs", "classifier.lr",
        "diffusion.timesteps", "diffusion.beta_start", "diffusion.beta_end",
        "diffusion.epochs", "diffusion.batch", "diffusion.lr", "diffusion.lambda_id",
        "diffusion.id_every", "diffusion.id_steps", "diffusion.base", "diffusion.d_ctx",
        "diffusion.heads", "diffusion.d_state", "diffusion.temb",
        "embedder.epochs", "embedder.lr", "embedder.width", "embedder.dim",
        "bench.repeats", "sample.count", "eval.subset",
        "modality", "stage", "variant", "out", "in",
    };
    return keys;
}

struct Ctx {
    Config cfg;
    std::string data_dir;
    std::string ckpt_dir;
    uint64_t seed = 1;

    std::string ckpt(const std::string& name) const {
        return (fs::path(ckpt_dir) / name).string();
    }
};

int missing_dep(const std::string& what, const std::string& path, const std::string& stage) {
    std::cerr << "error: missing " << what << ": " << path << "; run `t2v " << stage
              << "` first\n";
    return 2;
}

bool have(const std::string& path) { return fs::exists(path); }

// loads the working dataset or reports the gen-data dependency
int need_dataset(const Ctx& c, PairedDataset& out) {
    if (!have((fs::path(c.data_dir) / "manifest.csv").string()) &&
        !have(c.data_dir))
        return missing_dep("dataset directory", c.data_dir, "gen-data");
    out = load_paired_directory(c.data_dir);
    if (out.train.empty() && out.test.empty())
        return missing_dep("dataset", c.data_dir, "gen-data");
    return 0;
}

struct VariantSpec {
    std::string name;
    AttnKind attn = AttnKind::mhsa;
    PromptMode prompt = PromptMode::none;
    bool needs_classifier = false;
};

VariantSpec parse_variant(const std::string& v) {
    if (v == "baseline") return {v, AttnKind::mhsa, PromptMode::none, false};
    if (v == "A") return {v, AttnKind::bimamba, PromptMode::none, false};
    if (v == "B") return {v, AttnKind::mhsa, PromptMode::onehot, true};
    if (v == "C") return {v, AttnKind::mhsa, PromptMode::table, true};
    if (v == "D") return {v, AttnKind::bimamba, PromptMode::table, true};
    throw ConfigError("unknown variant '" + v + "' (expected baseline, A, B, C or D)");
}

// ---------------------------------------------------------------------------
// diffusion checkpoint: unet params under "unet.", optional "prompt.table",
// plus a self-describing config entry (unet geometry + schedule + prompt mode)

void save_diffusion_ckpt(const std::string& path, const UNet& net, const PromptTable* table,
                         PromptMode mode, size_t T, float beta_start, float beta_end) {
    ParamList ps;
    for (const auto& [name, t] : net.parameters()) ps.emplace_back("unet." + name, t);
    if (mode == PromptMode::table) {
        if (!table) throw ContractError("table prompt mode with no table to save");
        ps.emplace_back("prompt.table", table->table);
    }
    const DenoiserConfig& c = net.cfg;
    ps.emplace_back(
        "cfg", Tensor<float>::from_data(
                   {14}, {float(c.latent_channels), float(c.latent_size), float(c.base),
                          float(c.mults[0]), float(c.mults[1]),
                          c.attn == AttnKind::bimamba ? 1.0f : 0.0f, float(c.d_ctx),
                          float(c.temb_dim), float(c.heads), float(c.d_state), float(T),
                          beta_start, beta_end, float(int(mode))}));
    save_checkpoint_f32(path, ps);
}

struct DiffusionBundle {
    UNet net;
    PromptTable table;
    PromptMode mode = PromptMode::none;
    NoiseSchedule sched;
};

DiffusionBundle load_diffusion_ckpt(const std::string& path) {
    NamedEntries entries = load_checkpoint(path);
    const std::vector<float>* cv = nullptr;
    bool has_table = false;
    for (const auto& [name, e] : entries) {
        if (name == "cfg") cv = &e.f32;
        if (name == "prompt.table") has_table = true;
    }
    if (!cv || cv->size() != 14)
        throw FormatError("checkpoint " + path + " lacks a diffusion config entry");
    DenoiserConfig dc;
    dc.latent_channels = size_t((*cv)[0]);
    dc.latent_size = size_t((*cv)[1]);
    dc.base = size_t((*cv)[2]);
    dc.mults = {size_t((*cv)[3]), size_t((*cv)[4])};
    dc.attn = (*cv)[5] != 0.0f ? AttnKind::bimamba : AttnKind::mhsa;
    dc.d_ctx = size_t((*cv)[6]);
    dc.temb_dim = size_t((*cv)[7]);
    dc.heads = size_t((*cv)[8]);
    dc.d_state = size_t((*cv)[9]);

    DiffusionBundle b;
    b.mode = PromptMode(int((*cv)[13]));
    if (b.mode == PromptMode::table && !has_table)
        throw FormatError("checkpoint " + path + " declares a prompt table but stores none");
    b.sched = make_schedule(size_t((*cv)[10]), double((*cv)[11]), double((*cv)[12]));

    Rng rng(0);  // overwritten by the restore
    b.net = UNet(dc, rng);
    ParamList ps;
    for (const auto& [name, t] : b.net.parameters()) ps.emplace_back("unet." + name, t);
    if (has_table) {
        b.table = PromptTable(dc.d_ctx, rng);
        ps.emplace_back("prompt.table", b.table.table);
    }
    restore_into(entries, ps);
    return b;
}

// ---------------------------------------------------------------------------
// shared loaders

int need_codecs(const Ctx& c, VQVAE& vis, VQVAE& th) {
    std::string pv = c.ckpt("vqvae_visible.ckpt"), pt = c.ckpt("vqvae_thermal.ckpt");
    if (!have(pv)) return missing_dep("visible codec checkpoint", pv,
                                      "train-vqvae --modality visible");
    if (!have(pt)) return missing_dep("thermal codec checkpoint", pt,
                                      "train-vqvae --modality thermal");
    vis = VQVAE::load(pv);
    th = VQVAE::load(pt);
    return 0;
}

// trains (and saves) the identity embedder on the train split when absent
IdentityEmbedder ensure_embedder(const Ctx& c, const PairedDataset& ds) {
    std::string path = c.ckpt("identity.ckpt");
    if (have(path)) return IdentityEmbedder::load(path);
    if (ds.train.empty()) throw ContractError("no train images to fit the identity embedder");
    EmbedderConfig ec;
    ec.image_size = ds.train[0].visible.dim(1);
    ec.in_channels = 3;
    ec.width = size_t(c.cfg.get_int("embedder.width", 16));
    ec.embed_dim = size_t(c.cfg.get_int("embedder.dim", 32));
    Rng rng = Rng::stream(c.seed, "embed-init");
    IdentityEmbedder F(ec, rng);
    std::vector<IdentityImage> imgs;
    imgs.reserve(ds.train.size());
    for (const auto& s : ds.train) imgs.push_back({s.visible, int(s.identity)});
    std::cout << "fitting identity embedder (" << imgs.size() << " images)...\n";
    train_identity_embedder(F, imgs, size_t(c.cfg.get_int("embedder.epochs", 6)),
                            float(c.cfg.get_float("embedder.lr", 3e-3)), c.seed);
    F.save(path);
    return F;
}

// [B,...] batch -> i-th element tensor
Tensor<float> nth(const Tensor<float>& batch, size_t i) {
    std::vector<size_t> shape(batch.shape().begin() + 1, batch.shape().end());
    size_t numel = 1;
    for (size_t d : shape) numel *= d;
    std::vector<float> v(batch.vec().begin() + i * numel, batch.vec().begin() + (i + 1) * numel);
    return Tensor<float>::from_data(shape, v);
}

Tensor<float> stack_images(const std::vector<const Tensor<float>*>& imgs) {
    std::vector<size_t> shape = {imgs.size()};
    shape.insert(shape.end(), imgs[0]->shape().begin(), imgs[0]->shape().end());
    std::vector<float> buf;
    buf.reserve(imgs.size() * imgs[0]->numel());
    for (const Tensor<float>* im : imgs) buf.insert(buf.end(), im->vec().begin(), im->vec().end());
    return Tensor<float>::from_data(shape, buf);
}

// ---------------------------------------------------------------------------
// commands

int cmd_gen_data(const Ctx& c) {
    SyntheticSpec spec;
    spec.identity_count = size_t(c.cfg.get_int("data.identities", 100));
    spec.images_per_identity = size_t(c.cfg.get_int("data.per_identity", 10));
    spec.image_size = size_t(c.cfg.get_int("data.image_size", 32));
    spec.seed = c.seed;
    std::string out = c.cfg.get_str("out", c.data_dir);
    write_dataset(spec, out);
    size_t train_ids = train_identity_count(spec);
    std::cout << "wrote " << train_ids * spec.images_per_identity << " train + "
              << (spec.identity_count - train_ids) * spec.images_per_identity << " test pairs to "
              << out << "\n";
    return 0;
}

int cmd_train_vqvae(const Ctx& c) {
    std::string modality = c.cfg.get_str("modality", "");
    if (modality != "visible" && modality != "thermal")
        throw ConfigError("train-vqvae needs --modality visible|thermal");
    PairedDataset ds;
    if (int rc = need_dataset(c, ds)) return rc;
    if (ds.train.empty()) throw ContractError("dataset has no train split");

    CodecConfig cc;
    cc.image_size = ds.train[0].visible.dim(1);
    cc.image_channels = modality == "visible" ? 3 : 1;
    cc.downsample = size_t(c.cfg.get_int("vqvae.downsample", 4));
    cc.latent_channels = size_t(c.cfg.get_int("vqvae.latent_channels", 8));
    cc.codebook_size = size_t(c.cfg.get_int("vqvae.codebook", 256));
    cc.base_width = size_t(c.cfg.get_int("vqvae.base_width", 32));
    cc.commitment_weight = float(c.cfg.get_float("vqvae.commitment", 0.25));

    std::vector<Tensor<float>> images;
    images.reserve(ds.train.size());
    for (const auto& s : ds.train)
        images.push_back(modality == "visible" ? s.visible : s.thermal);

    Rng rng = Rng::stream(c.seed, "vqvae-init", modality == "visible" ? 0 : 1);
    VQVAE codec(cc, rng);
    std::string path = c.ckpt("vqvae_" + modality + ".ckpt");
    fs::create_directories(c.ckpt_dir);
    VQTrainResult res =
        train_vqvae(codec, images, size_t(c.cfg.get_int("vqvae.epochs", 30)),
                    float(c.cfg.get_float("vqvae.lr", 1e-3)), c.seed, path);
    if (!res.recon_curve.empty())
        std::cout << "recon mse: epoch0 " << res.recon_curve.front() << " -> final "
                  << res.recon_curve.back() << "\n";
    std::cout << "codebook codes used: " << res.codes_used_final << "/" << cc.codebook_size
              << "\nsaved " << path << "\n";
    return 0;
}

int cmd_train_classifier(const Ctx& c) {
    std::string stage = c.cfg.get_str("stage", "");
    if (stage != "teacher" && stage != "student")
        throw ConfigError("train-classifier needs --stage teacher|student");
    PairedDataset ds;
    if (int rc = need_dataset(c, ds)) return rc;
    if (ds.train.empty()) throw ContractError("dataset has no train split");
    fs::create_directories(c.ckpt_dir);

    if (stage == "teacher") {
        ClassifierConfig cc;
        cc.image_size = ds.train[0].visible.dim(1);
        cc.in_channels = 3;
        cc.width = size_t(c.cfg.get_int("classifier.width", 16));
        cc.feat_dim = size_t(c.cfg.get_int("classifier.feat_dim", 32));
        Rng rng = Rng::stream(c.seed, "teacher-init");
        ClassifierNet net(cc, rng);
        TeacherReport rep =
            train_teacher(net, ds.train, size_t(c.cfg.get_int("classifier.epochs", 30)),
                          float(c.cfg.get_float("classifier.lr", 2e-3)), c.seed);
        std::string path = c.ckpt("teacher.ckpt");
        net.save(path);
        std::cout << "train accuracy: gender " << rep.train_accuracy.gender << " age "
                  << rep.train_accuracy.age << " tone " << rep.train_accuracy.tone << "\n";
        if (!ds.test.empty()) {
            HeadAccuracy held = evaluate_classifier(net, ds.test, true);
            std::cout << "held-out accuracy: gender " << held.gender << " age " << held.age
                      << " tone " << held.tone << "\n";
        }
        std::cout << "saved " << path << "\n";
        return 0;
    }

    std::string tpath = c.ckpt("teacher.ckpt");
    if (!have(tpath))
        return missing_dep("teacher checkpoint", tpath, "train-classifier --stage teacher");
    ClassifierNet teacher = ClassifierNet::load(tpath);
    ClassifierNet student = make_student(teacher);
    DistillReport rep =
        distill_student(teacher, student, ds.train,
                        size_t(c.cfg.get_int("classifier.distill_epochs", 30)),
                        float(c.cfg.get_float("classifier.lr", 2e-3)), c.seed);
    std::string path = c.ckpt("student.ckpt");
    student.save(path);
    if (!rep.eq5_curve.empty())
        std::cout << "feature gap: epoch0 " << rep.eq5_curve.front() << " -> final "
                  << rep.eq5_curve.back() << "\n";
    HeadAccuracy agree = evaluate_agreement(teacher, student, ds.train);
    std::cout << "train agreement: gender " << agree.gender << " age " << agree.age << " tone "
              << agree.tone << "\nsaved " << path << "\n";
    return 0;
}

int cmd_train_diffusion(const Ctx& c) {
    VariantSpec var = parse_variant(c.cfg.get_str("variant", ""));
    PairedDataset ds;
    if (int rc = need_dataset(c, ds)) return rc;
    if (ds.train.empty()) throw ContractError("dataset has no train split");
    VQVAE vis, th;
    if (int rc = need_codecs(c, vis, th)) return rc;
    if (var.needs_classifier) {
        std::string spath = c.ckpt("student.ckpt");
        if (!have(spath))
            return missing_dep("attribute classifier checkpoint", spath,
                               "train-classifier --stage student");
    }
    if (th.cfg.latent_channels != vis.cfg.latent_channels ||
        th.cfg.latent_size() != vis.cfg.latent_size())
        throw ConfigError("visible and thermal codecs disagree on latent geometry");

    DenoiserConfig dc;
    dc.latent_channels = vis.cfg.latent_channels;
    dc.latent_size = vis.cfg.latent_size();
    dc.base = size_t(c.cfg.get_int("diffusion.base", 32));
    dc.attn = var.attn;
    dc.d_ctx = size_t(c.cfg.get_int("diffusion.d_ctx", 32));
    dc.temb_dim = size_t(c.cfg.get_int("diffusion.temb", 64));
    dc.heads = size_t(c.cfg.get_int("diffusion.heads", 4));
    dc.d_state = size_t(c.cfg.get_int("diffusion.d_state", 16));

    size_t T = size_t(c.cfg.get_int("diffusion.timesteps", 200));
    float beta_start = float(c.cfg.get_float("diffusion.beta_start", 1e-4));
    float beta_end = float(c.cfg.get_float("diffusion.beta_end", 0.02));
    NoiseSchedule sched = make_schedule(T, beta_start, beta_end);

    std::cout << "encoding " << ds.train.size() << " pairs...\n";
    std::vector<DiffusionSample> data;
    data.reserve(ds.train.size());
    {
        NoGradGuard<float> guard;
        for (const auto& s : ds.train) {
            DiffusionSample d;
            d.z0 = vis.encode(s.visible);
            d.thermal = th.encode(s.thermal);
            d.labels = s.labels;
            d.reference = s.visible;
            data.push_back(std::move(d));
        }
    }

    Rng rng = Rng::stream(c.seed, "diffusion-init", var.attn == AttnKind::bimamba ? 1 : 0,
                          int(var.prompt));
    UNet net(dc, rng);
    PromptTable table;
    if (var.prompt == PromptMode::table) table = PromptTable(dc.d_ctx, rng);

    DiffTrainConfig tc;
    tc.epochs = size_t(c.cfg.get_int("diffusion.epochs", 12));
    tc.batch = size_t(c.cfg.get_int("diffusion.batch", 16));
    tc.lr = float(c.cfg.get_float("diffusion.lr", 2e-3));
    tc.lambda_id = float(c.cfg.get_float("diffusion.lambda_id", 0.1));
    tc.id_every = size_t(c.cfg.get_int("diffusion.id_every", 10));
    tc.id_steps = size_t(c.cfg.get_int("diffusion.id_steps", 4));
    tc.seed = c.seed;

    IdentityHooks hooks;
    IdentityEmbedder embedder;
    if (tc.lambda_id > 0.0f) {
        embedder = ensure_embedder(c, ds);
        hooks.decode = [&vis](const Tensor<float>& z) { return vis.decode_batch(z); };
        hooks.embed = [&embedder](const Tensor<float>& im) { return embedder.embed_batch(im); };
    }

    DiffTrainResult res =
        train_diffusion(net, sched, data, var.prompt,
                        var.prompt == PromptMode::table ? &table : nullptr, hooks, tc);

    fs::create_directories(c.ckpt_dir);
    std::string path = c.ckpt("diffusion_" + var.name + ".ckpt");
    save_diffusion_ckpt(path, net, var.prompt == PromptMode::table ? &table : nullptr,
                        var.prompt, T, beta_start, beta_end);
    write_step_log(c.ckpt("diffusion_" + var.name + "_log.csv"), res.log);
    for (size_t e = 0; e < res.eq1_epoch_mean.size(); ++e)
        std::cout << "epoch " << e << " denoise loss " << res.eq1_epoch_mean[e] << "\n";
    std::cout << "saved " << path << "\n";
    return 0;
}

// loads every piece the translation pipeline needs; fills the out-params
struct PipelineParts {
    VQVAE vis, th;
    ClassifierNet student;
    DiffusionBundle diff;
    bool has_student = false;
};

int load_pipeline(const Ctx& c, const VariantSpec& var, PipelineParts& parts) {
    if (int rc = need_codecs(c, parts.vis, parts.th)) return rc;
    std::string dpath = c.ckpt("diffusion_" + var.name + ".ckpt");
    if (!have(dpath))
        return missing_dep("diffusion checkpoint", dpath, "train-diffusion --variant " + var.name);
    parts.diff = load_diffusion_ckpt(dpath);
    if (parts.diff.mode != var.prompt || parts.diff.net.cfg.attn != var.attn)
        throw ConfigError("checkpoint " + dpath + " was not trained as variant " + var.name);
    if (var.needs_classifier) {
        std::string spath = c.ckpt("student.ckpt");
        if (!have(spath))
            return missing_dep("attribute classifier checkpoint", spath,
                               "train-classifier --stage student");
        parts.student = ClassifierNet::load(spath);
        parts.has_student = true;
    }
    return 0;
}

TranslatePipeline as_pipeline(const PipelineParts& parts) {
    TranslatePipeline p;
    p.visible_codec = &parts.vis;
    p.thermal_codec = &parts.th;
    p.model = &parts.diff.net;
    p.sched = &parts.diff.sched;
    p.prompt_mode = parts.diff.mode;
    if (parts.has_student) p.student = &parts.student;
    if (parts.diff.mode == PromptMode::table) p.table = &parts.diff.table;
    return p;
}

int cmd_sample(const Ctx& c) {
    VariantSpec var = parse_variant(c.cfg.get_str("variant", ""));
    PipelineParts parts;
    if (int rc = load_pipeline(c, var, parts)) return rc;

    std::string in_dir = c.cfg.get_str("in", c.data_dir);
    PairedDataset ds = load_paired_directory(in_dir);
    const std::vector<PairedSample>& pool = ds.test.empty() ? ds.train : ds.test;
    if (pool.empty()) return missing_dep("input images", in_dir, "gen-data");
    size_t count = size_t(c.cfg.get_int("sample.count", 8));
    if (count == 0 || count > pool.size()) count = pool.size();

    std::string out_dir = c.cfg.get_str("out", "samples");
    fs::create_directories(out_dir);
    TranslatePipeline pipe = as_pipeline(parts);
    Rng rng = Rng::stream(c.seed, "sample");

    std::ofstream labels_csv((fs::path(out_dir) / "labels.csv").string(), std::ios::binary);
    labels_csv << "stem,gender,age_bin,skin_tone\n";
    const size_t chunk = 8;
    for (size_t start = 0; start < count; start += chunk) {
        size_t n = std::min(chunk, count - start);
        std::vector<const Tensor<float>*> th_ptrs;
        for (size_t i = 0; i < n; ++i) th_ptrs.push_back(&pool[start + i].thermal);
        std::vector<AttributeLabels> used;
        Tensor<float> gen = translate_batch(pipe, stack_images(th_ptrs), rng, &used);
        for (size_t i = 0; i < n; ++i) {
            const std::string& stem = pool[start + i].stem;
            write_netpbm((fs::path(out_dir) / (stem + "_gen.ppm")).string(),
                         image_from_tensor(nth(gen, i)));
            labels_csv << stem << "," << used[i].gender << "," << used[i].age_bin << ","
                       << used[i].skin_tone << "\n";
        }
    }
    std::cout << "wrote " << count << " translations to " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const Ctx& c) {
    VariantSpec var = parse_variant(c.cfg.get_str("variant", ""));
    PairedDataset ds;
    if (int rc = need_dataset(c, ds)) return rc;
    PipelineParts parts;
    if (int rc = load_pipeline(c, var, parts)) return rc;
    std::string tpath = c.ckpt("teacher.ckpt");
    if (!have(tpath))
        return missing_dep("teacher checkpoint", tpath, "train-classifier --stage teacher");
    ClassifierNet teacher = ClassifierNet::load(tpath);
    IdentityEmbedder embedder = ensure_embedder(c, ds);

    const std::vector<PairedSample>& pool = ds.test.empty() ? ds.train : ds.test;
    if (pool.empty()) throw ContractError("dataset has no evaluation split");
    size_t subset = size_t(c.cfg.get_int("eval.subset", 32));
    if (subset == 0 || subset > pool.size()) subset = pool.size();
    // evenly spaced picks so the subset spans identities, not just the first few
    std::vector<size_t> picks(subset);
    for (size_t i = 0; i < subset; ++i) picks[i] = i * pool.size() / subset;

    TranslatePipeline pipe = as_pipeline(parts);
    Rng rng = Rng::stream(c.seed, "evaluate");

    std::vector<IdentityImage> gen_imgs, ref_imgs;
    double ssim_acc = 0.0, psnr_acc = 0.0;
    size_t attr_hits = 0, attr_total = 0;
    const size_t chunk = 8;
    for (size_t start = 0; start < subset; start += chunk) {
        size_t n = std::min(chunk, subset - start);
        std::vector<const Tensor<float>*> th_ptrs;
        for (size_t i = 0; i < n; ++i) th_ptrs.push_back(&pool[picks[start + i]].thermal);
        std::vector<AttributeLabels> used;
        Tensor<float> gen = translate_batch(pipe, stack_images(th_ptrs), rng, &used);
        for (size_t i = 0; i < n; ++i) {
            const PairedSample& s = pool[picks[start + i]];
            Tensor<float> g = nth(gen, i);
            ssim_acc += ssim(g, s.visible);
            psnr_acc += psnr(g, s.visible);
            gen_imgs.push_back({g, int(s.identity)});
            ref_imgs.push_back({s.visible, int(s.identity)});
            // conditioned variants are judged against what they were told to
            // produce; unconditioned ones against the pair's ground truth
            AttributeLabels target = used[i].labeled() ? used[i] : s.labels;
            ClassifyResult judged = classify(teacher, g);
            attr_hits += size_t(judged.labels.gender == target.gender) +
                         size_t(judged.labels.age_bin == target.age_bin) +
                         size_t(judged.labels.skin_tone == target.skin_tone);
            attr_total += kAttributeCount;
        }
        std::cout << "translated " << std::min(start + chunk, subset) << "/" << subset << "\n";
    }

    LabeledEmbeddings gen_emb = embed_labeled(embedder, gen_imgs);
    LabeledEmbeddings ref_emb = embed_labeled(embedder, ref_imgs);
    std::vector<IdentityImage> all_imgs = gen_imgs;
    all_imgs.insert(all_imgs.end(), ref_imgs.begin(), ref_imgs.end());
    ScoreMatrix scores = score_matrix(embed_labeled(embedder, all_imgs));

    std::vector<std::pair<std::string, double>> rows = {
        {"ssim_mean", ssim_acc / double(subset)},
        {"psnr_mean", psnr_acc / double(subset)},
        {"frechet", frechet_distance(gen_emb.emb, ref_emb.emb)},
        {"rank1", rank1(gen_emb, ref_emb)},
        {"vr_far_1pct", vr_at_far(scores, 0.01)},
        {"vr_far_0p1pct", vr_at_far(scores, 0.001)},
        {"attr_match", 100.0 * double(attr_hits) / double(attr_total)},
    };
    std::string out = c.cfg.get_str("out", c.ckpt("report_" + var.name + ".csv"));
    write_metric_report(out, rows);
    for (const auto& [name, value] : rows) std::cout << name << " = " << value << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_bench(const Ctx& c) {
    std::vector<size_t> lens = {256, 512, 1024, 2048, 4096, 8192};
    size_t repeats = size_t(c.cfg.get_int("bench.repeats", 1));
    std::vector<BenchRecord> records = bench_blocks(lens, 64, 4, 16, repeats);
    std::string out = c.cfg.get_str("out", "bench.csv");
    write_bench_csv(out, records);
    std::cout << "mamba slope " << bench_loglog_slope(records, "mamba") << ", mhsa slope "
              << bench_loglog_slope(records, "mhsa") << "\nwrote " << out << "\n";
    return 0;
}

int cmd_gradcheck(const Ctx& c) {
    using Td = Tensor<double>;
    constexpr double kTol = 1e-4;
    Rng rng = Rng::stream(c.seed, "gradcheck");
    double worst_all = 0.0;
    bool ok = true;

    auto section = [&](const std::string& name, double worst) {
        bool pass = worst < kTol;
        ok = ok && pass;
        worst_all = std::max(worst_all, worst);
        std::cout << (pass ? "ok  " : "FAIL") << "  " << name << "  max rel err " << worst
                  << "\n";
    };

    // fixed projection so the whole Jacobian is exercised
    auto project = [](const Td& y) {
        Td w = Td::zeros(y.shape());
        for (size_t i = 0; i < w.numel(); ++i) {
            uint64_t h = (i + 1) * 0x9e3779b97f4a7c15ull;
            double v = 0.25 + double((h >> 40) % 1024) / 1024.0;
            w.vec()[i] = (h & 1) ? -v : v;
        }
        return sum(mul(y, w));
    };

    {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Td a = Td::uniform({3, 4}, rng, -1.0, 1.0);
            Td b = Td::uniform({4}, rng, 0.2, 1.0);
            std::vector<Td> in = {a, b};
            worst = std::max(worst,
                             gradcheck::max_grad_rel_err(in, [&] { return project(div(a, b)); }));
            worst = std::max(worst,
                             gradcheck::max_grad_rel_err(in, [&] { return project(mul(a, b)); }));
        }
        section("elementwise (broadcast)", worst);
    }
    {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Td a = Td::uniform({3, 4}, rng, -1.0, 1.0);
            Td b = Td::uniform({4, 2}, rng, -1.0, 1.0);
            std::vector<Td> in = {a, b};
            worst = std::max(
                worst, gradcheck::max_grad_rel_err(in, [&] { return project(matmul(a, b)); }));
            worst = std::max(worst, gradcheck::max_grad_rel_err(
                                        in, [&] { return project(softmax_lastdim(a)); }));
        }
        section("matmul + softmax", worst);
    }
    {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Td x = Td::uniform({2, 4, 3, 3}, rng, -1.0, 1.0);
            Td w = Td::uniform({3, 4, 3, 3}, rng, -0.5, 0.5);
            Td b = Td::uniform({3}, rng, -0.5, 0.5);
            Td g = Td::uniform({4}, rng, 0.5, 1.5);
            Td beta = Td::uniform({4}, rng, -0.5, 0.5);
            std::vector<Td> in = {x, w, b, g, beta};
            worst = std::max(worst, gradcheck::max_grad_rel_err(in, [&] {
                                 return project(conv2d(group_norm(x, 2, g, beta), w, b, 1, 1));
                             }));
        }
        section("group_norm + conv2d", worst);
    }
    {
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            auto fwd = SSMBlockParams<double>::init(4, 3, rng);
            auto bwd = SSMBlockParams<double>::init(4, 3, rng);
            Td x = Td::uniform({6, 3}, rng, -1.0, 1.0);
            std::vector<Td> in = {x};
            for (auto* p : {&fwd, &bwd})
                for (auto& tns : p->parameters()) in.push_back(tns);
            worst = std::max(worst, gradcheck::max_grad_rel_err(in, [&] {
                                 return project(bimamba_block(fwd, bwd, x));
                             }));
        }
        section("bidirectional ssm block", worst);
    }
    {
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            auto p = MHSAParams<double>::init(2, 4, rng);
            Td x = Td::uniform({5, 4}, rng, -1.0, 1.0);
            std::vector<Td> in = {x};
            for (auto& tns : p.parameters()) in.push_back(tns);
            worst = std::max(worst, gradcheck::max_grad_rel_err(
                                        in, [&] { return project(mhsa_block(p, x)); }));
        }
        section("self-attention block", worst);
    }
    {
        // four-parameter micro pipeline end to end
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Td a = Td::uniform({1}, rng, 0.5, 1.5);
            Td b = Td::uniform({1}, rng, -0.5, 0.5);
            Td cc = Td::uniform({1}, rng, 0.5, 1.5);
            Td d = Td::uniform({1}, rng, -0.5, 0.5);
            Td x = Td::uniform({6}, rng, -1.0, 1.0);
            Td target = Td::uniform({6}, rng, -1.0, 1.0);
            std::vector<Td> in = {a, b, cc, d};
            worst = std::max(worst, gradcheck::max_grad_rel_err(in, [&] {
                                 Td y = sigmoid(add(mul(x, a), b));
                                 Td z = t2v::tanh(add(mul(y, cc), d));
                                 return mean(square(sub(z, target)));
                             }));
        }
        section("micro pipeline", worst);
    }

    std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (worst " << worst_all
              << ", tolerance " << kTol << ")\n";
    return ok ? 0 : 1;
}

}  // namespace

const std::set<std::string>& cli_known_keys() { return known_keys_impl(); }

int run_cli(const std::vector<std::string>& args) {
    if (args.empty() || args[0] == "--help" || args[0] == "help") {
        std::cout << kUsage;
        return args.empty() ? 1 : 0;
    }
    const std::string cmd = args[0];
    static const std::set<std::string> commands = {
        "gen-data", "train-vqvae", "train-classifier", "train-diffusion",
        "sample",   "evaluate",    "bench-attn",       "gradcheck"};
    if (!commands.count(cmd)) {
        std::cerr << "error: unknown command '" << cmd << "'\n" << kUsage;
        return 1;
    }

    try {
        // flags: --config first, then --key value overrides in order
        std::string config_path;
        std::vector<std::pair<std::string, std::string>> overrides;
        for (size_t i = 1; i < args.size();) {
            const std::string& tok = args[i];
            if (tok == "--help") {
                std::cout << kUsage << "\nconfiguration keys:\n";
                for (const auto& k : known_keys_impl()) std::cout << "  " << k << "\n";
                return 0;
            }
            if (tok.rfind("--", 0) != 0) {
                std::cerr << "error: expected a --flag, got '" << tok << "'\n" << kUsage;
                return 1;
            }
            if (i + 1 >= args.size()) {
                std::cerr << "error: flag " << tok << " needs a value\n";
                return 1;
            }
            std::string key = tok.substr(2), value = args[i + 1];
            i += 2;
            if (key == "config")
                config_path = value;
            else
                overrides.emplace_back(std::move(key), std::move(value));
        }

        Ctx c;
        if (!config_path.empty())
            c.cfg = Config::parse_file(config_path, known_keys_impl());
        else if (have("t2v.conf"))
            c.cfg = Config::parse_file("t2v.conf", known_keys_impl());
        for (auto& [k, v] : overrides) c.cfg.set(k, v, known_keys_impl());

        c.data_dir = c.cfg.get_str("data.dir", "data");
        c.ckpt_dir = c.cfg.get_str("ckpt.dir", "ckpt");
        c.seed = uint64_t(c.cfg.get_int("seed", 1));

        if (cmd == "gen-data") return cmd_gen_data(c);
        if (cmd == "train-vqvae") return cmd_train_vqvae(c);
        if (cmd == "train-classifier") return cmd_train_classifier(c);
        if (cmd == "train-diffusion") return cmd_train_diffusion(c);
        if (cmd == "sample") return cmd_sample(c);
        if (cmd == "evaluate") return cmd_evaluate(c);
        if (cmd == "bench-attn") return cmd_bench(c);
        return cmd_gradcheck(c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace t2v
