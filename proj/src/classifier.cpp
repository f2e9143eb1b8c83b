#include "t2v/classifier.hpp"

#include <algorithm>
#include <numeric>

#include "t2v/checkpoint.hpp"
#include "t2v/optim.hpp"
#include "t2v/prompt.hpp"

namespace t2v {

void ClassifierConfig::validate() const {
    if (in_channels != 1 && in_channels != 3)
        throw ConfigError("classifier in_channels must be 1 or 3");
    if (image_size < 8 || image_size % 8 != 0)
        throw ConfigError("classifier image_size must be a multiple of 8");
    if (width == 0 || feat_dim == 0)
        throw ConfigError("classifier width and feat_dim must be positive");
}

ClassifierNet::ClassifierNet(const ClassifierConfig& c, Rng& rng) : cfg(c) {
    cfg.validate();
    const size_t w = cfg.width;
    // full-resolution first stage so fine texture frequencies survive;
    // three stride-2 stages take image_size down to size/8 before pooling
    c1 = Conv2dLayer(cfg.in_channels, w, 3, 1, 1, rng);
    c2 = Conv2dLayer(w, 2 * w, 3, 2, 1, rng);
    c3 = Conv2dLayer(2 * w, 2 * w, 3, 2, 1, rng);
    c4 = Conv2dLayer(2 * w, cfg.feat_dim, 3, 2, 1, rng);
    head_gender = Linear(cfg.feat_dim, kGenderClasses, rng);
    head_age = Linear(cfg.feat_dim, kAgeBins, rng);
    head_tone = Linear(cfg.feat_dim, kSkinTones, rng);
}

Tensor<float> ClassifierNet::features(const Tensor<float>& x) const {
    if (x.shape().size() != 4 || x.shape()[1] != cfg.in_channels ||
        x.shape()[2] != cfg.image_size || x.shape()[3] != cfg.image_size)
        throw DimensionError("classifier expects [B," + std::to_string(cfg.in_channels) +
                             "," + std::to_string(cfg.image_size) + "," +
                             std::to_string(cfg.image_size) + "], got " +
                             shape_str(x.shape()));
    Tensor<float> h = silu(c1(x));
    h = silu(c2(h));
    h = silu(c3(h));
    h = silu(c4(h));
    return global_max_pool(h);  // [B, d_f]
}

ClassifierNet::Logits ClassifierNet::heads(const Tensor<float>& f) const {
    return {head_gender(f), head_age(f), head_tone(f)};
}

ParamList ClassifierNet::parameters() const {
    ParamList ps;
    c1.collect("c1", ps);
    c2.collect("c2", ps);
    c3.collect("c3", ps);
    c4.collect("c4", ps);
    head_gender.collect("head_gender", ps);
    head_age.collect("head_age", ps);
    head_tone.collect("head_tone", ps);
    return ps;
}

void ClassifierNet::save(const std::string& path) const {
    ParamList ps = parameters();
    ps.emplace_back("cfg", Tensor<float>::from_data(
                               {5}, {float(cfg.image_size), float(cfg.in_channels),
                                     float(cfg.width), float(cfg.feat_dim),
                                     frozen ? 1.0f : 0.0f}));
    save_checkpoint_f32(path, ps);
}

ClassifierNet ClassifierNet::load(const std::string& path) {
    NamedEntries entries = load_checkpoint(path);
    const TensorEntry* cfg_e = nullptr;
    for (const auto& [n, e] : entries)
        if (n == "cfg") cfg_e = &e;
    if (!cfg_e || cfg_e->f32.size() != 5)
        throw FormatError("checkpoint " + path + " lacks a classifier config entry");
    ClassifierConfig cfg;
    cfg.image_size = size_t(cfg_e->f32[0]);
    cfg.in_channels = size_t(cfg_e->f32[1]);
    cfg.width = size_t(cfg_e->f32[2]);
    cfg.feat_dim = size_t(cfg_e->f32[3]);
    Rng rng(0);
    ClassifierNet net(cfg, rng);
    restore_into(entries, net.parameters());
    net.frozen = cfg_e->f32[4] != 0.0f;
    return net;
}

ClassifierNet make_student(const ClassifierNet& teacher) {
    ClassifierConfig cfg = teacher.cfg;
    cfg.in_channels = 1;
    Rng rng(0);
    ClassifierNet s(cfg, rng);
    ParamList src = teacher.parameters(), dst = s.parameters();
    for (size_t i = 0; i < src.size(); ++i) {
        if (src[i].first == "c1.w") continue;
        dst[i].second.vec() = src[i].second.vec();
    }
    // first conv: mean over the teacher's input channels
    const auto& tw = teacher.c1.w.vec();  // [w,3,3,3]
    auto& sw = s.c1.w.vec();              // [w,1,3,3]
    const size_t w = cfg.width, k = 9;
    for (size_t o = 0; o < w; ++o)
        for (size_t j = 0; j < k; ++j)
            sw[o * k + j] =
                (tw[(o * 3 + 0) * k + j] + tw[(o * 3 + 1) * k + j] + tw[(o * 3 + 2) * k + j]) /
                3.0f;
    s.frozen = false;
    return s;
}

namespace {

size_t argmax(const std::vector<float>& v) {
    return size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<float> softmax_row(const Tensor<float>& logits_1xc) {
    Tensor<float> p = softmax_lastdim(logits_1xc);
    return p.vec();
}

Tensor<float> stack_images(const std::vector<PairedSample>& samples,
                           const std::vector<size_t>& order, size_t start, size_t bs,
                           bool visible) {
    const Tensor<float>& first = visible ? samples[order[start]].visible
                                         : samples[order[start]].thermal;
    const auto s = first.shape();
    Tensor<float> x = Tensor<float>::zeros({bs, s[0], s[1], s[2]});
    const size_t stride = s[0] * s[1] * s[2];
    for (size_t b = 0; b < bs; ++b) {
        const Tensor<float>& img = visible ? samples[order[start + b]].visible
                                           : samples[order[start + b]].thermal;
        if (img.shape() != s)
            throw ContractError("dataset images disagree on shape: " + shape_str(s) +
                                " vs " + shape_str(img.shape()));
        std::copy(img.vec().begin(), img.vec().end(), x.vec().begin() + b * stride);
    }
    return x;
}

void check_paired(const std::vector<PairedSample>& pairs) {
    if (pairs.empty()) throw ContractError("dataset has no pairs");
    for (const auto& p : pairs)
        if (!p.visible.defined() || !p.thermal.defined())
            throw ContractError("dataset sample '" + p.stem + "' is missing a modality");
}

}  // namespace

ClassifyResult classify(const ClassifierNet& net, const Tensor<float>& image_chw) {
    if (image_chw.shape().size() != 3)
        throw DimensionError("classify expects [C,S,S], got " + shape_str(image_chw.shape()));
    NoGradGuard<float> ng;
    std::vector<size_t> bshape = image_chw.shape();
    bshape.insert(bshape.begin(), 1);
    Tensor<float> f = net.features(reshape(image_chw, bshape));
    ClassifierNet::Logits lg = net.heads(f);

    ClassifyResult r;
    r.prob_gender = softmax_row(lg.gender);
    r.prob_age = softmax_row(lg.age);
    r.prob_tone = softmax_row(lg.tone);
    r.labels.gender = int(argmax(r.prob_gender));
    r.labels.age_bin = int(argmax(r.prob_age));
    r.labels.skin_tone = int(argmax(r.prob_tone));
    r.features = reshape(f, {net.cfg.feat_dim});
    return r;
}

HeadAccuracy evaluate_classifier(const ClassifierNet& net,
                                 const std::vector<PairedSample>& samples,
                                 bool visible_input) {
    check_paired(samples);
    NoGradGuard<float> ng;
    size_t ok_g = 0, ok_a = 0, ok_t = 0;
    for (const auto& s : samples) {
        s.labels.validate();
        ClassifyResult r = classify(net, visible_input ? s.visible : s.thermal);
        ok_g += r.labels.gender == s.labels.gender;
        ok_a += r.labels.age_bin == s.labels.age_bin;
        ok_t += r.labels.skin_tone == s.labels.skin_tone;
    }
    const float n = float(samples.size());
    return {float(ok_g) / n, float(ok_a) / n, float(ok_t) / n};
}

HeadAccuracy evaluate_agreement(const ClassifierNet& teacher, const ClassifierNet& student,
                                const std::vector<PairedSample>& pairs) {
    check_paired(pairs);
    NoGradGuard<float> ng;
    size_t ok_g = 0, ok_a = 0, ok_t = 0;
    for (const auto& p : pairs) {
        ClassifyResult t = classify(teacher, p.visible);
        ClassifyResult s = classify(student, p.thermal);
        ok_g += t.labels.gender == s.labels.gender;
        ok_a += t.labels.age_bin == s.labels.age_bin;
        ok_t += t.labels.skin_tone == s.labels.skin_tone;
    }
    const float n = float(pairs.size());
    return {float(ok_g) / n, float(ok_a) / n, float(ok_t) / n};
}

TeacherReport train_teacher(ClassifierNet& net, const std::vector<PairedSample>& samples,
                            size_t epochs, float lr, uint64_t seed) {
    if (net.frozen) throw FrozenModelError("cannot train a frozen classifier");
    check_paired(samples);
    for (const auto& s : samples) s.labels.validate();

    ParamList params = net.parameters();
    set_requires_grad(params, true);
    Adam<float> opt(param_tensors(params), lr);
    const size_t batch = std::min<size_t>(16, samples.size());

    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    TeacherReport report;
    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng = Rng::stream(seed, "teacher-shuffle", epoch);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0;
        size_t n_batches = 0;
        for (size_t start = 0; start < order.size(); start += batch) {
            const size_t bs = std::min(batch, order.size() - start);
            Tensor<float> x = stack_images(samples, order, start, bs, true);
            std::vector<size_t> yg(bs), ya(bs), yt(bs);
            for (size_t b = 0; b < bs; ++b) {
                const auto& l = samples[order[start + b]].labels;
                yg[b] = size_t(l.gender);
                ya[b] = size_t(l.age_bin);
                yt[b] = size_t(l.skin_tone);
            }
            Tape<float> tape;
            ClassifierNet::Logits lg = net.heads(net.features(x));
            Tensor<float> loss = add(cross_entropy(lg.gender, yg),
                                     add(cross_entropy(lg.age, ya),
                                         cross_entropy(lg.tone, yt)));
            tape.backward(loss);
            opt.step();
            opt.zero_grad();
            loss_sum += loss.item();
            ++n_batches;
        }
        report.loss_curve.push_back(float(loss_sum / double(n_batches)));
    }

    set_requires_grad(params, false);
    net.frozen = true;
    report.train_accuracy = evaluate_classifier(net, samples, true);
    return report;
}

DistillReport distill_student(const ClassifierNet& teacher, ClassifierNet& student,
                              const std::vector<PairedSample>& pairs, size_t epochs,
                              float lr, uint64_t seed) {
    if (!teacher.frozen) throw ContractError("distillation requires a frozen teacher");
    if (student.frozen) throw FrozenModelError("cannot train a frozen classifier");
    check_paired(pairs);
    if (teacher.cfg.feat_dim != student.cfg.feat_dim)
        throw DimensionError("teacher and student feature dims differ");

    ParamList params = student.parameters();
    set_requires_grad(params, true);
    Adam<float> opt(param_tensors(params), lr);
    const size_t batch = std::min<size_t>(16, pairs.size());
    const float aux_weight = 0.1f;

    std::vector<size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    DistillReport report;
    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng = Rng::stream(seed, "distill-shuffle", epoch);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double eq5_sum = 0, total_sum = 0;
        size_t n_batches = 0;
        for (size_t start = 0; start < order.size(); start += batch) {
            const size_t bs = std::min(batch, order.size() - start);
            Tensor<float> x_th = stack_images(pairs, order, start, bs, false);

            // frozen teacher pass: plain values, no tape nodes
            Tensor<float> f_vis;
            std::vector<size_t> yg(bs), ya(bs), yt(bs);
            {
                NoGradGuard<float> ng;
                Tensor<float> x_vis = stack_images(pairs, order, start, bs, true);
                f_vis = teacher.features(x_vis);
                ClassifierNet::Logits tl = teacher.heads(f_vis);
                for (size_t b = 0; b < bs; ++b) {
                    auto row = [&](const Tensor<float>& t, size_t C) {
                        const auto& v = t.vec();
                        size_t best = 0;
                        for (size_t c = 1; c < C; ++c)
                            if (v[b * C + c] > v[b * C + best]) best = c;
                        return best;
                    };
                    yg[b] = row(tl.gender, kGenderClasses);
                    ya[b] = row(tl.age, kAgeBins);
                    yt[b] = row(tl.tone, kSkinTones);
                }
            }

            Tape<float> tape;
            Tensor<float> f_ir = student.features(x_th);
            // mean over pairs of the summed squared feature gap
            Tensor<float> eq5 =
                scale(mean(square(sub(f_ir, f_vis))), float(teacher.cfg.feat_dim));
            ClassifierNet::Logits sl = student.heads(f_ir);
            Tensor<float> aux = add(cross_entropy(sl.gender, yg),
                                    add(cross_entropy(sl.age, ya),
                                        cross_entropy(sl.tone, yt)));
            Tensor<float> loss = add(eq5, scale(aux, aux_weight));
            tape.backward(loss);
            opt.step();
            opt.zero_grad();

            eq5_sum += eq5.item();
            total_sum += loss.item();
            ++n_batches;
        }
        report.eq5_curve.push_back(float(eq5_sum / double(n_batches)));
        report.total_curve.push_back(float(total_sum / double(n_batches)));
    }

    set_requires_grad(params, false);
    return report;
}

PromptTable::PromptTable(size_t d_ctx, Rng& rng) {
    if (d_ctx == 0) throw ConfigError("prompt d_ctx must be positive");
    table = Tensor<float>::randn({kPromptRows, d_ctx}, rng, 0.02f);
    // distinct rows at init: a collision means the init is unusable
    const auto& v = table.vec();
    for (size_t i = 0; i < kPromptRows; ++i)
        for (size_t j = i + 1; j < kPromptRows; ++j)
            if (std::equal(v.begin() + i * d_ctx, v.begin() + (i + 1) * d_ctx,
                           v.begin() + j * d_ctx))
                throw ContractError("prompt table initialized with duplicate rows");
}

Tensor<float> PromptTable::encode_prompt(const AttributeLabels& labels) const {
    labels.validate();
    if (!table.defined()) throw ConfigError("prompt table is uninitialized");
    std::vector<size_t> rows = {kGenderRowOffset + size_t(labels.gender),
                                kAgeRowOffset + size_t(labels.age_bin),
                                kToneRowOffset + size_t(labels.skin_tone)};
    return embed_rows(table, rows);  // [3, d_ctx]
}

}  // namespace t2v
