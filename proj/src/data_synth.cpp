#include "t2v/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "t2v/image_tensor.hpp"
#include "t2v/rng.hpp"

namespace fs = std::filesystem;

namespace t2v {
namespace {

// Degree-5/4 Taylor sin/cos; jitter angles stay within |t| <= 0.12 where the
// truncation error is < 1e-8. Keeps libm's platform-dependent rounding out of
// the render.
double sin_t(double t) {
    double t2 = t * t;
    return t * (1.0 - t2 / 6.0 + t2 * t2 / 120.0);
}
double cos_t(double t) {
    double t2 = t * t;
    return 1.0 - t2 / 2.0 + t2 * t2 / 24.0;
}

// Triangle wave with period 1 mapping u -> [-1,1]; piecewise linear so stripe
// frequency (the age cue) survives quantization at any amplitude.
double tri(double u) {
    double f = u - std::floor(u);
    return f < 0.5 ? 4.0 * f - 1.0 : 3.0 - 4.0 * f;
}

uint8_t quant(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 255.0) v = 255.0;
    return uint8_t(v + 0.5);
}

// sigma = 1.0 Gaussian, 7 taps, frozen normalized weights (exp() evaluated
// once offline; runtime stays transcendental-free).
constexpr double kBlur[4] = {0.39905026, 0.24203623, 0.05400558, 0.00443305};

void blur7(std::vector<double>& img, size_t h, size_t w) {
    std::vector<double> tmp(img.size());
    auto clampi = [](long i, long n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            double acc = kBlur[0] * img[y * w + x];
            for (long k = 1; k <= 3; ++k)
                acc += kBlur[k] * (img[y * w + clampi(long(x) - k, long(w))] +
                                   img[y * w + clampi(long(x) + k, long(w))]);
            tmp[y * w + x] = acc;
        }
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            double acc = kBlur[0] * tmp[y * w + x];
            for (long k = 1; k <= 3; ++k)
                acc += kBlur[k] * (tmp[clampi(long(y) - k, long(h)) * w + x] +
                                   tmp[clampi(long(y) + k, long(h)) * w + x]);
            img[y * w + x] = acc;
        }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

int parse_label_field(const std::string& s, const std::string& file, size_t lineno) {
    try {
        size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(file + ":" + std::to_string(lineno) +
                          ": expected integer label, got \"" + s + "\"");
    }
}

}  // namespace

AttributeLabels identity_labels(size_t identity) {
    AttributeLabels l;
    l.gender = int(identity % kGenderClasses);
    l.age_bin = int(identity % kAgeBins);
    l.skin_tone = int(identity % kSkinTones);
    return l;
}

void skin_tone_rgb(int tone, uint8_t rgb[3]) {
    if (tone < 0 || tone >= kSkinTones)
        throw ContractError("skin tone out of range: " + std::to_string(tone));
    // Integer interpolation light (243,224,210) -> dark (70,40,28); every
    // channel strictly decreases per step, so mean brightness orders the
    // palette.
    // brightness falls with tone while warmth (R-B) rises 10 per step: the
    // stripe texture is added to all channels equally, so channel
    // differences are exactly stripe-invariant and every tone stays legible
    // under it
    rgb[0] = uint8_t(245 - 3 * tone);
    rgb[1] = uint8_t(225 - 10 * tone);
    rgb[2] = uint8_t(235 - 13 * tone);
}

FaceParams face_params(const SyntheticSpec& spec, size_t identity) {
    if (identity >= spec.identity_count)
        throw ContractError("identity " + std::to_string(identity) + " out of range [0," +
                            std::to_string(spec.identity_count) + ")");
    Rng rng = Rng::stream(spec.seed, "identity", identity);
    const double S = double(spec.image_size);
    // identity spreads sit near the per-instance jitter scale on purpose:
    // geometry must stay too noisy to serve as a proxy for the attribute
    // labels (which cycle with identity), or a classifier can memorize
    // shapes instead of reading the rendered cues
    FaceParams p;
    p.rx = float(S * rng.uniform(0.287, 0.313));
    p.ry = float(S * rng.uniform(0.367, 0.393));
    p.eye_dx = float(p.rx * rng.uniform(0.437, 0.493));
    p.eye_dy = float(p.ry * rng.uniform(0.293, 0.347));
    p.eye_r = float(S * rng.uniform(0.055, 0.065));
    p.mouth_dy = float(p.ry * rng.uniform(0.417, 0.483));
    p.mouth_rx = float(p.rx * rng.uniform(0.367, 0.433));
    p.mouth_ry = float(S * rng.uniform(0.0383, 0.0467));
    p.labels = identity_labels(identity);
    return p;
}

RenderedPair render_pair(const SyntheticSpec& spec, const FaceParams& p,
                         size_t identity, size_t instance) {
    p.labels.validate();
    const size_t S = spec.image_size;
    if (S < 16) throw ConfigError("image_size must be >= 16");

    Rng rng = Rng::stream(spec.seed, "sample", identity, instance);
    const double cx = 0.5 * double(S) + rng.uniform(-1.5, 1.5);
    const double cy = 0.5 * double(S) + rng.uniform(-1.5, 1.5);
    const double theta = rng.uniform(-0.12, 0.12);
    const double scale = rng.uniform(0.95, 1.05);
    const double ct = cos_t(theta), st = sin_t(theta);

    const double rx = p.rx * scale, ry = p.ry * scale;
    const double edx = p.eye_dx * scale, edy = p.eye_dy * scale, er = p.eye_r * scale;
    const double mdy = p.mouth_dy * scale, mrx = p.mouth_rx * scale, mry = p.mouth_ry * scale;

    uint8_t skin[3];
    skin_tone_rgb(p.labels.skin_tone, skin);
    // every non-skin element keeps R-B below the lightest skin's 10 so the
    // warmest region of any face is always actual skin
    const double bg[3] = {225, 228, 233};
    const double eye_c[3] = {38, 32, 34};
    const double mouth_c[3] = {90, 36, 88};
    const double hair_c[3] = {58, 44, 52};

    RenderedPair out;
    out.visible.width = out.visible.height = S;
    out.visible.channels = 3;
    out.visible.pixels.resize(S * S * 3);
    out.thermal.width = out.thermal.height = S;
    out.thermal.channels = 1;
    out.thermal.pixels.resize(S * S);

    std::vector<double> th(S * S, 18.0);  // ambient background

    // geometric spacing keeps adjacent bins a constant ~22% apart in
    // frequency, where linear spacing crowds the high bins together
    const double stripe_cycles = 2.0 * std::pow(5.0, double(p.labels.age_bin) / 8.0);
    for (size_t y = 0; y < S; ++y) {
        for (size_t x = 0; x < S; ++x) {
            const double dx = double(x) + 0.5 - cx;
            const double dy = double(y) + 0.5 - cy;
            const double fx = ct * dx + st * dy;   // face-frame coords
            const double fy = -st * dx + ct * dy;
            const double r2 = (fx / rx) * (fx / rx) + (fy / ry) * (fy / ry);

            double vis[3] = {bg[0], bg[1], bg[2]};
            if (r2 <= 1.0) {
                // age cue: stripe frequency grows with the bin; phase runs in
                // image coordinates so the frequency is invariant to the
                // per-instance rotation and scale jitter
                const double stripe = tri((double(y) + 0.5) / double(S) * stripe_cycles);
                for (int c = 0; c < 3; ++c) vis[c] = double(skin[c]) + 15.0 * stripe;
                th[y * S + x] = 232.0 - 148.0 * r2 + 8.0 * stripe;

                if (p.labels.gender == 1 && fy < -0.62 * ry) {
                    // hair band: visible texture + cool thermal region
                    for (int c = 0; c < 3; ++c) vis[c] = hair_c[c];
                    th[y * S + x] = 64.0;
                }
                const double exl = fx + edx, exr = fx - edx, ey = fy + edy;
                if (exl * exl + ey * ey <= er * er || exr * exr + ey * ey <= er * er) {
                    for (int c = 0; c < 3; ++c) vis[c] = eye_c[c];
                    th[y * S + x] = 246.0;
                }
                const double mx = fx / mrx, my = (fy - mdy) / mry;
                if (mx * mx + my * my <= 1.0) {
                    for (int c = 0; c < 3; ++c) vis[c] = mouth_c[c];
                    th[y * S + x] = 238.0;
                }
            }
            for (int c = 0; c < 3; ++c) out.visible.at(y, x, c) = quant(vis[c]);
        }
    }

    blur7(th, S, S);
    for (size_t i = 0; i < S * S; ++i) out.thermal.pixels[i] = quant(th[i]);
    return out;
}

size_t train_identity_count(const SyntheticSpec& spec) {
    if (spec.identity_count < 2)
        throw ConfigError("identity_count must be >= 2 to form disjoint splits");
    size_t n = spec.identity_count * 8 / 10;
    if (n == 0) n = 1;
    if (n == spec.identity_count) n = spec.identity_count - 1;
    return n;
}

namespace {

std::string make_stem(size_t identity, size_t instance) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "id%04zu_i%02zu", identity, instance);
    return buf;
}

}  // namespace

PairedDataset generate_dataset(const SyntheticSpec& spec) {
    const size_t n_train = train_identity_count(spec);
    PairedDataset ds;
    for (size_t id = 0; id < spec.identity_count; ++id) {
        FaceParams p = face_params(spec, id);
        for (size_t k = 0; k < spec.images_per_identity; ++k) {
            RenderedPair r = render_pair(spec, p, id, k);
            PairedSample s;
            s.visible = tensor_from_image(r.visible);
            s.thermal = tensor_from_image(r.thermal);
            s.labels = p.labels;
            s.identity = int64_t(id);
            s.stem = make_stem(id, k);
            (id < n_train ? ds.train : ds.test).push_back(std::move(s));
        }
    }
    return ds;
}

void write_dataset(const SyntheticSpec& spec, const std::string& out_dir) {
    const size_t n_train = train_identity_count(spec);
    fs::create_directories(out_dir);
    std::ofstream manifest(out_dir + "/manifest.csv", std::ios::binary);
    if (!manifest) throw FormatError("cannot write " + out_dir + "/manifest.csv");
    manifest << "stem,split,identity,gender,age_bin,skin_tone\n";
    for (size_t id = 0; id < spec.identity_count; ++id) {
        FaceParams p = face_params(spec, id);
        for (size_t k = 0; k < spec.images_per_identity; ++k) {
            RenderedPair r = render_pair(spec, p, id, k);
            const std::string stem = make_stem(id, k);
            write_netpbm(out_dir + "/" + stem + "_vis.ppm", r.visible);
            write_netpbm(out_dir + "/" + stem + "_th.pgm", r.thermal);
            manifest << stem << ',' << (id < n_train ? "train" : "test") << ',' << id << ','
                     << p.labels.gender << ',' << p.labels.age_bin << ','
                     << p.labels.skin_tone << '\n';
        }
    }
}

namespace {

PairedSample load_pair_files(const std::string& dir, const std::string& stem) {
    const std::string vis_path = dir + "/" + stem + "_vis.ppm";
    const std::string th_path = dir + "/" + stem + "_th.pgm";
    Image vis = read_netpbm(vis_path);
    Image th = read_netpbm(th_path);
    if (vis.channels != 3)
        throw FormatError(vis_path + ": expected 3-channel visible image");
    if (th.channels != 1)
        throw FormatError(th_path + ": expected 1-channel thermal image");
    if (vis.width != th.width || vis.height != th.height)
        throw DimensionError("paired images disagree on size: " + vis_path + " is " +
                             std::to_string(vis.width) + "x" + std::to_string(vis.height) +
                             ", " + th_path + " is " + std::to_string(th.width) + "x" +
                             std::to_string(th.height));
    PairedSample s;
    s.visible = tensor_from_image(vis);
    s.thermal = tensor_from_image(th);
    s.stem = stem;
    return s;
}

PairedDataset load_with_manifest(const std::string& dir, const std::string& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + manifest_path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(manifest_path + ": empty manifest");
    if (split_csv(line) !=
        std::vector<std::string>{"stem", "split", "identity", "gender", "age_bin", "skin_tone"})
        throw FormatError(manifest_path + ": unexpected header \"" + line + "\"");
    PairedDataset ds;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 6)
            throw FormatError(manifest_path + ":" + std::to_string(lineno) +
                              ": expected 6 fields, got " + std::to_string(f.size()));
        const std::string& stem = f[0];
        if (!fs::exists(dir + "/" + stem + "_vis.ppm") ||
            !fs::exists(dir + "/" + stem + "_th.pgm")) {
            std::cerr << "warning: skipping " << stem
                      << ": one modality's file is missing\n";
            continue;
        }
        PairedSample s = load_pair_files(dir, stem);
        s.identity = parse_label_field(f[2], manifest_path, lineno);
        s.labels.gender = parse_label_field(f[3], manifest_path, lineno);
        s.labels.age_bin = parse_label_field(f[4], manifest_path, lineno);
        s.labels.skin_tone = parse_label_field(f[5], manifest_path, lineno);
        if (f[1] == "train")
            ds.train.push_back(std::move(s));
        else if (f[1] == "test")
            ds.test.push_back(std::move(s));
        else
            throw FormatError(manifest_path + ":" + std::to_string(lineno) +
                              ": unknown split \"" + f[1] + "\"");
    }
    return ds;
}

PairedDataset load_adhoc(const std::string& dir) {
    std::set<std::string> vis_stems, th_stems;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        auto ends_with = [&](const std::string& suf) {
            return name.size() > suf.size() &&
                   name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
        };
        if (ends_with("_vis.ppm"))
            vis_stems.insert(name.substr(0, name.size() - 8));
        else if (ends_with("_th.pgm"))
            th_stems.insert(name.substr(0, name.size() - 7));
    }
    std::map<std::string, AttributeLabels> labels;
    const std::string labels_path = dir + "/labels.csv";
    if (fs::exists(labels_path)) {
        std::ifstream in(labels_path, std::ios::binary);
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto f = split_csv(line);
            if (lineno == 1 && f.size() == 4 && f[0] == "filename") continue;
            if (f.size() != 4)
                throw FormatError(labels_path + ":" + std::to_string(lineno) +
                                  ": expected 4 fields, got " + std::to_string(f.size()));
            std::string stem = f[0];
            // accept either the bare stem or a full modality filename
            for (const char* suf : {"_vis.ppm", "_th.pgm"}) {
                const std::string s(suf);
                if (stem.size() > s.size() &&
                    stem.compare(stem.size() - s.size(), s.size(), s) == 0)
                    stem = stem.substr(0, stem.size() - s.size());
            }
            AttributeLabels l;
            l.gender = parse_label_field(f[1], labels_path, lineno);
            l.age_bin = parse_label_field(f[2], labels_path, lineno);
            l.skin_tone = parse_label_field(f[3], labels_path, lineno);
            labels[stem] = l;
        }
    }
    PairedDataset ds;
    for (const auto& stem : vis_stems) {
        if (!th_stems.count(stem)) {
            std::cerr << "warning: skipping " << stem << ": one modality's file is missing\n";
            continue;
        }
        PairedSample s = load_pair_files(dir, stem);
        auto it = labels.find(stem);
        if (it != labels.end()) s.labels = it->second;
        ds.train.push_back(std::move(s));
    }
    for (const auto& stem : th_stems)
        if (!vis_stems.count(stem))
            std::cerr << "warning: skipping " << stem << ": one modality's file is missing\n";
    return ds;
}

}  // namespace

PairedDataset load_paired_directory(const std::string& dir) {
    if (!fs::exists(dir) || !fs::is_directory(dir))
        throw ConfigError("dataset directory not found: " + dir);
    const std::string manifest_path = dir + "/manifest.csv";
    PairedDataset ds = fs::exists(manifest_path) ? load_with_manifest(dir, manifest_path)
                                                 : load_adhoc(dir);
    if (ds.train.empty() && ds.test.empty())
        std::cerr << "warning: no paired samples found in " << dir << "\n";
    return ds;
}

}  // namespace t2v
