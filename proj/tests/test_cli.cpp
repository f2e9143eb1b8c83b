#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "t2v/checkpoint.hpp"
#include "t2v/cli.hpp"
#include "t2v/image.hpp"

using namespace t2v;
namespace fs = std::filesystem;

namespace {

// scratch tree for a test case, wiped on construction
struct Scratch {
    fs::path root;
    explicit Scratch(const std::string& name) {
        root = fs::temp_directory_path() / ("t2v_cli_" + name);
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Scratch() { fs::remove_all(root); }
    std::string dir(const std::string& sub) const { return (root / sub).string(); }
};

int run(std::vector<std::string> args) { return run_cli(args); }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

size_t line_count(const std::string& text) {
    size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("usage and flag validation") {
    CHECK(run({}) == 1);
    CHECK(run({"frobnicate"}) == 1);
    CHECK(run({"--help"}) == 0);
    CHECK(run({"gen-data", "--help"}) == 0);
    CHECK(run({"gen-data", "stray"}) == 1);          // bare token
    CHECK(run({"gen-data", "--seed"}) == 1);         // missing value
    CHECK(run({"gen-data", "--bogus", "3"}) == 1);              // unknown key
    CHECK(run({"gen-data", "--data.identities", "xyz"}) == 1);  // non-numeric
}

TEST_CASE("config file values with flag overrides") {
    Scratch s("config");
    std::string conf = s.dir("my.conf");
    {
        std::ofstream out(conf);
        out << "# synthetic corpus size\n"
            << "data.identities = 4\n"
            << "data.per_identity = 2\n"
            << "data.image_size = 16\n";
    }
    REQUIRE(run({"gen-data", "--config", conf, "--out", s.dir("a"), "--seed", "3"}) == 0);
    // 4 identities x 2 images -> 8 rows + header
    CHECK(line_count(slurp(s.dir("a") + "/manifest.csv")) == 9);

    // the flag beats the file
    REQUIRE(run({"gen-data", "--config", conf, "--data.identities", "6", "--out", s.dir("b"),
                 "--seed", "3"}) == 0);
    CHECK(line_count(slurp(s.dir("b") + "/manifest.csv")) == 13);

    // a config file with an unknown key is rejected up front
    std::string bad = s.dir("bad.conf");
    {
        std::ofstream out(bad);
        out << "data.identitties = 4\n";
    }
    CHECK(run({"gen-data", "--config", bad, "--out", s.dir("c")}) == 1);
}

TEST_CASE("gen-data is byte-identical at a fixed seed") {
    Scratch s("det");
    std::vector<std::string> base = {"gen-data", "--data.identities", "5", "--data.per_identity",
                                     "2",        "--data.image_size", "16", "--seed", "11"};
    auto with_out = [&](const std::string& out) {
        std::vector<std::string> a = base;
        a.push_back("--out");
        a.push_back(out);
        return a;
    };
    REQUIRE(run(with_out(s.dir("r1"))) == 0);
    REQUIRE(run(with_out(s.dir("r2"))) == 0);

    size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(s.dir("r1"))) {
        if (!e.is_regular_file()) continue;
        fs::path rel = fs::relative(e.path(), s.dir("r1"));
        CHECK(slurp(e.path().string()) == slurp((fs::path(s.dir("r2")) / rel).string()));
        ++compared;
    }
    // 5 ids x 2 instances x 2 modalities + manifest
    CHECK(compared == 21);
}

TEST_CASE("stage dependencies are reported with the missing prior stage") {
    Scratch s("deps");
    std::string data = s.dir("data"), ckpt = s.dir("ckpt");

    // nothing exists yet: every trainer should point at gen-data
    CHECK(run({"train-vqvae", "--modality", "visible", "--data.dir", data, "--ckpt.dir",
               ckpt}) == 2);
    CHECK(run({"train-classifier", "--stage", "teacher", "--data.dir", data, "--ckpt.dir",
               ckpt}) == 2);

    // sample with no codec checkpoints names the visible codec stage
    CHECK(run({"sample", "--variant", "baseline", "--data.dir", data, "--ckpt.dir", ckpt}) == 2);

    REQUIRE(run({"gen-data", "--data.identities", "4", "--data.per_identity", "2",
                 "--data.image_size", "16", "--out", data, "--seed", "2"}) == 0);

    // dataset alone is not enough for the diffusion stage
    CHECK(run({"train-diffusion", "--variant", "baseline", "--data.dir", data, "--ckpt.dir",
               ckpt}) == 2);
    // student before teacher
    CHECK(run({"train-classifier", "--stage", "student", "--data.dir", data, "--ckpt.dir",
               ckpt}) == 2);

    // bad variant and modality spellings are usage errors, not dependency ones
    CHECK(run({"train-diffusion", "--variant", "E", "--data.dir", data, "--ckpt.dir", ckpt}) ==
          1);
    CHECK(run({"train-vqvae", "--modality", "infrared", "--data.dir", data, "--ckpt.dir",
               ckpt}) == 1);
}

TEST_CASE("miniature pipeline end to end across variants") {
    Scratch s("e2e");
    std::string data = s.dir("data"), ckpt = s.dir("ckpt");
    std::vector<std::string> common = {"--data.dir", data, "--ckpt.dir", ckpt, "--seed", "5"};
    auto cmd = [&](std::vector<std::string> head) {
        head.insert(head.end(), common.begin(), common.end());
        return head;
    };

    REQUIRE(run(cmd({"gen-data", "--data.identities", "6", "--data.per_identity", "3",
                     "--data.image_size", "16", "--out", data})) == 0);
    REQUIRE(run(cmd({"train-vqvae", "--modality", "visible", "--vqvae.epochs", "2"})) == 0);
    REQUIRE(run(cmd({"train-vqvae", "--modality", "thermal", "--vqvae.epochs", "2"})) == 0);
    REQUIRE(run(cmd({"train-classifier", "--stage", "teacher", "--classifier.epochs", "2"})) ==
            0);
    REQUIRE(run(cmd({"train-classifier", "--stage", "student", "--classifier.distill_epochs",
                     "2"})) == 0);
    CHECK(fs::exists(ckpt + "/vqvae_visible.ckpt"));
    CHECK(fs::exists(ckpt + "/vqvae_thermal.ckpt"));
    CHECK(fs::exists(ckpt + "/teacher.ckpt"));
    CHECK(fs::exists(ckpt + "/student.ckpt"));

    std::vector<std::string> diff_small = {"--diffusion.epochs", "1", "--diffusion.timesteps",
                                           "10", "--embedder.epochs", "1"};
    auto train_variant = [&](const std::string& v) {
        std::vector<std::string> a = cmd({"train-diffusion", "--variant", v});
        a.insert(a.end(), diff_small.begin(), diff_small.end());
        REQUIRE(run(a) == 0);
    };
    train_variant("baseline");
    train_variant("B");
    train_variant("C");

    // conditioning structure: the learned prompt table lives in C's
    // checkpoint and not in B's (which uses fixed one-hot rows)
    CHECK(checkpoint_has(load_checkpoint(ckpt + "/diffusion_C.ckpt"), "prompt.table"));
    CHECK(!checkpoint_has(load_checkpoint(ckpt + "/diffusion_B.ckpt"), "prompt.table"));
    CHECK(fs::exists(ckpt + "/diffusion_baseline_log.csv"));
    std::string log = slurp(ckpt + "/diffusion_baseline_log.csv");
    CHECK(log.rfind("step,loss_eq1,loss_id\n", 0) == 0);

    // translate a couple of images and read one back
    REQUIRE(run(cmd({"sample", "--variant", "baseline", "--sample.count", "2", "--out",
                     s.dir("gen")})) == 0);
    size_t ppm_count = 0;
    for (const auto& e : fs::directory_iterator(s.dir("gen")))
        if (e.path().extension() == ".ppm") {
            Image img = read_netpbm(e.path().string());
            CHECK(img.channels == 3);
            CHECK(img.width == 16);
            CHECK(img.height == 16);
            ++ppm_count;
        }
    CHECK(ppm_count == 2);
    CHECK(slurp(s.dir("gen") + "/labels.csv").rfind("stem,gender,age_bin,skin_tone\n", 0) == 0);

    // evaluation writes the metric report with every expected row
    REQUIRE(run(cmd({"evaluate", "--variant", "baseline", "--eval.subset", "4", "--out",
                     s.dir("report.csv")})) == 0);
    std::string report = slurp(s.dir("report.csv"));
    CHECK(report.rfind("metric,value\n", 0) == 0);
    for (const char* row : {"ssim_mean", "psnr_mean", "frechet", "rank1", "vr_far_1pct",
                            "vr_far_0p1pct", "attr_match"})
        CHECK(report.find(std::string("\n") + row + ",") != std::string::npos);
    CHECK(fs::exists(ckpt + "/identity.ckpt"));  // fitted on demand

    // wrong-variant checkpoint mismatch is a hard error, not a silent fallback
    CHECK(run(cmd({"sample", "--variant", "A"})) == 2);  // never trained
}
