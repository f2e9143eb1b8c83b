#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "gradcheck_util.hpp"
#include "t2v/ssm.hpp"

using namespace t2v;
using Td = Tensor<double>;
using gradcheck::max_grad_rel_err;

namespace {

SSMBlockParams<double> scalar_params(double a, double b, double c, double d) {
    SSMBlockParams<double> p;
    p.d_state = 1;
    p.d_model = 1;
    p.a = Td::from_data({1}, {a});
    p.B = Td::from_data({1, 1}, {b});
    p.C = Td::from_data({1, 1}, {c});
    p.d = Td::from_data({1}, {d});
    return p;
}

SSMBlockParams<double> zero_params(size_t N, size_t M) {
    SSMBlockParams<double> p;
    p.d_state = N;
    p.d_model = M;
    p.a = Td::zeros({N});
    p.B = Td::zeros({N, M});
    p.C = Td::zeros({M, N});
    p.d = Td::zeros({M});
    return p;
}

Td col(std::vector<double> v) {
    size_t n = v.size();
    return Td::from_data({n, 1}, std::move(v));
}

}  // namespace

TEST_CASE("scan with zero transition and feedthrough is memoryless") {
    auto p = scalar_params(0.0, 0.7, 1.3, 0.0);
    Td x = col({1, -2, 3, 0.5});
    Td y = ssm_scan(p, x, Td::zeros({1}));
    for (size_t t = 0; t < 4; ++t)
        CHECK(y.vec()[t] == doctest::Approx(0.7 * 1.3 * x.vec()[t]));
}

TEST_CASE("scan with identity transition computes prefix sums") {
    auto p = scalar_params(1.0, 1.0, 1.0, 0.0);
    Td y = ssm_scan(p, col({1, 2, 3}), Td::zeros({1}));
    CHECK(y.vec() == std::vector<double>{1, 3, 6});
}

TEST_CASE("scan half-decay hand recurrence") {
    auto p = scalar_params(0.5, 1.0, 2.0, 0.0);
    Td y = ssm_scan(p, col({1, 1}), Td::zeros({1}));
    CHECK(y.vec()[0] == doctest::Approx(2.0));
    CHECK(y.vec()[1] == doctest::Approx(3.0));
}

TEST_CASE("scan shape validation") {
    auto p = scalar_params(0.5, 1.0, 2.0, 0.0);
    CHECK_THROWS_AS(ssm_scan(p, Td::zeros({3, 2}), Td::zeros({1})), DimensionError);
    CHECK_THROWS_AS(ssm_scan(p, Td::zeros({3, 1}), Td::zeros({2})), DimensionError);
    CHECK_THROWS_AS(ssm_scan_blocked(p, Td::zeros({3, 1}), Td::zeros({1}), 0),
                    ContractError);
}

TEST_CASE("blocked scan is bit-identical to the plain scan") {
    Rng rng = Rng::stream(201, "blocked");
    for (int trial = 0; trial < 10; ++trial) {
        size_t N = 1 + rng.below(6), M = 1 + rng.below(5);
        size_t L = 1 + rng.below(512);
        auto p = SSMBlockParams<double>::init(N, M, rng, trial % 2 == 1);
        Td x = Td::randn({L, M}, rng);
        Td h0 = Td::randn({N}, rng);
        Td base = ssm_scan(p, x, h0);
        for (size_t block : {size_t(1), size_t(64), L}) {
            Td alt = ssm_scan_blocked(p, x, h0, block);
            for (size_t i = 0; i < base.numel(); ++i)
                CHECK(alt.vec()[i] == base.vec()[i]);  // exact: same op order
        }
    }
}

TEST_CASE("blocked scan at the contract point L=257 block=64") {
    Rng rng = Rng::stream(202, "l257");
    auto p = SSMBlockParams<double>::init(4, 3, rng);
    Td x = Td::randn({257, 3}, rng);
    Td h0 = Td::zeros({4});
    Td a = ssm_scan(p, x, h0);
    Td b = ssm_scan_blocked(p, x, h0, 64);
    double worst = 0;
    for (size_t i = 0; i < a.numel(); ++i)
        worst = std::max(worst, std::fabs(a.vec()[i] - b.vec()[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("bimamba with zero parameters is the identity residual") {
    auto f = zero_params(3, 2);
    auto b = zero_params(3, 2);
    Rng rng = Rng::stream(203, "zero");
    Td x = Td::randn({5, 2}, rng);
    Td y = bimamba_block(f, b, x);
    for (size_t i = 0; i < x.numel(); ++i) CHECK(y.vec()[i] == x.vec()[i]);
}

TEST_CASE("bimamba on a palindrome with tied parameters is palindromic") {
    Rng rng = Rng::stream(204, "palin");
    auto p = SSMBlockParams<double>::init(4, 2, rng);
    Td x = Td::zeros({6, 2});
    for (size_t t = 0; t < 3; ++t)
        for (size_t m = 0; m < 2; ++m) {
            double v = rng.uniform(-1, 1);
            x.vec()[t * 2 + m] = v;
            x.vec()[(5 - t) * 2 + m] = v;
        }
    Td y = bimamba_block(p, p, x);
    for (size_t t = 0; t < 6; ++t)
        for (size_t m = 0; m < 2; ++m)
            CHECK(y.vec()[t * 2 + m] == doctest::Approx(y.vec()[(5 - t) * 2 + m]));
}

TEST_CASE("bimamba prefix-sum direction plus residual hand values") {
    auto f = scalar_params(1.0, 1.0, 1.0, 0.0);
    auto b = scalar_params(0.0, 0.0, 0.0, 0.0);
    Td y = bimamba_block(f, b, col({1, 2, 3}));
    CHECK(y.vec() == std::vector<double>{2, 5, 9});
}

TEST_CASE("bimamba decomposition and direction-swap symmetry") {
    Rng rng = Rng::stream(205, "decomp");
    auto f = SSMBlockParams<double>::init(3, 2, rng);
    auto b = SSMBlockParams<double>::init(3, 2, rng);
    Td x = Td::randn({7, 2}, rng);
    Td y = bimamba_block(f, b, x);
    Td yf = ssm_scan(f, x, Td::zeros({3}));
    Td yb = reverse_rows(ssm_scan(b, reverse_rows(x), Td::zeros({3})));
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(y.vec()[i] - x.vec()[i] ==
              doctest::Approx(yf.vec()[i] + yb.vec()[i]).epsilon(1e-12));

    // Bi_{f,b}(reverse(x)) = reverse(Bi_{b,f}(x))
    Td lhs = bimamba_block(f, b, reverse_rows(x));
    Td rhs = reverse_rows(bimamba_block(b, f, x));
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(lhs.vec()[i] == doctest::Approx(rhs.vec()[i]).epsilon(1e-12));
}

TEST_CASE("mhsa single token attends only to itself") {
    Rng rng = Rng::stream(206, "mhsa1");
    auto p = MHSAParams<double>::init(2, 6, rng);
    Td x = Td::randn({1, 6}, rng);
    std::vector<Td> probs;
    Td y = mhsa_block(p, x, &probs);
    CHECK(probs.size() == 2);
    for (auto& pr : probs) CHECK(pr.vec()[0] == doctest::Approx(1.0));
    // output = value path + residual
    Td v = add(matmul(x, p.Wv), p.bv);
    Td expect = add(add(matmul(v, p.Wo), p.bo), x);
    for (size_t i = 0; i < 6; ++i)
        CHECK(y.vec()[i] == doctest::Approx(expect.vec()[i]));
}

TEST_CASE("mhsa rows sum to one and identical tokens give identical rows") {
    Rng rng = Rng::stream(207, "mhsarows");
    auto p = MHSAParams<double>::init(4, 8, rng);
    Td x = Td::randn({5, 8}, rng);
    std::vector<Td> probs;
    mhsa_block(p, x, &probs);
    for (auto& pr : probs)
        for (size_t r = 0; r < 5; ++r) {
            double s = 0;
            for (size_t c = 0; c < 5; ++c) s += pr.vec()[r * 5 + c];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }

    Td row = Td::randn({1, 8}, rng);
    Td same = Td::zeros({4, 8});
    for (size_t t = 0; t < 4; ++t)
        std::copy(row.vec().begin(), row.vec().end(), same.vec().begin() + t * 8);
    Td y = mhsa_block(p, same);
    for (size_t t = 1; t < 4; ++t)
        for (size_t m = 0; m < 8; ++m)
            CHECK(y.vec()[t * 8 + m] == doctest::Approx(y.vec()[m]));
}

TEST_CASE("mhsa is permutation equivariant") {
    Rng rng = Rng::stream(208, "perm");
    auto p = MHSAParams<double>::init(2, 4, rng);
    Td x = Td::randn({6, 4}, rng);
    std::vector<size_t> perm = {3, 0, 5, 1, 4, 2};
    Td xp = Td::zeros({6, 4});
    for (size_t t = 0; t < 6; ++t)
        for (size_t m = 0; m < 4; ++m) xp.vec()[t * 4 + m] = x.vec()[perm[t] * 4 + m];
    Td y = mhsa_block(p, x);
    Td yp = mhsa_block(p, xp);
    for (size_t t = 0; t < 6; ++t)
        for (size_t m = 0; m < 4; ++m)
            CHECK(yp.vec()[t * 4 + m] == doctest::Approx(y.vec()[perm[t] * 4 + m]).epsilon(1e-9));
    CHECK_THROWS_AS(MHSAParams<double>::init(3, 8, rng), ConfigError);
}

TEST_CASE("gradcheck: ssm scan through all parameters") {
    Rng rng = Rng::stream(209, "ssmgrad");
    for (int trial = 0; trial < 25; ++trial) {
        bool sel = trial % 2 == 1;
        auto p = SSMBlockParams<double>::init(3, 2, rng, sel);
        Td x = Td::randn({4, 2}, rng);
        Td h0 = Td::randn({3}, rng);
        std::vector<Td> in = {x, h0, p.a, p.B, p.C, p.d};
        if (sel) {
            in.push_back(p.Bg);
            in.push_back(p.Cg);
        }
        auto f = [&] {
            Td y = ssm_scan(p, x, h0);
            Td w = Td::zeros(y.shape());
            for (size_t i = 0; i < w.numel(); ++i)
                w.vec()[i] = 0.3 + 0.1 * double(i % 7) * (i % 2 ? -1.0 : 1.0);
            return sum(mul(y, w));
        };
        CHECK(max_grad_rel_err(in, f) < 1e-4);
    }
}

TEST_CASE("gradcheck: bimamba block with conv branch") {
    Rng rng = Rng::stream(210, "bigrad");
    for (int trial = 0; trial < 10; ++trial) {
        bool conv = trial % 2 == 1;
        auto f = SSMBlockParams<double>::init(2, 3, rng, false, conv, 3);
        auto b = SSMBlockParams<double>::init(2, 3, rng, false, conv, 3);
        Td x = Td::randn({5, 3}, rng);
        std::vector<Td> in = {x, f.a, f.B, f.C, f.d, b.a, b.B, b.C, b.d};
        if (conv) {
            in.push_back(f.conv_w);
            in.push_back(f.conv_b);
            in.push_back(b.conv_w);
            in.push_back(b.conv_b);
        }
        auto fn = [&] { return mean(square(bimamba_block(f, b, x))); };
        CHECK(max_grad_rel_err(in, fn) < 1e-4);
    }
}

TEST_CASE("gradcheck: mhsa block") {
    Rng rng = Rng::stream(211, "mhsagrad");
    for (int trial = 0; trial < 10; ++trial) {
        auto p = MHSAParams<double>::init(2, 4, rng);
        Td x = Td::randn({3, 4}, rng);
        std::vector<Td> in = {x, p.Wq, p.Wk, p.Wv, p.Wo, p.bq, p.bk, p.bv, p.bo};
        auto fn = [&] { return mean(square(mhsa_block(p, x))); };
        CHECK(max_grad_rel_err(in, fn) < 1e-4);
    }
}

TEST_CASE("parameter counts are L-free and analytically correct") {
    Rng rng = Rng::stream(212, "params");
    auto f = SSMBlockParams<float>::init(16, 64, rng);
    auto b = SSMBlockParams<float>::init(16, 64, rng);
    auto m = MHSAParams<float>::init(4, 64, rng);
    // per direction: N + N*M + M*N + M; two directions
    size_t mamba = 2 * (16 + 16 * 64 + 64 * 16 + 64);
    CHECK(f.param_count() + b.param_count() == mamba);
    CHECK(mamba == 4256);
    CHECK(m.param_count() == 4 * 64 * 64 + 4 * 64);
    CHECK(mamba < m.param_count());
}

TEST_CASE("benchmark harness emits well-formed records and CSV") {
    auto recs = bench_blocks({8, 16}, 16, 2, 4, 5);
    CHECK(recs.size() == 4);
    size_t mamba_params = 0, mhsa_params = 0;
    for (const auto& r : recs) {
        CHECK(r.param_count > 0);
        CHECK(r.wall_time_ns > 0);
        if (r.block_kind == "mamba") {
            if (!mamba_params) mamba_params = r.param_count;
            CHECK(r.param_count == mamba_params);  // independent of L
        } else {
            if (!mhsa_params) mhsa_params = r.param_count;
            CHECK(r.param_count == mhsa_params);
        }
    }
    std::string path = "bench_test_out.csv";
    write_bench_csv(path, recs);
    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    CHECK(header == "block_kind,seq_len,param_count,peak_memory_bytes,wall_time_ns");
    size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);
    in.close();
    std::remove(path.c_str());

    CHECK_THROWS_AS(bench_blocks({}, 16, 2, 4, 5), ContractError);
    CHECK_THROWS_AS(bench_blocks({16, 8}, 16, 2, 4, 5), ContractError);
}
