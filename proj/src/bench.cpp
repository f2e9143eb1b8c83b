#include "t2v/ssm.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

namespace t2v {

namespace {

uint64_t time_once(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

// >= 2 warmup runs, then the median of the timed repeats.
uint64_t median_time(const std::function<void()>& fn, size_t repeats) {
    fn();
    fn();
    std::vector<uint64_t> times(repeats);
    for (auto& t : times) t = time_once(fn);
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace

std::vector<BenchRecord> bench_blocks(const std::vector<size_t>& seq_lens,
                                      size_t d_model, size_t heads, size_t d_state,
                                      size_t repeats) {
    if (seq_lens.empty()) throw ContractError("benchmark needs at least one sequence length");
    for (size_t i = 1; i < seq_lens.size(); ++i)
        if (seq_lens[i] <= seq_lens[i - 1])
            throw ContractError("benchmark sequence lengths must be ascending");
    repeats = std::max<size_t>(repeats, 5);

    Rng rng = Rng::stream(20260101, "bench");
    auto fwd = SSMBlockParams<float>::init(d_state, d_model, rng);
    auto bwd = SSMBlockParams<float>::init(d_state, d_model, rng);
    auto mhsa = MHSAParams<float>::init(heads, d_model, rng);
    size_t mamba_params = fwd.param_count() + bwd.param_count();

    std::vector<BenchRecord> out;
    for (size_t L : seq_lens) {
        Tensor<float> x = Tensor<float>::randn({L, d_model}, rng);
        NoGradGuard<float> ng;  // timing the inference path only
        try {
            BenchRecord r;
            r.block_kind = "mamba";
            r.seq_len = L;
            r.param_count = mamba_params;
            r.peak_memory_bytes = bimamba_peak_bytes(L, d_model, d_state);
            r.wall_time_ns = median_time([&] { bimamba_block(fwd, bwd, x); }, repeats);
            out.push_back(r);
        } catch (const std::exception&) {
            // measurement failure: leave this cell missing
        }
        try {
            BenchRecord r;
            r.block_kind = "mhsa";
            r.seq_len = L;
            r.param_count = mhsa.param_count();
            r.peak_memory_bytes = mhsa_peak_bytes(L, d_model);
            r.wall_time_ns = median_time([&] { mhsa_block(mhsa, x); }, repeats);
            out.push_back(r);
        } catch (const std::exception&) {
        }
    }
    return out;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRecord>& records) {
    std::ofstream f(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "block_kind,seq_len,param_count,peak_memory_bytes,wall_time_ns\n";
    for (const auto& r : records)
        f << r.block_kind << "," << r.seq_len << "," << r.param_count << ","
          << r.peak_memory_bytes << "," << r.wall_time_ns << "\n";
}

double bench_loglog_slope(const std::vector<BenchRecord>& records,
                          const std::string& kind) {
    std::vector<double> xs, ys;
    for (const auto& r : records)
        if (r.block_kind == kind) {
            xs.push_back(std::log(double(r.seq_len)));
            ys.push_back(std::log(double(r.wall_time_ns)));
        }
    if (xs.size() < 2) throw ContractError("slope needs at least two benchmark points");
    double n = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace t2v
