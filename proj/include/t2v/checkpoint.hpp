#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t2v/tensor.hpp"

namespace t2v {

// One serialized tensor; dtype picks which payload vector is live.
struct TensorEntry {
    DType dtype = DType::f32;
    std::vector<size_t> shape;
    std::vector<float> f32;
    std::vector<double> f64;

    static TensorEntry from(const Tensor<float>& t) {
        TensorEntry e;
        e.dtype = DType::f32;
        e.shape = t.shape();
        e.f32 = t.vec();
        return e;
    }
    static TensorEntry from(const Tensor<double>& t) {
        TensorEntry e;
        e.dtype = DType::f64;
        e.shape = t.shape();
        e.f64 = t.vec();
        return e;
    }
    Tensor<float> as_f32() const {
        if (dtype != DType::f32) throw ContractError("checkpoint entry is not f32");
        return Tensor<float>::from_data(shape, f32);
    }
    Tensor<double> as_f64() const {
        if (dtype != DType::f64) throw ContractError("checkpoint entry is not f64");
        return Tensor<double>::from_data(shape, f64);
    }
};

using NamedEntries = std::vector<std::pair<std::string, TensorEntry>>;

// Binary layout: magic "T2VL", version u32, entry count u32, then per entry
// name length u32, UTF-8 name, dtype u8 (0=f32, 1=f64), ndim u8, each dim
// u32, raw little-endian payload. Round trips are bit-exact.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const NamedEntries& entries);
NamedEntries load_checkpoint(const std::string& path);

// Convenience for f32 parameter lists (models store everything in f32).
void save_checkpoint_f32(const std::string& path,
                         const std::vector<std::pair<std::string, Tensor<float>>>& params);

// Copies values from loaded entries into existing (already shaped) parameter
// tensors by name; missing or mismatched entries raise errors naming the key.
void restore_into(const NamedEntries& entries,
                  std::vector<std::pair<std::string, Tensor<float>>> params);

bool checkpoint_has(const NamedEntries& entries, const std::string& name);

}  // namespace t2v
