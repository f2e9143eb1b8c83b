#include "t2v/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian raw bytes");

namespace t2v {

namespace {

// Reader that tracks its byte offset so truncation errors can say where.
struct ByteReader {
    std::ifstream f;
    size_t offset = 0;
    std::string path;

    ByteReader(const std::string& p) : f(p, std::ios::binary), path(p) {
        if (!f) throw FormatError("cannot open checkpoint " + p);
    }
    void read(void* dst, size_t n) {
        f.read(reinterpret_cast<char*>(dst), std::streamsize(n));
        if (size_t(f.gcount()) != n)
            throw CorruptionError("truncated checkpoint " + path,
                                  offset + size_t(f.gcount()));
        offset += n;
    }
    uint32_t u32() {
        uint32_t v;
        read(&v, 4);
        return v;
    }
    uint8_t u8() {
        uint8_t v;
        read(&v, 1);
        return v;
    }
};

void put_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedEntries& entries) {
    std::set<std::string> seen;
    for (const auto& [name, e] : entries) {
        if (!seen.insert(name).second)
            throw ContractError("duplicate checkpoint entry name: " + name);
        size_t n = shape_numel(e.shape);
        size_t have = e.dtype == DType::f32 ? e.f32.size() : e.f64.size();
        if (n != have)
            throw DimensionError("entry " + name + " payload does not match its shape");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f.write("T2VL", 4);
    put_u32(f, kCheckpointVersion);
    put_u32(f, uint32_t(entries.size()));
    for (const auto& [name, e] : entries) {
        put_u32(f, uint32_t(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        uint8_t dtype = e.dtype == DType::f32 ? 0 : 1;
        uint8_t ndim = uint8_t(e.shape.size());
        f.write(reinterpret_cast<const char*>(&dtype), 1);
        f.write(reinterpret_cast<const char*>(&ndim), 1);
        for (size_t d : e.shape) put_u32(f, uint32_t(d));
        if (e.dtype == DType::f32)
            f.write(reinterpret_cast<const char*>(e.f32.data()),
                    std::streamsize(e.f32.size() * 4));
        else
            f.write(reinterpret_cast<const char*>(e.f64.data()),
                    std::streamsize(e.f64.size() * 8));
    }
    if (!f) throw FormatError("short write to " + path);
}

NamedEntries load_checkpoint(const std::string& path) {
    ByteReader r(path);
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, "T2VL", 4) != 0)
        throw FormatError("bad checkpoint magic in " + path);
    uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                          " in " + path);
    uint32_t count = r.u32();
    NamedEntries out;
    out.reserve(count);
    std::set<std::string> seen;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = r.u32();
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        if (!seen.insert(name).second)
            throw FormatError("duplicate entry name '" + name + "' in " + path);
        uint8_t dtype = r.u8();
        if (dtype > 1)
            throw FormatError("unknown dtype code " + std::to_string(dtype) + " in " + path);
        uint8_t ndim = r.u8();
        TensorEntry e;
        e.dtype = dtype == 0 ? DType::f32 : DType::f64;
        e.shape.resize(ndim);
        size_t numel = 1;
        for (uint8_t d = 0; d < ndim; ++d) {
            e.shape[d] = r.u32();
            numel *= e.shape[d];
        }
        if (dtype == 0) {
            e.f32.resize(numel);
            r.read(e.f32.data(), numel * 4);
        } else {
            e.f64.resize(numel);
            r.read(e.f64.data(), numel * 8);
        }
        out.emplace_back(std::move(name), std::move(e));
    }
    return out;
}

void save_checkpoint_f32(const std::string& path,
                         const std::vector<std::pair<std::string, Tensor<float>>>& params) {
    NamedEntries entries;
    entries.reserve(params.size());
    for (const auto& [name, t] : params) entries.emplace_back(name, TensorEntry::from(t));
    save_checkpoint(path, entries);
}

bool checkpoint_has(const NamedEntries& entries, const std::string& name) {
    for (const auto& [n, e] : entries)
        if (n == name) return true;
    return false;
}

void restore_into(const NamedEntries& entries,
                  std::vector<std::pair<std::string, Tensor<float>>> params) {
    for (auto& [name, t] : params) {
        bool found = false;
        for (const auto& [n, e] : entries) {
            if (n != name) continue;
            if (e.shape != t.shape())
                throw DimensionError("checkpoint entry " + name + " has shape " +
                                     shape_str(e.shape) + ", expected " +
                                     shape_str(t.shape()));
            Tensor<float> src = e.as_f32();
            std::copy(src.vec().begin(), src.vec().end(), t.vec().begin());
            found = true;
            break;
        }
        if (!found) throw FormatError("checkpoint is missing entry " + name);
    }
}

}  // namespace t2v
