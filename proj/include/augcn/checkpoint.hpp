#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "augcn/tensor.hpp"

namespace augcn {

/// Binary checkpoint: magic "AUGCN", a u32 format version, a u32 blob
/// count, then name-sorted, length-prefixed named f64 tensor blobs
/// (u32 name length, name bytes, u32 rank, u64 dims, doubles), all
/// little-endian. Strings and scalars ride along as small tensors, so a
/// load/save round trip is byte-identical.
class Checkpoint {
public:
    static constexpr std::uint32_t kVersion = 1;

    void put(const std::string& name, Tensor t);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    void put_scalar(const std::string& name, double v);
    double get_scalar(const std::string& name) const;

    void put_string(const std::string& name, const std::string& s);
    std::string get_string(const std::string& name) const;

    /// Stores a 64-bit rng state as two exactly-representable 32-bit halves.
    void put_rng_state(const std::string& name, std::uint64_t state);
    std::uint64_t get_rng_state(const std::string& name) const;

    const std::map<std::string, Tensor>& blobs() const { return blobs_; }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

private:
    std::map<std::string, Tensor> blobs_;
};

}  // namespace augcn
