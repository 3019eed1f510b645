#include "augcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace augcn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'A', 'U', 'G', 'C', 'N'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint '" + path + "' is truncated");
    return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, Tensor t) {
    blobs_.insert_or_assign(name, std::move(t));
}

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = blobs_.find(name);
    if (it == blobs_.end()) {
        throw std::out_of_range("checkpoint has no blob named '" + name + "'");
    }
    return it->second;
}

bool Checkpoint::contains(const std::string& name) const { return blobs_.count(name) != 0; }

void Checkpoint::put_scalar(const std::string& name, double v) {
    put(name, Tensor::scalar(v));
}

double Checkpoint::get_scalar(const std::string& name) const { return get(name).item(); }

void Checkpoint::put_string(const std::string& name, const std::string& s) {
    Tensor t({s.size()});
    for (std::size_t i = 0; i < s.size(); ++i) {
        t[i] = static_cast<double>(static_cast<unsigned char>(s[i]));
    }
    put(name, std::move(t));
}

std::string Checkpoint::get_string(const std::string& name) const {
    const Tensor& t = get(name);
    std::string s(t.size(), '\0');
    for (std::size_t i = 0; i < t.size(); ++i) s[i] = static_cast<char>(t[i]);
    return s;
}

void Checkpoint::put_rng_state(const std::string& name, std::uint64_t state) {
    Tensor t({2});
    t[0] = static_cast<double>(state >> 32);
    t[1] = static_cast<double>(state & 0xFFFFFFFFULL);
    put(name, std::move(t));
}

std::uint64_t Checkpoint::get_rng_state(const std::string& name) const {
    const Tensor& t = get(name);
    if (t.size() != 2) throw std::runtime_error("blob '" + name + "' is not an rng state");
    return (static_cast<std::uint64_t>(t[0]) << 32) | static_cast<std::uint64_t>(t[1]);
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(blobs_.size()));
    for (const auto& [name, t] : blobs_) {  // std::map iterates name-sorted
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d = 0; d < t.rank(); ++d) {
            write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.dim(d)));
        }
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("'" + path + "' is not a checkpoint file");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint '" + path + "' has unsupported version " +
                                 std::to_string(version));
    }
    const auto count = read_pod<std::uint32_t>(in, path);
    Checkpoint ckpt;
    for (std::uint32_t b = 0; b < count; ++b) {
        const auto name_len = read_pod<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw std::runtime_error("checkpoint '" + path + "' is truncated");
        const auto rank = read_pod<std::uint32_t>(in, path);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in, path));
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint '" + path + "' is truncated");
        ckpt.blobs_.emplace(std::move(name), std::move(t));
    }
    return ckpt;
}

}  // namespace augcn
