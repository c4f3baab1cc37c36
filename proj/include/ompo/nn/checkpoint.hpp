#pragma once

// Binary checkpoint format (all integers and floats little-endian):
//
//   magic        8 bytes  "OMPOCKPT"
//   version      u32      = 1
//   n_entries    u32
//   per entry:
//     name_len   u32, name bytes (UTF-8, no terminator)
//     input_dim  u64, output_dim u64
//     n_hidden   u64, hidden widths u64[n_hidden]
//     activation u8   (0 = elu, 1 = tanh, 2 = relu)
//     n_params   u64, params f64[n_params]
//     adam step  u64, learning_rate f64, beta1 f64, beta2 f64, epsilon f64
//     adam m     f64[n_params], adam v f64[n_params]

#include "ompo/nn/adam.hpp"
#include "ompo/nn/mlp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompo::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct CheckpointEntry {
    std::string name;
    MlpSpec spec;
    ParamVector params;
    AdamState adam;

    bool operator==(const CheckpointEntry&) const = default;
};

inline constexpr std::array<char, 8> kCheckpointMagic{'O', 'M', 'P', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class Writer {
public:
    explicit Writer(std::vector<char>& out) : out_(out) {}
    template <class T>
    void put(T value) {
        char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        out_.insert(out_.end(), bytes, bytes + sizeof(T));
    }
    void put_doubles(const std::vector<double>& v) {
        for (double x : v) put(x);
    }

private:
    std::vector<char>& out_;
};

class Reader {
public:
    explicit Reader(const std::vector<char>& in) : in_(in) {}
    template <class T>
    T get() {
        if (pos_ + sizeof(T) > in_.size()) throw std::runtime_error("checkpoint: truncated file");
        T value;
        std::memcpy(&value, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::vector<double> get_doubles(std::size_t n) {
        if (n > (in_.size() - pos_) / sizeof(double)) throw std::runtime_error("checkpoint: truncated file");
        std::vector<double> v(n);
        for (auto& x : v) x = get<double>();
        return v;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    const std::vector<char>& in_;
    std::size_t pos_ = 0;
};

inline std::uint8_t activation_code(Activation a) { return static_cast<std::uint8_t>(a); }

}  // namespace detail

inline std::vector<char> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
    std::vector<char> bytes(kCheckpointMagic.begin(), kCheckpointMagic.end());
    detail::Writer w(bytes);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        check_params(e.spec, e.params);
        if (e.adam.m.size() != e.params.size() || e.adam.v.size() != e.params.size())
            throw std::invalid_argument("checkpoint: Adam state does not match parameters of " + e.name);
        w.put(static_cast<std::uint32_t>(e.name.size()));
        bytes.insert(bytes.end(), e.name.begin(), e.name.end());
        w.put(static_cast<std::uint64_t>(e.spec.input_dim));
        w.put(static_cast<std::uint64_t>(e.spec.output_dim));
        w.put(static_cast<std::uint64_t>(e.spec.hidden_dims.size()));
        for (auto h : e.spec.hidden_dims) w.put(static_cast<std::uint64_t>(h));
        w.put(detail::activation_code(e.spec.activation));
        w.put(static_cast<std::uint64_t>(e.params.size()));
        w.put_doubles(e.params.values());
        w.put(e.adam.step);
        w.put(e.adam.learning_rate);
        w.put(e.adam.beta1);
        w.put(e.adam.beta2);
        w.put(e.adam.epsilon);
        w.put_doubles(e.adam.m);
        w.put_doubles(e.adam.v);
    }
    return bytes;
}

inline std::vector<CheckpointEntry> decode_checkpoint(const std::vector<char>& bytes) {
    if (bytes.size() < kCheckpointMagic.size() ||
        !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
        throw std::runtime_error("checkpoint: bad magic");
    std::vector<char> body(bytes.begin() + kCheckpointMagic.size(), bytes.end());
    detail::Reader r(body);
    if (r.get<std::uint32_t>() != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
    const auto n = r.get<std::uint32_t>();
    std::vector<CheckpointEntry> entries;
    for (std::uint32_t k = 0; k < n; ++k) {
        CheckpointEntry e;
        const auto name_len = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < name_len; ++i) e.name.push_back(r.get<char>());
        e.spec.input_dim = r.get<std::uint64_t>();
        e.spec.output_dim = r.get<std::uint64_t>();
        e.spec.hidden_dims.resize(r.get<std::uint64_t>());
        for (auto& h : e.spec.hidden_dims) h = r.get<std::uint64_t>();
        const auto act = r.get<std::uint8_t>();
        if (act > 2) throw std::runtime_error("checkpoint: bad activation code");
        e.spec.activation = static_cast<Activation>(act);
        e.spec.validate();
        const auto n_params = r.get<std::uint64_t>();
        if (n_params != e.spec.param_count()) throw std::runtime_error("checkpoint: parameter count disagrees with spec");
        e.params = ParamVector(r.get_doubles(n_params));
        e.adam.step = r.get<std::uint64_t>();
        e.adam.learning_rate = r.get<double>();
        e.adam.beta1 = r.get<double>();
        e.adam.beta2 = r.get<double>();
        e.adam.epsilon = r.get<double>();
        e.adam.m = r.get_doubles(n_params);
        e.adam.v = r.get_doubles(n_params);
        entries.push_back(std::move(e));
    }
    if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
    return entries;
}

inline void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    const auto bytes = encode_checkpoint(entries);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace ompo::nn
