#pragma once

#include <cstdio>
#include <map>
#include <string>

#include "streamchar/core.hpp"

namespace streamchar {

// Named trainable arrays plus matching gradient buffers. Checkpoint unit.
class ParameterSet {
public:
    Tensor& add(const std::string& name, Tensor init) {
        require(!entries_.count(name), "ParameterSet: duplicate name " + name);
        Entry e;
        e.value = std::move(init);
        e.grad = Tensor::zeros(e.value.rows, e.value.cols);
        return entries_.emplace(name, std::move(e)).first->second.value;
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor& value(const std::string& name) { return entry(name).value; }
    const Tensor& value(const std::string& name) const {
        auto it = entries_.find(name);
        require(it != entries_.end(), "ParameterSet: unknown name " + name);
        return it->second.value;
    }
    Tensor& grad(const std::string& name) { return entry(name).grad; }

    void zero_grad() {
        for (auto& [k, e] : entries_)
            std::fill(e.grad.v.begin(), e.grad.v.end(), 0.0);
    }

    bool grads_finite() const {
        for (const auto& [k, e] : entries_)
            for (double g : e.grad.v)
                if (!std::isfinite(g)) return false;
        return true;
    }

    // Plain gradient descent; the learning rate is the literal step size.
    void sgd_step(double lr) {
        for (auto& [k, e] : entries_)
            for (std::size_t i = 0; i < e.value.size(); ++i)
                e.value.v[i] -= lr * e.grad.v[i];
        ++revision_;
    }

    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++adam_t_;
        double bc1 = 1.0 - std::pow(beta1, adam_t_);
        double bc2 = 1.0 - std::pow(beta2, adam_t_);
        for (auto& [k, e] : entries_) {
            if (e.m.size() == 0) {
                e.m = Tensor::zeros(e.value.rows, e.value.cols);
                e.vv = Tensor::zeros(e.value.rows, e.value.cols);
            }
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                double g = e.grad.v[i];
                e.m.v[i] = beta1 * e.m.v[i] + (1.0 - beta1) * g;
                e.vv.v[i] = beta2 * e.vv.v[i] + (1.0 - beta2) * g * g;
                double mh = e.m.v[i] / bc1, vh = e.vv.v[i] / bc2;
                e.value.v[i] -= lr * mh / (std::sqrt(vh) + eps);
            }
        }
        ++revision_;
    }

    std::size_t count() const { return entries_.size(); }
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& [k, e] : entries_) n += e.value.size();
        return n;
    }

    std::uint64_t revision() const { return revision_; }

    std::uint64_t fingerprint() const {
        std::uint64_t h = 0x50415241u;
        for (const auto& [k, e] : entries_) {
            for (char c : k) h = hash_combine(h, static_cast<std::uint64_t>(c));
            for (double x : e.value.v) {
                std::uint64_t bits;
                std::memcpy(&bits, &x, sizeof(bits));
                h = hash_combine(h, bits);
            }
        }
        return h;
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& [k, e] : entries_) fn(k, e.value, e.grad);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& [k, e] : entries_) fn(k, e.value);
    }

    // Copy values (not optimizer state) from another set with identical layout.
    void copy_values_from(const ParameterSet& other) {
        require(entries_.size() == other.entries_.size(), "copy_values_from: layout mismatch");
        auto it = other.entries_.begin();
        for (auto& [k, e] : entries_) {
            require(k == it->first && e.value.same_shape(it->second.value),
                    "copy_values_from: layout mismatch at " + k);
            e.value = it->second.value;
            ++it;
        }
        ++revision_;
    }

private:
    struct Entry {
        Tensor value, grad;
        Tensor m, vv;  // Adam state
    };

    Entry& entry(const std::string& name) {
        auto it = entries_.find(name);
        require(it != entries_.end(), "ParameterSet: unknown name " + name);
        return it->second;
    }

    std::map<std::string, Entry> entries_;  // ordered: deterministic iteration
    std::uint64_t revision_ = 0;
    std::uint64_t adam_t_ = 0;
};

// ---- SCK1 checkpoint container ------------------------------------------
// magic "SCK1", version u32, config echo (u32 length + bytes), then for
// each array: name (u32 len + bytes), rows u32, cols u32, rows*cols
// little-endian float32 values. Arrays appear in name order.

namespace detail {

inline void put_u32(std::FILE* f, std::uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                          static_cast<unsigned char>(x >> 16),
                          static_cast<unsigned char>(x >> 24)};
    std::fwrite(b, 1, 4, f);
}

inline std::uint32_t get_u32(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("checkpoint: truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::FILE* f, float x) {
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    put_u32(f, bits);
}

inline float get_f32(std::FILE* f) {
    std::uint32_t bits = get_u32(f);
    float x;
    std::memcpy(&x, &bits, 4);
    return x;
}

inline void put_str(std::FILE* f, const std::string& s) {
    put_u32(f, static_cast<std::uint32_t>(s.size()));
    std::fwrite(s.data(), 1, s.size(), f);
}

inline std::string get_str(std::FILE* f) {
    std::uint32_t n = get_u32(f);
    std::string s(n, '\0');
    if (n && std::fread(s.data(), 1, n, f) != n) throw std::runtime_error("checkpoint: truncated");
    return s;
}

}  // namespace detail

// Several sets may share one file; their namespaced array names stay
// disjoint (dit.* / orch.* / pap.*).
inline void save_checkpoint(const std::string& path, const std::vector<const ParameterSet*>& sets,
                            const std::string& config_echo) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::fwrite("SCK1", 1, 4, f);
    detail::put_u32(f, 1u);
    detail::put_str(f, config_echo);
    std::size_t total = 0;
    for (const ParameterSet* ps : sets) total += ps->count();
    detail::put_u32(f, static_cast<std::uint32_t>(total));
    for (const ParameterSet* ps : sets) {
        ps->for_each([&](const std::string& name, const Tensor& v) {
            detail::put_str(f, name);
            detail::put_u32(f, static_cast<std::uint32_t>(v.rows));
            detail::put_u32(f, static_cast<std::uint32_t>(v.cols));
            for (double x : v.v) detail::put_f32(f, static_cast<float>(x));
        });
    }
    std::fclose(f);
}

inline void save_checkpoint(const std::string& path, const ParameterSet& ps,
                            const std::string& config_echo) {
    save_checkpoint(path, std::vector<const ParameterSet*>{&ps}, config_echo);
}

// Loads into already-constructed sets with the same layouts; each array is
// routed to the set that owns its name.
inline std::string load_checkpoint(const std::string& path,
                                   const std::vector<ParameterSet*>& sets) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "SCK1", 4) != 0) {
        std::fclose(f);
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    std::uint32_t version = detail::get_u32(f);
    if (version != 1u) {
        std::fclose(f);
        throw std::runtime_error("checkpoint: unsupported version");
    }
    std::string echo = detail::get_str(f);
    std::uint32_t n = detail::get_u32(f);
    try {
        for (std::uint32_t i = 0; i < n; ++i) {
            std::string name = detail::get_str(f);
            std::uint32_t rows = detail::get_u32(f), cols = detail::get_u32(f);
            ParameterSet* owner = nullptr;
            for (ParameterSet* ps : sets)
                if (ps->has(name)) owner = ps;
            require(owner != nullptr, "checkpoint: unexpected array " + name);
            Tensor& dst = owner->value(name);
            require(dst.rows == rows && dst.cols == cols, "checkpoint: shape mismatch for " + name);
            for (std::size_t j = 0; j < dst.size(); ++j)
                dst.v[j] = static_cast<double>(detail::get_f32(f));
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return echo;
}

inline std::string load_checkpoint(const std::string& path, ParameterSet& ps) {
    return load_checkpoint(path, std::vector<ParameterSet*>{&ps});
}

}  // namespace streamchar
