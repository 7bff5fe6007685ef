// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace splm {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/operator shape mismatch.
struct ShapeError : Error {
    using Error::Error;
};

// API contract violation (bad argument, stale graph, out-of-range label, ...).
struct ContractError : Error {
    using Error::Error;
};

// Malformed user input: manifests, configs, CLI arguments.
struct ValidationError : Error {
    using Error::Error;
};

// File system / encoding failures.
struct IoError : Error {
    using Error::Error;
};

// A kernel produced NaN/Inf, or a gradient went non-finite.
struct NonFiniteError : Error {
    using Error::Error;
};

// Checkpoint does not match the requested configuration or format version.
struct IncompatibleError : Error {
    using Error::Error;
};

// Checkpoint is truncated or internally inconsistent.
struct IntegrityError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic random streams.
//
// All randomness in the library flows through Rng. Engines are seeded via
// derive(), which hashes a root seed with a purpose tag and indices, so any
// consumer (weight init, masking, dropout, shuffling, synthesis) gets an
// independent stream whose output does not depend on evaluation order or
// thread scheduling. Uniform/normal draws are generated from raw engine
// output rather than std:: distributions, which are not specified bit-exactly.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix-expanded state avoids correlated streams for nearby seeds.
        state_ = splitmix64(seed);
        if (state_ == 0) state_ = 0x2545f4914f6cdd1dULL;
    }

    std::uint64_t next() {
        // xorshift64*
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derive a child seed from a root seed, a purpose tag, and up to two indices.
inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = fnv1a64(tag, splitmix64(root));
    h = splitmix64(h ^ splitmix64(a + 0x9e3779b97f4a7c15ULL));
    h = splitmix64(h ^ splitmix64(b + 0x7f4a7c159e3779b9ULL));
    return h;
}

inline Rng derive_rng(std::uint64_t root, const std::string& tag,
                      std::uint64_t a = 0, std::uint64_t b = 0) {
    return Rng(derive_seed(root, tag, a, b));
}

}  // namespace splm
