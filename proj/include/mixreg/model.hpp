#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mixreg/errors.hpp"
#include "mixreg/rng.hpp"
#include "mixreg/vec.hpp"

namespace mixreg {

// Ground truth: two coefficient vectors and the mixing proportions.
struct MixtureModel {
    Vec beta1, beta2;
    double p1, p2;

    MixtureModel(Vec b1, Vec b2, double p1_in, double p2_in)
        : beta1(std::move(b1)), beta2(std::move(b2)), p1(p1_in), p2(p2_in) {
        if (beta1.empty() || beta1.size() != beta2.size())
            throw InputError("MixtureModel: coefficient vectors must share a positive dimension");
        if (!(p1 > 0.0) || !(p2 > 0.0) || std::abs(p1 + p2 - 1.0) > 1e-12)
            throw InputError("MixtureModel: proportions must be positive and sum to 1");
        if (beta1 == beta2)
            throw InputError("MixtureModel: beta1 and beta2 must differ");
    }

    std::size_t k() const { return beta1.size(); }
};

// Read-only window over (x, y) pairs. This is the only sample interface the
// estimation code accepts; hidden labels are not reachable through it.
class SampleView {
public:
    SampleView(const double* xs, const double* ys, std::size_t n, std::size_t k)
        : xs_(xs), ys_(ys), n_(n), k_(k) {}

    std::size_t size() const { return n_; }
    std::size_t dim() const { return k_; }

    std::span<const double> x(std::size_t i) const { return {xs_ + i * k_, k_}; }
    double y(std::size_t i) const { return ys_[i]; }

    const double* x_data() const { return xs_; }
    std::span<const double> ys() const { return {ys_, n_}; }

    SampleView slice(std::size_t offset, std::size_t count) const {
        if (offset + count > n_) throw InputError("SampleView: slice out of range");
        return SampleView(xs_ + offset * k_, ys_ + offset, count, k_);
    }

private:
    const double* xs_;
    const double* ys_;
    std::size_t n_, k_;
};

// Immutable sample collection. Labels are stored for oracles and tests; the
// estimator module only ever receives a SampleView of (x, y).
class SampleSet {
public:
    SampleSet(std::size_t k, Vec xs, Vec ys, std::vector<std::uint8_t> zs, double noise_sigma)
        : k_(k),
          xs_(std::move(xs)),
          ys_(std::move(ys)),
          zs_(std::move(zs)),
          noise_sigma_(noise_sigma) {
        if (k_ == 0 || ys_.empty() || xs_.size() != ys_.size() * k_ || zs_.size() != ys_.size())
            throw InputError("SampleSet: inconsistent sizes");
        if (noise_sigma_ < 0.0) throw InputError("SampleSet: negative noise level");
    }

    std::size_t size() const { return ys_.size(); }
    std::size_t dim() const { return k_; }
    double noise_sigma() const { return noise_sigma_; }

    SampleView view() const { return SampleView(xs_.data(), ys_.data(), ys_.size(), k_); }
    SampleView view(std::size_t offset, std::size_t count) const {
        return view().slice(offset, count);
    }

    // Ground-truth labels; estimation code must not read these.
    std::span<const std::uint8_t> hidden_labels() const { return zs_; }

    SampleSet slice(std::size_t offset, std::size_t count) const {
        if (offset + count > size()) throw InputError("SampleSet: slice out of range");
        Vec xs(xs_.begin() + offset * k_, xs_.begin() + (offset + count) * k_);
        Vec ys(ys_.begin() + offset, ys_.begin() + offset + count);
        std::vector<std::uint8_t> zs(zs_.begin() + offset, zs_.begin() + offset + count);
        return SampleSet(k_, std::move(xs), std::move(ys), std::move(zs), noise_sigma_);
    }

private:
    std::size_t k_;
    Vec xs_;
    Vec ys_;
    std::vector<std::uint8_t> zs_;
    double noise_sigma_;
};

// Draws n samples under the standard Gaussian design: x ~ N(0, I_k),
// z ~ Bernoulli(p1), y = <x, beta_z> (+ noise_sigma * N(0,1) when positive).
// The draw order per sample is fixed, so equal seeds reproduce the set
// bit-for-bit on a given platform.
inline SampleSet generate(const MixtureModel& model, std::size_t n, double noise_sigma,
                          std::uint64_t seed) {
    if (n == 0) throw InputError("generate: sample count must be positive");
    if (noise_sigma < 0.0) throw InputError("generate: negative noise level");

    const std::size_t k = model.k();
    Rng rng(seed);
    Vec xs(n * k);
    Vec ys(n);
    std::vector<std::uint8_t> zs(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = xs.data() + i * k;
        for (std::size_t j = 0; j < k; ++j) row[j] = rng.normal();
        const bool first = rng.bernoulli(model.p1);
        zs[i] = first ? 1 : 0;
        const Vec& beta = first ? model.beta1 : model.beta2;
        ys[i] = dot({row, k}, beta);
        if (noise_sigma > 0.0) ys[i] += noise_sigma * rng.normal();
    }
    return SampleSet(k, std::move(xs), std::move(ys), std::move(zs), noise_sigma);
}

struct SampleBlock {
    std::size_t offset, count;
};

// Ordered disjoint blocks of sample indices, contiguous in sample order.
struct SamplePartition {
    std::vector<SampleBlock> blocks;
};

// Contiguous disjoint blocks of the requested sizes; leftover samples stay
// unused.
inline SamplePartition split(const SampleSet& samples, std::span<const std::size_t> sizes) {
    std::size_t total = 0;
    for (std::size_t s : sizes) {
        if (s == 0) throw InputError("split: block sizes must be positive");
        total += s;
    }
    if (total > samples.size()) throw InputError("split: requested sizes exceed sample count");
    SamplePartition part;
    std::size_t offset = 0;
    for (std::size_t s : sizes) {
        part.blocks.push_back({offset, s});
        offset += s;
    }
    return part;
}

}  // namespace mixreg
