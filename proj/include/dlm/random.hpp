#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dlm {

/// Seeded pseudo-random stream.
///
/// Independent sub-streams are derived from a (seed, stream id) pair through
/// std::seed_seq, so work that is split across threads draws the same numbers
/// no matter how it is scheduled.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) { reseed(seed, 0); }
    Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed) { reseed(seed, stream); }

    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    /// A new generator for sub-stream `id` of this generator's seed.
    [[nodiscard]] Rng stream(std::uint64_t id) const { return Rng(seed_, id + 1); }

    double normal() { return normal_(engine_); }

    /// Uniform on [0, 1).
    double uniform() { return uniform_(engine_); }

    Eigen::VectorXd normal_vector(Eigen::Index size) {
        Eigen::VectorXd v(size);
        for (Eigen::Index i = 0; i < size; ++i) v(i) = normal();
        return v;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    void reseed(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
        normal_.reset();
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace dlm
