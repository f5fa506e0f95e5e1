#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace align {

// Counter-based generator keyed on (seed, stream). Identical keys produce
// identical draw sequences on every platform; splitting a new stream gives an
// independent sequence that never overlaps the parent's.
class Rng {
   public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    // [0, 1)
    double uniform();
    double uniform(double lo, double hi);

    // standard normal
    double gaussian();

    // index draw from an explicit probability vector; entries must be
    // nonnegative and sum to 1 within 1e-9
    int categorical(const Eigen::VectorXd& probs);

    // derive an independent generator for a sub-task
    Rng split(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

   private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t state_;
    double spare_gaussian_ = 0.0;
    bool has_spare_ = false;
};

Eigen::MatrixXd sample_uniform(Rng& rng, int rows, int cols, double lo = 0.0, double hi = 1.0);
Eigen::MatrixXd sample_gaussian(Rng& rng, int rows, int cols, double mean = 0.0, double stddev = 1.0);
Eigen::VectorXi sample_categorical(Rng& rng, int n, const Eigen::VectorXd& probs);

}  // namespace align
