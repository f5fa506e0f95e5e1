#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace align {

// Sparse sign random projection: entries are sqrt(3) with probability 1/6,
// 0 with probability 2/3 and -sqrt(3) with probability 1/6. The matrix is
// frozen at construction and never trained; it is fully determined by
// (seed, in_dim, out_dim), so checkpoints only store those.
class RandomProjection {
   public:
    RandomProjection(std::uint64_t seed, int in_dim, int out_dim);

    // rows are samples: x is n x in_dim, result is n x out_dim
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

    const Eigen::MatrixXd& matrix() const { return r_; }
    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    std::uint64_t seed() const { return seed_; }

   private:
    Eigen::MatrixXd r_;  // out_dim x in_dim
    int in_dim_;
    int out_dim_;
    std::uint64_t seed_;
};

}  // namespace align
