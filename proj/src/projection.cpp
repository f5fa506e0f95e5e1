#include "align/projection.hpp"

#include <cmath>

#include "align/errors.hpp"
#include "align/rng.hpp"

namespace align {

RandomProjection::RandomProjection(std::uint64_t seed, int in_dim, int out_dim)
    : in_dim_(in_dim), out_dim_(out_dim), seed_(seed) {
    if (in_dim < 1 || out_dim < 1)
        throw ParameterError("RandomProjection: dimensions must be positive");
    const double root3 = std::sqrt(3.0);
    Rng rng(seed, 0);
    r_.resize(out_dim, in_dim);
    for (int i = 0; i < out_dim; ++i) {
        for (int j = 0; j < in_dim; ++j) {
            double u = rng.uniform();
            r_(i, j) = (u < 1.0 / 6.0) ? root3 : (u < 5.0 / 6.0) ? 0.0 : -root3;
        }
    }
}

Eigen::MatrixXd RandomProjection::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != in_dim_)
        throw ShapeError("rp_apply: input dim " + std::to_string(x.cols()) + " vs projection in dim " +
                         std::to_string(in_dim_));
    return x * r_.transpose();
}

}  // namespace align
