#include "align/rng.hpp"

#include <cmath>

#include "align/errors.hpp"

namespace align {

namespace {

// splitmix64 finalizer; also used to mix the (seed, stream) key
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    state_ = mix64(seed ^ mix64(stream * 0xda942042e4dd58b5ULL + 1));
}

std::uint64_t Rng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

double Rng::uniform() {
    // top 53 bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_gaussian_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_gaussian_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int Rng::categorical(const Eigen::VectorXd& probs) {
    if (probs.size() == 0) throw ParameterError("categorical: empty probability vector");
    double total = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs[i] < 0.0) throw ParameterError("categorical: negative probability");
        total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ParameterError("categorical: probabilities sum to " + std::to_string(total));
    double u = uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(seed_, mix64(stream_ + 0x632be59bd9b4e019ULL) ^ stream);
}

Eigen::MatrixXd sample_uniform(Rng& rng, int rows, int cols, double lo, double hi) {
    Eigen::MatrixXd out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = rng.uniform(lo, hi);
    return out;
}

Eigen::MatrixXd sample_gaussian(Rng& rng, int rows, int cols, double mean, double stddev) {
    Eigen::MatrixXd out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = mean + stddev * rng.gaussian();
    return out;
}

Eigen::VectorXi sample_categorical(Rng& rng, int n, const Eigen::VectorXd& probs) {
    Eigen::VectorXi out(n);
    for (int i = 0; i < n; ++i) out[i] = rng.categorical(probs);
    return out;
}

}  // namespace align
