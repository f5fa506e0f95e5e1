#include "align/param.hpp"

#include <cmath>

namespace align {

ParamTensor::ParamTensor(std::string n, int rows, int cols, bool lars)
    : name(std::move(n)),
      value(Eigen::MatrixXd::Zero(rows, cols)),
      grad(Eigen::MatrixXd::Zero(rows, cols)),
      adam_m(Eigen::MatrixXd::Zero(rows, cols)),
      adam_v(Eigen::MatrixXd::Zero(rows, cols)),
      lars_enabled(lars) {}

double global_norm(const std::vector<ParamTensor*>& params, ParamField field) {
    double ss = 0.0;
    for (const ParamTensor* p : params) {
        const Eigen::MatrixXd& m = (field == ParamField::Value) ? p->value : p->grad;
        ss += m.squaredNorm();
    }
    return std::sqrt(ss);
}

}  // namespace align
