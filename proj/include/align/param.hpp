#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace align {

// A named trainable array with gradient and Adam moment buffers. This is the
// unit that LARS rescales: one ParamTensor == one "layer" for Eq.-style
// layer-wise adaptation. Vectors are stored as n-by-1 matrices.
struct ParamTensor {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd adam_m;
    Eigen::MatrixXd adam_v;
    bool lars_enabled = true;

    ParamTensor() = default;
    ParamTensor(std::string n, int rows, int cols, bool lars = true);

    void zero_grad() { grad.setZero(); }
    Eigen::Index rows() const { return value.rows(); }
    Eigen::Index cols() const { return value.cols(); }
};

enum class ParamField { Value, Grad };

// sqrt of the sum of squares of the selected field over all listed params;
// empty list gives 0
double global_norm(const std::vector<ParamTensor*>& params, ParamField field);

}  // namespace align
