#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace naxray
{
using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

//! Largest matrix size handled by the fixed-capacity transport kernels.
inline constexpr int kMaxMatrixSize = 8;

template<class T>
using SmallMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxMatrixSize, kMaxMatrixSize>;

constexpr double kPi = 3.14159265358979323846;
}  // namespace naxray
