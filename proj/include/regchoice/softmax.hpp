/* Copyright 2026 The regchoice Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef REGCHOICE_SOFTMAX_HPP_
#define REGCHOICE_SOFTMAX_HPP_

#include <Eigen/Dense>

namespace regchoice {

// Row-wise softmax with max subtraction; each row of `V` is one individual's
// utility vector.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_rows(
    const Eigen::MatrixBase<Derived>& V) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      (V.colwise() - V.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

// Row-wise log-sum-exp.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_sum_exp_rows(const Eigen::MatrixBase<Derived>& V) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mx = V.rowwise().maxCoeff();
  return mx.array() + (V.colwise() - mx).array().exp().rowwise().sum().log();
}

// Softmax of a single utility vector.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar mx = v.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = (v.array() - mx).exp().matrix();
  return out / out.sum();
}

}  // namespace regchoice

#endif  // REGCHOICE_SOFTMAX_HPP_
