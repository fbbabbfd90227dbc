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

// Independent reference computations for tests: plain loops over the model
// parameters, no tape involved.

#ifndef REGCHOICE_TESTS_ORACLES_HPP_
#define REGCHOICE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "regchoice/choice_model.hpp"

namespace regchoice::testing {

// Utilities and d V / d x of an MLP at one row, by explicit layer loops.
struct MlpEval {
  std::vector<double> utilities;
  std::vector<std::vector<double>> jacobian;  // J x D
};

inline MlpEval mlp_oracle(const MlpSpec& spec, const std::vector<Matrix>& params, const RowVector& x) {
  const int D = spec.input_dim;
  std::vector<double> h(x.data(), x.data() + x.size());
  std::vector<std::vector<double>> dh(static_cast<std::size_t>(D), std::vector<double>(static_cast<std::size_t>(D), 0.0));
  for (int d = 0; d < D; ++d) dh[d][d] = 1.0;  // dh[unit][input]
  for (int layer = 0; layer <= spec.depth; ++layer) {
    const Matrix& W = params[static_cast<std::size_t>(2 * layer)];
    const Matrix& b = params[static_cast<std::size_t>(2 * layer + 1)];
    const bool hidden = layer < spec.depth;
    std::vector<double> out(static_cast<std::size_t>(W.rows()));
    std::vector<std::vector<double>> dout(out.size(), std::vector<double>(static_cast<std::size_t>(D), 0.0));
    for (Index u = 0; u < W.rows(); ++u) {
      double z = b(0, u);
      for (Index k = 0; k < W.cols(); ++k) z += W(u, k) * h[static_cast<std::size_t>(k)];
      double slope = 1.0;
      if (hidden && spec.activation == Activation::kRectifier) {
        slope = z > 0.0 ? 1.0 : 0.0;
        z = std::max(z, 0.0);
      }
      out[static_cast<std::size_t>(u)] = z;
      for (int d = 0; d < D; ++d) {
        double s = 0.0;
        for (Index k = 0; k < W.cols(); ++k) s += W(u, k) * dh[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)];
        dout[static_cast<std::size_t>(u)][static_cast<std::size_t>(d)] = slope * s;
      }
    }
    h = std::move(out);
    dh = std::move(dout);
  }
  return {h, dh};
}

inline std::vector<double> softmax_oracle(const std::vector<double>& v) {
  double m = v[0];
  for (double e : v) m = std::max(m, e);
  std::vector<double> p(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) z += (p[i] = std::exp(v[i] - m));
  for (double& e : p) e /= z;
  return p;
}

// d P / d x from d V / d x through the softmax Jacobian.
inline Matrix probability_jacobian_oracle(const MlpEval& e) {
  const auto p = softmax_oracle(e.utilities);
  const Index J = static_cast<Index>(p.size());
  const Index D = static_cast<Index>(e.jacobian.front().size());
  Matrix out = Matrix::Zero(J, D);
  for (Index i = 0; i < J; ++i) {
    for (Index d = 0; d < D; ++d) {
      double s = 0.0;
      for (Index k = 0; k < J; ++k) {
        const double dp = p[i] * ((i == k ? 1.0 : 0.0) - p[k]);
        s += dp * e.jacobian[k][d];
      }
      out(i, d) = s;
    }
  }
  return out;
}

// Central differences of f at `at`.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& at, double step) {
  Vector g(at.size());
  Vector x = at;
  for (Index k = 0; k < at.size(); ++k) {
    const double orig = x(k);
    x(k) = orig + step;
    const double up = f(x);
    x(k) = orig - step;
    const double down = f(x);
    x(k) = orig;
    g(k) = (up - down) / (2.0 * step);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
template <typename A, typename B>
double relative_error(const A& a, const B& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

inline Matrix random_one_hot(Index rows, Index J, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> pick(0, J - 1);
  Matrix Y = Matrix::Zero(rows, J);
  for (Index n = 0; n < rows; ++n) Y(n, pick(rng)) = 1.0;
  return Y;
}

// Random small MLP from the fuzz regime: depth <= 3, width <= 8, D <= 6, J <= 4.
inline ChoiceModel random_mlp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> depth(0, 3), width(1, 8), dim(1, 6), alts(2, 4);
  MlpSpec spec{dim(rng), alts(rng), depth(rng), width(rng), Activation::kRectifier};
  ChoiceModel m = ChoiceModel::initialize(spec, rng());
  // Nonzero biases keep pre-activations off the rectifier kink, where
  // central differences are meaningless.
  auto& params = m.mutable_parameters();
  for (std::size_t k = 1; k < params.size(); k += 2) params[k] = random_matrix(1, params[k].cols(), rng, 0.5);
  return m;
}

}  // namespace regchoice::testing

#endif  // REGCHOICE_TESTS_ORACLES_HPP_
