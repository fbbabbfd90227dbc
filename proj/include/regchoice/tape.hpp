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

#ifndef REGCHOICE_TAPE_HPP_
#define REGCHOICE_TAPE_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace regchoice::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class LeafKind : std::uint8_t { kParameter, kInput, kConstant };

enum class OpCode : std::uint8_t {
  kLeaf,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kHadamard,
  kDivide,
  kScale,
  kNegate,
  kAddRowBroadcast,  // a (r x c) + 1 * b (1 x c)
  kSubColBroadcast,  // a (r x c) - b (r x 1) * 1^T
  kRelu,
  kStep,  // 1{a > 0}; carries no derivative
  kExp,
  kLog,
  kSquare,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kRowSum,
  kSum,
  kGatherCols,
  kConcatCols,
};

const char* op_name(OpCode op);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as its tape is.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Gradients keyed by leaf node id, split by leaf kind.
struct GradientBundle {
  std::map<int, Matrix> wrt_parameters;
  std::map<int, Matrix> wrt_inputs;

  const Matrix& at(Var leaf) const;
};

// Define-by-run tape over dense double matrices. Node values are computed as
// nodes are appended, so nodes are always in topological order. The tape
// records primitive ops only; derivative computations that need to be
// differentiated again (input-Jacobians inside a penalty) are emitted onto the
// same tape by `jvp`, and a single reverse sweep then yields exact mixed
// second derivatives.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Matrix value) { return leaf(LeafKind::kParameter, std::move(value)); }
  Var input(Matrix value) { return leaf(LeafKind::kInput, std::move(value)); }
  Var constant(Matrix value) { return leaf(LeafKind::kConstant, std::move(value)); }
  Var constant(double value) { return constant(Matrix::Constant(1, 1, value)); }
  Var zeros(Index rows, Index cols) { return constant(Matrix::Zero(rows, cols)); }

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(Var v) const { return node(v).value; }
  OpCode op(Var v) const { return node(v).op; }
  bool is_leaf(Var v) const { return node(v).op == OpCode::kLeaf; }
  LeafKind leaf_kind(Var v) const;
  std::pair<int, int> parents(Var v) const { return {node(v).a, node(v).b}; }

  // Appends an op node and evaluates it. Throws StructuralError on shape
  // mismatch, naming the node.
  Var push(OpCode op, Var a, Var b = {}, double scalar = 0.0,
           std::vector<Index> indices = {});

  // Recomputes every node after overwriting the given leaves. Leaf shapes
  // must match their declared shapes.
  void replay(std::span<const std::pair<Var, Matrix>> leaf_values);

  // Returns a handle for node `id` of this tape.
  Var var(int id) const;

  bool owns(Var v) const { return v.tape_ == this && v.id_ >= 0 && v.id_ < static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    OpCode op = OpCode::kLeaf;
    LeafKind leaf = LeafKind::kConstant;
    int a = -1;
    int b = -1;
    double scalar = 0.0;
    std::vector<Index> indices;
    Matrix value;
  };

  Var leaf(LeafKind kind, Matrix value);
  const Node& node(Var v) const;
  Matrix evaluate(int id) const;

  friend GradientBundle vjp(const Tape&, Var, const Matrix&, std::span<const Var>);
  friend Var jvp(Tape&, Var, Var, const Matrix&);

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

Var matmul(Var a, Var b);
Var transpose(Var a);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator-(Var a);
Var operator*(double s, Var a);
Var hadamard(Var a, Var b);
Var divide(Var a, Var b);
Var add_row_broadcast(Var a, Var row);
Var sub_col_broadcast(Var a, Var col);
Var relu(Var a);
Var step(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var row_sum(Var a);
Var sum(Var a);
Var gather_cols(Var a, std::vector<Index> columns);
Var concat_cols(Var a, Var b);

// sum(a .* mask) with `mask` entered as a constant.
Var masked_sum(Var a, const Matrix& mask);
// ||a||_F^2
Var squared_frobenius(Var a);

// Replays the tape with new leaf values and returns every node value.
std::vector<Matrix> forward(Tape& tape, std::span<const std::pair<Var, Matrix>> leaf_values);

// Reverse sweep seeded with `seed` (same shape as `output`). Every target
// gets an entry; targets the output does not depend on get zeros.
GradientBundle vjp(const Tape& tape, Var output, const Matrix& seed,
                   std::span<const Var> targets);

// Gradient of a 1x1 node.
GradientBundle grad(const Tape& tape, Var scalar, std::span<const Var> targets);

// Forward-mode tangent of `output` along `direction` in `input`, appended to
// the tape as differentiable nodes. Returns a zero constant when `output`
// does not depend on `input`.
Var jvp(Tape& tape, Var output, Var input, const Matrix& direction);

// J x D Jacobian of a length-J output with respect to a length-D input leaf,
// by one reverse sweep per output entry. Numeric only.
Matrix input_jacobian(const Tape& tape, Var output, Var input);

// Parameter gradient of a penalty scalar assembled from input-Jacobian nodes.
// Equivalent to `grad` restricted to parameter leaves, with the additional
// check that the sub-graph reachable from the penalty is acyclic.
GradientBundle grad_through_jacobian(const Tape& tape, Var penalty,
                                     std::span<const Var> parameters);

}  // namespace regchoice::ad

#endif  // REGCHOICE_TAPE_HPP_
