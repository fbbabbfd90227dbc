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

#include "regchoice/tape.hpp"

#include <algorithm>
#include <sstream>

#include "regchoice/errors.hpp"

namespace regchoice::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw StructuralError("operation on an invalid Var");
  return *a.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw StructuralError("operands live on different tapes");
  return t;
}

}  // namespace

const char* op_name(OpCode op) {
  switch (op) {
    case OpCode::kLeaf: return "leaf";
    case OpCode::kMatMul: return "matmul";
    case OpCode::kTranspose: return "transpose";
    case OpCode::kAdd: return "add";
    case OpCode::kSub: return "sub";
    case OpCode::kHadamard: return "hadamard";
    case OpCode::kDivide: return "divide";
    case OpCode::kScale: return "scale";
    case OpCode::kNegate: return "negate";
    case OpCode::kAddRowBroadcast: return "add_row_broadcast";
    case OpCode::kSubColBroadcast: return "sub_col_broadcast";
    case OpCode::kRelu: return "relu";
    case OpCode::kStep: return "step";
    case OpCode::kExp: return "exp";
    case OpCode::kLog: return "log";
    case OpCode::kSquare: return "square";
    case OpCode::kSoftmaxRows: return "softmax_rows";
    case OpCode::kLogSoftmaxRows: return "log_softmax_rows";
    case OpCode::kRowSum: return "row_sum";
    case OpCode::kSum: return "sum";
    case OpCode::kGatherCols: return "gather_cols";
    case OpCode::kConcatCols: return "concat_cols";
  }
  return "?";
}

const Matrix& GradientBundle::at(Var leaf) const {
  if (auto it = wrt_parameters.find(leaf.id()); it != wrt_parameters.end()) return it->second;
  if (auto it = wrt_inputs.find(leaf.id()); it != wrt_inputs.end()) return it->second;
  throw StructuralError("no gradient recorded for node " + std::to_string(leaf.id()));
}

Var Tape::leaf(LeafKind kind, Matrix value) {
  Node n;
  n.op = OpCode::kLeaf;
  n.leaf = kind;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (!owns(v)) throw StructuralError("node does not belong to this tape");
  return nodes_[static_cast<std::size_t>(v.id())];
}

Var Tape::var(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw StructuralError("node id " + std::to_string(id) + " out of range");
  }
  return Var(const_cast<Tape*>(this), id);
}

LeafKind Tape::leaf_kind(Var v) const {
  const Node& n = node(v);
  if (n.op != OpCode::kLeaf) {
    throw StructuralError("node " + std::to_string(v.id()) + " (" + op_name(n.op) + ") is not a leaf");
  }
  return n.leaf;
}

Var Tape::push(OpCode op, Var a, Var b, double scalar, std::vector<Index> indices) {
  if (!owns(a) || (b.valid() && !owns(b))) throw StructuralError("operand does not belong to this tape");
  Node n;
  n.op = op;
  n.a = a.id();
  n.b = b.valid() ? b.id() : -1;
  n.scalar = scalar;
  n.indices = std::move(indices);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  try {
    nodes_.back().value = evaluate(id);
  } catch (...) {
    nodes_.pop_back();
    throw;
  }
  return Var(this, id);
}

Matrix Tape::evaluate(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  auto fail = [&](const std::string& why) -> StructuralError {
    return StructuralError("node " + std::to_string(id) + " (" + op_name(n.op) + "): " + why);
  };
  const Matrix& A = nodes_[static_cast<std::size_t>(n.a)].value;
  static const Matrix kEmpty;
  const Matrix& B = n.b >= 0 ? nodes_[static_cast<std::size_t>(n.b)].value : kEmpty;
  auto same_shape = [&] {
    if (A.rows() != B.rows() || A.cols() != B.cols()) {
      throw fail("shape mismatch " + shape_str(A) + " vs " + shape_str(B));
    }
  };

  switch (n.op) {
    case OpCode::kLeaf:
      return n.value;
    case OpCode::kMatMul: {
      if (A.cols() != B.rows()) throw fail("inner dimensions " + shape_str(A) + " * " + shape_str(B));
      Matrix out(A.rows(), B.cols());
      out.noalias() = A * B;
      return out;
    }
    case OpCode::kTranspose:
      return A.transpose();
    case OpCode::kAdd:
      same_shape();
      return A + B;
    case OpCode::kSub:
      same_shape();
      return A - B;
    case OpCode::kHadamard:
      same_shape();
      return A.cwiseProduct(B);
    case OpCode::kDivide:
      same_shape();
      return A.cwiseQuotient(B);
    case OpCode::kScale:
      return n.scalar * A;
    case OpCode::kNegate:
      return -A;
    case OpCode::kAddRowBroadcast:
      if (B.rows() != 1 || B.cols() != A.cols()) {
        throw fail("row broadcast of " + shape_str(B) + " onto " + shape_str(A));
      }
      return A.rowwise() + B.row(0);
    case OpCode::kSubColBroadcast:
      if (B.cols() != 1 || B.rows() != A.rows()) {
        throw fail("column broadcast of " + shape_str(B) + " onto " + shape_str(A));
      }
      return A.colwise() - B.col(0);
    case OpCode::kRelu:
      return A.cwiseMax(0.0);
    case OpCode::kStep:
      return (A.array() > 0.0).cast<double>().matrix();
    case OpCode::kExp:
      return A.array().exp().matrix();
    case OpCode::kLog:
      return A.array().log().matrix();
    case OpCode::kSquare:
      return A.array().square().matrix();
    case OpCode::kSoftmaxRows: {
      Matrix out = (A.colwise() - A.rowwise().maxCoeff()).array().exp().matrix();
      out.array().colwise() /= out.rowwise().sum().array();
      return out;
    }
    case OpCode::kLogSoftmaxRows: {
      Eigen::VectorXd mx = A.rowwise().maxCoeff();
      Matrix shifted = A.colwise() - mx;
      Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
      return shifted.colwise() - lse;
    }
    case OpCode::kRowSum:
      return A.rowwise().sum();
    case OpCode::kSum:
      return Matrix::Constant(1, 1, A.sum());
    case OpCode::kGatherCols: {
      Matrix out(A.rows(), static_cast<Index>(n.indices.size()));
      for (std::size_t k = 0; k < n.indices.size(); ++k) {
        const Index c = n.indices[k];
        if (c < 0 || c >= A.cols()) throw fail("column index " + std::to_string(c) + " out of range for " + shape_str(A));
        out.col(static_cast<Index>(k)) = A.col(c);
      }
      return out;
    }
    case OpCode::kConcatCols: {
      if (A.rows() != B.rows()) throw fail("row counts differ " + shape_str(A) + " | " + shape_str(B));
      Matrix out(A.rows(), A.cols() + B.cols());
      out << A, B;
      return out;
    }
  }
  throw fail("unknown op");
}

void Tape::replay(std::span<const std::pair<Var, Matrix>> leaf_values) {
  for (const auto& [leaf, value] : leaf_values) {
    if (!owns(leaf)) throw StructuralError("replay: leaf does not belong to this tape");
    Node& n = nodes_[static_cast<std::size_t>(leaf.id())];
    if (n.op != OpCode::kLeaf) {
      throw StructuralError("replay: node " + std::to_string(leaf.id()) + " (" + op_name(n.op) + ") is not a leaf");
    }
    if (n.value.rows() != value.rows() || n.value.cols() != value.cols()) {
      throw StructuralError("replay: leaf node " + std::to_string(leaf.id()) + " declared " + shape_str(n.value) +
                            ", got " + shape_str(value));
    }
    n.value = value;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op != OpCode::kLeaf) nodes_[i].value = evaluate(static_cast<int>(i));
  }
}

// ---------------------------------------------------------------------------
// Op constructors

Var matmul(Var a, Var b) { return common_tape(a, b).push(OpCode::kMatMul, a, b); }
Var transpose(Var a) { return tape_of(a).push(OpCode::kTranspose, a); }
Var operator+(Var a, Var b) { return common_tape(a, b).push(OpCode::kAdd, a, b); }
Var operator-(Var a, Var b) { return common_tape(a, b).push(OpCode::kSub, a, b); }
Var operator-(Var a) { return tape_of(a).push(OpCode::kNegate, a); }
Var operator*(double s, Var a) { return tape_of(a).push(OpCode::kScale, a, {}, s); }
Var hadamard(Var a, Var b) { return common_tape(a, b).push(OpCode::kHadamard, a, b); }
Var divide(Var a, Var b) { return common_tape(a, b).push(OpCode::kDivide, a, b); }
Var add_row_broadcast(Var a, Var row) { return common_tape(a, row).push(OpCode::kAddRowBroadcast, a, row); }
Var sub_col_broadcast(Var a, Var col) { return common_tape(a, col).push(OpCode::kSubColBroadcast, a, col); }
Var relu(Var a) { return tape_of(a).push(OpCode::kRelu, a); }
Var step(Var a) { return tape_of(a).push(OpCode::kStep, a); }
Var exp(Var a) { return tape_of(a).push(OpCode::kExp, a); }
Var log(Var a) { return tape_of(a).push(OpCode::kLog, a); }
Var square(Var a) { return tape_of(a).push(OpCode::kSquare, a); }
Var softmax_rows(Var a) { return tape_of(a).push(OpCode::kSoftmaxRows, a); }
Var log_softmax_rows(Var a) { return tape_of(a).push(OpCode::kLogSoftmaxRows, a); }
Var row_sum(Var a) { return tape_of(a).push(OpCode::kRowSum, a); }
Var sum(Var a) { return tape_of(a).push(OpCode::kSum, a); }
Var gather_cols(Var a, std::vector<Index> columns) {
  return tape_of(a).push(OpCode::kGatherCols, a, {}, 0.0, std::move(columns));
}
Var concat_cols(Var a, Var b) { return common_tape(a, b).push(OpCode::kConcatCols, a, b); }

Var masked_sum(Var a, const Matrix& mask) { return sum(hadamard(a, tape_of(a).constant(mask))); }
Var squared_frobenius(Var a) { return sum(square(a)); }

// ---------------------------------------------------------------------------
// Differentiation

std::vector<Matrix> forward(Tape& tape, std::span<const std::pair<Var, Matrix>> leaf_values) {
  tape.replay(leaf_values);
  std::vector<Matrix> out;
  out.reserve(tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i) out.push_back(tape.value(tape.var(static_cast<int>(i))));
  return out;
}

GradientBundle vjp(const Tape& tape, Var output, const Matrix& seed, std::span<const Var> targets) {
  if (!tape.owns(output)) throw StructuralError("vjp: output does not belong to this tape");
  const auto& nodes = tape.nodes_;
  const int out = output.id();
  if (seed.rows() != nodes[static_cast<std::size_t>(out)].value.rows() ||
      seed.cols() != nodes[static_cast<std::size_t>(out)].value.cols()) {
    throw StructuralError("vjp: seed shape " + shape_str(seed) + " does not match output " +
                          shape_str(nodes[static_cast<std::size_t>(out)].value));
  }

  std::vector<char> needs(static_cast<std::size_t>(out) + 1, 0);
  for (Var t : targets) {
    if (!tape.owns(t)) throw StructuralError("target leaf is not on the tape");
    const auto& n = nodes[static_cast<std::size_t>(t.id())];
    if (n.op != OpCode::kLeaf) {
      throw StructuralError("target node " + std::to_string(t.id()) + " (" + op_name(n.op) + ") is not a leaf");
    }
    if (n.leaf == LeafKind::kConstant) {
      throw StructuralError("target node " + std::to_string(t.id()) + " is a constant leaf");
    }
    if (t.id() <= out) needs[static_cast<std::size_t>(t.id())] = 1;
  }
  for (int i = 0; i <= out; ++i) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.op == OpCode::kLeaf || n.op == OpCode::kStep) continue;
    if (n.a >= i || n.b >= i) throw StructuralError("cyclic tape at node " + std::to_string(i));
    needs[static_cast<std::size_t>(i)] =
        needs[static_cast<std::size_t>(n.a)] || (n.b >= 0 && needs[static_cast<std::size_t>(n.b)]);
  }

  std::vector<Matrix> adj(static_cast<std::size_t>(out) + 1);
  std::vector<char> has(static_cast<std::size_t>(out) + 1, 0);
  adj[static_cast<std::size_t>(out)] = seed;
  has[static_cast<std::size_t>(out)] = 1;

  auto acc = [&](int p, const auto& expr) {
    const auto pi = static_cast<std::size_t>(p);
    if (!needs[pi]) return;
    if (has[pi]) {
      adj[pi] += expr;
    } else {
      adj[pi] = expr;
      has[pi] = 1;
    }
  };

  for (int i = out; i >= 0; --i) {
    const auto ii = static_cast<std::size_t>(i);
    if (!has[ii] || !needs[ii]) continue;
    const auto& n = nodes[ii];
    if (n.op == OpCode::kLeaf) continue;
    const Matrix& G = adj[ii];
    const Matrix& Y = n.value;
    const Matrix& A = nodes[static_cast<std::size_t>(n.a)].value;
    static const Matrix kEmpty;
    const Matrix& B = n.b >= 0 ? nodes[static_cast<std::size_t>(n.b)].value : kEmpty;
    switch (n.op) {
      case OpCode::kLeaf:
      case OpCode::kStep:
        break;
      case OpCode::kMatMul:
        if (needs[static_cast<std::size_t>(n.a)]) acc(n.a, G * B.transpose());
        if (needs[static_cast<std::size_t>(n.b)]) acc(n.b, A.transpose() * G);
        break;
      case OpCode::kTranspose:
        acc(n.a, G.transpose());
        break;
      case OpCode::kAdd:
        acc(n.a, G);
        acc(n.b, G);
        break;
      case OpCode::kSub:
        acc(n.a, G);
        acc(n.b, -G);
        break;
      case OpCode::kHadamard:
        acc(n.a, G.cwiseProduct(B));
        acc(n.b, G.cwiseProduct(A));
        break;
      case OpCode::kDivide:
        acc(n.a, G.cwiseQuotient(B));
        acc(n.b, -G.cwiseProduct(Y).cwiseQuotient(B));
        break;
      case OpCode::kScale:
        acc(n.a, n.scalar * G);
        break;
      case OpCode::kNegate:
        acc(n.a, -G);
        break;
      case OpCode::kAddRowBroadcast:
        acc(n.a, G);
        acc(n.b, G.colwise().sum());
        break;
      case OpCode::kSubColBroadcast:
        acc(n.a, G);
        acc(n.b, -G.rowwise().sum());
        break;
      case OpCode::kRelu:
        acc(n.a, (A.array() > 0.0).select(G, 0.0).matrix());
        break;
      case OpCode::kExp:
        acc(n.a, G.cwiseProduct(Y));
        break;
      case OpCode::kLog:
        acc(n.a, G.cwiseQuotient(A));
        break;
      case OpCode::kSquare:
        acc(n.a, 2.0 * G.cwiseProduct(A));
        break;
      case OpCode::kSoftmaxRows: {
        Eigen::VectorXd dot = G.cwiseProduct(Y).rowwise().sum();
        acc(n.a, Y.cwiseProduct(G.colwise() - dot));
        break;
      }
      case OpCode::kLogSoftmaxRows: {
        Matrix S = Y.array().exp().matrix();
        Eigen::VectorXd gs = G.rowwise().sum();
        acc(n.a, G - (S.array().colwise() * gs.array()).matrix());
        break;
      }
      case OpCode::kRowSum:
        acc(n.a, G.col(0).replicate(1, A.cols()));
        break;
      case OpCode::kSum:
        acc(n.a, Matrix::Constant(A.rows(), A.cols(), G(0, 0)));
        break;
      case OpCode::kGatherCols: {
        Matrix d = Matrix::Zero(A.rows(), A.cols());
        for (std::size_t k = 0; k < n.indices.size(); ++k) d.col(n.indices[k]) += G.col(static_cast<Index>(k));
        acc(n.a, d);
        break;
      }
      case OpCode::kConcatCols:
        acc(n.a, G.leftCols(A.cols()));
        acc(n.b, G.rightCols(B.cols()));
        break;
    }
  }

  GradientBundle bundle;
  for (Var t : targets) {
    const auto& leaf = nodes[static_cast<std::size_t>(t.id())];
    const auto ti = static_cast<std::size_t>(t.id());
    Matrix g = (t.id() <= out && has[ti]) ? adj[ti] : Matrix::Zero(leaf.value.rows(), leaf.value.cols());
    if (leaf.leaf == LeafKind::kParameter) {
      bundle.wrt_parameters[t.id()] = std::move(g);
    } else {
      bundle.wrt_inputs[t.id()] = std::move(g);
    }
  }
  return bundle;
}

GradientBundle grad(const Tape& tape, Var scalar, std::span<const Var> targets) {
  const Matrix& v = tape.value(scalar);
  if (v.rows() != 1 || v.cols() != 1) {
    throw StructuralError("grad: node " + std::to_string(scalar.id()) + " is " + shape_str(v) + ", not a scalar");
  }
  return vjp(tape, scalar, Matrix::Ones(1, 1), targets);
}

Var jvp(Tape& tape, Var output, Var input, const Matrix& direction) {
  if (!tape.owns(output) || !tape.owns(input)) throw StructuralError("jvp: node does not belong to this tape");
  if (tape.leaf_kind(input) != LeafKind::kInput) {
    throw StructuralError("jvp: node " + std::to_string(input.id()) + " is not an input leaf");
  }
  const Matrix& x = tape.value(input);
  if (direction.rows() != x.rows() || direction.cols() != x.cols()) {
    throw StructuralError("jvp: direction " + shape_str(direction) + " does not match input " + shape_str(x));
  }
  const int out = output.id();
  if (out < input.id()) return tape.zeros(output.rows(), output.cols());

  std::vector<int> tangent(static_cast<std::size_t>(out) + 1, -1);
  tangent[static_cast<std::size_t>(input.id())] = tape.constant(direction).id();

  auto tan = [&](int id) -> Var {
    const int t = id >= 0 ? tangent[static_cast<std::size_t>(id)] : -1;
    return t >= 0 ? tape.var(t) : Var{};
  };
  auto zeros_like = [&](int id) {
    const Matrix& v = tape.nodes_[static_cast<std::size_t>(id)].value;
    return tape.zeros(v.rows(), v.cols());
  };
  auto plus = [](Var p, Var q) -> Var {
    if (!p.valid()) return q;
    if (!q.valid()) return p;
    return p + q;
  };

  for (int i = input.id() + 1; i <= out; ++i) {
    // Copy what we need: pushing nodes below may reallocate the node array.
    const OpCode op = tape.nodes_[static_cast<std::size_t>(i)].op;
    if (op == OpCode::kLeaf || op == OpCode::kStep) continue;
    const int ia = tape.nodes_[static_cast<std::size_t>(i)].a;
    const int ib = tape.nodes_[static_cast<std::size_t>(i)].b;
    const double scalar = tape.nodes_[static_cast<std::size_t>(i)].scalar;
    Var ta = tan(ia);
    Var tb = tan(ib);
    if (!ta.valid() && !tb.valid()) continue;
    Var a = tape.var(ia);
    Var b = ib >= 0 ? tape.var(ib) : Var{};
    Var self = tape.var(i);
    Var t;
    switch (op) {
      case OpCode::kLeaf:
      case OpCode::kStep:
        break;
      case OpCode::kMatMul:
        t = plus(ta.valid() ? matmul(ta, b) : Var{}, tb.valid() ? matmul(a, tb) : Var{});
        break;
      case OpCode::kTranspose:
        t = transpose(ta);
        break;
      case OpCode::kAdd:
        t = plus(ta, tb);
        break;
      case OpCode::kSub:
        t = !tb.valid() ? ta : (!ta.valid() ? -tb : ta - tb);
        break;
      case OpCode::kHadamard:
        t = plus(ta.valid() ? hadamard(ta, b) : Var{}, tb.valid() ? hadamard(a, tb) : Var{});
        break;
      case OpCode::kDivide:
        if (!tb.valid()) {
          t = divide(ta, b);
        } else {
          Var num = hadamard(self, tb);
          t = divide(ta.valid() ? ta - num : -num, b);
        }
        break;
      case OpCode::kScale:
        t = scalar * ta;
        break;
      case OpCode::kNegate:
        t = -ta;
        break;
      case OpCode::kAddRowBroadcast:
        if (!tb.valid()) {
          t = ta;
        } else {
          t = add_row_broadcast(ta.valid() ? ta : zeros_like(ia), tb);
        }
        break;
      case OpCode::kSubColBroadcast:
        if (!tb.valid()) {
          t = ta;
        } else {
          t = sub_col_broadcast(ta.valid() ? ta : zeros_like(ia), tb);
        }
        break;
      case OpCode::kRelu:
        t = hadamard(step(a), ta);
        break;
      case OpCode::kExp:
        t = hadamard(self, ta);
        break;
      case OpCode::kLog:
        t = divide(ta, a);
        break;
      case OpCode::kSquare:
        t = 2.0 * hadamard(a, ta);
        break;
      case OpCode::kSoftmaxRows:
        t = hadamard(self, sub_col_broadcast(ta, row_sum(hadamard(self, ta))));
        break;
      case OpCode::kLogSoftmaxRows: {
        Var s = exp(self);
        t = sub_col_broadcast(ta, row_sum(hadamard(s, ta)));
        break;
      }
      case OpCode::kRowSum:
        t = row_sum(ta);
        break;
      case OpCode::kSum:
        t = sum(ta);
        break;
      case OpCode::kGatherCols: {
        std::vector<Index> idx = tape.nodes_[static_cast<std::size_t>(i)].indices;
        t = gather_cols(ta, std::move(idx));
        break;
      }
      case OpCode::kConcatCols:
        t = concat_cols(ta.valid() ? ta : zeros_like(ia), tb.valid() ? tb : zeros_like(ib));
        break;
    }
    if (t.valid()) tangent[static_cast<std::size_t>(i)] = t.id();
  }
  Var result = tan(out);
  return result.valid() ? result : tape.zeros(output.rows(), output.cols());
}

Matrix input_jacobian(const Tape& tape, Var output, Var input) {
  if (tape.leaf_kind(input) != LeafKind::kInput) {
    throw StructuralError("input_jacobian: node " + std::to_string(input.id()) + " is not an input leaf");
  }
  const Matrix& out = tape.value(output);
  const Matrix& x = tape.value(input);
  if (out.rows() != 1 && out.cols() != 1) {
    throw StructuralError("input_jacobian: output " + shape_str(out) + " is not a vector");
  }
  if (x.rows() != 1 && x.cols() != 1) {
    throw StructuralError("input_jacobian: input " + shape_str(x) + " is not a vector");
  }
  const Index J = out.size();
  const Index D = x.size();
  Matrix jac(J, D);
  const Var targets[] = {input};
  for (Index i = 0; i < J; ++i) {
    Matrix seed = Matrix::Zero(out.rows(), out.cols());
    seed(i) = 1.0;
    const Matrix g = vjp(tape, output, seed, targets).at(input);
    for (Index d = 0; d < D; ++d) jac(i, d) = g(d);
  }
  return jac;
}

GradientBundle grad_through_jacobian(const Tape& tape, Var penalty, std::span<const Var> parameters) {
  for (Var p : parameters) {
    if (tape.leaf_kind(p) != LeafKind::kParameter) {
      throw StructuralError("grad_through_jacobian: node " + std::to_string(p.id()) + " is not a parameter leaf");
    }
  }
  return grad(tape, penalty, parameters);
}

}  // namespace regchoice::ad
