#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// A Tape records every primitive applied to its variables in execution order,
// so node i only ever reads nodes < i. Leaves are differentiation targets;
// constants are recorded but never receive adjoints. Shape rules are strict:
// the only broadcast is bias_add along the last axis.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "phmadv/tensor.hpp"

namespace phmadv::ad {

enum class Op {
  Leaf,
  Constant,
  MatMul,        // [m,k] x [k,n] -> [m,n]
  Conv2D,        // [B,H,W,C] (*) [KH,KW,C,F] -> [B,H-KH+1,W-KW+1,F], valid, stride 1
  Add,
  Sub,
  Mul,
  BiasAdd,       // [...,n] + [n]
  Scale,         // x * scalar attribute
  Sigmoid,
  Tanh,
  Relu,
  Sqrt,
  SpatialMean,   // [B,...,C] -> [B,C], mean over the middle axes
  Sum,           // -> scalar
  SumLastAxis,   // [...,n] -> [...]
  SquaredError,  // sum((a-b)^2) -> scalar
  Concat,        // along attribute axis
  Slice,         // [start, start+length) along attribute axis
  Reshape,
};

std::string_view op_name(Op op);

struct OpAttrs {
  double scalar = 0.0;
  std::size_t axis = 0;
  std::size_t start = 0;
  std::size_t length = 0;
  Shape shape;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Adjoints of every node for one backward sweep.
class Gradients {
 public:
  /// d(output)/d(var); zeros when var does not influence the output.
  Tensor of(Var var) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Tensor> adjoints_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);

  /// Records one primitive and computes its value.
  Var apply(Op op, std::span<const Var> inputs, const OpAttrs& attrs = {});

  const Tensor& value(Var var) const;
  std::size_t size() const { return nodes_.size(); }
  bool is_leaf(Var var) const;

  /// Adjoints of all nodes with respect to a single-element output.
  Gradients backward(Var output) const;

  /// d(output)/d(wrt) with the shape of wrt. wrt must be a leaf of this tape.
  Tensor gradient(Var output, Var wrt) const;

  /// Recomputes every node from the recorded leaves and constants.
  std::vector<Tensor> replay() const;

 private:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Tensor value;
    bool needs_grad;
  };

  void check_owned(Var var, std::string_view what) const;

  std::vector<Node> nodes_;
};

// Primitive wrappers. Every input must live on the same tape.
Var matmul(Var a, Var b);
Var conv2d(Var input, Var kernel);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var bias_add(Var x, Var bias);
Var scale(Var x, double factor);
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var sqrt(Var x);
Var spatial_mean(Var x);
Var sum(Var x);
Var sum_last_axis(Var x);
Var squared_error(Var a, Var b);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(Var x, Shape shape);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

/// Standalone entry matching the tape API: d(output)/d(wrt).
inline Tensor gradient(const Tape& tape, Var output, Var wrt) {
  return tape.gradient(output, wrt);
}

}  // namespace phmadv::ad
