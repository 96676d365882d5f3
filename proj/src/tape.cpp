#include "phmadv/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "phmadv/error.hpp"

namespace phmadv::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_fail(Op op, const std::string& detail) {
  throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

void require_arity(Op op, std::size_t got, std::size_t want) {
  if (got != want) {
    shape_fail(op, "expected " + std::to_string(want) + " inputs, got " + std::to_string(got));
  }
}

void require_same_shape(Op op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t batch, height, width, channels;
  std::size_t kh, kw, filters;
  std::size_t out_h, out_w;

  std::size_t rows() const { return batch * out_h * out_w; }
  std::size_t patch() const { return kh * kw * channels; }
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& k) {
  if (x.rank() != 4 || k.rank() != 4) {
    shape_fail(Op::Conv2D, "need rank-4 input and kernel, got " + shape_string(x.shape()) +
                               " and " + shape_string(k.shape()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0), k.dim(1), k.dim(3), 0, 0};
  if (k.dim(2) != g.channels) {
    shape_fail(Op::Conv2D, "kernel channels " + std::to_string(k.dim(2)) + " != input channels " +
                               std::to_string(g.channels));
  }
  if (g.kh > g.height || g.kw > g.width || g.kh == 0 || g.kw == 0) {
    shape_fail(Op::Conv2D, "kernel " + shape_string(k.shape()) + " does not fit input " +
                               shape_string(x.shape()));
  }
  g.out_h = g.height - g.kh + 1;
  g.out_w = g.width - g.kw + 1;
  return g;
}

// Unrolls every receptive field into one row of a (rows x patch) matrix.
Tensor im2col(const Tensor& x, const ConvGeometry& g) {
  Tensor cols(Shape{g.rows(), g.patch()});
  const std::size_t run = g.kw * g.channels;
  double* dst = cols.data().data();
  const double* src = x.data().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        for (std::size_t i = 0; i < g.kh; ++i) {
          const double* from = src + ((b * g.height + oh + i) * g.width + ow) * g.channels;
          std::copy(from, from + run, dst);
          dst += run;
        }
      }
    }
  }
  return cols;
}

void col2im_accumulate(const Tensor& cols, const ConvGeometry& g, Tensor& dx) {
  const std::size_t run = g.kw * g.channels;
  const double* src = cols.data().data();
  double* dst = dx.data().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        for (std::size_t i = 0; i < g.kh; ++i) {
          double* to = dst + ((b * g.height + oh + i) * g.width + ow) * g.channels;
          for (std::size_t j = 0; j < run; ++j) to[j] += src[j];
          src += run;
        }
      }
    }
  }
}

// outer x axis-extent x inner decomposition used by concat and slice.
struct AxisSplit {
  std::size_t outer = 1, extent = 0, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Tensor compute(Op op, const std::vector<const Tensor*>& in, const OpAttrs& attrs) {
  switch (op) {
    case Op::Leaf:
    case Op::Constant:
      shape_fail(op, "not computable");
    case Op::MatMul: {
      require_arity(op, in.size(), 2);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        shape_fail(op, shape_string(a.shape()) + " x " + shape_string(b.shape()));
      }
      Tensor out(Shape{a.dim(0), b.dim(1)});
      as_matrix(out, a.dim(0), b.dim(1)).noalias() =
          as_matrix(a, a.dim(0), a.dim(1)) * as_matrix(b, b.dim(0), b.dim(1));
      return out;
    }
    case Op::Conv2D: {
      require_arity(op, in.size(), 2);
      const ConvGeometry g = conv_geometry(*in[0], *in[1]);
      const Tensor cols = im2col(*in[0], g);
      Tensor out(Shape{g.batch, g.out_h, g.out_w, g.filters});
      as_matrix(out, g.rows(), g.filters).noalias() =
          as_matrix(cols, g.rows(), g.patch()) * as_matrix(*in[1], g.patch(), g.filters);
      return out;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      require_arity(op, in.size(), 2);
      require_same_shape(op, *in[0], *in[1]);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      Tensor out(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = op == Op::Add ? a[i] + b[i] : op == Op::Sub ? a[i] - b[i] : a[i] * b[i];
      }
      return out;
    }
    case Op::BiasAdd: {
      require_arity(op, in.size(), 2);
      const Tensor& x = *in[0];
      const Tensor& bias = *in[1];
      if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.shape().back()) {
        shape_fail(op, shape_string(x.shape()) + " + " + shape_string(bias.shape()));
      }
      Tensor out(x.shape());
      const std::size_t n = bias.size();
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + bias[i % n];
      return out;
    }
    case Op::Scale: {
      require_arity(op, in.size(), 1);
      const double c = attrs.scalar;
      return map_unary(*in[0], [c](double v) { return v * c; });
    }
    case Op::Sigmoid:
      require_arity(op, in.size(), 1);
      return map_unary(*in[0], sigmoid_scalar);
    case Op::Tanh:
      require_arity(op, in.size(), 1);
      return map_unary(*in[0], [](double v) { return std::tanh(v); });
    case Op::Relu:
      require_arity(op, in.size(), 1);
      return map_unary(*in[0], [](double v) { return v > 0.0 ? v : 0.0; });
    case Op::Sqrt:
      require_arity(op, in.size(), 1);
      return map_unary(*in[0], [](double v) { return std::sqrt(v); });
    case Op::SpatialMean: {
      require_arity(op, in.size(), 1);
      const Tensor& x = *in[0];
      if (x.rank() < 3) shape_fail(op, "need rank >= 3, got " + shape_string(x.shape()));
      const std::size_t batch = x.dim(0);
      const std::size_t channels = x.shape().back();
      const std::size_t middle = x.size() / (batch * channels);
      Tensor out(Shape{batch, channels});
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t m = 0; m < middle; ++m) {
          const double* row = x.data().data() + (b * middle + m) * channels;
          for (std::size_t c = 0; c < channels; ++c) out[b * channels + c] += row[c];
        }
      }
      const double inv = 1.0 / static_cast<double>(middle);
      for (double& v : out.data()) v *= inv;
      return out;
    }
    case Op::Sum: {
      require_arity(op, in.size(), 1);
      double s = 0.0;
      for (double v : in[0]->data()) s += v;
      return Tensor::scalar(s);
    }
    case Op::SumLastAxis: {
      require_arity(op, in.size(), 1);
      const Tensor& x = *in[0];
      if (x.rank() == 0) shape_fail(op, "rank-0 input");
      Shape out_shape(x.shape().begin(), x.shape().end() - 1);
      Tensor out(out_shape);
      const std::size_t n = x.shape().back();
      for (std::size_t r = 0; r < out.size(); ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += x[r * n + j];
        out[r] = s;
      }
      return out;
    }
    case Op::SquaredError: {
      require_arity(op, in.size(), 2);
      require_same_shape(op, *in[0], *in[1]);
      double s = 0.0;
      for (std::size_t i = 0; i < in[0]->size(); ++i) {
        const double d = (*in[0])[i] - (*in[1])[i];
        s += d * d;
      }
      return Tensor::scalar(s);
    }
    case Op::Concat: {
      if (in.empty()) shape_fail(op, "no inputs");
      const Shape& first = in[0]->shape();
      if (attrs.axis >= first.size()) shape_fail(op, "axis out of range");
      Shape out_shape = first;
      out_shape[attrs.axis] = 0;
      for (const Tensor* t : in) {
        Shape probe = t->shape();
        if (probe.size() != first.size()) shape_fail(op, "rank mismatch");
        out_shape[attrs.axis] += probe[attrs.axis];
        probe[attrs.axis] = first[attrs.axis];
        if (probe != first) {
          shape_fail(op, shape_string(t->shape()) + " vs " + shape_string(first));
        }
      }
      Tensor out(out_shape);
      const AxisSplit os = split_at(out_shape, attrs.axis);
      std::size_t offset = 0;
      for (const Tensor* t : in) {
        const std::size_t block = t->shape()[attrs.axis] * os.inner;
        for (std::size_t o = 0; o < os.outer; ++o) {
          const double* from = t->data().data() + o * block;
          std::copy(from, from + block, out.data().data() + o * os.extent * os.inner + offset);
        }
        offset += block;
      }
      return out;
    }
    case Op::Slice: {
      require_arity(op, in.size(), 1);
      const Tensor& x = *in[0];
      if (attrs.axis >= x.rank() || attrs.start + attrs.length > x.dim(attrs.axis)) {
        shape_fail(op, "range [" + std::to_string(attrs.start) + ", " +
                           std::to_string(attrs.start + attrs.length) + ") on axis " +
                           std::to_string(attrs.axis) + " of " + shape_string(x.shape()));
      }
      Shape out_shape = x.shape();
      out_shape[attrs.axis] = attrs.length;
      Tensor out(out_shape);
      const AxisSplit xs = split_at(x.shape(), attrs.axis);
      const std::size_t block = attrs.length * xs.inner;
      for (std::size_t o = 0; o < xs.outer; ++o) {
        const double* from = x.data().data() + (o * xs.extent + attrs.start) * xs.inner;
        std::copy(from, from + block, out.data().data() + o * block);
      }
      return out;
    }
    case Op::Reshape:
      require_arity(op, in.size(), 1);
      return in[0]->reshaped(attrs.shape);
  }
  shape_fail(op, "unknown op");
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::MatMul: return "matmul";
    case Op::Conv2D: return "conv2d";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::BiasAdd: return "bias_add";
    case Op::Scale: return "scale";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Sqrt: return "sqrt";
    case Op::SpatialMean: return "spatial_mean";
    case Op::Sum: return "sum";
    case Op::SumLastAxis: return "sum_last_axis";
    case Op::SquaredError: return "squared_error";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Reshape: return "reshape";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw LookupError("unbound variable");
  return tape_->value(*this);
}

Tensor Gradients::of(Var var) const {
  if (&var.tape() != tape_ || var.id() >= adjoints_.size()) {
    throw LookupError("variable is not on the differentiated tape");
  }
  const Tensor& adj = adjoints_[var.id()];
  if (adj.size() == 0 && shape_size(var.shape()) != 0) return Tensor(var.shape());
  return adj;
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{Op::Leaf, {}, {}, std::move(value), true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{Op::Constant, {}, {}, std::move(value), false});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var var, std::string_view what) const {
  if (var.tape_ != this || var.id_ >= nodes_.size()) {
    throw LookupError(std::string(what) + " is not recorded on this tape");
  }
}

Var Tape::apply(Op op, std::span<const Var> inputs, const OpAttrs& attrs) {
  if (op == Op::Leaf || op == Op::Constant) {
    throw ContractError("use leaf()/constant() to record inputs");
  }
  std::vector<const Tensor*> values;
  std::vector<std::size_t> ids;
  bool needs_grad = false;
  values.reserve(inputs.size());
  ids.reserve(inputs.size());
  for (Var v : inputs) {
    check_owned(v, "operand");
    values.push_back(&nodes_[v.id_].value);
    ids.push_back(v.id_);
    needs_grad = needs_grad || nodes_[v.id_].needs_grad;
  }
  Tensor out = compute(op, values, attrs);
  nodes_.push_back(Node{op, std::move(ids), attrs, std::move(out), needs_grad});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var var) const {
  check_owned(var, "variable");
  return nodes_[var.id_].value;
}

bool Tape::is_leaf(Var var) const {
  check_owned(var, "variable");
  return nodes_[var.id_].op == Op::Leaf;
}

Gradients Tape::backward(Var output) const {
  check_owned(output, "output");
  const Tensor& out_value = nodes_[output.id_].value;
  if (out_value.size() != 1) {
    throw ContractError("gradient needs a single-element output, got shape " +
                        shape_string(out_value.shape()));
  }

  Gradients grads;
  grads.tape_ = this;
  auto& adj = grads.adjoints_;
  adj.resize(output.id_ + 1);
  adj[output.id_] = Tensor::full(out_value.shape(), 1.0);

  auto accumulate = [&](std::size_t id, Tensor delta) {
    if (!nodes_[id].needs_grad) return;
    Tensor& slot = adj[id];
    if (slot.size() == 0 && shape_size(delta.shape()) != 0) {
      slot = std::move(delta);
    } else {
      for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += delta[i];
    }
  };

  for (std::size_t idx = output.id_ + 1; idx-- > 0;) {
    const Node& node = nodes_[idx];
    if (!node.needs_grad || node.op == Op::Leaf) continue;
    const Tensor& g = adj[idx];
    if (g.size() == 0) continue;
    const auto& ins = node.inputs;
    const Tensor& y = node.value;

    switch (node.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::MatMul: {
        const Tensor& a = nodes_[ins[0]].value;
        const Tensor& b = nodes_[ins[1]].value;
        const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
        if (nodes_[ins[0]].needs_grad) {
          Tensor da(a.shape());
          as_matrix(da, m, k).noalias() = as_matrix(g, m, n) * as_matrix(b, k, n).transpose();
          accumulate(ins[0], std::move(da));
        }
        if (nodes_[ins[1]].needs_grad) {
          Tensor db(b.shape());
          as_matrix(db, k, n).noalias() = as_matrix(a, m, k).transpose() * as_matrix(g, m, n);
          accumulate(ins[1], std::move(db));
        }
        break;
      }
      case Op::Conv2D: {
        const Tensor& x = nodes_[ins[0]].value;
        const Tensor& k = nodes_[ins[1]].value;
        const ConvGeometry geo = conv_geometry(x, k);
        if (nodes_[ins[1]].needs_grad) {
          const Tensor cols = im2col(x, geo);
          Tensor dk(k.shape());
          as_matrix(dk, geo.patch(), geo.filters).noalias() =
              as_matrix(cols, geo.rows(), geo.patch()).transpose() *
              as_matrix(g, geo.rows(), geo.filters);
          accumulate(ins[1], std::move(dk));
        }
        if (nodes_[ins[0]].needs_grad) {
          Tensor dcols(Shape{geo.rows(), geo.patch()});
          as_matrix(dcols, geo.rows(), geo.patch()).noalias() =
              as_matrix(g, geo.rows(), geo.filters) *
              as_matrix(k, geo.patch(), geo.filters).transpose();
          Tensor dx(x.shape());
          col2im_accumulate(dcols, geo, dx);
          accumulate(ins[0], std::move(dx));
        }
        break;
      }
      case Op::Add:
        accumulate(ins[0], g);
        accumulate(ins[1], g);
        break;
      case Op::Sub:
        accumulate(ins[0], g);
        accumulate(ins[1], map_unary(g, [](double v) { return -v; }));
        break;
      case Op::Mul: {
        const Tensor& a = nodes_[ins[0]].value;
        const Tensor& b = nodes_[ins[1]].value;
        if (nodes_[ins[0]].needs_grad) {
          Tensor da(a.shape());
          for (std::size_t i = 0; i < da.size(); ++i) da[i] = g[i] * b[i];
          accumulate(ins[0], std::move(da));
        }
        if (nodes_[ins[1]].needs_grad) {
          Tensor db(b.shape());
          for (std::size_t i = 0; i < db.size(); ++i) db[i] = g[i] * a[i];
          accumulate(ins[1], std::move(db));
        }
        break;
      }
      case Op::BiasAdd: {
        accumulate(ins[0], g);
        if (nodes_[ins[1]].needs_grad) {
          const Tensor& bias = nodes_[ins[1]].value;
          Tensor db(bias.shape());
          const std::size_t n = bias.size();
          for (std::size_t i = 0; i < g.size(); ++i) db[i % n] += g[i];
          accumulate(ins[1], std::move(db));
        }
        break;
      }
      case Op::Scale: {
        const double c = node.attrs.scalar;
        accumulate(ins[0], map_unary(g, [c](double v) { return v * c; }));
        break;
      }
      case Op::Sigmoid: {
        Tensor d(y.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * y[i] * (1.0 - y[i]);
        accumulate(ins[0], std::move(d));
        break;
      }
      case Op::Tanh: {
        Tensor d(y.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * (1.0 - y[i] * y[i]);
        accumulate(ins[0], std::move(d));
        break;
      }
      case Op::Relu: {
        const Tensor& x = nodes_[ins[0]].value;
        Tensor d(x.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] > 0.0 ? g[i] : 0.0;
        accumulate(ins[0], std::move(d));
        break;
      }
      case Op::Sqrt: {
        // The derivative is unbounded at 0; that point is treated as stationary.
        Tensor d(y.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = y[i] == 0.0 ? 0.0 : g[i] * 0.5 / y[i];
        accumulate(ins[0], std::move(d));
        break;
      }
      case Op::SpatialMean: {
        const Tensor& x = nodes_[ins[0]].value;
        const std::size_t batch = x.dim(0);
        const std::size_t channels = x.shape().back();
        const std::size_t middle = x.size() / (batch * channels);
        const double inv = 1.0 / static_cast<double>(middle);
        Tensor d(x.shape());
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t m = 0; m < middle; ++m) {
            for (std::size_t c = 0; c < channels; ++c) {
              d[(b * middle + m) * channels + c] = g[b * channels + c] * inv;
            }
          }
        }
        accumulate(ins[0], std::move(d));
        break;
      }
      case Op::Sum: {
        const Tensor& x = nodes_[ins[0]].value;
        accumulate(ins[0], Tensor::full(x.shape(), g[0]));
        break;
      }
      case Op::SumLastAxis: {
        const Tensor& x = nodes_[ins[0]].value;
        const std::size_t n = x.shape().back();
        Tensor d(x.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i / n];
        accumulate(ins[0], std::move(d));
        break;
      }
      case Op::SquaredError: {
        const Tensor& a = nodes_[ins[0]].value;
        const Tensor& b = nodes_[ins[1]].value;
        Tensor da(a.shape());
        for (std::size_t i = 0; i < da.size(); ++i) da[i] = 2.0 * g[0] * (a[i] - b[i]);
        if (nodes_[ins[1]].needs_grad) {
          accumulate(ins[1], map_unary(da, [](double v) { return -v; }));
        }
        accumulate(ins[0], std::move(da));
        break;
      }
      case Op::Concat: {
        const AxisSplit os = split_at(y.shape(), node.attrs.axis);
        std::size_t offset = 0;
        for (std::size_t id : ins) {
          const Tensor& part = nodes_[id].value;
          const std::size_t block = part.shape()[node.attrs.axis] * os.inner;
          if (nodes_[id].needs_grad) {
            Tensor d(part.shape());
            for (std::size_t o = 0; o < os.outer; ++o) {
              const double* from = g.data().data() + o * os.extent * os.inner + offset;
              std::copy(from, from + block, d.data().data() + o * block);
            }
            accumulate(id, std::move(d));
          }
          offset += block;
        }
        break;
      }
      case Op::Slice: {
        const Tensor& x = nodes_[ins[0]].value;
        const AxisSplit xs = split_at(x.shape(), node.attrs.axis);
        const std::size_t block = node.attrs.length * xs.inner;
        Tensor d(x.shape());
        for (std::size_t o = 0; o < xs.outer; ++o) {
          const double* from = g.data().data() + o * block;
          std::copy(from, from + block,
                    d.data().data() + (o * xs.extent + node.attrs.start) * xs.inner);
        }
        accumulate(ins[0], std::move(d));
        break;
      }
      case Op::Reshape:
        accumulate(ins[0], g.reshaped(nodes_[ins[0]].value.shape()));
        break;
    }
  }
  adj.resize(nodes_.size());
  return grads;
}

Tensor Tape::gradient(Var output, Var wrt) const {
  check_owned(wrt, "differentiation target");
  if (nodes_[wrt.id_].op != Op::Leaf) {
    throw LookupError("differentiation target is not a leaf of this tape");
  }
  return backward(output).of(wrt);
}

std::vector<Tensor> Tape::replay() const {
  std::vector<Tensor> values;
  values.reserve(nodes_.size());
  for (const Node& node : nodes_) {
    if (node.op == Op::Leaf || node.op == Op::Constant) {
      values.push_back(node.value);
      continue;
    }
    std::vector<const Tensor*> in;
    in.reserve(node.inputs.size());
    for (std::size_t id : node.inputs) in.push_back(&values[id]);
    values.push_back(compute(node.op, in, node.attrs));
  }
  return values;
}

namespace {

Var apply1(Op op, Var x, const OpAttrs& attrs = {}) {
  const Var in[] = {x};
  return x.tape().apply(op, in, attrs);
}

Var apply2(Op op, Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape().apply(op, in);
}

}  // namespace

Var matmul(Var a, Var b) { return apply2(Op::MatMul, a, b); }
Var conv2d(Var input, Var kernel) { return apply2(Op::Conv2D, input, kernel); }
Var add(Var a, Var b) { return apply2(Op::Add, a, b); }
Var sub(Var a, Var b) { return apply2(Op::Sub, a, b); }
Var mul(Var a, Var b) { return apply2(Op::Mul, a, b); }
Var bias_add(Var x, Var bias) { return apply2(Op::BiasAdd, x, bias); }

Var scale(Var x, double factor) {
  OpAttrs attrs;
  attrs.scalar = factor;
  return apply1(Op::Scale, x, attrs);
}

Var sigmoid(Var x) { return apply1(Op::Sigmoid, x); }
Var tanh(Var x) { return apply1(Op::Tanh, x); }
Var relu(Var x) { return apply1(Op::Relu, x); }
Var sqrt(Var x) { return apply1(Op::Sqrt, x); }
Var spatial_mean(Var x) { return apply1(Op::SpatialMean, x); }
Var sum(Var x) { return apply1(Op::Sum, x); }
Var sum_last_axis(Var x) { return apply1(Op::SumLastAxis, x); }
Var squared_error(Var a, Var b) { return apply2(Op::SquaredError, a, b); }

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  OpAttrs attrs;
  attrs.axis = axis;
  return parts.front().tape().apply(Op::Concat, parts, attrs);
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  OpAttrs attrs;
  attrs.axis = axis;
  attrs.start = start;
  attrs.length = length;
  return apply1(Op::Slice, x, attrs);
}

Var reshape(Var x, Shape shape) {
  OpAttrs attrs;
  attrs.shape = std::move(shape);
  return apply1(Op::Reshape, x, attrs);
}

}  // namespace phmadv::ad
