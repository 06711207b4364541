#include "fedgansim/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedgan::ad {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

ECMap map_of(const Tensor& t) {
  return ECMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
               static_cast<Eigen::Index>(t.cols()));
}

bool broadcast_compatible(std::size_t ar, std::size_t ac, std::size_t br,
                          std::size_t bc) {
  if (ar == br && ac == bc) return true;        // same extent
  if (br == 1 && bc == ac) return true;         // row broadcast
  if (br == 1 && bc == 1) return true;          // scalar broadcast
  return false;
}

double softplus_stable(double x) {
  // log(1 + e^x) without overflow for large |x|
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

void Graph::check_id(NodeId id) const {
  if (id >= nodes_.size()) {
    throw std::out_of_range("Graph: node id " + std::to_string(id) +
                            " out of range (" + std::to_string(nodes_.size()) + ")");
  }
}

NodeId Graph::input(std::size_t rows, std::size_t cols) {
  Node n;
  n.op = Op::kInput;
  n.rows = rows;
  n.cols = cols;
  NodeId id = push(std::move(n));
  roots_.push_back(id);
  return id;
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  n.epoch = ~std::uint64_t{0};  // constants never go stale
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  if (!broadcast_compatible(na.rows, na.cols, nb.rows, nb.cols)) {
    throw std::invalid_argument("add: incompatible shapes");
  }
  Node n;
  n.op = Op::kAdd;
  n.in = {a, b};
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  if (!broadcast_compatible(na.rows, na.cols, nb.rows, nb.cols)) {
    throw std::invalid_argument("sub: incompatible shapes");
  }
  Node n;
  n.op = Op::kSub;
  n.in = {a, b};
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  if (!broadcast_compatible(na.rows, na.cols, nb.rows, nb.cols)) {
    throw std::invalid_argument("mul: incompatible shapes");
  }
  Node n;
  n.op = Op::kMul;
  n.in = {a, b};
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

NodeId Graph::scalar_add(NodeId x, double c) {
  check_id(x);
  Node n;
  n.op = Op::kScalarAdd;
  n.in = {x};
  n.rows = nodes_[x].rows;
  n.cols = nodes_[x].cols;
  n.c0 = c;
  return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId x, double c) {
  check_id(x);
  Node n;
  n.op = Op::kScalarMul;
  n.in = {x};
  n.rows = nodes_[x].rows;
  n.cols = nodes_[x].cols;
  n.c0 = c;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  check_id(a);
  check_id(b);
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  const std::size_t am = trans_a ? na.cols : na.rows;
  const std::size_t ak = trans_a ? na.rows : na.cols;
  const std::size_t bk = trans_b ? nb.cols : nb.rows;
  const std::size_t bn = trans_b ? nb.rows : nb.cols;
  if (ak != bk) throw std::invalid_argument("matmul: inner dimensions differ");
  Node n;
  n.op = Op::kMatmul;
  n.in = {a, b};
  n.rows = am;
  n.cols = bn;
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  return push(std::move(n));
}

#define FEDGAN_UNARY_BUILDER(NAME, OPKIND)       \
  NodeId Graph::NAME(NodeId x) {                 \
    check_id(x);                                 \
    Node n;                                      \
    n.op = OPKIND;                               \
    n.in = {x};                                  \
    n.rows = nodes_[x].rows;                     \
    n.cols = nodes_[x].cols;                     \
    return push(std::move(n));                   \
  }

FEDGAN_UNARY_BUILDER(tanh, Op::kTanh)
FEDGAN_UNARY_BUILDER(sigmoid, Op::kSigmoid)
FEDGAN_UNARY_BUILDER(softplus, Op::kSoftplus)
FEDGAN_UNARY_BUILDER(log, Op::kLog)
FEDGAN_UNARY_BUILDER(exp, Op::kExp)
FEDGAN_UNARY_BUILDER(square, Op::kSquare)
FEDGAN_UNARY_BUILDER(sqrt, Op::kSqrt)
FEDGAN_UNARY_BUILDER(recip, Op::kRecip)

#undef FEDGAN_UNARY_BUILDER

NodeId Graph::clamp(NodeId x, double lo, double hi) {
  check_id(x);
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  Node n;
  n.op = Op::kClamp;
  n.in = {x};
  n.rows = nodes_[x].rows;
  n.cols = nodes_[x].cols;
  n.c0 = lo;
  n.c1 = hi;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  check_id(x);
  Node n;
  n.op = Op::kSum;
  n.in = {x};
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

NodeId Graph::concat0(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  if (na.cols != nb.cols) throw std::invalid_argument("concat0: column counts differ");
  Node n;
  n.op = Op::kConcat0;
  n.in = {a, b};
  n.rows = na.rows + nb.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

NodeId Graph::slice0(NodeId x, std::size_t begin, std::size_t end) {
  check_id(x);
  const Node& nx = nodes_[x];
  if (begin >= end || end > nx.rows) throw std::invalid_argument("slice0: bad range");
  Node n;
  n.op = Op::kSlice0;
  n.in = {x};
  n.rows = end - begin;
  n.cols = nx.cols;
  n.i0 = begin;
  n.i1 = end;
  return push(std::move(n));
}

NodeId Graph::mean(NodeId x) {
  check_id(x);
  const double inv = 1.0 / static_cast<double>(nodes_[x].rows * nodes_[x].cols);
  return scalar_mul(sum(x), inv);
}

NodeId Graph::l2_norm(NodeId x, double eps) {
  return sqrt(scalar_add(sum(square(x)), eps));
}

// --- evaluation -----------------------------------------------------------

void Graph::bind(NodeId id, Tensor value) {
  check_id(id);
  Node& n = nodes_[id];
  if (n.op != Op::kInput) throw std::invalid_argument("bind: node is not an input");
  if (value.rows() != n.rows || value.cols() != n.cols) {
    throw std::invalid_argument(
        "bind: shape mismatch, expected [" + std::to_string(n.rows) + "," +
        std::to_string(n.cols) + "] got [" + std::to_string(value.rows()) + "," +
        std::to_string(value.cols()) + "]");
  }
  n.value = std::move(value);
  ++current_epoch_;
  n.epoch = ~std::uint64_t{0};
}

const Tensor& Graph::eval(NodeId output) {
  check_id(output);
  for (NodeId id = 0; id <= output; ++id) {
    Node& n = nodes_[id];
    if (n.op == Op::kInput) continue;  // bound or reported unbound when read
    if (n.epoch == ~std::uint64_t{0}) continue;  // constant
    if (n.epoch == current_epoch_) continue;
    compute(id);
    n.epoch = current_epoch_;
  }
  const Node& out = nodes_[output];
  if (out.op == Op::kInput && out.epoch != ~std::uint64_t{0}) {
    throw std::invalid_argument("eval: unbound input node");
  }
  return out.value;
}

const Tensor& Graph::forward(const std::vector<std::pair<NodeId, Tensor>>& bindings,
                             NodeId output) {
  for (const auto& [id, value] : bindings) bind(id, value);
  return eval(output);
}

void Graph::compute(NodeId id) {
  Node& n = nodes_[id];
  auto arg = [&](std::size_t k) -> const Tensor& {
    const Node& src = nodes_[n.in[k]];
    if (src.op == Op::kInput && src.epoch != ~std::uint64_t{0}) {
      throw std::invalid_argument("eval: unbound input node " + std::to_string(n.in[k]));
    }
    return src.value;
  };

  switch (n.op) {
    case Op::kInput:
      throw std::invalid_argument("eval: unbound input node " + std::to_string(id));
    case Op::kConstant:
      return;

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      Tensor out = Tensor::zeros(n.rows, n.cols);
      const std::size_t rows = n.rows, cols = n.cols;
      const bool b_scalar = b.size() == 1;
      const bool b_row = !b_scalar && b.rows() == 1 && rows > 1;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* pa = a.data.data() + r * cols;
        const double* pb = b_scalar ? b.data.data()
                                    : (b_row ? b.data.data() : b.data.data() + r * cols);
        double* po = out.data.data() + r * cols;
        switch (n.op) {
          case Op::kAdd:
            for (std::size_t c = 0; c < cols; ++c) po[c] = pa[c] + pb[b_scalar ? 0 : c];
            break;
          case Op::kSub:
            for (std::size_t c = 0; c < cols; ++c) po[c] = pa[c] - pb[b_scalar ? 0 : c];
            break;
          default:
            for (std::size_t c = 0; c < cols; ++c) po[c] = pa[c] * pb[b_scalar ? 0 : c];
            break;
        }
      }
      n.value = std::move(out);
      return;
    }

    case Op::kScalarAdd:
    case Op::kScalarMul: {
      const Tensor& x = arg(0);
      Tensor out = x;
      if (n.op == Op::kScalarAdd) {
        for (double& v : out.data) v += n.c0;
      } else {
        for (double& v : out.data) v *= n.c0;
      }
      out.shape = {n.rows, n.cols};
      n.value = std::move(out);
      return;
    }

    case Op::kMatmul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      Tensor out = Tensor::zeros(n.rows, n.cols);
      EMap o(out.data.data(), static_cast<Eigen::Index>(n.rows),
             static_cast<Eigen::Index>(n.cols));
      ECMap ma = map_of(a);
      ECMap mb = map_of(b);
      if (!n.trans_a && !n.trans_b) o.noalias() = ma * mb;
      else if (n.trans_a && !n.trans_b) o.noalias() = ma.transpose() * mb;
      else if (!n.trans_a && n.trans_b) o.noalias() = ma * mb.transpose();
      else o.noalias() = ma.transpose() * mb.transpose();
      n.value = std::move(out);
      return;
    }

    case Op::kTanh:
    case Op::kSigmoid:
    case Op::kSoftplus:
    case Op::kLog:
    case Op::kExp:
    case Op::kSquare:
    case Op::kSqrt:
    case Op::kRecip: {
      const Tensor& x = arg(0);
      Tensor out = x;
      out.shape = {n.rows, n.cols};
      switch (n.op) {
        case Op::kTanh:
          for (double& v : out.data) v = std::tanh(v);
          break;
        case Op::kSigmoid:
          for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
          break;
        case Op::kSoftplus:
          for (double& v : out.data) v = softplus_stable(v);
          break;
        case Op::kLog:
          for (double& v : out.data) {
            if (v <= 0.0) {
              throw std::domain_error("log: nonpositive argument " + std::to_string(v));
            }
            v = std::log(v);
          }
          break;
        case Op::kExp:
          for (double& v : out.data) v = std::exp(v);
          break;
        case Op::kSquare:
          for (double& v : out.data) v = v * v;
          break;
        case Op::kSqrt:
          for (double& v : out.data) v = std::sqrt(v);
          break;
        default:
          for (double& v : out.data) v = 1.0 / v;
          break;
      }
      n.value = std::move(out);
      return;
    }

    case Op::kClamp: {
      Tensor out = arg(0);
      out.shape = {n.rows, n.cols};
      for (double& v : out.data) v = v < n.c0 ? n.c0 : (v > n.c1 ? n.c1 : v);
      n.value = std::move(out);
      return;
    }

    case Op::kClampMask: {
      Tensor out = arg(0);
      out.shape = {n.rows, n.cols};
      for (double& v : out.data) v = (v > n.c0 && v < n.c1) ? 1.0 : 0.0;
      n.value = std::move(out);
      return;
    }

    case Op::kSum: {
      const Tensor& x = arg(0);
      double acc = 0.0;
      for (double v : x.data) acc += v;
      n.value = Tensor::scalar(acc);
      return;
    }

    case Op::kConcat0: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      Tensor out = Tensor::zeros(n.rows, n.cols);
      std::copy(a.data.begin(), a.data.end(), out.data.begin());
      std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
      n.value = std::move(out);
      return;
    }

    case Op::kSlice0: {
      const Tensor& x = arg(0);
      Tensor out = Tensor::zeros(n.rows, n.cols);
      std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(n.i0 * n.cols),
                x.data.begin() + static_cast<std::ptrdiff_t>(n.i1 * n.cols),
                out.data.begin());
      n.value = std::move(out);
      return;
    }
  }
  throw std::logic_error("eval: unhandled op");
}

// --- differentiation ------------------------------------------------------

NodeId Graph::ones_like_shape(std::size_t rows, std::size_t cols) {
  return constant(Tensor::full(rows, cols, 1.0));
}

NodeId Graph::reduce_to(NodeId g, std::size_t rows, std::size_t cols) {
  const Node& ng = nodes_[g];
  if (ng.rows == rows && ng.cols == cols) return g;
  if (rows == 1 && cols == 1) return sum(g);
  // row broadcast: column sums via ones^T @ g
  return matmul(ones_like_shape(1, ng.rows), g);
}

std::map<NodeId, NodeId> Graph::grad_nodes(NodeId output,
                                           const std::vector<NodeId>& wrt) {
  check_id(output);
  for (NodeId w : wrt) check_id(w);
  const Node& out = nodes_[output];
  if (out.rows * out.cols != 1) {
    throw std::invalid_argument("grad: output node is not scalar-valued");
  }

  // Adjoint accumulation. Contributions are combined left-to-right with add
  // nodes, so the reduction order is fixed by construction order.
  const NodeId end = output + 1;
  std::vector<NodeId> adj(end, static_cast<NodeId>(-1));
  std::vector<bool> has_adj(end, false);

  adj[output] = constant(Tensor::scalar(1.0));
  has_adj[output] = true;

  auto accumulate = [&](NodeId target, NodeId contribution) {
    if (target >= end) return;  // node created during this backward pass
    if (!has_adj[target]) {
      adj[target] = contribution;
      has_adj[target] = true;
    } else {
      adj[target] = add(adj[target], contribution);
    }
  };

  for (NodeId id = end; id-- > 0;) {
    if (!has_adj[id]) continue;
    const Node nd = nodes_[id];  // copy: push() may reallocate nodes_
    const NodeId g = adj[id];
    switch (nd.op) {
      case Op::kInput:
      case Op::kConstant:
        break;

      case Op::kAdd: {
        accumulate(nd.in[0], g);
        const Node& b = nodes_[nd.in[1]];
        accumulate(nd.in[1], reduce_to(g, b.rows, b.cols));
        break;
      }
      case Op::kSub: {
        accumulate(nd.in[0], g);
        const Node& b = nodes_[nd.in[1]];
        accumulate(nd.in[1], scalar_mul(reduce_to(g, b.rows, b.cols), -1.0));
        break;
      }
      case Op::kMul: {
        accumulate(nd.in[0], mul(g, nd.in[1]));
        const Node& b = nodes_[nd.in[1]];
        accumulate(nd.in[1], reduce_to(mul(g, nd.in[0]), b.rows, b.cols));
        break;
      }
      case Op::kScalarAdd:
        accumulate(nd.in[0], g);
        break;
      case Op::kScalarMul:
        accumulate(nd.in[0], scalar_mul(g, nd.c0));
        break;

      case Op::kMatmul: {
        const NodeId a = nd.in[0], b = nd.in[1];
        if (!nd.trans_a && !nd.trans_b) {
          accumulate(a, matmul(g, b, false, true));
          accumulate(b, matmul(a, g, true, false));
        } else if (nd.trans_a && !nd.trans_b) {
          accumulate(a, matmul(b, g, false, true));
          accumulate(b, matmul(a, g, false, false));
        } else if (!nd.trans_a && nd.trans_b) {
          accumulate(a, matmul(g, b, false, false));
          accumulate(b, matmul(g, a, true, false));
        } else {
          accumulate(a, matmul(b, g, true, true));
          accumulate(b, matmul(g, a, true, true));
        }
        break;
      }

      case Op::kTanh:
        // g * (1 - y^2)
        accumulate(nd.in[0], mul(g, scalar_add(scalar_mul(square(id), -1.0), 1.0)));
        break;
      case Op::kSigmoid:
        // g * y * (1 - y)
        accumulate(nd.in[0], mul(g, mul(id, scalar_add(scalar_mul(id, -1.0), 1.0))));
        break;
      case Op::kSoftplus:
        accumulate(nd.in[0], mul(g, sigmoid(nd.in[0])));
        break;
      case Op::kLog:
        accumulate(nd.in[0], mul(g, recip(nd.in[0])));
        break;
      case Op::kExp:
        accumulate(nd.in[0], mul(g, id));
        break;
      case Op::kSquare:
        accumulate(nd.in[0], scalar_mul(mul(g, nd.in[0]), 2.0));
        break;
      case Op::kSqrt:
        // g * 0.5 / sqrt(x)
        accumulate(nd.in[0], scalar_mul(mul(g, recip(id)), 0.5));
        break;
      case Op::kRecip:
        // -g * y^2
        accumulate(nd.in[0], scalar_mul(mul(g, square(id)), -1.0));
        break;

      case Op::kClamp: {
        Node mask;
        mask.op = Op::kClampMask;
        mask.in = {nd.in[0]};
        mask.rows = nd.rows;
        mask.cols = nd.cols;
        mask.c0 = nd.c0;
        mask.c1 = nd.c1;
        accumulate(nd.in[0], mul(g, push(std::move(mask))));
        break;
      }
      case Op::kClampMask:
        break;  // piecewise constant: derivative is zero a.e.

      case Op::kSum: {
        const Node& x = nodes_[nd.in[0]];
        accumulate(nd.in[0], mul(ones_like_shape(x.rows, x.cols), g));
        break;
      }

      case Op::kConcat0: {
        const Node& a = nodes_[nd.in[0]];
        accumulate(nd.in[0], slice0(g, 0, a.rows));
        accumulate(nd.in[1], slice0(g, a.rows, nd.rows));
        break;
      }
      case Op::kSlice0: {
        const Node& x = nodes_[nd.in[0]];
        NodeId padded = g;
        if (nd.i0 > 0) padded = concat0(constant(Tensor::zeros(nd.i0, x.cols)), padded);
        if (nd.i1 < x.rows) {
          padded = concat0(padded, constant(Tensor::zeros(x.rows - nd.i1, x.cols)));
        }
        accumulate(nd.in[0], padded);
        break;
      }
    }
  }

  std::map<NodeId, NodeId> result;
  for (NodeId w : wrt) {
    if (w < end && has_adj[w]) {
      result[w] = adj[w];
    } else {
      const Node& nw = nodes_[w];
      result[w] = constant(Tensor::zeros(nw.rows, nw.cols));
    }
  }
  return result;
}

GradientResult Graph::grad(NodeId output, const std::vector<NodeId>& wrt) {
  GradientResult res;
  res.node = grad_nodes(output, wrt);
  for (const auto& [w, gid] : res.node) {
    Tensor g = eval(gid);
    g.shape = nodes_[w].value.shape.empty()
                  ? std::vector<std::size_t>{nodes_[w].rows, nodes_[w].cols}
                  : nodes_[w].value.shape;
    res.value.emplace(w, std::move(g));
  }
  return res;
}

Tensor finite_diff(const std::function<double(const Tensor&)>& fn,
                   const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be positive");
  Tensor g = x;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe.data[i];
    probe.data[i] = orig + h;
    const double fp = fn(probe);
    probe.data[i] = orig - h;
    const double fm = fn(probe);
    probe.data[i] = orig;
    g.data[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace fedgan::ad
