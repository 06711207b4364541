#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "fedgansim/tensor.hpp"

namespace fedgan::ad {

using NodeId = std::size_t;

// Reverse-mode autodiff over an append-only expression graph.
//
// Gradients are built as graph expressions, not numeric buffers: grad()
// appends adjoint nodes made of the same op kinds it differentiates, so a
// gradient is itself differentiable. That is what the gradient-penalty
// loss needs (it takes the parameter gradient of a norm of an input
// gradient).
//
// Node ids are strictly increasing and every node's inputs have smaller
// ids, so evaluation in id order is a topological sweep. Existing nodes
// never change; the graph only grows. Evaluation is single-threaded per
// graph; distinct graphs are independent.
enum class Op : std::uint8_t {
  kInput,
  kConstant,
  kAdd,        // a + b; b may be [1,n] (row broadcast) or [1,1] (scalar broadcast)
  kSub,        // a - b; same broadcast rules for b
  kMul,        // a * b elementwise; same broadcast rules for b
  kScalarAdd,  // x + c
  kScalarMul,  // x * c
  kMatmul,     // op(a) @ op(b), op = transpose when the flag is set
  kTanh,
  kSigmoid,
  kSoftplus,
  kLog,
  kExp,
  kSquare,
  kSqrt,
  kRecip,     // elementwise 1/x; adjoint helper for log/sqrt/norm chains
  kClamp,     // clamp(x, lo, hi)
  kClampMask, // 1 where lo < x < hi else 0; derivative defined as 0
  kSum,       // full reduction -> [1,1]
  kConcat0,   // stack rows
  kSlice0,    // row range [begin, end)
};

struct GradientResult {
  // wrt id -> id of the gradient expression appended to the graph.
  std::map<NodeId, NodeId> node;
  // wrt id -> evaluated gradient, same shape as the input it refers to.
  std::map<NodeId, Tensor> value;

  const Tensor& of(NodeId wrt) const { return value.at(wrt); }
};

class Graph {
 public:
  struct Node {
    Op op = Op::kInput;
    std::vector<NodeId> in;
    std::size_t rows = 0, cols = 0;
    double c0 = 0.0, c1 = 0.0;     // scalar attribute(s): constant, clamp bounds
    std::size_t i0 = 0, i1 = 0;    // slice bounds
    bool trans_a = false, trans_b = false;
    Tensor value;
    std::uint64_t epoch = 0;       // last evaluation epoch
  };

  // --- construction -------------------------------------------------------

  NodeId input(std::size_t rows, std::size_t cols);
  NodeId constant(Tensor value);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scalar_add(NodeId x, double c);
  NodeId scalar_mul(NodeId x, double c);
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId softplus(NodeId x);
  NodeId log(NodeId x);
  NodeId exp(NodeId x);
  NodeId square(NodeId x);
  NodeId sqrt(NodeId x);
  NodeId recip(NodeId x);
  NodeId clamp(NodeId x, double lo, double hi);
  NodeId sum(NodeId x);
  NodeId concat0(NodeId a, NodeId b);
  NodeId slice0(NodeId x, std::size_t begin, std::size_t end);

  // Derived builders (no dedicated node kinds).
  NodeId mean(NodeId x);
  // sqrt(sum(square(x)) + eps); eps keeps the derivative finite at 0.
  NodeId l2_norm(NodeId x, double eps = 1e-12);

  // --- evaluation ---------------------------------------------------------

  // Binds values to input nodes and invalidates downstream caches.
  void bind(NodeId id, Tensor value);

  // Value of `output` under the current bindings; computes and caches every
  // stale node with id <= output. Throws if any input reachable from
  // `output` is unbound.
  const Tensor& eval(NodeId output);

  // One-shot convenience: bind all, then eval.
  const Tensor& forward(const std::vector<std::pair<NodeId, Tensor>>& bindings,
                        NodeId output);

  // --- differentiation ----------------------------------------------------

  // Appends adjoint expressions of the scalar node `output` with respect to
  // each id in `wrt` and returns their node ids (no evaluation). Ids in
  // `wrt` may be any node, not only inputs; unreachable ones get a zero
  // constant of the right shape.
  std::map<NodeId, NodeId> grad_nodes(NodeId output, const std::vector<NodeId>& wrt);

  // grad_nodes + evaluation under the current bindings.
  GradientResult grad(NodeId output, const std::vector<NodeId>& wrt);

  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<NodeId>& roots() const { return roots_; }

 private:
  NodeId push(Node n);
  void check_id(NodeId id) const;
  NodeId ones_like_shape(std::size_t rows, std::size_t cols);
  // adjoint contribution of a broadcast operand: reduce g back to b's shape
  NodeId reduce_to(NodeId g, std::size_t rows, std::size_t cols);
  void compute(NodeId id);

  std::vector<Node> nodes_;
  std::vector<NodeId> roots_;
  std::uint64_t current_epoch_ = 1;
};

// Central-difference gradient estimate of a scalar function, one coordinate
// at a time. Testing oracle; the caller owns the step size.
Tensor finite_diff(const std::function<double(const Tensor&)>& fn,
                   const Tensor& x, double h);

}  // namespace fedgan::ad
