#pragma once

#include <cstdint>
#include <vector>

#include "fedgansim/graph.hpp"
#include "fedgansim/tensor.hpp"

namespace fedgan::gan {

enum class Activation { kTanh, kSigmoid, kSoftplus };
enum class OutputActivation { kIdentity, kSigmoid, kTanh };

// Fully-connected network description. layer_sizes runs input -> output;
// `activation` applies to hidden layers, `output_activation` to the last.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::kTanh;
  OutputActivation output_activation = OutputActivation::kIdentity;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return layer_sizes.size() - 1; }

  bool operator==(const MlpSpec&) const = default;
};

struct LayerLayout {
  std::size_t rows = 0;  // output dim
  std::size_t cols = 0;  // input dim
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;

  bool operator==(const LayerLayout&) const = default;
};

// Per-layer (rows, cols, bias) offsets into the flat array; total length is
// sum(rows*cols + rows) over layers.
struct ParamLayout {
  std::vector<LayerLayout> layers;
  std::size_t total = 0;

  static ParamLayout from_spec(const MlpSpec& spec);
  bool operator==(const ParamLayout&) const = default;
};

// Flat parameter array with its layout. The unit exchanged by aggregation.
struct ParamVector {
  std::vector<double> data;
  ParamLayout layout;

  static ParamVector zeros_like(const MlpSpec& spec);
  bool all_finite() const;
};

// Glorot-uniform weights, zero biases, deterministic in spec.init_seed.
ParamVector init_params(const MlpSpec& spec);

// Network built into an autodiff graph. Weights/biases are graph inputs so
// gradients with respect to them can be requested.
struct MlpGraph {
  std::vector<ad::NodeId> weights;
  std::vector<ad::NodeId> biases;
  ad::NodeId in = 0;
  ad::NodeId out = 0;

  std::vector<ad::NodeId> param_nodes() const;
};

// Appends the network to `g`, reading its input from node `x`
// ([batch, input_dim]). When `shared_params` is nonempty the layers reuse
// those input nodes instead of declaring fresh ones (several forward passes
// of the same network inside one graph).
MlpGraph build_mlp_graph(ad::Graph& g, const MlpSpec& spec, ad::NodeId x,
                         const std::vector<ad::NodeId>& shared_params = {});

void bind_params(ad::Graph& g, const MlpGraph& net, const ParamVector& params);

// Collects evaluated gradients of the network's parameter nodes back into
// flat ParamVector form.
ParamVector gather_param_grads(const ad::GradientResult& grads, const MlpGraph& net,
                               const MlpSpec& spec);

// Single-call forward passes (deterministic in their arguments).
ad::Tensor gen_forward(const ParamVector& g, const MlpSpec& spec, const ad::Tensor& z);
ad::Tensor disc_forward(const ParamVector& d, const MlpSpec& spec, const ad::Tensor& x);

}  // namespace fedgan::gan
