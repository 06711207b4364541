#include "fedgansim/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedgansim/rng.hpp"

namespace fedgan::gan {

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("MlpSpec: need at least input and output layer");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("MlpSpec: layer sizes must be positive");
  }
}

ParamLayout ParamLayout::from_spec(const MlpSpec& spec) {
  spec.validate();
  ParamLayout layout;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    LayerLayout entry;
    entry.cols = spec.layer_sizes[l];
    entry.rows = spec.layer_sizes[l + 1];
    entry.w_offset = off;
    off += entry.rows * entry.cols;
    entry.b_offset = off;
    off += entry.rows;
    layout.layers.push_back(entry);
  }
  layout.total = off;
  return layout;
}

ParamVector ParamVector::zeros_like(const MlpSpec& spec) {
  ParamVector p;
  p.layout = ParamLayout::from_spec(spec);
  p.data.assign(p.layout.total, 0.0);
  return p;
}

bool ParamVector::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ParamVector init_params(const MlpSpec& spec) {
  ParamVector p = ParamVector::zeros_like(spec);
  Rng rng(spec.init_seed);
  for (const LayerLayout& layer : p.layout.layers) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
    for (std::size_t i = 0; i < layer.rows * layer.cols; ++i) {
      p.data[layer.w_offset + i] = rng.uniform(-limit, limit);
    }
    // biases stay zero
  }
  return p;
}

std::vector<ad::NodeId> MlpGraph::param_nodes() const {
  std::vector<ad::NodeId> ids;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    ids.push_back(weights[l]);
    ids.push_back(biases[l]);
  }
  return ids;
}

MlpGraph build_mlp_graph(ad::Graph& g, const MlpSpec& spec, ad::NodeId x,
                         const std::vector<ad::NodeId>& shared_params) {
  spec.validate();
  const ParamLayout layout = ParamLayout::from_spec(spec);
  if (!shared_params.empty() && shared_params.size() != 2 * layout.layers.size()) {
    throw std::invalid_argument("build_mlp_graph: shared param list size mismatch");
  }

  MlpGraph net;
  net.in = x;
  ad::NodeId h = x;
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const LayerLayout& layer = layout.layers[l];
    ad::NodeId w, b;
    if (shared_params.empty()) {
      w = g.input(layer.rows, layer.cols);
      b = g.input(1, layer.rows);
    } else {
      w = shared_params[2 * l];
      b = shared_params[2 * l + 1];
    }
    net.weights.push_back(w);
    net.biases.push_back(b);

    // h [batch, in] @ W^T [in, out] + b row-broadcast
    h = g.add(g.matmul(h, w, false, true), b);
    const bool last = (l + 1 == layout.layers.size());
    if (!last) {
      switch (spec.activation) {
        case Activation::kTanh: h = g.tanh(h); break;
        case Activation::kSigmoid: h = g.sigmoid(h); break;
        case Activation::kSoftplus: h = g.softplus(h); break;
      }
    } else {
      switch (spec.output_activation) {
        case OutputActivation::kIdentity: break;
        case OutputActivation::kSigmoid: h = g.sigmoid(h); break;
        case OutputActivation::kTanh: h = g.tanh(h); break;
      }
    }
  }
  net.out = h;
  return net;
}

void bind_params(ad::Graph& g, const MlpGraph& net, const ParamVector& params) {
  const ParamLayout& layout = params.layout;
  if (layout.layers.size() != net.weights.size()) {
    throw std::invalid_argument("bind_params: layer count mismatch");
  }
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const LayerLayout& layer = layout.layers[l];
    std::vector<double> w(params.data.begin() + static_cast<std::ptrdiff_t>(layer.w_offset),
                          params.data.begin() +
                              static_cast<std::ptrdiff_t>(layer.w_offset + layer.rows * layer.cols));
    std::vector<double> b(params.data.begin() + static_cast<std::ptrdiff_t>(layer.b_offset),
                          params.data.begin() +
                              static_cast<std::ptrdiff_t>(layer.b_offset + layer.rows));
    g.bind(net.weights[l], ad::Tensor({layer.rows, layer.cols}, std::move(w)));
    g.bind(net.biases[l], ad::Tensor({1, layer.rows}, std::move(b)));
  }
}

ParamVector gather_param_grads(const ad::GradientResult& grads, const MlpGraph& net,
                               const MlpSpec& spec) {
  ParamVector out = ParamVector::zeros_like(spec);
  for (std::size_t l = 0; l < out.layout.layers.size(); ++l) {
    const LayerLayout& layer = out.layout.layers[l];
    const ad::Tensor& gw = grads.of(net.weights[l]);
    const ad::Tensor& gb = grads.of(net.biases[l]);
    std::copy(gw.data.begin(), gw.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(layer.w_offset));
    std::copy(gb.data.begin(), gb.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(layer.b_offset));
  }
  return out;
}

namespace {

ad::Tensor forward_through(const ParamVector& params, const MlpSpec& spec,
                           const ad::Tensor& in, const char* what) {
  if (in.cols() != spec.input_dim()) {
    throw std::invalid_argument(std::string(what) + ": input has " +
                                std::to_string(in.cols()) + " columns, spec wants " +
                                std::to_string(spec.input_dim()));
  }
  if (params.layout != ParamLayout::from_spec(spec)) {
    throw std::invalid_argument(std::string(what) + ": params do not match spec layout");
  }
  ad::Graph g;
  ad::NodeId x = g.input(in.rows(), in.cols());
  MlpGraph net = build_mlp_graph(g, spec, x);
  g.bind(x, in);
  bind_params(g, net, params);
  return g.eval(net.out);
}

}  // namespace

ad::Tensor gen_forward(const ParamVector& gparams, const MlpSpec& spec,
                       const ad::Tensor& z) {
  return forward_through(gparams, spec, z, "gen_forward");
}

ad::Tensor disc_forward(const ParamVector& dparams, const MlpSpec& spec,
                        const ad::Tensor& x) {
  if (spec.output_dim() != 1) {
    throw std::invalid_argument("disc_forward: discriminator output must be 1-dim");
  }
  return forward_through(dparams, spec, x, "disc_forward");
}

}  // namespace fedgan::gan
