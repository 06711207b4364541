#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "fedgansim/graph.hpp"
#include "fedgansim/mlp.hpp"
#include "fedgansim/rng.hpp"

namespace fedgan::gan {

enum class GanLossKind { kVanillaSaturating, kVanillaNonsaturating, kWganGp };

struct GanLossConfig {
  GanLossKind kind = GanLossKind::kVanillaNonsaturating;
  double gp_lambda = 10.0;                   // used only by kWganGp
  std::uint64_t gp_interpolation_seed = 0;   // stream for the per-sample mixing coefficients

  bool is_wgan() const { return kind == GanLossKind::kWganGp; }
};

struct LossValue {
  double loss = 0.0;
  ParamVector grad;
};

// Sigmoid outputs are clamped to this range before any log. The backdoor
// attack intentionally saturates the discriminator; training must not NaN.
inline constexpr double kProbClamp = 1e-7;

// Discriminator loss compiled once for a fixed batch geometry; gradient
// expressions (including the second-order gradient-penalty path) are part
// of the compiled graph, so per-step work is bind + evaluate.
//
// The fake batch is an input here: callers produce it with gen_forward (or
// a GenForwardProgram) and the interpolates for the penalty are mixed
// numerically, since neither depends on discriminator parameters.
class DiscLossProgram {
 public:
  DiscLossProgram(const GanLossConfig& cfg, const MlpSpec& d_spec,
                  std::size_t real_batch, std::size_t fake_batch);

  // For kWganGp, `gp_rng` supplies the per-pair mixing coefficients
  // (one uniform draw per sample; real and fake batches must match).
  LossValue eval(const ParamVector& d, const ad::Tensor& real, const ad::Tensor& fake,
                 Rng& gp_rng);

 private:
  GanLossConfig cfg_;
  MlpSpec d_spec_;
  ad::Graph g_;
  ad::NodeId x_real_ = 0, x_fake_ = 0, x_hat_ = 0;
  MlpGraph d_real_net_;
  ad::NodeId loss_ = 0;
  std::map<ad::NodeId, ad::NodeId> grad_nodes_;
};

// Generator loss compiled once. The generator sits inside the graph (its
// parameters are differentiated); discriminator parameters are bound as
// plain inputs each call.
class GenLossProgram {
 public:
  GenLossProgram(const GanLossConfig& cfg, const MlpSpec& d_spec, const MlpSpec& g_spec,
                 std::size_t batch);

  LossValue eval(const ParamVector& d, const ParamVector& g, const ad::Tensor& z);

 private:
  GanLossConfig cfg_;
  MlpSpec d_spec_, g_spec_;
  ad::Graph g_;
  ad::NodeId z_ = 0;
  MlpGraph gen_net_, disc_net_;
  ad::NodeId loss_ = 0;
  std::map<ad::NodeId, ad::NodeId> grad_nodes_;
};

// Generator forward pass compiled once (used to produce fake batches for
// DiscLossProgram without rebuilding graphs every step).
class GenForwardProgram {
 public:
  GenForwardProgram(const MlpSpec& g_spec, std::size_t batch);
  ad::Tensor eval(const ParamVector& g, const ad::Tensor& z);

 private:
  MlpSpec g_spec_;
  ad::Graph g_;
  ad::NodeId z_ = 0;
  MlpGraph net_;
};

// One-shot forms. For kWganGp the interpolation stream starts fresh from
// cfg.gp_interpolation_seed on every call.
LossValue d_loss(const GanLossConfig& cfg, const ParamVector& d, const MlpSpec& d_spec,
                 const ParamVector& g, const MlpSpec& g_spec, const ad::Tensor& real,
                 const ad::Tensor& z);

LossValue g_loss(const GanLossConfig& cfg, const ParamVector& d, const MlpSpec& d_spec,
                 const ParamVector& g, const MlpSpec& g_spec, const ad::Tensor& z);

}  // namespace fedgan::gan
