#include "fedgansim/losses.hpp"

#include <stdexcept>

namespace fedgan::gan {

namespace {

void check_head(const GanLossConfig& cfg, const MlpSpec& d_spec) {
  if (d_spec.output_dim() != 1) {
    throw std::invalid_argument("gan loss: discriminator output must be 1-dim");
  }
  if (cfg.is_wgan() && d_spec.output_activation != OutputActivation::kIdentity) {
    throw std::invalid_argument(
        "gan loss: wgan_gp needs an identity critic head, not a sigmoid output");
  }
  if (!cfg.is_wgan() && d_spec.output_activation != OutputActivation::kSigmoid) {
    throw std::invalid_argument("gan loss: vanilla kinds need a sigmoid head");
  }
}

// mean log(clamped p), p a [m,1] probability node
ad::NodeId mean_log_prob(ad::Graph& g, ad::NodeId p) {
  return g.mean(g.log(g.clamp(p, kProbClamp, 1.0 - kProbClamp)));
}

// 1 - p
ad::NodeId one_minus(ad::Graph& g, ad::NodeId p) {
  return g.scalar_add(g.scalar_mul(p, -1.0), 1.0);
}

}  // namespace

DiscLossProgram::DiscLossProgram(const GanLossConfig& cfg, const MlpSpec& d_spec,
                                 std::size_t real_batch, std::size_t fake_batch)
    : cfg_(cfg), d_spec_(d_spec) {
  check_head(cfg, d_spec);
  if (real_batch == 0 || fake_batch == 0) {
    throw std::invalid_argument("d_loss: batches must be nonempty");
  }
  if (cfg.is_wgan() && real_batch != fake_batch) {
    throw std::invalid_argument("d_loss: wgan_gp pairs real and fake samples 1:1");
  }
  const std::size_t dim = d_spec.input_dim();

  x_real_ = g_.input(real_batch, dim);
  x_fake_ = g_.input(fake_batch, dim);
  d_real_net_ = build_mlp_graph(g_, d_spec, x_real_);
  MlpGraph d_fake = build_mlp_graph(g_, d_spec, x_fake_, d_real_net_.param_nodes());

  if (!cfg.is_wgan()) {
    // -E[log D(x)] - E[log(1 - D(G(z)))]
    ad::NodeId term_real = g_.scalar_mul(mean_log_prob(g_, d_real_net_.out), -1.0);
    ad::NodeId term_fake =
        g_.scalar_mul(mean_log_prob(g_, one_minus(g_, d_fake.out)), -1.0);
    loss_ = g_.add(term_real, term_fake);
  } else {
    // E[D(G(z))] - E[D(x)] + lambda * E[(||grad_xhat D(xhat)|| - 1)^2]
    x_hat_ = g_.input(real_batch, dim);
    MlpGraph d_hat = build_mlp_graph(g_, d_spec, x_hat_, d_real_net_.param_nodes());

    ad::NodeId base = g_.sub(g_.mean(d_fake.out), g_.mean(d_real_net_.out));

    // Per-sample input gradients: rows of d(sum of scores)/d(x_hat).
    ad::NodeId score_sum = g_.sum(d_hat.out);
    ad::NodeId gx = g_.grad_nodes(score_sum, {x_hat_}).at(x_hat_);
    ad::NodeId row_sq = g_.matmul(g_.square(gx), g_.constant(ad::Tensor::full(dim, 1, 1.0)));
    ad::NodeId norms = g_.sqrt(g_.scalar_add(row_sq, 1e-12));
    ad::NodeId penalty = g_.mean(g_.square(g_.scalar_add(norms, -1.0)));

    loss_ = g_.add(base, g_.scalar_mul(penalty, cfg.gp_lambda));
  }

  grad_nodes_ = g_.grad_nodes(loss_, d_real_net_.param_nodes());
}

LossValue DiscLossProgram::eval(const ParamVector& d, const ad::Tensor& real,
                                const ad::Tensor& fake, Rng& gp_rng) {
  bind_params(g_, d_real_net_, d);
  g_.bind(x_real_, real);
  g_.bind(x_fake_, fake);
  if (cfg_.is_wgan()) {
    // x_hat = eps*x + (1-eps)*G(z), one eps per pair
    ad::Tensor hat = real;
    const std::size_t cols = real.cols();
    for (std::size_t r = 0; r < real.rows(); ++r) {
      const double eps = gp_rng.uniform01();
      for (std::size_t c = 0; c < cols; ++c) {
        hat.data[r * cols + c] =
            eps * real.data[r * cols + c] + (1.0 - eps) * fake.data[r * cols + c];
      }
    }
    g_.bind(x_hat_, std::move(hat));
  }

  LossValue out;
  out.loss = g_.eval(loss_).data[0];
  ad::GradientResult grads;
  grads.node = grad_nodes_;
  for (const auto& [wrt, gid] : grad_nodes_) grads.value.emplace(wrt, g_.eval(gid));
  out.grad = gather_param_grads(grads, d_real_net_, d_spec_);
  return out;
}

GenLossProgram::GenLossProgram(const GanLossConfig& cfg, const MlpSpec& d_spec,
                               const MlpSpec& g_spec, std::size_t batch)
    : cfg_(cfg), d_spec_(d_spec), g_spec_(g_spec) {
  check_head(cfg, d_spec);
  if (batch == 0) throw std::invalid_argument("g_loss: batch must be nonempty");
  if (g_spec.output_dim() != d_spec.input_dim()) {
    throw std::invalid_argument("g_loss: generator output dim != discriminator input dim");
  }

  z_ = g_.input(batch, g_spec.input_dim());
  gen_net_ = build_mlp_graph(g_, g_spec, z_);
  disc_net_ = build_mlp_graph(g_, d_spec, gen_net_.out);

  switch (cfg.kind) {
    case GanLossKind::kVanillaSaturating:
      // E[log(1 - D(G(z)))], minimized by the generator
      loss_ = mean_log_prob(g_, one_minus(g_, disc_net_.out));
      break;
    case GanLossKind::kVanillaNonsaturating:
      // -E[log D(G(z))]
      loss_ = g_.scalar_mul(mean_log_prob(g_, disc_net_.out), -1.0);
      break;
    case GanLossKind::kWganGp:
      // -E[D(G(z))]
      loss_ = g_.scalar_mul(g_.mean(disc_net_.out), -1.0);
      break;
  }

  grad_nodes_ = g_.grad_nodes(loss_, gen_net_.param_nodes());
}

LossValue GenLossProgram::eval(const ParamVector& d, const ParamVector& g,
                               const ad::Tensor& z) {
  bind_params(g_, gen_net_, g);
  bind_params(g_, disc_net_, d);
  g_.bind(z_, z);

  LossValue out;
  out.loss = g_.eval(loss_).data[0];
  ad::GradientResult grads;
  grads.node = grad_nodes_;
  for (const auto& [wrt, gid] : grad_nodes_) grads.value.emplace(wrt, g_.eval(gid));
  out.grad = gather_param_grads(grads, gen_net_, g_spec_);
  return out;
}

GenForwardProgram::GenForwardProgram(const MlpSpec& g_spec, std::size_t batch)
    : g_spec_(g_spec) {
  z_ = g_.input(batch, g_spec.input_dim());
  net_ = build_mlp_graph(g_, g_spec, z_);
}

ad::Tensor GenForwardProgram::eval(const ParamVector& g, const ad::Tensor& z) {
  bind_params(g_, net_, g);
  g_.bind(z_, z);
  return g_.eval(net_.out);
}

LossValue d_loss(const GanLossConfig& cfg, const ParamVector& d, const MlpSpec& d_spec,
                 const ParamVector& g, const MlpSpec& g_spec, const ad::Tensor& real,
                 const ad::Tensor& z) {
  if (real.rows() == 0 || z.rows() == 0) {
    throw std::invalid_argument("d_loss: batches must be nonempty");
  }
  ad::Tensor fake = gen_forward(g, g_spec, z);
  DiscLossProgram prog(cfg, d_spec, real.rows(), fake.rows());
  Rng gp_rng(cfg.gp_interpolation_seed);
  return prog.eval(d, real, fake, gp_rng);
}

LossValue g_loss(const GanLossConfig& cfg, const ParamVector& d, const MlpSpec& d_spec,
                 const ParamVector& g, const MlpSpec& g_spec, const ad::Tensor& z) {
  if (z.rows() == 0) throw std::invalid_argument("g_loss: batch must be nonempty");
  GenLossProgram prog(cfg, d_spec, g_spec, z.rows());
  return prog.eval(d, g, z);
}

}  // namespace fedgan::gan
