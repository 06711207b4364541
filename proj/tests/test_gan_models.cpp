#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fedgansim/checkpoint.hpp"
#include "fedgansim/losses.hpp"
#include "fedgansim/mlp.hpp"
#include "fedgansim/optim.hpp"
#include "fedgansim/rng.hpp"

using namespace fedgan;
using namespace fedgan::gan;
using fedgan::ad::Tensor;

namespace {

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data) v = rng.normal() * scale;
  return t;
}

ParamVector random_params(const MlpSpec& spec, Rng& rng, double scale = 0.6) {
  ParamVector p = ParamVector::zeros_like(spec);
  for (double& v : p.data) v = rng.normal() * scale;
  return p;
}

MlpSpec tiny_disc(GanLossKind kind, std::size_t in_dim = 3) {
  MlpSpec d;
  d.layer_sizes = {in_dim, 5, 1};
  d.activation = Activation::kTanh;
  d.output_activation = (kind == GanLossKind::kWganGp) ? OutputActivation::kIdentity
                                                       : OutputActivation::kSigmoid;
  return d;
}

MlpSpec tiny_gen(std::size_t z_dim = 2, std::size_t out_dim = 3) {
  MlpSpec g;
  g.layer_sizes = {z_dim, 4, out_dim};
  g.activation = Activation::kTanh;
  g.output_activation = OutputActivation::kIdentity;
  return g;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-8});
}

}  // namespace

TEST_CASE("gen_forward: all-zero parameters yield output_activation(0)") {
  MlpSpec spec = tiny_gen();
  spec.output_activation = OutputActivation::kTanh;
  ParamVector zeros = ParamVector::zeros_like(spec);
  Rng rng(3);
  Tensor z = random_tensor(rng, 4, 2);
  Tensor out = gen_forward(zeros, spec, z);
  for (double v : out.data) CHECK(v == 0.0);

  spec.output_activation = OutputActivation::kSigmoid;
  out = gen_forward(ParamVector::zeros_like(spec), spec, z);
  for (double v : out.data) CHECK(v == 0.5);
}

TEST_CASE("gen_forward: identity single layer passes z through") {
  MlpSpec spec;
  spec.layer_sizes = {3, 3};
  spec.output_activation = OutputActivation::kIdentity;
  ParamVector p = ParamVector::zeros_like(spec);
  for (std::size_t i = 0; i < 3; ++i) p.data[i * 3 + i] = 1.0;  // W = I
  Rng rng(5);
  Tensor z = random_tensor(rng, 6, 3);
  Tensor out = gen_forward(p, spec, z);
  CHECK(out.data == z.data);
}

TEST_CASE("gen_forward: deterministic across calls") {
  MlpSpec spec = tiny_gen();
  spec.init_seed = 11;
  ParamVector p = init_params(spec);
  Rng rng(7);
  Tensor z = random_tensor(rng, 5, 2);
  Tensor a = gen_forward(p, spec, z);
  Tensor b = gen_forward(p, spec, z);
  CHECK(a.data == b.data);
}

TEST_CASE("gen_forward: shape mismatch rejected") {
  MlpSpec spec = tiny_gen();
  ParamVector p = ParamVector::zeros_like(spec);
  CHECK_THROWS_AS(gen_forward(p, spec, Tensor::zeros(4, 7)), std::invalid_argument);
}

TEST_CASE("disc_forward: zero params, sigmoid head gives 0.5, identity head 0.0") {
  for (auto kind : {GanLossKind::kVanillaNonsaturating, GanLossKind::kWganGp}) {
    MlpSpec spec = tiny_disc(kind);
    ParamVector p = ParamVector::zeros_like(spec);
    Rng rng(9);
    Tensor x = random_tensor(rng, 8, 3);
    Tensor out = disc_forward(p, spec, x);
    const double want = (kind == GanLossKind::kWganGp) ? 0.0 : 0.5;
    for (double v : out.data) CHECK(v == want);
  }
}

TEST_CASE("disc_forward: batch permutation permutes the output identically") {
  MlpSpec spec = tiny_disc(GanLossKind::kVanillaNonsaturating);
  spec.init_seed = 21;
  ParamVector p = init_params(spec);
  Rng rng(13);
  Tensor x = random_tensor(rng, 6, 3);
  Tensor out = disc_forward(p, spec, x);

  // reverse the batch
  Tensor xr = x;
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 3; ++c) xr.at(r, c) = x.at(5 - r, c);
  }
  Tensor outr = disc_forward(p, spec, xr);
  for (std::size_t r = 0; r < 6; ++r) CHECK(outr.at(r, 0) == out.at(5 - r, 0));
}

TEST_CASE("d_loss: equilibrium value 2*ln2 when D outputs 0.5 everywhere") {
  MlpSpec d_spec = tiny_disc(GanLossKind::kVanillaNonsaturating);
  MlpSpec g_spec = tiny_gen();
  ParamVector d = ParamVector::zeros_like(d_spec);  // sigmoid(0) = 0.5
  Rng rng(17);
  ParamVector g = random_params(g_spec, rng);
  GanLossConfig cfg;
  cfg.kind = GanLossKind::kVanillaSaturating;
  Tensor real = random_tensor(rng, 10, 3);
  Tensor z = random_tensor(rng, 10, 2);
  LossValue lv = d_loss(cfg, d, d_spec, g, g_spec, real, z);
  CHECK(lv.loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("d_loss: wgan loss is ~0 for a unit-norm linear critic on equal-mean batches") {
  MlpSpec d_spec;
  d_spec.layer_sizes = {2, 1};
  d_spec.output_activation = OutputActivation::kIdentity;
  ParamVector d = ParamVector::zeros_like(d_spec);
  d.data[0] = 1.0;  // W = [1, 0], |W| = 1, b = 0
  d.data[1] = 0.0;

  GanLossConfig cfg;
  cfg.kind = GanLossKind::kWganGp;
  cfg.gp_lambda = 10.0;

  // real and fake with identical means
  Tensor real({4, 2}, {1, 0, -1, 0, 2, 1, -2, -1});
  Tensor fake({4, 2}, {0.5, 3, -0.5, -3, 1.5, 0, -1.5, 0});
  DiscLossProgram prog(cfg, d_spec, 4, 4);
  Rng gp(1);
  LossValue lv = prog.eval(d, real, fake, gp);
  CHECK(std::abs(lv.loss) < 1e-10);
}

TEST_CASE("d_loss and g_loss gradients match finite differences (all kinds)") {
  // 10 instances per kind here; the acceptance suite runs the full 50.
  int seed = 100;
  for (auto kind : {GanLossKind::kVanillaSaturating, GanLossKind::kVanillaNonsaturating,
                    GanLossKind::kWganGp}) {
    for (int rep = 0; rep < 10; ++rep) {
      Rng rng(seed++);
      MlpSpec d_spec = tiny_disc(kind);
      MlpSpec g_spec = tiny_gen();
      ParamVector d = random_params(d_spec, rng);
      ParamVector g = random_params(g_spec, rng);
      GanLossConfig cfg;
      cfg.kind = kind;
      cfg.gp_lambda = 10.0;
      cfg.gp_interpolation_seed = static_cast<std::uint64_t>(seed);
      Tensor real = random_tensor(rng, 4, 3);
      Tensor z = random_tensor(rng, 4, 2);

      LossValue dl = d_loss(cfg, d, d_spec, g, g_spec, real, z);
      auto d_fn = [&](const Tensor& probe) {
        ParamVector pd = d;
        pd.data = probe.data;
        return d_loss(cfg, pd, d_spec, g, g_spec, real, z).loss;
      };
      Tensor fd = ad::finite_diff(d_fn, Tensor({1, d.data.size()}, d.data), 1e-5);
      double worst = 0.0;
      for (std::size_t i = 0; i < fd.size(); ++i) {
        worst = std::max(worst, std::abs(fd.data[i] - dl.grad.data[i]) /
                                    std::max({std::abs(fd.data[i]),
                                              std::abs(dl.grad.data[i]), 1e-6}));
      }
      CHECK(worst < 1e-4);

      LossValue gl = g_loss(cfg, d, d_spec, g, g_spec, z);
      auto g_fn = [&](const Tensor& probe) {
        ParamVector pg = g;
        pg.data = probe.data;
        return g_loss(cfg, d, d_spec, pg, g_spec, z).loss;
      };
      Tensor fdg = ad::finite_diff(g_fn, Tensor({1, g.data.size()}, g.data), 1e-5);
      worst = 0.0;
      for (std::size_t i = 0; i < fdg.size(); ++i) {
        worst = std::max(worst, std::abs(fdg.data[i] - gl.grad.data[i]) /
                                    std::max({std::abs(fdg.data[i]),
                                              std::abs(gl.grad.data[i]), 1e-6}));
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("g_loss closed-form values at D == 0.5 and critic == 0") {
  MlpSpec g_spec = tiny_gen();
  Rng rng(31);
  ParamVector g = random_params(g_spec, rng);
  Tensor z = random_tensor(rng, 6, 2);

  GanLossConfig cfg;
  cfg.kind = GanLossKind::kVanillaSaturating;
  MlpSpec d_spec = tiny_disc(cfg.kind);
  ParamVector d = ParamVector::zeros_like(d_spec);
  CHECK(g_loss(cfg, d, d_spec, g, g_spec, z).loss ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));

  cfg.kind = GanLossKind::kVanillaNonsaturating;
  CHECK(g_loss(cfg, d, d_spec, g, g_spec, z).loss ==
        doctest::Approx(-std::log(0.5)).epsilon(1e-12));

  cfg.kind = GanLossKind::kWganGp;
  MlpSpec critic = tiny_disc(cfg.kind);
  ParamVector d0 = ParamVector::zeros_like(critic);
  CHECK(g_loss(cfg, d0, critic, g, g_spec, z).loss == 0.0);
}

TEST_CASE("wgan algebraic identity: g_loss + d_loss(lambda=0) = -mean D(x)") {
  Rng rng(41);
  GanLossConfig cfg;
  cfg.kind = GanLossKind::kWganGp;
  cfg.gp_lambda = 0.0;
  MlpSpec d_spec = tiny_disc(cfg.kind);
  MlpSpec g_spec = tiny_gen();
  ParamVector d = random_params(d_spec, rng);
  ParamVector g = random_params(g_spec, rng);
  Tensor real = random_tensor(rng, 5, 3);
  Tensor z = random_tensor(rng, 5, 2);

  const double sum = d_loss(cfg, d, d_spec, g, g_spec, real, z).loss +
                     g_loss(cfg, d, d_spec, g, g_spec, z).loss;
  Tensor scores = disc_forward(d, d_spec, real);
  double mean_real = 0.0;
  for (double v : scores.data) mean_real += v;
  mean_real /= static_cast<double>(scores.size());
  CHECK(sum == doctest::Approx(-mean_real).epsilon(1e-12));
}

TEST_CASE("vanilla d_loss is invariant under batch permutation") {
  Rng rng(51);
  GanLossConfig cfg;
  cfg.kind = GanLossKind::kVanillaNonsaturating;
  MlpSpec d_spec = tiny_disc(cfg.kind);
  MlpSpec g_spec = tiny_gen();
  ParamVector d = random_params(d_spec, rng);
  ParamVector g = random_params(g_spec, rng);
  Tensor real = random_tensor(rng, 6, 3);
  Tensor z = random_tensor(rng, 6, 2);
  const double base = d_loss(cfg, d, d_spec, g, g_spec, real, z).loss;

  Tensor shuffled = real;
  std::vector<std::size_t> order = {3, 0, 5, 1, 4, 2};
  for (std::size_t r = 0; r < order.size(); ++r) {
    for (std::size_t c = 0; c < 3; ++c) shuffled.at(r, c) = real.at(order[r], c);
  }
  const double permuted = d_loss(cfg, d, d_spec, g, g_spec, shuffled, z).loss;
  CHECK(permuted == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("losses are deterministic given identical seeds and inputs") {
  Rng rng(61);
  GanLossConfig cfg;
  cfg.kind = GanLossKind::kWganGp;
  cfg.gp_interpolation_seed = 99;
  MlpSpec d_spec = tiny_disc(cfg.kind);
  MlpSpec g_spec = tiny_gen();
  ParamVector d = random_params(d_spec, rng);
  ParamVector g = random_params(g_spec, rng);
  Tensor real = random_tensor(rng, 4, 3);
  Tensor z = random_tensor(rng, 4, 2);
  LossValue a = d_loss(cfg, d, d_spec, g, g_spec, real, z);
  LossValue b = d_loss(cfg, d, d_spec, g, g_spec, real, z);
  CHECK(a.loss == b.loss);
  CHECK(a.grad.data == b.grad.data);
}

TEST_CASE("loss config head mismatches are rejected") {
  GanLossConfig wgan;
  wgan.kind = GanLossKind::kWganGp;
  MlpSpec sigmoid_head = tiny_disc(GanLossKind::kVanillaNonsaturating);
  CHECK_THROWS_AS(DiscLossProgram(wgan, sigmoid_head, 4, 4), std::invalid_argument);

  GanLossConfig vanilla;
  vanilla.kind = GanLossKind::kVanillaNonsaturating;
  MlpSpec critic_head = tiny_disc(GanLossKind::kWganGp);
  CHECK_THROWS_AS(DiscLossProgram(vanilla, critic_head, 4, 4), std::invalid_argument);
}

TEST_CASE("optimizer_step: Adam first step moves by ~ -lr * sign(g)") {
  MlpSpec spec = tiny_gen();
  ParamVector p = ParamVector::zeros_like(spec);
  Rng rng(71);
  ParamVector g = random_params(spec, rng);
  OptimState opt = OptimState::adam(2e-4, p.data.size());
  ParamVector before = p;
  REQUIRE(optimizer_step(opt, p, g));
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double delta = p.data[i] - before.data[i];
    const double want = -opt.learning_rate * g.data[i] / (std::abs(g.data[i]) + opt.eps);
    CHECK(std::abs(delta - want) < 1e-9);
  }
  CHECK(opt.step == 1);
}

TEST_CASE("optimizer_step: zero gradient leaves parameters unchanged") {
  MlpSpec spec = tiny_gen();
  Rng rng(81);
  for (auto make : {+[](std::size_t n) { return OptimState::adam(1e-3, n); },
                    +[](std::size_t n) { return OptimState::rmsprop(1e-3, n); }}) {
    ParamVector p = random_params(spec, rng);
    ParamVector zero = ParamVector::zeros_like(spec);
    OptimState opt = make(p.data.size());
    ParamVector before = p;
    REQUIRE(optimizer_step(opt, p, zero));
    CHECK(p.data == before.data);
  }
}

TEST_CASE("optimizer_step: RMSprop step magnitude approaches lr under constant gradient") {
  MlpSpec spec;
  spec.layer_sizes = {1, 1};
  ParamVector p = ParamVector::zeros_like(spec);
  ParamVector g = ParamVector::zeros_like(spec);
  g.data[0] = 0.37;
  g.data[1] = -1.9;
  OptimState opt = OptimState::rmsprop(1e-2, p.data.size());
  double last = 0.0;
  for (int i = 0; i < 600; ++i) {
    ParamVector before = p;
    REQUIRE(optimizer_step(opt, p, g));
    last = std::abs(p.data[0] - before.data[0]);
  }
  CHECK(rel_err(last, opt.learning_rate) < 1e-5);
}

TEST_CASE("optimizer_step: NaN gradient aborts the step") {
  MlpSpec spec = tiny_gen();
  Rng rng(91);
  ParamVector p = random_params(spec, rng);
  ParamVector g = ParamVector::zeros_like(spec);
  g.data[3] = std::nan("");
  OptimState opt = OptimState::adam(1e-3, p.data.size());
  ParamVector before = p;
  CHECK_FALSE(optimizer_step(opt, p, g));
  CHECK(p.data == before.data);
  CHECK(opt.step == 0);
}

TEST_CASE("checkpoint: params round-trip bit-exactly") {
  MlpSpec spec = tiny_gen();
  spec.init_seed = 4242;
  ParamVector p = init_params(spec);
  const auto path = std::filesystem::temp_directory_path() / "fedgan_test_params.fgs";
  save_params(path, spec, p, 17);
  auto [spec2, p2] = load_params(path);
  CHECK(spec2 == spec);
  CHECK(p2.data == p.data);
  CHECK(p2.layout == p.layout);

  Blob blob = read_blob(path);
  CHECK(blob.header.at("step") == 17);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: rejects non-FGS1 files") {
  const auto path = std::filesystem::temp_directory_path() / "fedgan_test_bogus.fgs";
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(read_blob(path), std::runtime_error);
  std::filesystem::remove(path);
}
