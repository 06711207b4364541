#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fedgansim/federation.hpp"
#include "fedgansim/rng.hpp"

using namespace fedgan;
using namespace fedgan::fl;
using fedgan::ad::Tensor;

namespace {

cli::RunConfig tiny_config() {
  cli::RunConfig cfg;
  cfg.clients = 2;
  cfg.rounds = 3;
  cfg.batch_size = 16;
  cfg.dataset.samples_per_client = 48;
  cfg.eval_every = 2;
  cfg.eval_samples = 64;
  cfg.z_dim = 4;
  cfg.gen_hidden = {8};
  cfg.disc_hidden = {8};
  cfg.seed = 42;
  cfg.data_seed = 42;
  cfg.detection_enabled = false;
  return cfg;
}

ClientState make_client(const cli::RunConfig& cfg, const TrainSetup& setup,
                        std::size_t id) {
  ClientState c;
  c.id = id;
  c.dataset = make_client_dataset(cfg, id);
  gan::MlpSpec d_spec = setup.d_spec;
  d_spec.init_seed = StreamSeeds::disc_init(cfg, id);
  c.d_params = gan::init_params(d_spec);
  c.g_params = gan::ParamVector::zeros_like(setup.g_spec);
  c.d_opt = gan::OptimState::adam(cfg.optim.adam_lr, c.d_params.data.size());
  c.g_opt = gan::OptimState::adam(cfg.optim.adam_lr, c.g_params.data.size());
  c.loss_cfg.kind = cfg.loss_kind;
  c.loss_cfg.gp_interpolation_seed = StreamSeeds::gp_stream(cfg, id);
  c.rng_seed = StreamSeeds::client_rng(cfg, id);
  return c;
}

}  // namespace

TEST_CASE("client_update: K=0 rejected") {
  cli::RunConfig cfg = tiny_config();
  TrainSetup setup{make_disc_spec(cfg), make_gen_spec(cfg), cfg.batch_size,
                   cli::LossReduce::kMean};
  ClientState c = make_client(cfg, setup, 0);
  gan::ParamVector g_server = gan::init_params(setup.g_spec);
  gan::GanLossConfig lc;
  ProgramCache cache(lc, setup);
  CHECK_THROWS_AS(client_update(c, g_server, 0, 0, setup, cache),
                  std::invalid_argument);
}

TEST_CASE("client_update: zero learning rates return g_server exactly") {
  cli::RunConfig cfg = tiny_config();
  TrainSetup setup{make_disc_spec(cfg), make_gen_spec(cfg), cfg.batch_size,
                   cli::LossReduce::kMean};
  ClientState c = make_client(cfg, setup, 0);
  c.d_opt = gan::OptimState::adam(0.0, c.d_params.data.size());
  c.g_opt = gan::OptimState::adam(0.0, c.g_params.data.size());
  gan::ParamVector g_server = gan::init_params(setup.g_spec);
  gan::GanLossConfig lc;
  ProgramCache cache(lc, setup);
  ClientUpdateResult r = client_update(c, g_server, 3, 0, setup, cache);
  CHECK(r.g_params.data == g_server.data);
  CHECK_FALSE(r.diverged);
}

TEST_CASE("client_update: deterministic given fixed seeds") {
  cli::RunConfig cfg = tiny_config();
  TrainSetup setup{make_disc_spec(cfg), make_gen_spec(cfg), cfg.batch_size,
                   cli::LossReduce::kMean};
  gan::ParamVector g_server = gan::init_params(setup.g_spec);
  gan::GanLossConfig lc;

  ClientState c1 = make_client(cfg, setup, 0);
  ProgramCache cache1(lc, setup);
  ClientUpdateResult r1 = client_update(c1, g_server, 3, 5, setup, cache1);

  ClientState c2 = make_client(cfg, setup, 0);
  ProgramCache cache2(lc, setup);
  ClientUpdateResult r2 = client_update(c2, g_server, 3, 5, setup, cache2);

  CHECK(r1.g_params.data == r2.g_params.data);
  CHECK(r1.reported_loss == r2.reported_loss);
  CHECK(r1.mean_d_loss == r2.mean_d_loss);
}

TEST_CASE("aggregate: equal weights give the arithmetic mean") {
  cli::RunConfig cfg = tiny_config();
  gan::MlpSpec spec = make_gen_spec(cfg);
  spec.init_seed = 1;
  gan::ParamVector a = gan::init_params(spec);
  spec.init_seed = 2;
  gan::ParamVector b = gan::init_params(spec);
  gan::ParamVector avg = aggregate({a, b}, {1.0, 1.0});
  for (std::size_t i = 0; i < avg.data.size(); ++i) {
    CHECK(avg.data[i] == doctest::Approx(0.5 * (a.data[i] + b.data[i])).epsilon(1e-15));
  }
}

TEST_CASE("aggregate: weight (0,1) returns the second client verbatim") {
  cli::RunConfig cfg = tiny_config();
  gan::MlpSpec spec = make_gen_spec(cfg);
  spec.init_seed = 3;
  gan::ParamVector a = gan::init_params(spec);
  spec.init_seed = 4;
  gan::ParamVector b = gan::init_params(spec);
  gan::ParamVector out = aggregate({a, b}, {0.0, 1.0});
  CHECK(out.data == b.data);
}

TEST_CASE("aggregate: normalization invariance is bit-exact") {
  cli::RunConfig cfg = tiny_config();
  gan::MlpSpec spec = make_gen_spec(cfg);
  spec.init_seed = 5;
  gan::ParamVector a = gan::init_params(spec);
  spec.init_seed = 6;
  gan::ParamVector b = gan::init_params(spec);
  gan::ParamVector x = aggregate({a, b}, {2.0, 2.0});
  gan::ParamVector y = aggregate({a, b}, {0.5, 0.5});
  CHECK(x.data == y.data);
}

TEST_CASE("aggregate: error cases") {
  cli::RunConfig cfg = tiny_config();
  gan::MlpSpec spec = make_gen_spec(cfg);
  gan::ParamVector a = gan::init_params(spec);
  CHECK_THROWS_AS(aggregate({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({a, a}, {0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({a, a}, {-1.0, 2.0}), std::invalid_argument);

  gan::MlpSpec other = spec;
  other.layer_sizes[1] += 1;
  gan::ParamVector b = gan::init_params(other);
  CHECK_THROWS_AS(aggregate({a, b}, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("run_training: T=0 leaves the server generator at its initialization") {
  cli::RunConfig cfg = tiny_config();
  cfg.rounds = 0;
  RunResult res = run_training(cfg);
  gan::MlpSpec g_spec = make_gen_spec(cfg);
  gan::ParamVector init = gan::init_params(g_spec);
  CHECK(res.g_server.data == init.data);
  CHECK(res.records.empty());
}

TEST_CASE("run_training: records are reproducible and weights normalized") {
  cli::RunConfig cfg = tiny_config();
  cfg.clients = 3;
  RunResult a = run_training(cfg);
  RunResult b = run_training(cfg);
  REQUIRE(a.records.size() == cfg.rounds);
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    CHECK(a.records[t].losses == b.records[t].losses);
    CHECK(a.records[t].weights_norm == b.records[t].weights_norm);
    double sum = 0.0;
    for (double w : a.records[t].weights_norm) sum += w;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  CHECK(a.g_server.data == b.g_server.data);
}

TEST_CASE("run_training: single client equals a standalone training loop bit-exactly") {
  cli::RunConfig cfg = tiny_config();
  cfg.clients = 1;
  cfg.rounds = 4;
  RunResult fed = run_training(cfg);

  // standalone oracle: same primitives, no federation machinery
  TrainSetup setup{make_disc_spec(cfg), make_gen_spec(cfg), cfg.batch_size,
                   cli::LossReduce::kMean};
  data::Dataset ds = make_client_dataset(cfg, 0);
  gan::MlpSpec d_spec = setup.d_spec;
  d_spec.init_seed = StreamSeeds::disc_init(cfg, 0);
  gan::ParamVector d = gan::init_params(d_spec);
  gan::ParamVector g = gan::init_params(setup.g_spec);
  gan::OptimState d_opt = gan::OptimState::adam(cfg.optim.adam_lr, d.data.size(),
                                                cfg.optim.adam_beta1, cfg.optim.adam_beta2);
  gan::OptimState g_opt = gan::OptimState::adam(cfg.optim.adam_lr, g.data.size(),
                                                cfg.optim.adam_beta1, cfg.optim.adam_beta2);
  const std::uint64_t rng_seed = StreamSeeds::client_rng(cfg, 0);
  const std::uint64_t gp_seed = StreamSeeds::gp_stream(cfg, 0);
  const std::size_t K =
      (cfg.dataset.samples_per_client + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t z_dim = setup.g_spec.input_dim();

  gan::GanLossConfig lc;
  lc.kind = cfg.loss_kind;

  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    Rng data_rng(StreamSeeds::round_data(rng_seed, t));
    Rng gp_rng(StreamSeeds::round_gp(gp_seed, t));
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    data_rng.shuffle(order);
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (cursor >= ds.size()) {
        data_rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t take = std::min(cfg.batch_size, ds.size() - cursor);
      ad::Tensor real = ad::Tensor::zeros(take, ds.dim());
      for (std::size_t r = 0; r < take; ++r) {
        for (std::size_t c2 = 0; c2 < ds.dim(); ++c2) {
          real.at(r, c2) = ds.samples.at(order[cursor + r], c2);
        }
      }
      cursor += take;

      ad::Tensor z_d = ad::Tensor::zeros(take, z_dim);
      for (double& v : z_d.data) v = data_rng.normal();
      ad::Tensor fake = gan::gen_forward(g, setup.g_spec, z_d);
      gan::DiscLossProgram dprog(lc, setup.d_spec, take, take);
      gan::LossValue dl = dprog.eval(d, real, fake, gp_rng);
      REQUIRE(optimizer_step(d_opt, d, dl.grad));

      ad::Tensor z_g = ad::Tensor::zeros(take, z_dim);
      for (double& v : z_g.data) v = data_rng.normal();
      gan::GenLossProgram gprog(lc, setup.d_spec, setup.g_spec, take);
      gan::LossValue gl = gprog.eval(d, g, z_g);
      REQUIRE(optimizer_step(g_opt, g, gl.grad));
    }
  }
  CHECK(fed.g_server.data == g.data);
}

TEST_CASE("run_training: attack config smoke, malicious flag never leaks to records") {
  cli::RunConfig cfg = tiny_config();
  cfg.clients = 4;
  cfg.malicious_ids = {1};
  cfg.detection_enabled = true;
  cfg.warmup = 1;
  cfg.rounds = 3;
  RunResult res = run_training(cfg);
  REQUIRE(res.records.size() == 3);
  for (const RoundRecord& rec : res.records) {
    CHECK(rec.losses.size() == 4);
    nlohmann::json j = rec.to_json();
    CHECK(j.contains("t"));
    CHECK(!j.contains("d_losses"));
    CHECK(!j.contains("wall_ms"));
    CHECK(!j.contains("is_malicious"));
  }
  CHECK(res.malicious_ids == std::vector<std::size_t>{1});
}
