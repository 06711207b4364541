#include "fedgansim/federation.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fedgansim/rng.hpp"
#include "fedgansim/trigger.hpp"

namespace fedgan::fl {

namespace {

// seed-derivation tags; one per independent stream
enum : std::uint64_t {
  kTagClientData = 0xD1,
  kTagDiscInit = 0xD3,
  kTagServerInit = 0xD4,
  kTagClientRng = 0xD5,
  kTagGpStream = 0xD6,
  kTagForest = 0xD7,
  kTagEvalNoise = 0xD8,
  kTagReference = 0xD9,
  kTagProjection = 0xDA,
  kTagRoundData = 0xA1,
  kTagRoundGp = 0xA2,
};

}  // namespace

std::uint64_t StreamSeeds::client_data(const cli::RunConfig& cfg, std::size_t client) {
  return derive_seed(cfg.data_seed, kTagClientData, client);
}
std::uint64_t StreamSeeds::disc_init(const cli::RunConfig& cfg, std::size_t client) {
  return derive_seed(cfg.seed, kTagDiscInit, client);
}
std::uint64_t StreamSeeds::server_init(const cli::RunConfig& cfg) {
  return derive_seed(cfg.seed, kTagServerInit);
}
std::uint64_t StreamSeeds::client_rng(const cli::RunConfig& cfg, std::size_t client) {
  return derive_seed(cfg.seed, kTagClientRng, client);
}
std::uint64_t StreamSeeds::gp_stream(const cli::RunConfig& cfg, std::size_t client) {
  return derive_seed(cfg.seed, kTagGpStream, client);
}
std::uint64_t StreamSeeds::round_data(std::uint64_t client_rng_seed, std::size_t t) {
  return derive_seed(client_rng_seed, kTagRoundData, t);
}
std::uint64_t StreamSeeds::round_gp(std::uint64_t gp_stream_seed, std::size_t t) {
  return derive_seed(derive_seed(gp_stream_seed, kTagRoundGp), t);
}
std::uint64_t StreamSeeds::eval_noise(const cli::RunConfig& cfg, std::size_t t) {
  return derive_seed(cfg.seed, kTagEvalNoise, t);
}
std::uint64_t StreamSeeds::reference(const cli::RunConfig& cfg) {
  return derive_seed(cfg.data_seed, kTagReference);
}
std::uint64_t StreamSeeds::projection(const cli::RunConfig& cfg) {
  return derive_seed(cfg.data_seed, kTagProjection);
}
std::uint64_t StreamSeeds::forest_round(const cli::RunConfig& cfg, std::size_t t) {
  return derive_seed(cfg.seed, kTagForest, t);
}

namespace {

ad::Tensor draw_noise(Rng& rng, std::size_t batch, std::size_t z_dim) {
  ad::Tensor z = ad::Tensor::zeros(batch, z_dim);
  for (double& v : z.data) v = rng.normal();
  return z;
}

ad::Tensor gather_rows(const ad::Tensor& samples, const std::vector<std::size_t>& rows,
                       std::size_t begin, std::size_t end) {
  const std::size_t cols = samples.cols();
  ad::Tensor out = ad::Tensor::zeros(end - begin, cols);
  for (std::size_t i = begin; i < end; ++i) {
    const double* src = samples.data.data() + rows[i] * cols;
    std::copy(src, src + cols, out.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * cols));
  }
  return out;
}

}  // namespace

nlohmann::json RoundRecord::to_json() const {
  nlohmann::json j = {
      {"t", t},
      {"losses", losses},
      {"detected", detected},
      {"weights_raw", weights_raw},
      {"weights_norm", weights_norm},
      {"diverged", diverged},
  };
  if (metrics.has_value()) j["metrics"] = metrics->to_json();
  return j;
}

ProgramCache::ProgramCache(const gan::GanLossConfig& cfg, const TrainSetup& setup)
    : cfg_(cfg), setup_(setup) {}

gan::DiscLossProgram& ProgramCache::disc(std::size_t batch) {
  auto it = disc_.find(batch);
  if (it == disc_.end()) {
    it = disc_.emplace(batch, std::make_unique<gan::DiscLossProgram>(
                                  cfg_, setup_.d_spec, batch, batch))
             .first;
  }
  return *it->second;
}

gan::GenLossProgram& ProgramCache::gen(std::size_t batch) {
  auto it = gen_.find(batch);
  if (it == gen_.end()) {
    it = gen_.emplace(batch, std::make_unique<gan::GenLossProgram>(
                                 cfg_, setup_.d_spec, setup_.g_spec, batch))
             .first;
  }
  return *it->second;
}

gan::GenForwardProgram& ProgramCache::gen_fwd(std::size_t batch) {
  auto it = gen_fwd_.find(batch);
  if (it == gen_fwd_.end()) {
    it = gen_fwd_.emplace(batch,
                          std::make_unique<gan::GenForwardProgram>(setup_.g_spec, batch))
             .first;
  }
  return *it->second;
}

ClientUpdateResult client_update(ClientState& client, const gan::ParamVector& g_server,
                                 std::size_t K, std::size_t t, const TrainSetup& setup,
                                 ProgramCache& cache) {
  if (K < 1) throw std::invalid_argument("client_update: K must be >= 1");
  if (g_server.layout != client.g_params.layout) {
    throw std::invalid_argument("client_update: generator layout mismatch");
  }

  // G_i(t, 0) <- G_server(t); the discriminator persists untouched.
  client.g_params = g_server;

  Rng data_rng(StreamSeeds::round_data(client.rng_seed, t));
  Rng gp_rng(StreamSeeds::round_gp(client.loss_cfg.gp_interpolation_seed, t));

  const std::size_t n = client.dataset.size();
  const std::size_t z_dim = setup.g_spec.input_dim();

  // one-epoch schedule: shuffled partition into ceil(n/batch) minibatches;
  // a fixed K beyond that wraps around with fresh shuffles
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  data_rng.shuffle(order);
  std::size_t cursor = 0;

  ClientUpdateResult result;
  result.g_params = client.g_params;
  double loss_sum = 0.0, last_loss = 0.0, d_loss_sum = 0.0;
  std::size_t steps_done = 0;

  for (std::size_t k = 0; k < K; ++k) {
    if (cursor >= n) {
      data_rng.shuffle(order);
      cursor = 0;
    }
    const std::size_t take = std::min(setup.batch_size, n - cursor);
    ad::Tensor real = gather_rows(client.dataset.samples, order, cursor, cursor + take);
    cursor += take;

    bool step_ok = true;
    double lg = 0.0, ld = 0.0;
    try {
      // D step on Eq.-style loss, then G step, fresh z for each
      ad::Tensor z_d = draw_noise(data_rng, take, z_dim);
      ad::Tensor fake = cache.gen_fwd(take).eval(client.g_params, z_d);
      gan::LossValue dl = cache.disc(take).eval(client.d_params, real, fake, gp_rng);
      ld = dl.loss;
      if (!std::isfinite(ld) || !optimizer_step(client.d_opt, client.d_params, dl.grad)) {
        step_ok = false;
      }

      if (step_ok) {
        ad::Tensor z_g = draw_noise(data_rng, take, z_dim);
        gan::LossValue gl = cache.gen(take).eval(client.d_params, client.g_params, z_g);
        lg = gl.loss;
        if (!std::isfinite(lg) ||
            !optimizer_step(client.g_opt, client.g_params, gl.grad)) {
          step_ok = false;
        }
      }
    } catch (const std::exception&) {
      step_ok = false;
    }

    if (!step_ok) {
      result.diverged = true;
      break;
    }
    loss_sum += lg;
    d_loss_sum += ld;
    last_loss = lg;
    ++steps_done;
  }

  result.g_params = client.g_params;
  if (result.diverged || steps_done == 0) {
    result.reported_loss = std::nan("");
    result.mean_d_loss = std::nan("");
    result.diverged = true;
  } else {
    result.reported_loss = setup.report_loss == cli::LossReduce::kLast
                               ? last_loss
                               : loss_sum / static_cast<double>(steps_done);
    result.mean_d_loss = d_loss_sum / static_cast<double>(steps_done);
  }
  return result;
}

gan::ParamVector aggregate(const std::vector<gan::ParamVector>& params,
                           const std::vector<double>& weights) {
  if (params.empty()) throw std::invalid_argument("aggregate: no clients");
  if (params.size() != weights.size()) {
    throw std::invalid_argument("aggregate: weight count mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw std::invalid_argument("aggregate: weights must be finite and >= 0");
    }
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("aggregate: weights sum to zero");
  for (const gan::ParamVector& p : params) {
    if (p.layout != params.front().layout) {
      throw std::invalid_argument("aggregate: parameter layout mismatch");
    }
  }

  gan::ParamVector out;
  out.layout = params.front().layout;
  out.data.assign(out.layout.total, 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double w = weights[i] / total;
    const std::vector<double>& src = params[i].data;
    for (std::size_t k = 0; k < src.size(); ++k) out.data[k] += w * src[k];
  }
  return out;
}

gan::MlpSpec make_gen_spec(const cli::RunConfig& cfg) {
  gan::MlpSpec spec;
  spec.layer_sizes.push_back(cfg.z_dim);
  for (std::size_t h : cfg.gen_hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(cfg.data_dim());
  spec.activation = gan::Activation::kTanh;
  switch (cfg.gen_output) {
    case cli::GenOutput::kAuto:
      spec.output_activation = cfg.dataset.kind == cli::DatasetChoice::kRing
                                   ? gan::OutputActivation::kIdentity
                                   : gan::OutputActivation::kTanh;
      break;
    case cli::GenOutput::kIdentity:
      spec.output_activation = gan::OutputActivation::kIdentity;
      break;
    case cli::GenOutput::kTanh:
      spec.output_activation = gan::OutputActivation::kTanh;
      break;
  }
  spec.init_seed = StreamSeeds::server_init(cfg);
  return spec;
}

gan::MlpSpec make_disc_spec(const cli::RunConfig& cfg) {
  gan::MlpSpec spec;
  spec.layer_sizes.push_back(cfg.data_dim());
  for (std::size_t h : cfg.disc_hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(1);
  spec.activation = gan::Activation::kTanh;
  spec.output_activation = cfg.is_wgan() ? gan::OutputActivation::kIdentity
                                         : gan::OutputActivation::kSigmoid;
  spec.init_seed = 0;  // per-client seeds are set at client construction
  return spec;
}

namespace {

data::Dataset draw_dataset(const cli::RunConfig& cfg, std::size_t n, std::uint64_t seed) {
  if (cfg.dataset.kind == cli::DatasetChoice::kRing) {
    return data::make_gaussian_ring(cfg.dataset.modes, cfg.dataset.radius,
                                    cfg.dataset.sigma, n, seed, cfg.dataset.marker_dims);
  }
  return data::make_tiny_images(cfg.dataset.image_size, n, seed);
}

data::TriggerSpec make_trigger(const cli::RunConfig& cfg) {
  if (cfg.dataset.kind == cli::DatasetChoice::kRing) {
    return data::TriggerSpec::vector_marker(2, cfg.dataset.marker_dims,
                                            cfg.trigger.marker_value);
  }
  return data::TriggerSpec::image_block(cfg.trigger.block_row, cfg.trigger.block_col,
                                        cfg.trigger.block_h, cfg.trigger.block_w,
                                        cfg.trigger.seed);
}

}  // namespace

data::Dataset make_client_dataset(const cli::RunConfig& cfg, std::size_t client_id) {
  data::Dataset ds = draw_dataset(cfg, cfg.dataset.samples_per_client,
                                  StreamSeeds::client_data(cfg, client_id));
  for (std::size_t m : cfg.malicious_ids) {
    if (m == client_id) {
      return data::apply_trigger(ds, make_trigger(cfg), cfg.trigger.poison_fraction);
    }
  }
  return ds;
}

data::Dataset make_reference_dataset(const cli::RunConfig& cfg, std::size_t n) {
  return draw_dataset(cfg, n, StreamSeeds::reference(cfg));
}

metrics::MetricsReport evaluate_generator(const cli::RunConfig& cfg,
                                          const gan::ParamVector& g_params,
                                          const gan::MlpSpec& g_spec,
                                          const data::Dataset& reference,
                                          std::uint64_t z_seed) {
  metrics::MetricsReport report;
  const std::size_t n = reference.size();
  Rng rng(z_seed);
  ad::Tensor z = draw_noise(rng, n, g_spec.input_dim());
  ad::Tensor samples = gen_forward(g_params, g_spec, z);
  report.n_real = n;
  report.n_fake = n;

  if (!samples.all_finite()) {
    report.degenerate = true;
    report.frechet = 1e18;
    report.mmd_poly3_x1000 = 1e18;
    return report;
  }

  metrics::FeatureSet real_fs, fake_fs;
  if (cfg.dataset.kind == cli::DatasetChoice::kRing) {
    real_fs = metrics::raw_features(reference.samples);
    fake_fs = metrics::raw_features(samples);
    metrics::ModeCoverage mc =
        metrics::mode_coverage(samples, reference.ring->centers, reference.ring->sigma);
    report.modes_covered = mc.covered;
    report.hq_fraction = mc.hq_fraction;
  } else {
    const std::uint64_t proj_seed = StreamSeeds::projection(cfg);
    real_fs = metrics::project_features(reference.samples, 32, proj_seed);
    fake_fs = metrics::project_features(samples, 32, proj_seed);
  }
  report.frechet = metrics::frechet_distance(real_fs, fake_fs);
  report.mmd_poly3_x1000 = 1e3 * metrics::kernel_mmd_poly3(real_fs, fake_fs);
  return report;
}

RunResult run_training(const cli::RunConfig& cfg, const RoundSink& sink) {
  cfg.validate();
  const std::size_t N = cfg.clients;

  TrainSetup setup;
  setup.g_spec = make_gen_spec(cfg);
  setup.d_spec = make_disc_spec(cfg);
  setup.batch_size = cfg.batch_size;
  setup.report_loss = cfg.report_loss;

  gan::GanLossConfig loss_cfg;
  loss_cfg.kind = cfg.loss_kind;
  loss_cfg.gp_lambda = cfg.gp_lambda;

  // clients
  std::vector<ClientState> clients;
  clients.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    ClientState c;
    c.id = i;
    c.dataset = make_client_dataset(cfg, i);
    gan::MlpSpec d_spec_i = setup.d_spec;
    d_spec_i.init_seed = StreamSeeds::disc_init(cfg, i);
    c.d_params = gan::init_params(d_spec_i);
    c.g_params = gan::ParamVector::zeros_like(setup.g_spec);
    if (cfg.is_wgan()) {
      c.d_opt = gan::OptimState::rmsprop(cfg.optim.rmsprop_lr, c.d_params.data.size(),
                                         cfg.optim.rmsprop_rho);
      c.g_opt = gan::OptimState::rmsprop(cfg.optim.rmsprop_lr, c.g_params.data.size(),
                                         cfg.optim.rmsprop_rho);
    } else {
      c.d_opt = gan::OptimState::adam(cfg.optim.adam_lr, c.d_params.data.size(),
                                      cfg.optim.adam_beta1, cfg.optim.adam_beta2);
      c.g_opt = gan::OptimState::adam(cfg.optim.adam_lr, c.g_params.data.size(),
                                      cfg.optim.adam_beta1, cfg.optim.adam_beta2);
    }
    c.loss_cfg = loss_cfg;
    c.loss_cfg.gp_interpolation_seed = StreamSeeds::gp_stream(cfg, i);
    c.rng_seed = StreamSeeds::client_rng(cfg, i);
    for (std::size_t m : cfg.malicious_ids) {
      if (m == i) c.is_malicious = true;
    }
    clients.push_back(std::move(c));
  }

  ServerState server;
  server.g_server = gan::init_params(setup.g_spec);
  server.detection =
      iso::DetectionState::init(N, cfg.warmup, cfg.decay, cfg.decay_mode);

  const std::size_t K = cfg.local_steps > 0
                            ? cfg.local_steps
                            : (cfg.dataset.samples_per_client + cfg.batch_size - 1) /
                                  cfg.batch_size;

  const std::size_t n_eval = std::min<std::size_t>(cfg.eval_samples, 4096);
  const data::Dataset reference = make_reference_dataset(cfg, n_eval);

  ProgramCache cache(loss_cfg, setup);

  RunResult result;
  result.g_spec = setup.g_spec;
  result.d_spec = setup.d_spec;
  result.malicious_ids = cfg.malicious_ids;
  bool have_best = false;

  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    const auto wall_start = std::chrono::steady_clock::now();
    RoundRecord rec;
    rec.t = t;

    // Procedure A for every client (mutually independent given g_server)
    std::vector<gan::ParamVector> uploads(N);
    for (std::size_t i = 0; i < N; ++i) {
      ClientUpdateResult r =
          client_update(clients[i], server.g_server, K, t, setup, cache);
      uploads[i] = std::move(r.g_params);
      rec.d_losses.push_back(r.mean_d_loss);
      if (r.diverged) {
        rec.diverged.push_back(i);
        rec.losses.push_back(kDivergedLossSentinel);
      } else {
        rec.losses.push_back(r.reported_loss);
      }
    }

    // detection after warmup
    if (cfg.detection_enabled && t > cfg.warmup) {
      iso::ForestConfig fc;
      fc.n_trees = cfg.forest.trees;
      fc.subsample = cfg.forest.subsample;
      fc.score_threshold = cfg.forest.threshold;
      fc.seed = StreamSeeds::forest_round(cfg, t);
      rec.detected = iso::detect_outliers(rec.losses, fc, N);
      iso::update_weights(server.detection, rec.detected);
    }
    rec.weights_raw = server.detection.weights;

    // aggregation over clients that completed the round
    std::vector<gan::ParamVector> agg_params;
    std::vector<double> agg_weights;
    std::vector<std::size_t> agg_ids;
    for (std::size_t i = 0; i < N; ++i) {
      bool excluded = false;
      for (std::size_t d : rec.diverged) excluded = excluded || d == i;
      if (!excluded) {
        agg_params.push_back(std::move(uploads[i]));
        agg_weights.push_back(server.detection.weights[i]);
        agg_ids.push_back(i);
      }
    }
    rec.weights_norm.assign(N, 0.0);
    if (!agg_params.empty()) {
      double total = 0.0;
      for (double w : agg_weights) total += w;
      for (std::size_t k = 0; k < agg_ids.size(); ++k) {
        rec.weights_norm[agg_ids[k]] = agg_weights[k] / total;
      }
      server.g_server = aggregate(agg_params, agg_weights);
    } else {
      // every client diverged: keep the previous generator, report raw shares
      double total = 0.0;
      for (double w : server.detection.weights) total += w;
      for (std::size_t i = 0; i < N; ++i) {
        rec.weights_norm[i] = server.detection.weights[i] / total;
      }
    }

    const bool eval_round = ((t + 1) % cfg.eval_every == 0) || (t + 1 == cfg.rounds);
    if (eval_round) {
      rec.metrics = evaluate_generator(cfg, server.g_server, setup.g_spec, reference,
                                       StreamSeeds::eval_noise(cfg, t));
      if (!have_best || rec.metrics->frechet < result.best_metrics.frechet) {
        result.best_metrics = *rec.metrics;
        have_best = true;
      }
    }

    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - wall_start)
                      .count();
    if (sink) sink(rec);
    result.records.push_back(std::move(rec));
    server.round = t + 1;
  }

  if (cfg.rounds == 0) {
    result.final_metrics = evaluate_generator(cfg, server.g_server, setup.g_spec,
                                              reference, StreamSeeds::eval_noise(cfg, 0));
    result.best_metrics = result.final_metrics;
  } else {
    result.final_metrics = *result.records.back().metrics;
  }
  result.g_server = std::move(server.g_server);
  result.detection = std::move(server.detection);
  return result;
}

}  // namespace fedgan::fl
