#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "fedgansim/config.hpp"
#include "fedgansim/dataset.hpp"
#include "fedgansim/detection.hpp"
#include "fedgansim/losses.hpp"
#include "fedgansim/metrics.hpp"
#include "fedgansim/optim.hpp"

namespace fedgan::fl {

// One federation participant. The server-side code path never reads
// `dataset` or `is_malicious`; the flag exists so evaluation harnesses can
// score detection against ground truth.
struct ClientState {
  std::size_t id = 0;
  data::Dataset dataset;
  gan::ParamVector d_params;  // stays local across all rounds, never reset
  gan::ParamVector g_params;  // overwritten from the server each round
  gan::OptimState d_opt;
  gan::OptimState g_opt;
  gan::GanLossConfig loss_cfg;
  std::uint64_t rng_seed = 0;  // root of the client's minibatch/noise streams
  bool is_malicious = false;
};

struct ServerState {
  gan::ParamVector g_server;
  iso::DetectionState detection;
  std::size_t round = 0;
};

// Per-round telemetry. The JSONL form carries exactly the schema fields
// (plus "metrics" on evaluation rounds); wall time and discriminator losses
// are in-memory extras for harnesses and never serialized.
struct RoundRecord {
  std::size_t t = 0;
  std::vector<double> losses;          // uploaded generator losses, sentineled
  std::vector<std::size_t> detected;   // the outlier set O
  std::vector<double> weights_raw;     // post-decay w_i
  std::vector<double> weights_norm;    // normalized over aggregated clients
  std::vector<std::size_t> diverged;   // ids excluded from aggregation
  std::optional<metrics::MetricsReport> metrics;

  std::vector<double> d_losses;  // mean per-client discriminator loss (not serialized)
  double wall_ms = 0.0;          // not serialized

  nlohmann::json to_json() const;
};

// Shared training geometry: identical network specs across clients
// (aggregation requires it) and the minibatch policy.
struct TrainSetup {
  gan::MlpSpec d_spec;
  gan::MlpSpec g_spec;
  std::size_t batch_size = 64;
  cli::LossReduce report_loss = cli::LossReduce::kMean;
};

// Compiled loss/forward graphs reused across steps, keyed by batch size.
// One cache serves all clients of a sequential run; concurrent client
// execution would need one cache per worker.
class ProgramCache {
 public:
  ProgramCache(const gan::GanLossConfig& cfg, const TrainSetup& setup);
  gan::DiscLossProgram& disc(std::size_t batch);
  gan::GenLossProgram& gen(std::size_t batch);
  gan::GenForwardProgram& gen_fwd(std::size_t batch);

 private:
  gan::GanLossConfig cfg_;
  TrainSetup setup_;
  std::map<std::size_t, std::unique_ptr<gan::DiscLossProgram>> disc_;
  std::map<std::size_t, std::unique_ptr<gan::GenLossProgram>> gen_;
  std::map<std::size_t, std::unique_ptr<gan::GenForwardProgram>> gen_fwd_;
};

struct ClientUpdateResult {
  gan::ParamVector g_params;
  double reported_loss = 0.0;  // mean (or last) generator loss over the K steps
  double mean_d_loss = 0.0;
  bool diverged = false;
};

// Procedure A: overwrite the local generator with the server's, then run K
// alternating D/G steps (D first) on fresh minibatches and fresh noise.
// Streams derive from (client.rng_seed, t), so results do not depend on the
// order clients execute in. K >= 1.
ClientUpdateResult client_update(ClientState& client, const gan::ParamVector& g_server,
                                 std::size_t K, std::size_t t, const TrainSetup& setup,
                                 ProgramCache& cache);

// Normalized weighted average of parameter vectors: sum_i (w_i/sum w) p_i.
gan::ParamVector aggregate(const std::vector<gan::ParamVector>& params,
                           const std::vector<double>& weights);

// Losses a diverged client contributes to detection in place of NaN.
inline constexpr double kDivergedLossSentinel = 1e9;

// The run's independent random streams, all derived from the config seeds.
// Exposed so harnesses can reproduce a client's exact draw sequence.
struct StreamSeeds {
  static std::uint64_t client_data(const cli::RunConfig& cfg, std::size_t client);
  static std::uint64_t disc_init(const cli::RunConfig& cfg, std::size_t client);
  static std::uint64_t server_init(const cli::RunConfig& cfg);
  static std::uint64_t client_rng(const cli::RunConfig& cfg, std::size_t client);
  static std::uint64_t gp_stream(const cli::RunConfig& cfg, std::size_t client);
  static std::uint64_t round_data(std::uint64_t client_rng_seed, std::size_t t);
  static std::uint64_t round_gp(std::uint64_t gp_stream_seed, std::size_t t);
  static std::uint64_t eval_noise(const cli::RunConfig& cfg, std::size_t t);
  static std::uint64_t reference(const cli::RunConfig& cfg);
  static std::uint64_t projection(const cli::RunConfig& cfg);
  static std::uint64_t forest_round(const cli::RunConfig& cfg, std::size_t t);
};

struct RunResult {
  std::vector<RoundRecord> records;
  gan::ParamVector g_server;
  gan::MlpSpec g_spec;
  gan::MlpSpec d_spec;
  metrics::MetricsReport final_metrics;
  metrics::MetricsReport best_metrics;  // smallest Frechet over eval rounds
  iso::DetectionState detection;
  std::vector<std::size_t> malicious_ids;
};

using RoundSink = std::function<void(const RoundRecord&)>;

// Procedure B driver: for each round all clients update, the server runs
// detection (when enabled and t > warmup), decays weights and aggregates.
// `sink`, when set, observes every record as it is produced.
RunResult run_training(const cli::RunConfig& cfg, const RoundSink& sink = {});

// Network specs implied by a run config (generator head: identity for ring
// data, tanh for images; discriminator head: sigmoid for vanilla losses,
// identity critic for wgan_gp).
gan::MlpSpec make_gen_spec(const cli::RunConfig& cfg);
gan::MlpSpec make_disc_spec(const cli::RunConfig& cfg);

// The client's training dataset: clean draw for benign ids, triggered for
// malicious ones.
data::Dataset make_client_dataset(const cli::RunConfig& cfg, std::size_t client_id);

// Clean reference sample used for metric evaluation.
data::Dataset make_reference_dataset(const cli::RunConfig& cfg, std::size_t n);

// Evaluates generator quality against a clean reference.
metrics::MetricsReport evaluate_generator(const cli::RunConfig& cfg,
                                          const gan::ParamVector& g_params,
                                          const gan::MlpSpec& g_spec,
                                          const data::Dataset& reference,
                                          std::uint64_t z_seed);

}  // namespace fedgan::fl
