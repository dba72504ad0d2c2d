#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "icd/attention.hpp"
#include "icd/baselines.hpp"

namespace icd {

/// Optimiser and data-size settings for one training run.
///
/// The loss is the batch mean of squared errors (not the sum over the
/// dataset); the learning rate absorbs the constant.
struct TrainConfig {
  Index epochs = 500;
  Index batch_size = 80;
  Index dataset_size = 800;
  Index context_length = 500;
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Index eval_prompts = 1000;
  Index record_every = 10;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

/// Raised when a run has to stop: a non-finite gradient or a diverging loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, Index epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  Index epoch() const { return epoch_; }

 private:
  Index epoch_;
};

struct LossRecord {
  Index epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> loss_curve;
  AttentionWeights initial_weights;
  AttentionWeights final_weights;
  ScaledIdentitySummary summary;
  /// Baselines evaluated on the held-out test episodes.
  std::vector<std::pair<BaselineKind, MeanStat>> baseline_mse;
};

/// Every entry of kq and pv i.i.d. uniform on [-1/sqrt(n), 1/sqrt(n)].
AttentionWeights init_weights(Index n, AttentionKind kind, RngStream& rng);

struct AdamState {
  Matrix m_kq, v_kq, m_pv, v_pv;
  long step = 0;

  static AdamState zeros(Index n);
};

/// One bias-corrected Adam update of both weight matrices in place.
/// Throws TrainingError if a gradient entry is not finite.
void adam_step(AdamState& state, AttentionWeights& w, const MseGradient& grads,
               const TrainConfig& cfg, Index epoch);

/// Random substreams used by a run, all derived from cfg.seed.
struct TrainStreams {
  RngStream init;
  RngStream train_data;
  RngStream test_data;
  RngStream shuffle;

  static TrainStreams from_seed(std::uint64_t seed);
};

/// The optimisation loop on fixed train/test prompt sets. Each epoch shuffles
/// the training prompts (Fisher-Yates on the shuffle substream) and takes one
/// Adam step per batch; metrics are recorded at epoch 0, every
/// cfg.record_every epochs and at the last epoch.
TrainResult train_on_prompts(std::vector<Prompt> train_set, std::span<const Prompt> test_set,
                             AttentionKind kind, Index n, const TrainConfig& cfg);

/// Samples cfg.dataset_size training episodes and cfg.eval_prompts fresh test
/// episodes (one task instance each) and trains from init_weights.
TrainResult train(const TaskSpec& spec, AttentionKind kind, const TrainConfig& cfg);

}  // namespace icd
