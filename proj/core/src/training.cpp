#include "icd/training.hpp"

#include <cmath>
#include <numeric>

namespace icd {

namespace {

[[noreturn]] void bad_field(std::string_view field, std::string_view why) {
  throw std::invalid_argument("train." + std::string(field) + ": " + std::string(why));
}

constexpr double kDivergenceFactor = 10.0;
constexpr int kDivergencePatience = 20;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) bad_field("epochs", "must be >= 0");
  if (dataset_size < 1) bad_field("dataset_size", "must be >= 1");
  if (batch_size < 1 || batch_size > dataset_size) bad_field("batch_size", "must satisfy 0 < batch_size <= dataset_size");
  if (context_length < 1) bad_field("context_length", "must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad_field("learning_rate", "must be > 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) bad_field("adam_beta1", "must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) bad_field("adam_beta2", "must lie in (0, 1)");
  if (!(adam_eps > 0.0)) bad_field("adam_eps", "must be > 0");
  if (eval_prompts < 1) bad_field("eval_prompts", "must be >= 1");
  if (record_every < 1) bad_field("record_every", "must be >= 1");
}

AttentionWeights init_weights(Index n, AttentionKind kind, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("init_weights: n must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(n));
  auto uniform_matrix = [&] {
    Matrix m(n, n);
    double* data = m.data();
    for (Index i = 0; i < n * n; ++i) data[i] = rng.uniform(-bound, bound);
    return m;
  };
  AttentionWeights w;
  w.kind = kind;
  w.kq = uniform_matrix();
  w.pv = uniform_matrix();
  if (kind == AttentionKind::GaussianKernel) {
    w.key = uniform_matrix();
    w.query = uniform_matrix();
  }
  return w;
}

AdamState AdamState::zeros(Index n) {
  AdamState s;
  s.m_kq = s.v_kq = s.m_pv = s.v_pv = Matrix::Zero(n, n);
  return s;
}

void adam_step(AdamState& state, AttentionWeights& w, const MseGradient& grads,
               const TrainConfig& cfg, Index epoch) {
  if (grads.kq.rows() != w.dim() || grads.pv.rows() != w.dim() || state.m_kq.rows() != w.dim()) {
    throw std::invalid_argument("adam_step: state, gradient and weight sizes differ");
  }
  if (!grads.kq.allFinite() || !grads.pv.allFinite()) {
    throw TrainingError("non-finite gradient", epoch);
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  auto update = [&](Matrix& param, Matrix& m, Matrix& v, const Matrix& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    param.array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
  };
  update(w.kq, state.m_kq, state.v_kq, grads.kq);
  update(w.pv, state.m_pv, state.v_pv, grads.pv);
}

TrainStreams TrainStreams::from_seed(std::uint64_t seed) {
  const RngStream root(seed, 0);
  return TrainStreams{root.substream(1), root.substream(2), root.substream(3), root.substream(4)};
}

TrainResult train_on_prompts(std::vector<Prompt> train_set, std::span<const Prompt> test_set,
                             AttentionKind kind, Index n, const TrainConfig& cfg) {
  cfg.validate();
  if (kind == AttentionKind::GaussianKernel) {
    throw std::invalid_argument("train: the Gaussian-kernel variant is evaluation-only");
  }
  if (train_set.empty() || test_set.empty()) throw std::invalid_argument("train: empty prompt set");
  if (static_cast<Index>(train_set.size()) < cfg.batch_size) {
    throw std::invalid_argument("train.batch_size: larger than the training set");
  }

  TrainStreams streams = TrainStreams::from_seed(cfg.seed);
  TrainResult result;
  AttentionWeights w = init_weights(n, kind, streams.init);
  result.initial_weights = w;

  auto record = [&](Index epoch) {
    LossRecord r;
    r.epoch = epoch;
    r.train_mse = evaluate(w, train_set).mean;
    r.test_mse = evaluate(w, test_set).mean;
    if (!std::isfinite(r.train_mse) || !std::isfinite(r.test_mse)) {
      throw TrainingError("non-finite loss", epoch);
    }
    result.loss_curve.push_back(r);
  };
  record(0);
  const double initial_loss = result.loss_curve.front().train_mse;

  AdamState adam = AdamState::zeros(n);
  std::vector<Index> order(train_set.size());
  std::iota(order.begin(), order.end(), Index{0});
  int diverging_records = 0;

  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(streams.shuffle.below(i + 1));
      std::swap(order[i], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const Index> batch(order.data() + start, stop - start);
      const MseGradient g = grad_mse(w, train_set, batch);
      adam_step(adam, w, g, cfg, epoch);
    }
    if (epoch % cfg.record_every == 0 || epoch == cfg.epochs) {
      record(epoch);
      const double loss = result.loss_curve.back().train_mse;
      diverging_records = loss > kDivergenceFactor * initial_loss ? diverging_records + 1 : 0;
      if (diverging_records >= kDivergencePatience) {
        throw TrainingError("training diverged: train loss " + std::to_string(loss) +
                                " stayed above 10x the initial " + std::to_string(initial_loss) +
                                " for 20 records",
                            epoch);
      }
    }
  }

  result.final_weights = w;
  result.summary = summarize(w);
  return result;
}

TrainResult train(const TaskSpec& spec, AttentionKind kind, const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  const TrainStreams streams = TrainStreams::from_seed(cfg.seed);
  std::vector<Episode> train_episodes =
      sample_dataset(spec, cfg.dataset_size, cfg.context_length, streams.train_data);
  const std::vector<Episode> test_episodes =
      sample_dataset(spec, cfg.eval_prompts, cfg.context_length, streams.test_data);

  std::vector<Prompt> train_prompts;
  train_prompts.reserve(train_episodes.size());
  for (Episode& e : train_episodes) train_prompts.push_back(std::move(e.prompt));
  train_episodes.clear();
  std::vector<Prompt> test_prompts;
  test_prompts.reserve(test_episodes.size());
  for (const Episode& e : test_episodes) test_prompts.push_back(e.prompt);

  TrainResult result = train_on_prompts(std::move(train_prompts), test_prompts, kind, spec.n, cfg);
  for (BaselineKind b : baselines_for(spec.task_case)) {
    result.baseline_mse.emplace_back(b, evaluate_baseline(b, test_episodes));
  }
  return result;
}

}  // namespace icd
