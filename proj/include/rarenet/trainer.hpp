#pragma once

#include "rarenet/kg_store.hpp"
#include "rarenet/model.hpp"
#include "rarenet/objective.hpp"
#include "rarenet/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rarenet {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::int64_t lr_step = 10;
  double lr_factor = 0.5;
  std::int64_t epochs = 30;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip_norm = 5.0;
  /// Patients whose gradients are summed (then averaged) per optimizer step.
  std::int64_t accumulate = 1;
  /// Negatives sampled per positive arc.
  int negative_ratio = 5;
  /// Sampling radius around the phenotypes.
  int hops = 2;
  /// Share of labelled patients held out for best-epoch selection by MRR.
  /// Ignored for cohorts smaller than 10.
  double validation_fraction = 0.1;

  void validate() const;
  /// lr0 * factor^floor(epoch / lr_step), epoch counted from 0.
  double learning_rate_at(std::int64_t epoch) const;
};

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
};

/// Scales all gradients so their joint L2 norm is at most max_norm (no-op for
/// max_norm <= 0). Returns the norm before clipping.
double clip_global_norm(std::span<Matrix* const> grads, double max_norm);

/// One bias-corrected Adam update after global-norm clipping. Moments are
/// created on first use. `grads` are clipped in place.
void adam_step(std::span<Matrix* const> params, std::span<Matrix* const> grads,
               AdamState& state, const TrainConfig& cfg, double learning_rate);

struct EpochReport {
  std::int64_t epoch = 0;
  double learning_rate = 0.0;
  double loss_sub = 0.0;
  double loss_gene = 0.0;
  double loss_total = 0.0;
  std::int64_t hard_negatives = 0;
  /// NaN without a validation split.
  double validation_mrr = 0.0;
};

struct Checkpoint {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  ModelParams params;
  AdamState adam;
  /// Completed epochs.
  std::int64_t epoch = 0;
  std::vector<EpochReport> trace;
  /// Parameters of the best validation epoch, when a split was used.
  std::optional<ModelParams> best_params;
  double best_validation_mrr = -1.0;
  std::int64_t best_epoch = -1;

  /// Parameters to serve: best validation epoch if any, else the latest.
  const ModelParams& serving_params() const {
    return best_params ? *best_params : params;
  }
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochReport> trace;
};

/// Sequential, seeded training. With `resume`, continues from its epoch up to
/// cfg.epochs and returns the same state an uninterrupted run would reach.
TrainResult train(const KnowledgeGraph& g, std::span<const PatientRecord> cohort,
                  const ModelConfig& mcfg, const LossConfig& lcfg,
                  const TrainConfig& tcfg, const Checkpoint* resume = nullptr,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

/// Loss of one patient on a fresh tape; gradients are added into `grads`
/// when given. Returns the loss terms.
LossReport patient_loss(const ModelParams& params, const ModelConfig& mcfg,
                        const LossConfig& lcfg, const SampledSubgraph& sg,
                        const SupervisionLabels& labels,
                        std::optional<NodeId> causal_gene, ModelParams* grads);

}  // namespace rarenet
