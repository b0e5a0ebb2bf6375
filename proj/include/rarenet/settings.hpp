#pragma once

#include "rarenet/config.hpp"
#include "rarenet/extractor.hpp"
#include "rarenet/model.hpp"
#include "rarenet/objective.hpp"
#include "rarenet/trainer.hpp"

#include <set>
#include <string>

namespace rarenet {

struct TrainingSettings {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
};

/// Keys accepted in a training config file (and by `--set`).
const std::set<std::string>& training_keys();
const std::set<std::string>& extraction_keys();

/// Overrides the fields named in `kv`; rejects unknown keys and validates.
void apply_training_keys(const KeyValues& kv, TrainingSettings& s);
void apply_extraction_keys(const KeyValues& kv, ExtractionConfig& c,
                           double penalty_weight);

/// Canonical `key = value` rendering of every field.
std::string training_text(const TrainingSettings& s);
std::string extraction_text(const ExtractionConfig& c);

}  // namespace rarenet
