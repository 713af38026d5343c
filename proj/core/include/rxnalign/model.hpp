#pragma once

// Task-level model assembly: encoder plus sequence decoder for condition and
// reagent prediction, encoder plus pooled head for regression, with the
// shared forward/loss plumbing.

#include <cstdint>
#include <optional>
#include <vector>

#include "rxnalign/decoder.hpp"
#include "rxnalign/encoder.hpp"
#include "rxnalign/vocab.hpp"

namespace rxnalign {

enum class TaskKind { Condition, Generation, Regression };

const char* task_name(TaskKind task);
TaskKind task_from_name(const std::string& name);

struct ModelSpec {
  TaskKind task = TaskKind::Condition;
  std::int64_t hidden = 128;
  int encoder_blocks = 3;
  int decoder_layers = 3;
  int heads = 8;
  double dropout = 0.0;
  bool no_fusion = false;
  bool vanilla_cross = false;
  int condition_layers = 3;
  std::int64_t max_len = 64;
};

struct SequenceModel {
  ModelSpec spec;
  EncoderParams encoder;
  DecoderParams decoder;
  Vocabulary vocab;
};

struct RegressionModel {
  ModelSpec spec;
  EncoderParams encoder;
  ConditionEncoderParams conditions;
  PooledHeadParams head;
  double target_mean = 0;
  double target_std = 1;
};

SequenceModel make_sequence_model(const ModelSpec& spec,
                                  const Vocabulary& vocab, std::uint64_t seed);
RegressionModel make_regression_model(const ModelSpec& spec,
                                      std::uint64_t seed);

nd::ParamMap collect_params(SequenceModel& m);
nd::ParamMap collect_params(RegressionModel& m);

struct ForwardOptions {
  bool train = false;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
};

// Mean token cross entropy over the batch; targets come from each item's
// target_tokens (begin/end handling internal).
nd::Tensor sequence_loss(const SequenceModel& m, const ReactionBatch& batch,
                         const ForwardOptions& opts);

// Beam results per batch item.
std::vector<std::vector<BeamHyp>> sequence_beam(const SequenceModel& m,
                                                const ReactionBatch& batch,
                                                const BeamOptions& beam);

// Mean squared error in normalized target space.
nd::Tensor regression_loss(const RegressionModel& m, const ReactionBatch& batch,
                           const ForwardOptions& opts);

// Predictions in the original target units.
std::vector<double> regression_predict(const RegressionModel& m,
                                       const ReactionBatch& batch);

// Per-item condition matrices for the adapter, built from condition_mols.
std::vector<nd::Tensor> condition_matrices(const ConditionEncoderParams& p,
                                           const ReactionBatch& batch);

}  // namespace rxnalign
