#pragma once

// Training orchestration: task data preparation (vocabulary, target coding,
// normalization), the optimization loop with validation-best retention, and
// the bundle tying a trained model to its checkpoint metadata.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rxnalign/checkpoint.hpp"
#include "rxnalign/dataset.hpp"
#include "rxnalign/features.hpp"
#include "rxnalign/metrics.hpp"
#include "rxnalign/model.hpp"

namespace rxnalign {

class TrainError : public std::runtime_error {
 public:
  explicit TrainError(std::string message)
      : std::runtime_error(std::move(message)) {}
};

struct PreparedData {
  std::vector<FeaturizedReaction> feats;  // parallel to the ingested rows
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  Vocabulary vocab;                       // sequence tasks
  double target_mean = 0, target_std = 1; // regression, from the train split
};

// Featurizes every row and fills supervision: slot symbols or tokenized
// reagent text for the sequence tasks, normalization stats for regression.
// The vocabulary covers the whole table so evaluation never meets an
// unknown symbol; generalization is judged on combinations, not tokens.
PreparedData prepare_task_data(TaskKind task, const std::vector<DatasetRow>& rows);

struct TrainConfig {
  ModelSpec spec;
  int epochs = 10;
  int batch_size = 32;
  nd::LrSchedule schedule;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
};

struct ModelBundle {
  CheckpointMeta meta;
  std::optional<SequenceModel> seq;
  std::optional<RegressionModel> reg;
  nd::ParamMap params;  // aliases the live model tensors

  TaskKind task() const { return meta.spec.task; }
};

// Builds the model for the task, runs the optimization loop and returns the
// parameters from the best validation epoch.  Throws TrainError when the
// loss stops being finite.  Deterministic for a fixed config and data.
ModelBundle train_task(const TrainConfig& cfg, const PreparedData& data,
                       std::ostream* log = nullptr);

void save_model_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model_bundle(const std::string& path);

// Minibatched inference over item pointers.
std::vector<std::vector<BeamHyp>> beam_over(
    const SequenceModel& m, const std::vector<const FeaturizedReaction*>& items,
    const BeamOptions& beam, int batch_size);
std::vector<double> predict_over(const RegressionModel& m,
                                 const std::vector<const FeaturizedReaction*>& items,
                                 int batch_size);

// Decodes a hypothesis into a slot combination; empty when the token count
// or any token is unusable.
std::optional<ConditionCombo> combo_from_tokens(const Vocabulary& vocab,
                                                const std::vector<int>& tokens);
// Concatenates generated symbols into SMILES text (end token stripped).
std::string text_from_tokens(const Vocabulary& vocab, const std::vector<int>& tokens);

}  // namespace rxnalign
