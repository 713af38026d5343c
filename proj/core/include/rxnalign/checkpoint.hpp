#pragma once

// Single-file model checkpoints: a JSON manifest (task, architecture, vocab,
// normalization, history, tensor index) followed by raw little-endian f64
// tensor payloads and a crc32 trailer.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rxnalign/model.hpp"
#include "rxnalign/params.hpp"

namespace rxnalign {

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(std::string category, std::string message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct CheckpointMeta {
  TaskKind task = TaskKind::Condition;
  ModelSpec spec;
  std::vector<std::string> vocab;  // sequence tasks
  double target_mean = 0, target_std = 1;
  std::vector<EpochStats> history;
  std::map<std::string, std::string> extra;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const nd::ParamMap& params);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, nd::Tensor>> tensors;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies loaded tensors into the registered parameters; names and shapes
// must line up exactly.
void restore_params(const LoadedCheckpoint& ckpt, nd::ParamMap& params);

}  // namespace rxnalign
