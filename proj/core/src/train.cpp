#include "rxnalign/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "rxnalign/rng.hpp"

namespace rxnalign {
namespace {

std::vector<const FeaturizedReaction*> gather(
    const std::vector<FeaturizedReaction>& feats,
    const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
  std::vector<const FeaturizedReaction*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&feats[idx[i]]);
  return out;
}

double epoch_loss(const ModelBundle& bundle, const PreparedData& data,
                  const std::vector<std::size_t>& idx, int batch_size) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0;
  for (std::size_t at = 0; at < idx.size(); at += std::size_t(batch_size)) {
    const std::size_t stop = std::min(idx.size(), at + std::size_t(batch_size));
    const auto items = gather(data.feats, idx, at, stop);
    const ReactionBatch batch = make_batch(items);
    ForwardOptions opts;  // eval mode
    const nd::Tensor loss = bundle.seq ? sequence_loss(*bundle.seq, batch, opts)
                                       : regression_loss(*bundle.reg, batch, opts);
    total += loss.item() * double(items.size());
  }
  return total / double(idx.size());
}

std::vector<std::vector<double>> snapshot(const nd::ParamMap& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.entries.size());
  for (const auto& [name, t] : params.entries) {
    (void)name;
    out.push_back(t.data());
  }
  return out;
}

void restore(nd::ParamMap& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.entries.size(); ++i)
    params.entries[i].second.mutable_data() = snap[i];
}

}  // namespace

PreparedData prepare_task_data(TaskKind task, const std::vector<DatasetRow>& rows) {
  PreparedData data;
  data.feats.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.split != "train" && row.split != "val" && row.split != "test")
      throw TrainError("rows must carry split tags before preparation");
    data.feats.push_back(featurize_reaction(*row.rxn));
    auto& slot = (row.split == "train"   ? data.train_idx
                  : row.split == "val" ? data.val_idx
                                       : data.test_idx);
    slot.push_back(data.feats.size() - 1);
  }

  switch (task) {
    case TaskKind::Condition: {
      std::set<std::string> symbols;
      for (const auto& row : rows)
        for (const auto& sym : condition_target_symbols(row)) symbols.insert(sym);
      symbols.erase(kNoneToken);  // reserved id
      for (const auto& sym : symbols) data.vocab.add(sym);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto syms = condition_target_symbols(rows[i]);
        data.feats[i].target_tokens =
            data.vocab.encode({syms.begin(), syms.end()});
      }
      break;
    }
    case TaskKind::Generation: {
      std::set<std::string> symbols;
      std::vector<std::vector<std::string>> tokenized(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string text = generation_target_text(rows[i]);
        if (!text.empty()) tokenized[i] = tokenize_smiles(text);
        for (const auto& tok : tokenized[i]) symbols.insert(tok);
      }
      for (const auto& sym : symbols) data.vocab.add(sym);
      for (std::size_t i = 0; i < rows.size(); ++i)
        data.feats[i].target_tokens = data.vocab.encode(tokenized[i]);
      break;
    }
    case TaskKind::Regression: {
      for (std::size_t i = 0; i < rows.size(); ++i)
        data.feats[i].target_value = rows[i].target;
      double mean = 0;
      for (std::size_t i : data.train_idx) mean += data.feats[i].target_value;
      if (!data.train_idx.empty()) mean /= double(data.train_idx.size());
      double var = 0;
      for (std::size_t i : data.train_idx) {
        const double d = data.feats[i].target_value - mean;
        var += d * d;
      }
      if (!data.train_idx.empty()) var /= double(data.train_idx.size());
      data.target_mean = mean;
      data.target_std = var > 0 ? std::sqrt(var) : 1.0;
      break;
    }
  }
  return data;
}

ModelBundle train_task(const TrainConfig& cfg, const PreparedData& data,
                       std::ostream* log) {
  if (data.train_idx.empty()) throw TrainError("no training rows");

  ModelBundle bundle;
  bundle.meta.spec = cfg.spec;
  bundle.meta.task = cfg.spec.task;
  if (cfg.spec.task == TaskKind::Regression) {
    bundle.reg.emplace(make_regression_model(cfg.spec, cfg.seed));
    bundle.reg->target_mean = data.target_mean;
    bundle.reg->target_std = data.target_std;
    bundle.meta.target_mean = data.target_mean;
    bundle.meta.target_std = data.target_std;
    bundle.params = collect_params(*bundle.reg);
  } else {
    bundle.seq.emplace(make_sequence_model(cfg.spec, data.vocab, cfg.seed));
    bundle.meta.vocab = data.vocab.tokens();
    bundle.params = collect_params(*bundle.seq);
  }

  nd::Adam opt;
  const std::size_t train_n = data.train_idx.size();
  const std::int64_t steps_per_epoch =
      std::int64_t((train_n + std::size_t(cfg.batch_size) - 1) /
                   std::size_t(cfg.batch_size));

  std::vector<std::size_t> order = data.train_idx;
  std::vector<std::vector<double>> best;
  double best_val = std::numeric_limits<double>::infinity();
  std::int64_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    nd::Pcg rng(nd::mix_keys(cfg.seed, std::uint64_t(epoch)));
    rng.shuffle(order);

    double train_sum = 0;
    double lr = 0;
    for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), at + std::size_t(cfg.batch_size));
      const auto items = gather(data.feats, order, at, stop);
      const ReactionBatch batch = make_batch(items);

      ForwardOptions fwd;
      fwd.train = true;
      fwd.seed = cfg.seed;
      fwd.step = step;
      const nd::Tensor loss = bundle.seq
                                  ? sequence_loss(*bundle.seq, batch, fwd)
                                  : regression_loss(*bundle.reg, batch, fwd);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw TrainError("loss diverged at epoch " + std::to_string(epoch) +
                         " step " + std::to_string(step) + ": " +
                         std::to_string(value));
      train_sum += value * double(items.size());

      nd::backward(loss);
      try {
        nd::clip_global_norm(bundle.params, cfg.clip_norm);
      } catch (const nd::NdError& e) {
        throw TrainError("gradients diverged at epoch " + std::to_string(epoch) +
                         " step " + std::to_string(step) + ": " + e.what());
      }
      lr = cfg.schedule.at(step, steps_per_epoch);
      opt.step(bundle.params, lr);
      bundle.params.zero_grad();
      ++step;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = train_sum / double(train_n);
    const double val = epoch_loss(bundle, data, data.val_idx, cfg.batch_size);
    stats.val_loss = std::isnan(val) ? stats.train_loss : val;
    bundle.meta.history.push_back(stats);
    if (log)
      *log << "epoch " << epoch << "/" << cfg.epochs << " lr " << stats.lr
           << " train " << stats.train_loss << " val " << stats.val_loss
           << "\n";

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best = snapshot(bundle.params);
    }
  }

  if (!best.empty()) restore(bundle.params, best);
  return bundle;
}

void save_model_bundle(const std::string& path, const ModelBundle& bundle) {
  save_checkpoint(path, bundle.meta, bundle.params);
}

ModelBundle load_model_bundle(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  ModelBundle bundle;
  bundle.meta = ckpt.meta;
  if (ckpt.meta.spec.task == TaskKind::Regression) {
    bundle.reg.emplace(make_regression_model(ckpt.meta.spec, 0));
    bundle.reg->target_mean = ckpt.meta.target_mean;
    bundle.reg->target_std = ckpt.meta.target_std;
    bundle.params = collect_params(*bundle.reg);
  } else {
    const Vocabulary vocab(ckpt.meta.vocab);
    bundle.seq.emplace(make_sequence_model(ckpt.meta.spec, vocab, 0));
    bundle.params = collect_params(*bundle.seq);
  }
  restore_params(ckpt, bundle.params);
  return bundle;
}

std::vector<std::vector<BeamHyp>> beam_over(
    const SequenceModel& m, const std::vector<const FeaturizedReaction*>& items,
    const BeamOptions& beam, int batch_size) {
  std::vector<std::vector<BeamHyp>> out;
  out.reserve(items.size());
  for (std::size_t at = 0; at < items.size(); at += std::size_t(batch_size)) {
    const std::size_t stop = std::min(items.size(), at + std::size_t(batch_size));
    const std::vector<const FeaturizedReaction*> chunk(items.begin() + long(at),
                                                       items.begin() + long(stop));
    auto hyps = sequence_beam(m, make_batch(chunk), beam);
    for (auto& h : hyps) out.push_back(std::move(h));
  }
  return out;
}

std::vector<double> predict_over(const RegressionModel& m,
                                 const std::vector<const FeaturizedReaction*>& items,
                                 int batch_size) {
  std::vector<double> out;
  out.reserve(items.size());
  for (std::size_t at = 0; at < items.size(); at += std::size_t(batch_size)) {
    const std::size_t stop = std::min(items.size(), at + std::size_t(batch_size));
    const std::vector<const FeaturizedReaction*> chunk(items.begin() + long(at),
                                                       items.begin() + long(stop));
    for (double v : regression_predict(m, make_batch(chunk))) out.push_back(v);
  }
  return out;
}

std::optional<ConditionCombo> combo_from_tokens(const Vocabulary& vocab,
                                                const std::vector<int>& tokens) {
  std::vector<int> body = tokens;
  if (!body.empty() && body.back() == Vocabulary::kEos) body.pop_back();
  if (int(body.size()) != kConditionSlots) return std::nullopt;
  ConditionCombo combo;
  for (int s = 0; s < kConditionSlots; ++s) {
    const int id = body[std::size_t(s)];
    if (id < 0 || id >= vocab.size()) return std::nullopt;
    if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos)
      return std::nullopt;
    combo[std::size_t(s)] = vocab.token(id);
  }
  return combo;
}

std::string text_from_tokens(const Vocabulary& vocab, const std::vector<int>& tokens) {
  std::string out;
  for (int id : tokens) {
    if (id == Vocabulary::kEos) break;
    if (id < 0 || id >= vocab.size()) return out;
    out += vocab.token(id);
  }
  return out;
}

}  // namespace rxnalign
