// Command line front end: preprocess / train / evaluate / predict / explain /
// embed / gradcheck over the reaction modeling library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "rxnalign/explain.hpp"
#include "rxnalign/gradcheck.hpp"
#include "rxnalign/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rxnalign;

namespace {

// Relative inputs fall back to $RXNALIGN_DATA_ROOT when not found in place.
std::string resolve_input(const std::string& path) {
  if (fs::exists(path)) return path;
  if (fs::path(path).is_relative()) {
    if (const char* root = std::getenv("RXNALIGN_DATA_ROOT")) {
      const fs::path joined = fs::path(root) / path;
      if (fs::exists(joined)) return joined.string();
    }
  }
  return path;
}

TaskKind parse_task(const std::string& name) { return task_from_name(name); }

SchemaKind schema_for(TaskKind task) {
  switch (task) {
    case TaskKind::Condition: return SchemaKind::Condition;
    case TaskKind::Generation: return SchemaKind::Generation;
    case TaskKind::Regression: return SchemaKind::Regression;
  }
  throw std::logic_error("unreachable");
}

struct DataArgs {
  std::string task = "condition";
  std::string input;
  std::string split_file;
  std::string target_column = "target";
  bool ratio_to_energy = false;
  double train_frac = 0.8, val_frac = 0.1;
  std::uint64_t split_seed = 0;

  void attach(CLI::App* cmd, bool with_split, bool require_input = true) {
    cmd->add_option("--task", task, "condition | generation | regression");
    auto* in = cmd->add_option("--in", input, "input CSV");
    if (require_input) in->required();
    if (with_split) {
      cmd->add_option("--split", split_file, "split assignment CSV");
      cmd->add_option("--train-frac", train_frac, "train fraction");
      cmd->add_option("--val-frac", val_frac, "validation fraction");
      cmd->add_option("--split-seed", split_seed, "split shuffle seed");
    }
    cmd->add_option("--target-column", target_column, "regression target column");
    cmd->add_flag("--ratio-to-energy", ratio_to_energy,
                  "treat the target as a ratio; fit its free-energy equivalent");
  }

  IngestResult ingest() const {
    IngestOptions opts;
    opts.schema = schema_for(parse_task(task));
    opts.target_column = target_column;
    opts.ratio_to_energy = ratio_to_energy;
    return ingest_csv(resolve_input(input), opts);
  }

  void splits(std::vector<DatasetRow>& rows) const {
    if (!split_file.empty() && fs::exists(resolve_input(split_file))) {
      apply_split_file(rows, resolve_input(split_file));
    } else {
      SplitSpec spec;
      spec.train = train_frac;
      spec.val = val_frac;
      spec.seed = split_seed;
      assign_splits(rows, spec);
    }
  }
};

struct ModelArgs {
  std::int64_t hidden = 128;
  int heads = 8;
  int blocks = 3;
  int layers = 3;
  int condition_layers = 3;
  double dropout = 0.0;
  std::int64_t max_len = 64;
  bool no_fusion = false;
  bool vanilla_cross = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--hidden", hidden, "feature width");
    cmd->add_option("--heads", heads, "attention heads");
    cmd->add_option("--blocks", blocks, "encoder blocks");
    cmd->add_option("--layers", layers, "decoder layers");
    cmd->add_option("--condition-layers", condition_layers,
                    "condition encoder layers");
    cmd->add_option("--dropout", dropout, "dropout rate");
    cmd->add_option("--max-len", max_len, "decoder length limit");
    cmd->add_flag("--no-fusion", no_fusion, "ablation: per-side update only");
    cmd->add_flag("--vanilla-cross", vanilla_cross,
                  "ablation: no center-restricted heads");
  }

  ModelSpec spec(TaskKind task, double dropout_rate) const {
    ModelSpec s;
    s.task = task;
    s.hidden = hidden;
    s.heads = heads;
    s.encoder_blocks = blocks;
    s.decoder_layers = layers;
    s.condition_layers = condition_layers;
    s.dropout = dropout_rate;
    s.max_len = max_len;
    s.no_fusion = no_fusion;
    s.vanilla_cross = vanilla_cross;
    return s;
  }
};

// Plain key=value lines, '#' comments; keys are the long option names
// without dashes.  A flag given on the command line beats the file value.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(resolve_input(path));
  if (!in) throw TrainError("cannot read config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    const std::string entry = trim(line);
    if (entry.empty()) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw TrainError("config line " + std::to_string(lineno) +
                       ": expected key=value");
    const std::string key = trim(entry.substr(0, eq));
    if (key.empty())
      throw TrainError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(entry.substr(eq + 1));
  }
  return out;
}

bool config_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on")
    return true;
  if (value == "0" || value == "false" || value == "no" || value == "off")
    return false;
  throw TrainError("config key '" + key + "': expected a boolean, got '" +
                   value + "'");
}

void apply_train_config(const std::string& path, const CLI::App* cmd,
                        DataArgs& data, ModelArgs& model, int& epochs,
                        int& batch_size, double& lr, double& clip,
                        std::uint64_t& seed, std::string& out_path) {
  const auto file = read_config_file(path);
  auto use = [&](const char* key, auto&& apply) {
    const auto it = file.find(key);
    if (it == file.end()) return;
    if (cmd->count(std::string("--") + key) > 0) return;
    try {
      apply(it->second);
    } catch (const TrainError&) {
      throw;
    } catch (const std::exception&) {
      throw TrainError(std::string("config key '") + key + "': bad value '" +
                       it->second + "'");
    }
  };
  auto as_int = [](const std::string& v) { return std::stoi(v); };
  auto as_i64 = [](const std::string& v) { return std::stoll(v); };
  auto as_f64 = [](const std::string& v) { return std::stod(v); };

  use("task", [&](const std::string& v) { data.task = v; });
  use("in", [&](const std::string& v) { data.input = v; });
  use("split", [&](const std::string& v) { data.split_file = v; });
  use("target-column", [&](const std::string& v) { data.target_column = v; });
  use("ratio-to-energy", [&](const std::string& v) {
    data.ratio_to_energy = config_bool("ratio-to-energy", v);
  });
  use("train-frac", [&](const std::string& v) { data.train_frac = as_f64(v); });
  use("val-frac", [&](const std::string& v) { data.val_frac = as_f64(v); });
  use("split-seed", [&](const std::string& v) {
    data.split_seed = std::stoull(v);
  });
  use("hidden", [&](const std::string& v) { model.hidden = as_i64(v); });
  use("heads", [&](const std::string& v) { model.heads = as_int(v); });
  use("blocks", [&](const std::string& v) { model.blocks = as_int(v); });
  use("layers", [&](const std::string& v) { model.layers = as_int(v); });
  use("condition-layers",
      [&](const std::string& v) { model.condition_layers = as_int(v); });
  use("dropout", [&](const std::string& v) { model.dropout = as_f64(v); });
  use("max-len", [&](const std::string& v) { model.max_len = as_i64(v); });
  use("no-fusion", [&](const std::string& v) {
    model.no_fusion = config_bool("no-fusion", v);
  });
  use("vanilla-cross", [&](const std::string& v) {
    model.vanilla_cross = config_bool("vanilla-cross", v);
  });
  use("epochs", [&](const std::string& v) { epochs = as_int(v); });
  use("batch", [&](const std::string& v) { batch_size = as_int(v); });
  use("lr", [&](const std::string& v) { lr = as_f64(v); });
  use("clip", [&](const std::string& v) { clip = as_f64(v); });
  use("seed", [&](const std::string& v) { seed = std::stoull(v); });
  use("out", [&](const std::string& v) { out_path = v; });

  static const std::set<std::string> known{
      "task", "in", "split", "target-column", "ratio-to-energy",
      "train-frac", "val-frac", "split-seed", "hidden", "heads",
      "blocks", "layers", "condition-layers", "dropout", "max-len",
      "no-fusion", "vanilla-cross", "epochs", "batch", "lr",
      "clip", "seed", "out"};
  for (const auto& [key, value] : file)
    if (!known.count(key)) throw TrainError("config: unknown key '" + key + "'");
}

std::vector<std::size_t> subset_indices(const std::vector<DatasetRow>& rows,
                                        const std::string& subset, long limit) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (subset == "all" || rows[i].split == subset) idx.push_back(i);
  if (limit > 0 && idx.size() > std::size_t(limit)) idx.resize(std::size_t(limit));
  return idx;
}

json quarantine_json(const IngestResult& data) {
  return json{{"rows", data.rows.size()}, {"quarantined", data.quarantined.size()}};
}

int run_preprocess(const DataArgs& data_args, const std::string& out_dir) {
  IngestResult data = data_args.ingest();
  data_args.splits(data.rows);
  fs::create_directories(out_dir);
  write_split_file((fs::path(out_dir) / "splits.csv").string(), data.rows);
  write_quarantine_file((fs::path(out_dir) / "quarantine.csv").string(),
                        data.quarantined);

  CsvTable processed;
  const TaskKind task = parse_task(data_args.task);
  switch (task) {
    case TaskKind::Condition: {
      processed.header = {"id", "reaction"};
      for (const char* slot : kSlotColumns) processed.header.push_back(slot);
      for (const auto& row : data.rows) {
        std::vector<std::string> cells{row.id, row.reaction_text};
        for (const auto& slot : row.slots) cells.push_back(slot);
        processed.rows.push_back(std::move(cells));
      }
      break;
    }
    case TaskKind::Generation: {
      processed.header = {"id", "reaction", "reagents"};
      for (const auto& row : data.rows)
        processed.rows.push_back({row.id, row.reaction_text,
                                  generation_target_text(row)});
      break;
    }
    case TaskKind::Regression: {
      processed.header = {"id", "reaction", "target"};
      for (const auto& row : data.rows)
        processed.rows.push_back({row.id, row.reaction_text,
                                  std::to_string(row.target)});
      break;
    }
  }
  write_csv((fs::path(out_dir) / "processed.csv").string(), processed);

  json report = quarantine_json(data);
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  for (const auto& row : data.rows) {
    if (row.split == "train") ++n_train;
    else if (row.split == "val") ++n_val;
    else ++n_test;
  }
  report["train"] = n_train;
  report["val"] = n_val;
  report["test"] = n_test;
  report["out"] = out_dir;
  std::cout << report.dump(2) << "\n";
  return 0;
}

int run_train(const DataArgs& data_args, const ModelArgs& model_args,
              int epochs, int batch_size, double lr, double clip,
              std::uint64_t seed, const std::string& out_path) {
  IngestResult data = data_args.ingest();
  if (data.rows.empty()) throw DatasetError("no usable rows in the input");
  data_args.splits(data.rows);
  const TaskKind task = parse_task(data_args.task);
  const PreparedData prepared = prepare_task_data(task, data.rows);

  TrainConfig cfg;
  cfg.spec = model_args.spec(task, model_args.dropout);
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.schedule.peak_lr = lr;
  cfg.clip_norm = clip;
  cfg.seed = seed;

  ModelBundle bundle = train_task(cfg, prepared, &std::cout);
  bundle.meta.extra["source"] = data_args.input;
  bundle.meta.extra["ratio_to_energy"] = data_args.ratio_to_energy ? "1" : "0";
  save_model_bundle(out_path, bundle);
  std::cout << "saved " << out_path << "\n";
  return 0;
}

std::vector<const FeaturizedReaction*> pointers(
    const std::vector<FeaturizedReaction>& feats) {
  std::vector<const FeaturizedReaction*> out;
  out.reserve(feats.size());
  for (const auto& f : feats) out.push_back(&f);
  return out;
}

int run_evaluate(const DataArgs& data_args, const std::string& model_path,
                 const std::string& subset, const std::vector<int>& ks,
                 int beam_width, int batch_size, long limit,
                 const std::string& out_path) {
  ModelBundle bundle = load_model_bundle(resolve_input(model_path));
  const TaskKind task = bundle.task();
  DataArgs adjusted = data_args;
  adjusted.task = task_name(task);
  IngestResult data = adjusted.ingest();
  adjusted.splits(data.rows);
  const auto idx = subset_indices(data.rows, subset, limit);
  if (idx.empty()) throw DatasetError("no rows in subset: " + subset);

  json report;
  report["task"] = task_name(task);
  report["count"] = idx.size();
  report["subset"] = subset;

  if (task == TaskKind::Regression) {
    std::vector<FeaturizedReaction> feats;
    feats.reserve(idx.size());
    for (std::size_t i : idx)
      feats.push_back(featurize_reaction(*data.rows[i].rxn));
    const auto preds = predict_over(*bundle.reg, pointers(feats), batch_size);
    std::vector<double> targets;
    for (std::size_t i : idx) targets.push_back(data.rows[i].target);
    const RegressionMetrics m = compute_regression_metrics(preds, targets);
    report["mae"] = m.mae;
    report["rmse"] = m.rmse;
    report["r2"] = m.r2;
  } else {
    // Duplicate reactions collapse to one query whose references pool every
    // recorded outcome; a guess matching any of them counts as a hit.
    std::vector<std::size_t> lead;
    std::vector<std::vector<std::size_t>> members;
    std::unordered_map<std::string, std::size_t> group_of;
    for (std::size_t i : idx) {
      const auto [it, fresh] =
          group_of.emplace(reaction_key(*data.rows[i].rxn), lead.size());
      if (fresh) {
        lead.push_back(i);
        members.emplace_back();
      }
      members[it->second].push_back(i);
    }
    report["groups"] = lead.size();

    std::vector<FeaturizedReaction> feats;
    feats.reserve(lead.size());
    for (std::size_t i : lead)
      feats.push_back(featurize_reaction(*data.rows[i].rxn));

    BeamOptions beam;
    beam.width = beam_width;
    beam.results = beam_width;
    if (task == TaskKind::Condition) beam.max_len = kConditionSlots + 1;
    const auto hyps = beam_over(*bundle.seq, pointers(feats), beam, batch_size);

    if (task == TaskKind::Condition) {
      std::vector<std::vector<ConditionCombo>> ranked(lead.size());
      std::vector<std::vector<ConditionCombo>> refs(lead.size());
      for (std::size_t g = 0; g < lead.size(); ++g) {
        for (std::size_t i : members[g])
          refs[g].push_back(condition_target_symbols(data.rows[i]));
        for (const auto& hyp : hyps[g])
          if (auto combo = combo_from_tokens(bundle.seq->vocab, hyp.tokens))
            ranked[g].push_back(*combo);
      }
      json rows = json::array();
      for (const auto& r : condition_topk(ranked, refs, ks))
        rows.push_back({{"k", r.k},
                        {"overall", r.overall},
                        {"catalyst", r.catalyst},
                        {"solvent", r.solvent},
                        {"reagent", r.reagent}});
      report["topk"] = rows;
    } else {
      std::vector<std::vector<std::string>> ranked(lead.size());
      std::vector<std::vector<std::string>> refs(lead.size());
      for (std::size_t g = 0; g < lead.size(); ++g) {
        for (std::size_t i : members[g])
          refs[g].push_back(generation_target_text(data.rows[i]));
        for (const auto& hyp : hyps[g])
          ranked[g].push_back(text_from_tokens(bundle.seq->vocab, hyp.tokens));
      }
      const auto acc = generation_topk(ranked, refs, ks);
      json rows = json::array();
      for (std::size_t i = 0; i < ks.size(); ++i)
        rows.push_back({{"k", ks[i]}, {"accuracy", acc[i]}});
      report["topk"] = rows;
    }
  }

  const std::string text = report.dump(2);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report: " + out_path);
    out << text << "\n";
  }
  std::cout << text << "\n";
  return 0;
}

int run_predict(const DataArgs& data_args, const std::string& reaction,
                const std::string& model_path, const std::string& subset,
                int beam_width, int results, int batch_size, long limit,
                const std::string& out_path) {
  ModelBundle bundle = load_model_bundle(resolve_input(model_path));
  const TaskKind task = bundle.task();

  std::vector<std::string> ids;
  std::vector<FeaturizedReaction> feats;
  if (!reaction.empty()) {
    ids.push_back("r1");
    feats.push_back(
        featurize_reaction(make_aligned_reaction(parse_reaction(reaction))));
  } else {
    if (data_args.input.empty())
      throw DatasetError("predict needs --in or --reaction");
    DataArgs adjusted = data_args;
    adjusted.task = task_name(task);
    IngestResult data = adjusted.ingest();
    if (!adjusted.split_file.empty() || subset != "all")
      adjusted.splits(data.rows);
    const auto idx = subset_indices(data.rows, subset, limit);
    if (idx.empty()) throw DatasetError("no rows in subset: " + subset);
    for (std::size_t i : idx) {
      ids.push_back(data.rows[i].id);
      feats.push_back(featurize_reaction(*data.rows[i].rxn));
    }
  }

  CsvTable out;
  if (task == TaskKind::Regression) {
    out.header = {"id", "prediction"};
    const auto preds = predict_over(*bundle.reg, pointers(feats), batch_size);
    for (std::size_t j = 0; j < ids.size(); ++j)
      out.rows.push_back({ids[j], std::to_string(preds[j])});
  } else {
    BeamOptions beam;
    beam.width = beam_width;
    beam.results = results;
    if (task == TaskKind::Condition) beam.max_len = kConditionSlots + 1;
    const auto hyps = beam_over(*bundle.seq, pointers(feats), beam, batch_size);
    if (task == TaskKind::Condition) {
      out.header = {"id", "rank", "score"};
      for (const char* slot : kSlotColumns) out.header.push_back(slot);
      for (std::size_t j = 0; j < ids.size(); ++j) {
        int rank = 0;
        for (const auto& hyp : hyps[j]) {
          const auto combo = combo_from_tokens(bundle.seq->vocab, hyp.tokens);
          if (!combo) continue;
          std::vector<std::string> cells{ids[j], std::to_string(++rank),
                                         std::to_string(hyp.score)};
          for (const auto& slot : *combo)
            cells.push_back(slot == kNoneToken ? "" : slot);
          out.rows.push_back(std::move(cells));
        }
      }
    } else {
      out.header = {"id", "rank", "score", "reagents"};
      for (std::size_t j = 0; j < ids.size(); ++j) {
        int rank = 0;
        for (const auto& hyp : hyps[j])
          out.rows.push_back({ids[j], std::to_string(++rank),
                              std::to_string(hyp.score),
                              text_from_tokens(bundle.seq->vocab, hyp.tokens)});
      }
    }
  }
  write_csv(out_path, out);
  std::cout << json{{"predictions", out.rows.size()}, {"out", out_path}}.dump()
            << "\n";
  return 0;
}

int run_explain(const std::string& model_path, const std::string& reaction,
                const std::string& out_dir) {
  ModelBundle bundle = load_model_bundle(resolve_input(model_path));
  const auto rxn = make_aligned_reaction(parse_reaction(reaction));
  const FeaturizedReaction feat = featurize_reaction(rxn);
  const ExplainResult res = explain_reaction(bundle, feat);
  fs::create_directories(out_dir);
  write_explain_csv((fs::path(out_dir) / "attention.csv").string(), rxn, res);
  write_explain_svg((fs::path(out_dir) / "attention_broad.svg").string(), rxn,
                    res, false);
  write_explain_svg((fs::path(out_dir) / "attention_center.svg").string(), rxn,
                    res, true);
  std::cout << json{{"atoms", res.reactant_atoms + res.product_atoms},
                    {"out", out_dir}}
                   .dump()
            << "\n";
  return 0;
}

int run_embed(const std::string& model_path, const std::string& reaction,
              const std::string& out_path) {
  ModelBundle bundle = load_model_bundle(resolve_input(model_path));
  const auto rxn = make_aligned_reaction(parse_reaction(reaction));
  const FeaturizedReaction feat = featurize_reaction(rxn);
  const ReactionBatch batch = make_batch({&feat});

  std::vector<std::pair<nd::Tensor, nd::Tensor>> stages;
  EncodeOptions opts;
  opts.capture_blocks = &stages;
  if (bundle.seq) {
    encode_batch(batch, bundle.seq->encoder, nullptr, opts);
  } else {
    const auto cond = condition_matrices(bundle.reg->conditions, batch);
    encode_batch(batch, bundle.reg->encoder, &cond, opts);
  }

  CsvTable out;
  out.header = {"block", "side", "atom"};
  const std::int64_t d = stages.front().first.dim(1);
  for (std::int64_t c = 0; c < d; ++c)
    out.header.push_back("e" + std::to_string(c));
  auto emit = [&](int block, const char* side, const nd::Tensor& rows) {
    for (std::int64_t i = 0; i < rows.dim(0); ++i) {
      std::vector<std::string> cells{std::to_string(block), side,
                                     std::to_string(i)};
      for (std::int64_t c = 0; c < d; ++c)
        cells.push_back(std::to_string(rows.at(i, c)));
      out.rows.push_back(std::move(cells));
    }
  };
  for (std::size_t b = 0; b < stages.size(); ++b) {
    emit(int(b) + 1, "reactant", stages[b].first);
    emit(int(b) + 1, "product", stages[b].second);
  }
  write_csv(out_path, out);
  std::cout << json{{"rows", out.rows.size()}, {"blocks", stages.size()},
                    {"out", out_path}}
                   .dump()
            << "\n";
  return 0;
}

int run_gradcheck(std::uint64_t seed, double tolerance) {
  auto reports = nd::standard_gradchecks(seed);
  reports.push_back(nd::encoder_composition_gradcheck(seed));
  bool ok = true;
  for (const auto& r : reports) {
    const bool pass = r.max_rel_err <= tolerance;
    ok = ok && pass;
    std::cout << (pass ? "pass " : "FAIL ") << r.name << " " << r.max_rel_err
              << "\n";
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reaction condition, reagent and selectivity modeling toolkit"};
  app.require_subcommand(1);

  DataArgs data_args;
  ModelArgs model_args;
  std::string out_path = "out";
  std::string model_path, reaction, subset = "test";
  int epochs = 10, batch_size = 32, beam_width = 10, results = 10,
      eval_batch = 64;
  double lr = 1e-4, clip = 5.0, tolerance = 1e-4;
  long limit = 0;
  std::uint64_t seed = 1;
  std::vector<int> ks{1, 3, 5, 10};

  auto* pre = app.add_subcommand("preprocess",
                                 "validate and canonicalize a reaction table");
  data_args.attach(pre, true);
  pre->add_option("--out", out_path, "output directory")->required();

  std::string config_path, ckpt_path;
  auto* train = app.add_subcommand("train", "fit a model");
  train->add_option("--config", config_path,
                    "key=value file; flags override its values");
  data_args.attach(train, true, false);
  model_args.attach(train);
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--batch", batch_size, "batch size");
  train->add_option("--lr", lr, "peak learning rate");
  train->add_option("--clip", clip, "gradient norm limit");
  train->add_option("--seed", seed, "model and shuffle seed");
  train->add_option("--out", ckpt_path, "checkpoint path");

  auto* eval = app.add_subcommand("evaluate", "score a model on a subset");
  data_args.attach(eval, true);
  eval->add_option("--model", model_path, "checkpoint path")->required();
  eval->add_option("--subset", subset, "train | val | test | all");
  eval->add_option("--k", ks, "top-k depths");
  eval->add_option("--beam", beam_width, "beam width");
  eval->add_option("--batch", eval_batch, "inference batch size");
  eval->add_option("--limit", limit, "cap evaluated rows (0 = all)");
  eval->add_option("--out", out_path, "JSON report path");

  auto* pred = app.add_subcommand("predict", "write model outputs for a table");
  data_args.attach(pred, true, false);
  pred->add_option("--reaction", reaction,
                   "single mapped reaction SMILES instead of --in");
  pred->add_option("--model", model_path, "checkpoint path")->required();
  pred->add_option("--subset", subset, "train | val | test | all")
      ->default_val("all");
  pred->add_option("--beam", beam_width, "beam width");
  pred->add_option("--results", results, "hypotheses per input");
  pred->add_option("--batch", eval_batch, "inference batch size");
  pred->add_option("--limit", limit, "cap rows (0 = all)");
  pred->add_option("--out", out_path, "output CSV path")->required();

  auto* expl = app.add_subcommand("explain", "attention weights for a reaction");
  expl->add_option("--model", model_path, "checkpoint path")->required();
  expl->add_option("--reaction", reaction, "mapped reaction SMILES")->required();
  expl->add_option("--out", out_path, "output directory")->required();

  auto* emb = app.add_subcommand("embed", "per-atom features for a reaction");
  emb->add_option("--model", model_path, "checkpoint path")->required();
  emb->add_option("--reaction", reaction, "mapped reaction SMILES")->required();
  emb->add_option("--out", out_path, "output CSV path")->required();

  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference check of the backward pass");
  gc->add_option("--seed", seed, "probe seed");
  gc->add_option("--tolerance", tolerance, "max relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return run_preprocess(data_args, out_path);
    if (train->parsed()) {
      if (!config_path.empty())
        apply_train_config(config_path, train, data_args, model_args, epochs,
                           batch_size, lr, clip, seed, ckpt_path);
      if (data_args.input.empty())
        throw TrainError("no input table: give --in or an 'in' config entry");
      if (ckpt_path.empty())
        throw TrainError(
            "no checkpoint path: give --out or an 'out' config entry");
      return run_train(data_args, model_args, epochs, batch_size, lr, clip,
                       seed, ckpt_path);
    }
    if (eval->parsed())
      return run_evaluate(data_args, model_path, subset, ks, beam_width,
                          eval_batch, limit, eval->count("--out") ? out_path : "");
    if (pred->parsed())
      return run_predict(data_args, reaction, model_path, subset, beam_width,
                         results, eval_batch, limit, out_path);
    if (expl->parsed()) return run_explain(model_path, reaction, out_path);
    if (emb->parsed()) return run_embed(model_path, reaction, out_path);
    if (gc->parsed()) return run_gradcheck(seed, tolerance);
  } catch (const CheckpointError& e) {
    std::cerr << json{{"category", e.category()}, {"message", e.what()}}.dump()
              << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << json{{"category", "smiles"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const AlignError& e) {
    std::cerr << json{{"category", "align"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const CsvError& e) {
    std::cerr << json{{"category", "csv"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const DatasetError& e) {
    std::cerr << json{{"category", "dataset"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const TrainError& e) {
    std::cerr << json{{"category", "train"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const nd::NdError& e) {
    std::cerr << json{{"category", "numeric"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"category", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}
