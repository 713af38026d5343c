#include "rxnalign/model.hpp"

#include <stdexcept>

namespace rxnalign {

using nd::Tensor;

const char* task_name(TaskKind task) {
  switch (task) {
    case TaskKind::Condition: return "condition";
    case TaskKind::Generation: return "generation";
    case TaskKind::Regression: return "regression";
  }
  return "condition";
}

TaskKind task_from_name(const std::string& name) {
  if (name == "condition") return TaskKind::Condition;
  if (name == "generation") return TaskKind::Generation;
  if (name == "regression") return TaskKind::Regression;
  throw std::invalid_argument("unknown task: " + name);
}

namespace {

EncoderConfig encoder_config(const ModelSpec& spec, bool with_adapter) {
  EncoderConfig cfg;
  cfg.hidden = spec.hidden;
  cfg.blocks = spec.encoder_blocks;
  cfg.heads = spec.heads;
  cfg.dropout = spec.dropout;
  cfg.no_fusion = spec.no_fusion;
  cfg.with_adapter = with_adapter;
  return cfg;
}

}  // namespace

SequenceModel make_sequence_model(const ModelSpec& spec,
                                  const Vocabulary& vocab, std::uint64_t seed) {
  SequenceModel m;
  m.spec = spec;
  m.vocab = vocab;
  m.encoder = make_encoder(encoder_config(spec, false), nd::mix_keys(seed, 1));
  DecoderConfig dc;
  dc.hidden = spec.hidden;
  dc.layers = spec.decoder_layers;
  dc.heads = spec.heads;
  dc.dropout = spec.dropout;
  dc.max_len = spec.max_len;
  dc.vanilla_cross = spec.vanilla_cross;
  m.decoder = make_decoder(dc, vocab.size(), nd::mix_keys(seed, 2));
  return m;
}

RegressionModel make_regression_model(const ModelSpec& spec,
                                      std::uint64_t seed) {
  RegressionModel m;
  m.spec = spec;
  m.encoder = make_encoder(encoder_config(spec, true), nd::mix_keys(seed, 1));
  m.conditions = make_condition_encoder(spec.hidden, spec.condition_layers,
                                        nd::mix_keys(seed, 3));
  m.head = make_pooled_head(spec.hidden, spec.heads, spec.vanilla_cross,
                            nd::mix_keys(seed, 4));
  return m;
}

nd::ParamMap collect_params(SequenceModel& m) {
  nd::ParamMap map;
  register_encoder(m.encoder, map, "encoder");
  register_decoder(m.decoder, map, "decoder");
  return map;
}

nd::ParamMap collect_params(RegressionModel& m) {
  nd::ParamMap map;
  register_encoder(m.encoder, map, "encoder");
  register_condition_encoder(m.conditions, map, "conditions");
  register_pooled_head(m.head, map, "head");
  return map;
}

std::vector<Tensor> condition_matrices(const ConditionEncoderParams& p,
                                       const ReactionBatch& batch) {
  std::vector<Tensor> out(batch.items.size());
  for (std::size_t g = 0; g < batch.items.size(); ++g)
    if (!batch.items[g]->condition_mols.empty())
      out[g] = encode_condition_mols(batch.items[g]->condition_mols, p);
  return out;
}

nd::Tensor sequence_loss(const SequenceModel& m, const ReactionBatch& batch,
                         const ForwardOptions& opts) {
  EncodeOptions eopts;
  eopts.train = opts.train;
  eopts.seed = opts.seed;
  eopts.step = opts.step;
  EncodeResult enc = encode_batch(batch, m.encoder, nullptr, eopts);

  nd::DropKeys keys{opts.train, m.spec.dropout, nd::mix_keys(opts.seed, 77),
                    opts.step, 0};
  std::vector<Tensor> logit_parts;
  std::vector<int> labels;
  for (std::int64_t g = 0; g < batch.size(); ++g) {
    const FeaturizedReaction& rxn = *batch.items[g];
    if (rxn.target_tokens.empty())
      throw nd::NdError("sequence_loss: item without target tokens");
    RcMemory mem = reaction_memory(enc, batch, g);
    std::vector<int> inputs;
    inputs.reserve(rxn.target_tokens.size() + 1);
    inputs.push_back(Vocabulary::kBos);
    inputs.insert(inputs.end(), rxn.target_tokens.begin(),
                  rxn.target_tokens.end());
    logit_parts.push_back(decode_tokens(inputs, mem, m.decoder, &keys));
    labels.insert(labels.end(), rxn.target_tokens.begin(),
                  rxn.target_tokens.end());
    labels.push_back(Vocabulary::kEos);
  }
  Tensor logits = logit_parts.size() == 1 ? logit_parts.front()
                                          : nd::concat_rows(logit_parts);
  return nd::cross_entropy(logits, labels, Vocabulary::kPad);
}

std::vector<std::vector<BeamHyp>> sequence_beam(const SequenceModel& m,
                                                const ReactionBatch& batch,
                                                const BeamOptions& beam) {
  EncodeResult enc = encode_batch(batch, m.encoder, nullptr, {});
  std::vector<std::vector<BeamHyp>> out;
  out.reserve(batch.items.size());
  for (std::int64_t g = 0; g < batch.size(); ++g) {
    RcMemory mem = reaction_memory(enc, batch, g);
    out.push_back(beam_search(mem, m.decoder, beam));
  }
  return out;
}

nd::Tensor regression_loss(const RegressionModel& m, const ReactionBatch& batch,
                           const ForwardOptions& opts) {
  EncodeOptions eopts;
  eopts.train = opts.train;
  eopts.seed = opts.seed;
  eopts.step = opts.step;
  std::vector<Tensor> cond = condition_matrices(m.conditions, batch);
  EncodeResult enc = encode_batch(batch, m.encoder, &cond, eopts);

  nd::DropKeys keys{opts.train, m.spec.dropout, nd::mix_keys(opts.seed, 99),
                    opts.step, 0};
  std::vector<Tensor> preds;
  std::vector<double> targets;
  for (std::int64_t g = 0; g < batch.size(); ++g) {
    RcMemory mem = reaction_memory(enc, batch, g);
    preds.push_back(pooled_scalar(mem, m.head, &keys));
    double z = (batch.items[g]->target_value - m.target_mean) /
               (m.target_std != 0 ? m.target_std : 1.0);
    targets.push_back(z);
  }
  Tensor pred =
      preds.size() == 1 ? preds.front() : nd::concat_rows(preds);
  Tensor target = Tensor::leaf({batch.size(), 1}, std::move(targets));
  return nd::mse_loss(pred, target);
}

std::vector<double> regression_predict(const RegressionModel& m,
                                       const ReactionBatch& batch) {
  std::vector<Tensor> cond = condition_matrices(m.conditions, batch);
  EncodeResult enc = encode_batch(batch, m.encoder, &cond, {});
  std::vector<double> out;
  out.reserve(batch.items.size());
  for (std::int64_t g = 0; g < batch.size(); ++g) {
    RcMemory mem = reaction_memory(enc, batch, g);
    double z = pooled_scalar(mem, m.head).item();
    out.push_back(z * (m.target_std != 0 ? m.target_std : 1.0) +
                  m.target_mean);
  }
  return out;
}

}  // namespace rxnalign
