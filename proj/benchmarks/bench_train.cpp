#include <benchmark/benchmark.h>

#include "rxnalign/model.hpp"
#include "rxnalign/params.hpp"

namespace {

using namespace rxnalign;

const char* kReaction =
    "[CH3:1][CH2:2]Br.[OH:3][CH2:4][CH3:5]>>[CH3:1][CH2:2][O:3][CH2:4][CH3:5]";

void BM_TrainStep(benchmark::State& state) {
  ModelSpec spec;
  spec.task = TaskKind::Regression;
  spec.hidden = state.range(0);
  RegressionModel model = make_regression_model(spec, 5);
  nd::ParamMap params = collect_params(model);
  nd::Adam adam;

  auto rxn = make_aligned_reaction(parse_reaction(kReaction));
  FeaturizedReaction feat = featurize_reaction(rxn);
  feat.target_value = 0.5;
  std::vector<const FeaturizedReaction*> items(16, &feat);
  ReactionBatch batch = make_batch(items);

  ForwardOptions opts;
  opts.train = true;
  for (auto _ : state) {
    nd::Tensor loss = regression_loss(model, batch, opts);
    loss.backward();
    nd::clip_global_norm(params, 5.0);
    adam.step(params, 1e-4);
    ++opts.step;
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
