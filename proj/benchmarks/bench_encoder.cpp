#include <benchmark/benchmark.h>

#include "rxnalign/model.hpp"

namespace {

using namespace rxnalign;

const char* kReaction =
    "Br[c:1]1[cH:2][cH:3][c:4]([CH3:20])[cH:5][cH:6]1."
    "[NH:10]1[CH2:11][CH2:12][O:13][CH2:14][CH2:15]1>>"
    "[N:10]1([c:1]2[cH:2][cH:3][c:4]([CH3:20])[cH:5][cH:6]2)"
    "[CH2:11][CH2:12][O:13][CH2:14][CH2:15]1";

void BM_EncodeForward(benchmark::State& state) {
  ModelSpec spec;
  spec.task = TaskKind::Regression;
  spec.hidden = state.range(0);
  RegressionModel model = make_regression_model(spec, 5);
  auto rxn = make_aligned_reaction(parse_reaction(kReaction));
  FeaturizedReaction feat = featurize_reaction(rxn);
  std::vector<const FeaturizedReaction*> items(8, &feat);
  ReactionBatch batch = make_batch(items);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_batch(batch, model.encoder, nullptr, {}));
  }
}
BENCHMARK(BM_EncodeForward)->Arg(64)->Arg(128);

}  // namespace
