#include <benchmark/benchmark.h>

#include "rxnalign/model.hpp"

namespace {

using namespace rxnalign;

void BM_BeamSearch(benchmark::State& state) {
  Vocabulary vocab;
  for (const char* t : {"O", "CO", "CCO", "[Pd]", "c1ccncc1"}) vocab.add(t);
  ModelSpec spec;
  spec.task = TaskKind::Condition;
  spec.hidden = 64;
  spec.max_len = 8;
  SequenceModel model = make_sequence_model(spec, vocab, 5);

  auto rxn = make_aligned_reaction(
      parse_reaction("[CH3:1][CH2:2]Br.[OH2:3]>>[CH3:1][CH2:2][OH:3]"));
  FeaturizedReaction feat = featurize_reaction(rxn);
  ReactionBatch batch = make_batch({&feat});

  BeamOptions beam;
  beam.width = static_cast<int>(state.range(0));
  beam.results = beam.width;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sequence_beam(model, batch, beam));
  }
}
BENCHMARK(BM_BeamSearch)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace
