#include <benchmark/benchmark.h>

#include "rxnalign/molgraph.hpp"

namespace {

const char* kSmiles[] = {
    "CC(C)(C)P(C(C)(C)C)C(C)(C)C",
    "c1ccc(P(c2ccccc2)c2ccccc2)cc1",
    "CC1(C)OB(OC1(C)C)c1ccccc1",
    "O=[N+]([O-])c1ccc(Br)cc1",
};

void BM_ParseSmiles(benchmark::State& state) {
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rxnalign::parse_smiles(kSmiles[i++ % std::size(kSmiles)]));
  }
}
BENCHMARK(BM_ParseSmiles);

void BM_Canonicalize(benchmark::State& state) {
  std::vector<rxnalign::MolGraph> mols;
  for (const char* s : kSmiles) mols.push_back(rxnalign::parse_smiles(s));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rxnalign::canonical_form(mols[i++ % mols.size()]));
  }
}
BENCHMARK(BM_Canonicalize);

void BM_TokenizeSmiles(benchmark::State& state) {
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rxnalign::tokenize_smiles(kSmiles[i++ % std::size(kSmiles)]));
  }
}
BENCHMARK(BM_TokenizeSmiles);

}  // namespace
