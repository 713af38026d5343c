#pragma once

// Attention introspection: per-atom weights the trained model places on the
// reaction when it reads out a prediction, exported as CSV and as an SVG
// drawing of both graphs.

#include <string>
#include <vector>

#include "rxnalign/train.hpp"

namespace rxnalign {

struct ExplainResult {
  int reactant_atoms = 0;  // memory keys 0..n-1
  int product_atoms = 0;   // memory keys n..n+m-1
  std::vector<std::uint8_t> rc_reactant, rc_product;
  // Mean attention over the unrestricted heads, one value per memory key.
  std::vector<double> broad;
  // Mean over the center-restricted heads; empty for a model without them.
  std::vector<double> focused;
};

// Runs the model's first read step (begin token, or the pooled query) over
// one reaction and captures the cross-attention weights.
ExplainResult explain_reaction(const ModelBundle& bundle,
                               const FeaturizedReaction& feat);

void write_explain_csv(const std::string& path, const AlignedReaction& rxn,
                       const ExplainResult& res);
// Draws both graphs with atoms shaded by weight; `focused` selects which
// head group to shade by (falls back to broad when there are none).
void write_explain_svg(const std::string& path, const AlignedReaction& rxn,
                       const ExplainResult& res, bool focused);

}  // namespace rxnalign
