#pragma once

// Finite-difference validation of the backward pass.  Forward closures must
// rebuild their graph from the captured leaves on every call so perturbed
// values are picked up.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rxnalign/tensor.hpp"

namespace rxnalign::nd {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0;
};

// Central differences with step eps on sampled coordinates of each leaf.
// Relative error uses max(|analytic|, |numeric|, 1e-3) as the denominator.
double max_rel_grad_error(const std::function<Tensor()>& forward,
                          const std::vector<Tensor>& leaves,
                          int probes_per_leaf, std::uint64_t seed,
                          double eps = 1e-5);

// One case per op in the library, with randomized inputs.
std::vector<GradCheckReport> standard_gradchecks(std::uint64_t seed);

// End-to-end check through two aligned encoder blocks with fusion, condition
// attention and the pooled regression head on a small mapped reaction.
GradCheckReport encoder_composition_gradcheck(std::uint64_t seed);

}  // namespace rxnalign::nd
