#include "rxnalign/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rxnalign/model.hpp"
#include "rxnalign/ops.hpp"
#include "rxnalign/rng.hpp"

namespace rxnalign::nd {
namespace {

Tensor random_leaf(Shape shape, std::uint64_t key, double lo = -1.0,
                   double hi = 1.0, double keep_away = 0.0) {
  const std::int64_t n = shape_size(shape);
  std::vector<double> values(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double v = lo + (hi - lo) * uniform01(key, std::uint64_t(i));
    if (keep_away > 0 && std::abs(v) < keep_away)
      v = v < 0 ? v - keep_away : v + keep_away;
    values[std::size_t(i)] = v;
  }
  return Tensor::leaf(std::move(shape), std::move(values), true);
}

// Fixed random readout so every coordinate of t reaches the scalar output
// with a distinct coefficient.
Tensor weighted_sum(const Tensor& t, std::uint64_t key) {
  std::vector<double> w(std::size_t(t.size()));
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = 0.25 + uniform01(key ^ 0xabcdULL, i);
  return sum_all(mul(t, Tensor::leaf(t.shape(), std::move(w), false)));
}

}  // namespace

double max_rel_grad_error(const std::function<Tensor()>& forward,
                          const std::vector<Tensor>& leaves,
                          int probes_per_leaf, std::uint64_t seed, double eps) {
  for (const Tensor& leaf : leaves) leaf.node()->grad.clear();
  Tensor out = forward();
  backward(out);

  Pcg rng(mix_keys(seed, 0x67636bULL));
  double worst = 0;
  for (const Tensor& leaf : leaves) {
    const std::vector<double> analytic = leaf.grad();
    Tensor handle = leaf;  // same storage
    auto& values = handle.mutable_data();
    const int probes = int(std::min<std::int64_t>(probes_per_leaf, leaf.size()));
    for (int probe = 0; probe < probes; ++probe) {
      const std::size_t at = std::size_t(rng.below(std::uint64_t(leaf.size())));
      const double saved = values[at];
      values[at] = saved + eps;
      const double up = forward().item();
      values[at] = saved - eps;
      const double down = forward().item();
      values[at] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic[at];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

std::vector<GradCheckReport> standard_gradchecks(std::uint64_t seed) {
  std::vector<GradCheckReport> reports;
  auto run = [&](const std::string& name, const std::vector<Tensor>& leaves,
                 const std::function<Tensor()>& forward) {
    reports.push_back({name, max_rel_grad_error(forward, leaves, 6,
                                                mix_keys(seed, reports.size()))});
  };
  auto key = [&](std::uint64_t salt) { return mix_keys(seed, salt); };

  {
    Tensor a = random_leaf({3, 4}, key(1)), b = random_leaf({3, 4}, key(2));
    run("add", {a, b}, [=] { return weighted_sum(add(a, b), 1); });
    run("sub", {a, b}, [=] { return weighted_sum(sub(a, b), 2); });
    run("mul", {a, b}, [=] { return weighted_sum(mul(a, b), 3); });
    run("scale", {a}, [=] { return weighted_sum(scale(a, -1.7), 4); });
    run("add_n", {a, b}, [=] { return weighted_sum(add_n({a, b, a}), 5); });
  }
  {
    Tensor a = random_leaf({3, 4}, key(3), 0.5, 2.0);
    Tensor b = random_leaf({3, 4}, key(4), 0.5, 2.0);
    run("divide", {a, b}, [=] { return weighted_sum(divide(a, b), 6); });
    run("log", {a}, [=] { return weighted_sum(log(a), 7); });
  }
  {
    Tensor x = random_leaf({4, 3}, key(5)), bias = random_leaf({3}, key(6));
    run("add_bias", {x, bias}, [=] { return weighted_sum(add_bias(x, bias), 8); });
  }
  {
    Tensor a = random_leaf({3, 5}, key(7)), b = random_leaf({5, 2}, key(8));
    run("matmul", {a, b}, [=] { return weighted_sum(matmul(a, b), 9); });
    run("transpose", {a}, [=] { return weighted_sum(transpose(a), 10); });
  }
  {
    Tensor a = random_leaf({2, 3}, key(9)), b = random_leaf({4, 3}, key(10));
    Tensor c = random_leaf({2, 2}, key(11));
    run("concat_rows", {a, b}, [=] { return weighted_sum(concat_rows({a, b}), 11); });
    run("concat_cols", {a, c}, [=] { return weighted_sum(concat_cols({a, c}), 12); });
    run("slice_rows", {b}, [=] { return weighted_sum(slice_rows(b, 1, 2), 13); });
    run("slice_cols", {b}, [=] { return weighted_sum(slice_cols(b, 1, 2), 14); });
  }
  {
    Tensor x = random_leaf({4, 3}, key(12));
    run("gather_rows", {x},
        [=] { return weighted_sum(gather_rows(x, {2, 0, 2, 3, 1}), 15); });
    Tensor rows = random_leaf({3, 2}, key(13));
    run("scatter_rows", {rows},
        [=] { return weighted_sum(scatter_rows(rows, {4, 1, 2}, 6), 16); });
    Tensor row = random_leaf({1, 5}, key(14));
    run("tile_rows", {row}, [=] { return weighted_sum(tile_rows(row, 3), 17); });
  }
  {
    Tensor t0 = random_leaf({3, 4}, key(15)), t1 = random_leaf({2, 4}, key(16));
    const std::vector<int> codes{0, 1, 2, 0, 1, 1};  // 3 items, 2 tables
    run("embedding_lookup_sum", {t0, t1}, [=] {
      return weighted_sum(embedding_lookup_sum({t0, t1}, codes, 3), 18);
    });
  }
  {
    Tensor x = random_leaf({3, 4}, key(17), -1.2, 1.2, 0.2);
    run("relu", {x}, [=] { return weighted_sum(relu(x), 19); });
    run("leaky_relu", {x},
        [=] { return weighted_sum(leaky_relu(x, 0.2), 20); });
    run("exp", {x}, [=] { return weighted_sum(exp(x), 21); });
  }
  {
    Tensor s = random_leaf({3, 5}, key(18));
    run("softmax", {s}, [=] { return weighted_sum(softmax(s), 22); });
    const std::vector<std::uint8_t> allow{1, 0, 1, 1, 0, 0, 1, 1, 1, 1,
                                          1, 1, 0, 0, 1};
    run("masked_softmax", {s},
        [=] { return weighted_sum(masked_softmax(s, allow), 23); });
  }
  {
    Tensor logits = random_leaf({6}, key(19));
    const Index seg{0, 1, 0, 2, 1, 0};
    run("segment_softmax", {logits},
        [=] { return weighted_sum(segment_softmax(logits, seg, 3), 24); });
    Tensor x = random_leaf({6, 3}, key(20));
    run("segment_sum_rows", {x},
        [=] { return weighted_sum(segment_sum_rows(x, seg, 3), 25); });
    Tensor scales = random_leaf({6}, key(21), 0.3, 1.5);
    run("scale_rows", {x, scales},
        [=] { return weighted_sum(scale_rows(x, scales), 26); });
  }
  {
    Tensor x = random_leaf({4, 6}, key(22));
    Tensor gain = random_leaf({6}, key(23), 0.5, 1.5);
    Tensor bias = random_leaf({6}, key(24));
    run("layer_norm", {x, gain, bias},
        [=] { return weighted_sum(layer_norm(x, gain, bias), 27); });
  }
  {
    Tensor x = random_leaf({4, 5}, key(25));
    run("dropout", {x}, [=] {
      return weighted_sum(dropout(x, 0.4, true, 0x5eedULL), 28);
    });
    run("mean_rows", {x}, [=] { return weighted_sum(mean_rows(x), 29); });
    run("sum_all", {x}, [=] { return sum_all(x); });
  }
  {
    Tensor logits = random_leaf({5, 4}, key(26));
    const std::vector<int> targets{2, 0, -1, 3, 1};
    run("cross_entropy", {logits},
        [=] { return cross_entropy(logits, targets, -1); });
    Tensor pred = random_leaf({6}, key(27));
    Tensor target = random_leaf({6}, key(28));
    run("mse_loss", {pred}, [=] { return mse_loss(pred, target); });
  }
  return reports;
}

}  // namespace rxnalign::nd

namespace rxnalign::nd {

GradCheckReport encoder_composition_gradcheck(std::uint64_t seed) {
  using namespace rxnalign;
  ModelSpec spec;
  spec.task = TaskKind::Regression;
  spec.hidden = 8;
  spec.heads = 2;
  spec.encoder_blocks = 2;
  spec.condition_layers = 1;
  spec.dropout = 0.0;
  RegressionModel model = make_regression_model(spec, mix_keys(seed, 0xe2e));
  ParamMap params = collect_params(model);

  const auto parts =
      parse_reaction("[CH3:1][Br:2].[OH2:3]>CCO>[CH3:1][OH:3]");
  const auto rxn = make_aligned_reaction(parts);
  FeaturizedReaction feat = featurize_reaction(rxn);
  feat.target_value = 0.7;

  std::vector<Tensor> leaves;
  for (auto& [name, t] : params.entries) {
    (void)name;
    leaves.push_back(t);
  }
  auto forward = [&model, &feat]() {
    const ReactionBatch batch = make_batch({&feat});
    return regression_loss(model, batch, {});
  };
  GradCheckReport report;
  report.name = "encoder_composition";
  report.max_rel_err = max_rel_grad_error(forward, leaves, 2, seed, 1e-5);
  return report;
}

}  // namespace rxnalign::nd
