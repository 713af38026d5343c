#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "rxnalign/model.hpp"
#include "rxnalign/rng.hpp"

using namespace rxnalign;
using nd::Tensor;

namespace {

FeaturizedReaction featurized(const std::string& text) {
  return featurize_reaction(make_aligned_reaction(parse_reaction(text)));
}

Tensor rand_leaf(std::int64_t r, std::int64_t c, std::uint64_t key) {
  std::vector<double> v(static_cast<std::size_t>(r * c));
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = nd::uniform01(key, i) - 0.5;
  return Tensor::leaf({r, c}, std::move(v));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// y = x W + b with plain loops.
std::vector<double> dense_linear(const std::vector<double>& x,
                                 const LinearParams& p) {
  std::int64_t in = p.w.dim(0), out = p.w.dim(1);
  REQUIRE(static_cast<std::int64_t>(x.size()) == in);
  std::vector<double> y(static_cast<std::size_t>(out), 0.0);
  for (std::int64_t i = 0; i < in; ++i)
    for (std::int64_t j = 0; j < out; ++j)
      y[static_cast<std::size_t>(j)] +=
          x[static_cast<std::size_t>(i)] *
          p.w.data()[static_cast<std::size_t>(i * out + j)];
  if (p.b.defined())
    for (std::int64_t j = 0; j < out; ++j)
      y[static_cast<std::size_t>(j)] += p.b.data()[static_cast<std::size_t>(j)];
  return y;
}

std::vector<double> dense_ffn(const std::vector<double>& x, const FfnParams& p) {
  std::vector<double> h = dense_linear(x, p.l1);
  for (double& v : h) v = std::max(v, 0.0);
  return dense_linear(h, p.l2);
}

std::vector<double> row_of(const Tensor& t, std::int64_t i) {
  std::int64_t d = t.dim(1);
  auto first = t.data().begin() + i * d;
  return {first, first + d};
}

std::vector<double> table_row_sum(const std::vector<Tensor>& tables,
                                  const std::vector<int>& codes,
                                  std::size_t item) {
  std::int64_t d = tables.front().dim(1);
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (std::size_t t = 0; t < tables.size(); ++t) {
    int code = codes[item * tables.size() + t];
    for (std::int64_t j = 0; j < d; ++j)
      out[static_cast<std::size_t>(j)] +=
          tables[t].data()[static_cast<std::size_t>(code * d + j)];
  }
  return out;
}

}  // namespace

TEST_CASE("message passing layer matches a dense recomputation") {
  const std::int64_t d = 6;
  FeaturizedMol mol = featurize_mol(parse_smiles("CCO"));
  MpnnParams p = make_mpnn(d, 99);
  Tensor h = rand_leaf(mol.n, d, 1);
  Tensor e = rand_leaf(mol.num_edges(), d, 2);
  Tensor out = mpnn_layer(h, e, mol.edge_dst, mol.edge_src, p);

  std::int64_t n = mol.n, ne = mol.num_edges();
  std::vector<std::vector<double>> hn, ee;
  for (std::int64_t i = 0; i < n; ++i) hn.push_back(dense_linear(row_of(h, i), p.node));
  for (std::int64_t k = 0; k < ne; ++k) ee.push_back(dense_linear(row_of(e, k), p.edge));
  std::vector<double> self_row = dense_linear(row_of(p.self_edge, 0), p.edge);

  // entries: the directed edges, then one self entry per node
  std::vector<std::int64_t> dst = mol.edge_dst, src = mol.edge_src;
  std::vector<std::vector<double>> entry = ee;
  for (std::int64_t i = 0; i < n; ++i) {
    dst.push_back(i);
    src.push_back(i);
    entry.push_back(self_row);
  }
  auto dot_slice = [&](const std::vector<double>& v, std::int64_t off) {
    double s = 0;
    for (std::int64_t j = 0; j < d; ++j)
      s += v[static_cast<std::size_t>(j)] *
           p.attn.data()[static_cast<std::size_t>(off + j)];
    return s;
  };
  std::vector<double> score(dst.size());
  for (std::size_t k = 0; k < dst.size(); ++k) {
    double s = dot_slice(hn[static_cast<std::size_t>(dst[k])], 0) +
               dot_slice(hn[static_cast<std::size_t>(src[k])], d) +
               dot_slice(entry[k], 2 * d);
    score[k] = s > 0 ? s : 0.2 * s;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    double mx = -1e300, z = 0;
    for (std::size_t k = 0; k < dst.size(); ++k)
      if (dst[k] == i) mx = std::max(mx, score[k]);
    for (std::size_t k = 0; k < dst.size(); ++k)
      if (dst[k] == i) z += std::exp(score[k] - mx);
    std::vector<double> expect = hn[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < dst.size(); ++k) {
      if (dst[k] != i) continue;
      double alpha = std::exp(score[k] - mx) / z;
      for (std::int64_t j = 0; j < d; ++j)
        expect[static_cast<std::size_t>(j)] +=
            alpha * entry[k][static_cast<std::size_t>(j)];
    }
    CHECK(max_abs_diff(row_of(out, i), expect) < 1e-12);
  }
}

TEST_CASE("condition encoder matches a dense rollout") {
  const std::int64_t d = 5;
  ConditionEncoderParams p = make_condition_encoder(d, 2, 7);

  SUBCASE("single atom") {
    FeaturizedMol pd = featurize_mol(parse_smiles("[Pd]"));
    Tensor rows = encode_condition_mols({pd}, p);
    std::vector<double> x = table_row_sum(p.atom_tables, pd.atom_codes, 0);
    for (const ConditionLayerParams& layer : p.layers) {
      std::vector<double> total = x;
      for (std::int64_t j = 0; j < d; ++j)
        total[static_cast<std::size_t>(j)] +=
            layer.self_vec.data()[static_cast<std::size_t>(j)];
      x = dense_ffn(total, layer.mlp);
      for (double& v : x) v = std::max(v, 0.0);
    }
    CHECK(max_abs_diff(row_of(rows, 0), x) < 1e-12);
  }

  SUBCASE("ethanol, two layers") {
    FeaturizedMol mol = featurize_mol(parse_smiles("CCO"));
    Tensor rows = encode_condition_mols({mol}, p);
    std::size_t n = static_cast<std::size_t>(mol.n);
    std::vector<std::vector<double>> x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = table_row_sum(p.atom_tables, mol.atom_codes, i);
    for (const ConditionLayerParams& layer : p.layers) {
      std::vector<std::vector<double>> nx(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> total = x[i];
        for (std::size_t k = 0; k < mol.edge_dst.size(); ++k) {
          if (static_cast<std::size_t>(mol.edge_dst[k]) != i) continue;
          const auto& src = x[static_cast<std::size_t>(mol.edge_src[k])];
          std::vector<double> eb =
              table_row_sum(layer.bond_tables, mol.edge_codes, k);
          for (std::int64_t j = 0; j < d; ++j)
            total[static_cast<std::size_t>(j)] +=
                src[static_cast<std::size_t>(j)] + eb[static_cast<std::size_t>(j)];
        }
        for (std::int64_t j = 0; j < d; ++j)
          total[static_cast<std::size_t>(j)] +=
              layer.self_vec.data()[static_cast<std::size_t>(j)];
        nx[i] = dense_ffn(total, layer.mlp);
        for (double& v : nx[i]) v = std::max(v, 0.0);
      }
      x = nx;
    }
    std::vector<double> pooled(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j)
        pooled[static_cast<std::size_t>(j)] +=
            x[i][static_cast<std::size_t>(j)] / static_cast<double>(n);
    CHECK(max_abs_diff(row_of(rows, 0), pooled) < 1e-12);
  }

  SUBCASE("duplicate molecules give duplicate rows") {
    FeaturizedMol w = featurize_mol(parse_smiles("O"));
    Tensor rows = encode_condition_mols({w, w}, p);
    CHECK(row_of(rows, 0) == row_of(rows, 1));
  }
}

TEST_CASE("encoding is equivariant to input atom order") {
  EncoderConfig cfg;
  cfg.hidden = 16;
  cfg.blocks = 2;
  cfg.heads = 2;
  EncoderParams params = make_encoder(cfg, 17);

  const std::string n1 =
      "[CH3:1][C:2](=[O:3])O.[NH2:5][CH2:6][CH3:7]>>"
      "[CH3:1][C:2](=[O:3])[NH:5][CH2:6][CH3:7]";
  const std::string n2 =
      "[NH2:5][CH2:6][CH3:7].O[C:2](=[O:3])[CH3:1]>>"
      "[CH3:7][CH2:6][NH:5][C:2](=[O:3])[CH3:1]";

  auto encode_by_map = [&](const std::string& text) {
    AlignedReaction rxn = make_aligned_reaction(parse_reaction(text));
    FeaturizedReaction feat = featurize_reaction(rxn);
    ReactionBatch batch = make_batch({&feat});
    EncodeResult res = encode_batch(batch, params, nullptr, {});
    std::map<int, std::vector<double>> by_map;
    for (int i = 0; i < rxn.pair_count; ++i) {
      int map = *rxn.reactant.atoms[static_cast<std::size_t>(i)].map_num;
      std::vector<double> row = row_of(res.reactant, i);
      std::vector<double> prow = row_of(res.product, i);
      row.insert(row.end(), prow.begin(), prow.end());
      by_map[map] = std::move(row);
    }
    // single leaving atom in this reaction: key it below the map range
    REQUIRE(rxn.leaving_count() == 1);
    by_map[0] = row_of(res.reactant, rxn.pair_count);
    return by_map;
  };

  auto a = encode_by_map(n1), b = encode_by_map(n2);
  REQUIRE(a.size() == b.size());
  for (const auto& [map, row] : a) {
    CAPTURE(map);
    CHECK(max_abs_diff(row, b.at(map)) < 1e-9);
  }
}

TEST_CASE("tied side parameters reproduce each other on an identity reaction") {
  EncoderConfig cfg;
  cfg.hidden = 12;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.no_fusion = true;  // pair fusion would mix the sides by design
  EncoderParams params = make_encoder(cfg, 23);

  FeaturizedReaction feat = featurized("[CH3:1][CH2:2][OH:3]>>[CH3:1][CH2:2][OH:3]");
  ReactionBatch batch = make_batch({&feat});

  EncodeResult untied = encode_batch(batch, params, nullptr, {});
  CHECK(untied.reactant.data() != untied.product.data());

  for (EncoderBlockParams& b : params.blocks) {
    b.mpnn_p = b.mpnn_r;
    b.ln_mpnn_p = b.ln_mpnn_r;
    b.side_p = b.side_r;
    b.ln_fuse_p = b.ln_fuse_r;
    if (b.edge_p.l1.w.defined()) b.edge_p = b.edge_r;
  }
  EncodeResult tied = encode_batch(batch, params, nullptr, {});
  CHECK(tied.reactant.data() == tied.product.data());
}

TEST_CASE("zeroed condition attention output recovers the bare forward pass") {
  EncoderConfig cfg;
  cfg.hidden = 12;
  cfg.blocks = 2;
  cfg.heads = 3;
  cfg.with_adapter = true;
  EncoderParams params = make_encoder(cfg, 29);
  ConditionEncoderParams cp = make_condition_encoder(12, 2, 31);

  FeaturizedReaction feat = featurized("[CH3:1][Br:2].[OH2:3]>>[CH3:1][OH:3]");
  ReactionBatch batch = make_batch({&feat});
  std::vector<Tensor> cond{encode_condition_mols(
      {featurize_mol(parse_smiles("[Pd]")), featurize_mol(parse_smiles("CCO"))}, cp)};

  EncodeResult with = encode_batch(batch, params, &cond, {});
  EncodeResult without = encode_batch(batch, params, nullptr, {});
  CHECK(with.reactant.data() != without.reactant.data());

  for (EncoderBlockParams& b : params.blocks) {
    std::fill(b.adapter_r->wo.mutable_data().begin(),
              b.adapter_r->wo.mutable_data().end(), 0.0);
    std::fill(b.adapter_p->wo.mutable_data().begin(),
              b.adapter_p->wo.mutable_data().end(), 0.0);
  }
  EncodeResult zeroed = encode_batch(batch, params, &cond, {});
  CHECK(zeroed.reactant.data() == without.reactant.data());
  CHECK(zeroed.product.data() == without.product.data());
}

TEST_CASE("condition rows can be given in any order") {
  EncoderConfig cfg;
  cfg.hidden = 10;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.with_adapter = true;
  EncoderParams params = make_encoder(cfg, 37);
  ConditionEncoderParams cp = make_condition_encoder(10, 1, 41);

  FeaturizedReaction feat = featurized("[CH3:1][Br:2].[OH2:3]>>[CH3:1][OH:3]");
  ReactionBatch batch = make_batch({&feat});
  FeaturizedMol a = featurize_mol(parse_smiles("O"));
  FeaturizedMol b = featurize_mol(parse_smiles("c1ccncc1"));
  FeaturizedMol c = featurize_mol(parse_smiles("[Pd]"));

  std::vector<Tensor> abc{encode_condition_mols({a, b, c}, cp)};
  std::vector<Tensor> cab{encode_condition_mols({c, a, b}, cp)};
  EncodeResult r1 = encode_batch(batch, params, &abc, {});
  EncodeResult r2 = encode_batch(batch, params, &cab, {});
  CHECK(max_abs_diff(r1.reactant.data(), r2.reactant.data()) < 1e-9);
  CHECK(max_abs_diff(r1.product.data(), r2.product.data()) < 1e-9);
}

TEST_CASE("per-block capture walks to the final features") {
  EncoderConfig cfg;
  cfg.hidden = 8;
  cfg.blocks = 3;
  cfg.heads = 2;
  EncoderParams params = make_encoder(cfg, 43);
  FeaturizedReaction feat = featurized("[CH3:1][CH2:2]Br>>[CH3:1][CH3:2]");
  ReactionBatch batch = make_batch({&feat});

  std::vector<std::pair<Tensor, Tensor>> stages;
  EncodeOptions opts;
  opts.capture_blocks = &stages;
  EncodeResult res = encode_batch(batch, params, nullptr, opts);
  REQUIRE(stages.size() == 3);
  CHECK(stages.back().first.data() == res.reactant.data());
  CHECK(stages.back().second.data() == res.product.data());

  EncoderConfig one = cfg;
  one.blocks = 1;
  EncoderParams psingle = make_encoder(one, 43);
  std::vector<std::pair<Tensor, Tensor>> s1;
  EncodeOptions o1;
  o1.capture_blocks = &s1;
  encode_batch(batch, psingle, nullptr, o1);
  CHECK(s1.size() == 1);
}

TEST_CASE("ablation flags shift parameter counts by the documented amount") {
  const std::int64_t d = 16;
  const int blocks = 3;
  auto count = [&](bool no_fusion) {
    EncoderConfig cfg;
    cfg.hidden = d;
    cfg.blocks = blocks;
    cfg.heads = 2;
    cfg.no_fusion = no_fusion;
    EncoderParams p = make_encoder(cfg, 5);
    nd::ParamMap map;
    register_encoder(p, map, "enc");
    return map.total_size();
  };
  CHECK(count(false) - count(true) == blocks * (6 * d * d + 2 * d));

  Vocabulary vocab;
  vocab.add("O");
  vocab.add("CCO");
  ModelSpec spec;
  spec.task = TaskKind::Condition;
  spec.hidden = d;
  spec.encoder_blocks = 2;
  spec.decoder_layers = 2;
  spec.heads = 2;
  auto seq_count = [&](bool vanilla) {
    ModelSpec s = spec;
    s.vanilla_cross = vanilla;
    SequenceModel m = make_sequence_model(s, vocab, 3);
    return collect_params(m).total_size();
  };
  CHECK(seq_count(true) == seq_count(false));
}
