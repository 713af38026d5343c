#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rxnalign/vocab.hpp"

namespace rxnalign::oracle {
namespace {

using BondSet = std::set<std::tuple<int, int, int>>;

BondSet bond_set(const MolGraph& g) {
  BondSet out;
  for (const Bond& b : g.bonds)
    out.insert({std::min(b.a, b.b), std::max(b.a, b.b),
                static_cast<int>(b.order)});
  return out;
}

}  // namespace

std::vector<int> reaction_centers(const AlignedReaction& rxn) {
  int n = rxn.reactant.num_atoms();
  int m = rxn.pair_count;

  BondSet rb = bond_set(rxn.reactant), pb = bond_set(rxn.product);
  std::set<int> seed;
  for (const auto& t : rb)
    if (!pb.count(t)) {
      seed.insert(std::get<0>(t));
      seed.insert(std::get<1>(t));
    }
  for (const auto& t : pb)
    if (!rb.count(t)) {
      seed.insert(std::get<0>(t));
      seed.insert(std::get<1>(t));
    }
  for (int i = 0; i < m; ++i)
    if (rxn.reactant.total_h[static_cast<std::size_t>(i)] !=
        rxn.product.total_h[static_cast<std::size_t>(i)])
      seed.insert(i);

  // Merged neighbor map over both sides; product indices are already the
  // shared pair indices.
  std::map<int, std::set<int>> nbr;
  for (const Bond& b : rxn.reactant.bonds) {
    nbr[b.a].insert(b.b);
    nbr[b.b].insert(b.a);
  }
  for (const Bond& b : rxn.product.bonds) {
    nbr[b.a].insert(b.b);
    nbr[b.b].insert(b.a);
  }

  std::set<int> rc = seed;
  for (int s : seed)
    for (int v : nbr[s]) rc.insert(v);
  for (int i = m; i < n; ++i) rc.insert(i);
  return {rc.begin(), rc.end()};
}

namespace {

using Slots = ConditionCombo;

std::vector<Slots> role_orderings(const Slots& c) {
  std::vector<Slots> out{c};
  Slots s = c;
  std::swap(s[1], s[2]);
  out.push_back(s);
  s = c;
  std::swap(s[3], s[4]);
  out.push_back(s);
  std::swap(s[1], s[2]);
  out.push_back(s);
  return out;
}

bool any_ordering_match(const Slots& a, const Slots& b, int lo, int hi) {
  for (const Slots& x : role_orderings(a))
    for (const Slots& y : role_orderings(b)) {
      bool same = true;
      for (int i = lo; i <= hi; ++i)
        if (x[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(i)])
          same = false;
      if (same) return true;
    }
  return false;
}

}  // namespace

TopkRates topk_by_enumeration(const std::vector<std::vector<ConditionCombo>>& ranked,
                              const std::vector<std::vector<ConditionCombo>>& refs,
                              int k) {
  TopkRates rates;
  if (ranked.empty()) return rates;
  std::size_t n = ranked.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool all = false, cat = false, sol = false, rea = false;
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k),
                                             ranked[i].size());
    for (std::size_t g = 0; g < take; ++g)
      for (const ConditionCombo& ref : refs[i]) {
        if (any_ordering_match(ranked[i][g], ref, 0, 4)) all = true;
        if (any_ordering_match(ranked[i][g], ref, 0, 0)) cat = true;
        if (any_ordering_match(ranked[i][g], ref, 1, 2)) sol = true;
        if (any_ordering_match(ranked[i][g], ref, 3, 4)) rea = true;
      }
    rates.overall += all;
    rates.catalyst += cat;
    rates.solvent += sol;
    rates.reagent += rea;
  }
  rates.overall /= static_cast<double>(n);
  rates.catalyst /= static_cast<double>(n);
  rates.solvent /= static_cast<double>(n);
  rates.reagent /= static_cast<double>(n);
  return rates;
}

namespace {

std::vector<double> next_logp(const std::vector<int>& prefix, const RcMemory& mem,
                              const DecoderParams& p) {
  std::vector<int> inputs{Vocabulary::kBos};
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  Tensor logits = decode_tokens(inputs, mem, p);
  std::int64_t t = logits.dim(0), v = logits.dim(1);
  const double* row = logits.data().data() + (t - 1) * v;
  double mx = -HUGE_VAL;
  for (std::int64_t j = 0; j < v; ++j) mx = std::max(mx, row[j]);
  double z = 0;
  for (std::int64_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
  std::vector<double> out(static_cast<std::size_t>(v));
  for (std::int64_t j = 0; j < v; ++j)
    out[static_cast<std::size_t>(j)] = row[j] - mx - std::log(z);
  return out;
}

void extend(std::vector<int>& prefix, double sum_logp, const RcMemory& mem,
            const DecoderParams& p, int vocab_size, std::int64_t max_len,
            std::vector<ScoredSeq>& out) {
  if (static_cast<std::int64_t>(prefix.size()) == max_len) {
    out.push_back({prefix, sum_logp,
                   sum_logp / static_cast<double>(prefix.size()), false});
    return;
  }
  std::vector<double> logp = next_logp(prefix, mem, p);
  for (int tok = 0; tok < vocab_size; ++tok) {
    prefix.push_back(tok);
    double s = sum_logp + logp[static_cast<std::size_t>(tok)];
    if (tok == Vocabulary::kEos)
      out.push_back({prefix, s, s / static_cast<double>(prefix.size()), true});
    else
      extend(prefix, s, mem, p, vocab_size, max_len, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<ScoredSeq> all_sequences(const RcMemory& mem, const DecoderParams& p,
                                     int vocab_size, std::int64_t max_len) {
  std::vector<ScoredSeq> out;
  std::vector<int> prefix;
  extend(prefix, 0.0, mem, p, vocab_size, max_len, out);
  std::sort(out.begin(), out.end(), [](const ScoredSeq& a, const ScoredSeq& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });
  return out;
}

namespace {

struct AtomSig {
  int element, charge, h;
  bool aromatic;
  int isotope;
  bool operator==(const AtomSig& o) const {
    return element == o.element && charge == o.charge && h == o.h &&
           aromatic == o.aromatic && isotope == o.isotope;
  }
};

AtomSig sig(const MolGraph& g, int i) {
  const Atom& a = g.atoms[static_cast<std::size_t>(i)];
  return {a.element, a.formal_charge, g.total_h[static_cast<std::size_t>(i)],
          a.aromatic, a.isotope ? *a.isotope : 0};
}

bool extend_mapping(const MolGraph& a, const MolGraph& b,
                    const std::vector<std::vector<std::pair<int, int>>>& aa,
                    const std::vector<std::vector<std::pair<int, int>>>& ab,
                    std::vector<int>& m2, std::vector<char>& used, int i) {
  int n = a.num_atoms();
  if (i == n) return true;
  for (int j = 0; j < n; ++j) {
    if (used[static_cast<std::size_t>(j)]) continue;
    if (!(sig(a, i) == sig(b, j))) continue;
    if (aa[static_cast<std::size_t>(i)].size() !=
        ab[static_cast<std::size_t>(j)].size())
      continue;
    bool ok = true;
    for (auto [v, bi] : aa[static_cast<std::size_t>(i)]) {
      if (v >= i) continue;  // partner not yet assigned
      int jv = m2[static_cast<std::size_t>(v)];
      bool found = false;
      for (auto [w, bj] : ab[static_cast<std::size_t>(j)])
        if (w == jv &&
            b.bonds[static_cast<std::size_t>(bj)].order ==
                a.bonds[static_cast<std::size_t>(bi)].order)
          found = true;
      if (!found) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    m2[static_cast<std::size_t>(i)] = j;
    used[static_cast<std::size_t>(j)] = 1;
    if (extend_mapping(a, b, aa, ab, m2, used, i + 1)) return true;
    used[static_cast<std::size_t>(j)] = 0;
  }
  return false;
}

}  // namespace

bool isomorphic(const MolGraph& a, const MolGraph& b) {
  if (a.num_atoms() != b.num_atoms() || a.bonds.size() != b.bonds.size())
    return false;
  auto aa = build_adjacency(a), ab = build_adjacency(b);
  std::vector<int> m2(static_cast<std::size_t>(a.num_atoms()), -1);
  std::vector<char> used(static_cast<std::size_t>(a.num_atoms()), 0);
  return extend_mapping(a, b, aa, ab, m2, used, 0);
}

}  // namespace rxnalign::oracle
