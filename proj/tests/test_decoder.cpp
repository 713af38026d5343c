#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rxnalign/model.hpp"
#include "support/oracles.hpp"

using namespace rxnalign;
using nd::Tensor;

namespace {

struct Fixture {
  FeaturizedReaction feat;
  ReactionBatch batch;
  EncoderParams enc_params;
  EncodeResult enc;
  RcMemory mem;

  explicit Fixture(const std::string& text, std::int64_t d = 12,
                   std::uint64_t seed = 3) {
    feat = featurize_reaction(make_aligned_reaction(parse_reaction(text)));
    batch = make_batch({&feat});
    EncoderConfig cfg;
    cfg.hidden = d;
    cfg.blocks = 2;
    cfg.heads = 2;
    enc_params = make_encoder(cfg, seed);
    enc = encode_batch(batch, enc_params, nullptr, {});
    mem = reaction_memory(enc, batch, 0);
  }
};

DecoderParams small_decoder(std::int64_t d, int heads, bool vanilla, int vocab,
                            std::uint64_t seed, std::int64_t max_len = 8) {
  DecoderConfig cfg;
  cfg.hidden = d;
  cfg.layers = 2;
  cfg.heads = heads;
  cfg.max_len = max_len;
  cfg.vanilla_cross = vanilla;
  return make_decoder(cfg, vocab, seed);
}

}  // namespace

TEST_CASE("restricted head split point") {
  CHECK(restricted_head_start(8, false) == 4);
  CHECK(restricted_head_start(7, false) == 4);
  CHECK(restricted_head_start(1, false) == 1);
  CHECK(restricted_head_start(8, true) == 8);
}

TEST_CASE("memory stacks reactant then product with the center mask") {
  Fixture f("[CH3:1][CH2:2][Br:3].[OH2:4]>>[CH3:1][CH2:2][OH:4]");
  std::int64_t n = f.feat.n, m = f.feat.m;
  CHECK(f.mem.keys.dim(0) == n + m);
  REQUIRE(f.mem.rc_allow.size() == static_cast<std::size_t>(n + m));
  for (std::int64_t i = 0; i < n; ++i)
    CHECK(f.mem.rc_allow[static_cast<std::size_t>(i)] ==
          f.feat.rc_reactant[static_cast<std::size_t>(i)]);
  for (std::int64_t i = 0; i < m; ++i)
    CHECK(f.mem.rc_allow[static_cast<std::size_t>(n + i)] ==
          f.feat.rc_product[static_cast<std::size_t>(i)]);
}

TEST_CASE("restricted heads place no mass outside the reaction center") {
  Fixture f("[CH3:1][CH2:2][CH2:3][CH2:4][Br:5].[OH2:6]>>"
            "[CH3:1][CH2:2][CH2:3][CH2:4][OH:6]");
  bool has_non_rc = false;
  for (std::uint8_t a : f.mem.rc_allow) has_non_rc |= !a;
  REQUIRE(has_non_rc);

  const int heads = 4;
  DecoderParams dec = small_decoder(12, heads, false, 9, 11);
  AttnCapture capture;
  decode_tokens({Vocabulary::kBos, 4, 5}, f.mem, dec, nullptr, &capture);
  REQUIRE(capture.head_probs.size() == static_cast<std::size_t>(heads));
  int start = restricted_head_start(heads, false);
  for (int h = 0; h < heads; ++h) {
    for (std::int64_t q = 0; q < capture.queries; ++q) {
      double row = 0, off_center = 0;
      for (std::int64_t k = 0; k < capture.keys; ++k) {
        double w = capture.head_probs[static_cast<std::size_t>(h)]
                                     [static_cast<std::size_t>(q * capture.keys + k)];
        row += w;
        if (!f.mem.rc_allow[static_cast<std::size_t>(k)]) off_center += w;
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
      if (h >= start) CHECK(off_center == 0.0);
    }
  }

  // some unrestricted head must actually use a non-center key
  double loose = 0;
  for (int h = 0; h < start; ++h)
    for (std::int64_t q = 0; q < capture.queries; ++q)
      for (std::int64_t k = 0; k < capture.keys; ++k)
        if (!f.mem.rc_allow[static_cast<std::size_t>(k)])
          loose += capture.head_probs[static_cast<std::size_t>(h)]
                                     [static_cast<std::size_t>(q * capture.keys + k)];
  CHECK(loose > 0.0);
}

TEST_CASE("vanilla cross attention lifts the restriction") {
  Fixture f("[CH3:1][CH2:2][CH2:3][CH2:4][Br:5].[OH2:6]>>"
            "[CH3:1][CH2:2][CH2:3][CH2:4][OH:6]");
  DecoderParams dec = small_decoder(12, 4, true, 9, 11);
  AttnCapture capture;
  decode_tokens({Vocabulary::kBos, 4}, f.mem, dec, nullptr, &capture);
  double off_center = 0;
  for (const auto& head : capture.head_probs)
    for (std::int64_t q = 0; q < capture.queries; ++q)
      for (std::int64_t k = 0; k < capture.keys; ++k)
        if (!f.mem.rc_allow[static_cast<std::size_t>(k)])
          off_center += head[static_cast<std::size_t>(q * capture.keys + k)];
  CHECK(off_center > 0.0);
}

TEST_CASE("an empty center falls back to full attention and counts it") {
  Fixture f("[CH3:1][OH:2]>>[CH3:1][OH:2]");  // identity: no center at all
  for (std::uint8_t a : f.mem.rc_allow) CHECK(a == 0);

  DecoderParams dec = small_decoder(12, 4, false, 9, 13);
  reset_attention_fallback_count();
  AttnCapture capture;
  decode_tokens({Vocabulary::kBos, 4}, f.mem, dec, nullptr, &capture);
  CHECK(attention_fallback_count() > 0);
  for (const auto& head : capture.head_probs)
    for (std::int64_t q = 0; q < capture.queries; ++q) {
      double row = 0;
      for (std::int64_t k = 0; k < capture.keys; ++k)
        row += head[static_cast<std::size_t>(q * capture.keys + k)];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("teacher forcing is causal") {
  Fixture f("[CH3:1][Br:2].[OH2:3]>>[CH3:1][OH:3]");
  DecoderParams dec = small_decoder(12, 2, false, 9, 17);
  std::vector<int> full{Vocabulary::kBos, 4, 6, 5};
  Tensor logits = decode_tokens(full, f.mem, dec);
  for (std::size_t cut = 1; cut <= full.size(); ++cut) {
    std::vector<int> prefix(full.begin(), full.begin() + cut);
    Tensor part = decode_tokens(prefix, f.mem, dec);
    for (std::size_t row = 0; row < cut; ++row)
      for (std::int64_t j = 0; j < part.dim(1); ++j) {
        double a = part.data()[row * static_cast<std::size_t>(part.dim(1)) +
                               static_cast<std::size_t>(j)];
        double b = logits.data()[row * static_cast<std::size_t>(part.dim(1)) +
                                 static_cast<std::size_t>(j)];
        CHECK(std::abs(a - b) < 1e-9);
      }
  }
}

TEST_CASE("beam of width one is greedy decoding") {
  Fixture f("[CH3:1][Br:2].[OH2:3]>>[CH3:1][OH:3]");
  DecoderParams dec = small_decoder(12, 2, false, 7, 19, 6);
  BeamOptions opts;
  opts.width = 1;
  opts.results = 1;
  auto hyps = beam_search(f.mem, dec, opts);
  REQUIRE(hyps.size() == 1);

  std::vector<int> greedy;
  for (int step = 0; step < 5; ++step) {
    std::vector<int> inputs{Vocabulary::kBos};
    inputs.insert(inputs.end(), greedy.begin(), greedy.end());
    Tensor logits = decode_tokens(inputs, f.mem, dec);
    std::int64_t v = logits.dim(1);
    const double* row = logits.data().data() + (inputs.size() - 1) * v;
    int best = 0;
    for (std::int64_t j = 1; j < v; ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    greedy.push_back(best);
    if (best == Vocabulary::kEos) break;
  }
  CHECK(hyps[0].tokens == greedy);
}

TEST_CASE("beam equals exhaustive enumeration on a toy vocabulary") {
  Fixture f("[CH3:1][Br:2].[OH2:3]>>[CH3:1][OH:3]");
  const int vocab = 5;
  const std::int64_t max_len = 3;
  DecoderParams dec = small_decoder(12, 2, false, vocab, 23, max_len + 1);

  auto oracle_rank = oracle::all_sequences(f.mem, dec, vocab, max_len);
  BeamOptions opts;
  opts.width = 4096;
  opts.results = static_cast<int>(oracle_rank.size());
  opts.max_len = max_len;
  auto hyps = beam_search(f.mem, dec, opts);

  REQUIRE(hyps.size() == oracle_rank.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    CAPTURE(i);
    CHECK(hyps[i].tokens == oracle_rank[i].tokens);
    CHECK(hyps[i].finished == oracle_rank[i].finished);
    CHECK(std::abs(hyps[i].score - oracle_rank[i].score) < 1e-9);
  }
}

TEST_CASE("beam hypotheses arrive ranked with consistent flags") {
  Fixture f("[CH3:1][CH2:2]Br>>[CH3:1][CH3:2]");
  DecoderParams dec = small_decoder(12, 2, false, 9, 29, 6);
  BeamOptions opts;
  opts.width = 6;
  opts.results = 6;
  auto hyps = beam_search(f.mem, dec, opts);
  REQUIRE(!hyps.empty());
  for (std::size_t i = 0; i + 1 < hyps.size(); ++i)
    CHECK(hyps[i].score >= hyps[i + 1].score);
  for (const BeamHyp& h : hyps) {
    CHECK(h.finished == (h.tokens.back() == Vocabulary::kEos));
    CHECK(h.score ==
          doctest::Approx(h.sum_logp / static_cast<double>(h.tokens.size())));
  }
}

TEST_CASE("pooled head emits one value and honors the restriction") {
  Fixture f("[CH3:1][CH2:2][CH2:3][Br:4].[OH2:5]>>[CH3:1][CH2:2][CH2:3][OH:5]");
  PooledHeadParams head = make_pooled_head(12, 4, false, 31);
  AttnCapture capture;
  Tensor y = pooled_scalar(f.mem, head, nullptr, &capture);
  CHECK(y.dim(0) == 1);
  CHECK(y.dim(1) == 1);
  int start = restricted_head_start(4, false);
  REQUIRE(capture.head_probs.size() == 4);
  for (int h = start; h < 4; ++h)
    for (std::int64_t k = 0; k < capture.keys; ++k)
      if (!f.mem.rc_allow[static_cast<std::size_t>(k)])
        CHECK(capture.head_probs[static_cast<std::size_t>(h)]
                                [static_cast<std::size_t>(k)] == 0.0);

  PooledHeadParams vanilla = make_pooled_head(12, 4, true, 31);
  Tensor y2 = pooled_scalar(f.mem, vanilla, nullptr, nullptr);
  CHECK(y2.dim(0) == 1);
}
