#include "rxnalign/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rxnalign/decoder.hpp"

namespace rxnalign {
namespace {

std::vector<double> head_mean(const AttnCapture& cap, int from, int to) {
  std::vector<double> out;
  if (from >= to) return out;
  out.assign(std::size_t(cap.keys), 0.0);
  for (int h = from; h < to; ++h)
    for (std::int64_t k = 0; k < cap.keys; ++k)
      out[std::size_t(k)] += cap.head_probs[std::size_t(h)][std::size_t(k)];
  for (double& v : out) v /= double(to - from);
  return out;
}

// Deterministic force-directed layout on the unit square.
std::vector<std::pair<double, double>> layout_graph(const MolGraph& mol) {
  const int n = mol.num_atoms();
  std::vector<std::pair<double, double>> pos(static_cast<std::size_t>(n));
  if (n == 0) return pos;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * double(i) / double(n);
    pos[std::size_t(i)] = {std::cos(a), std::sin(a)};
  }
  if (n == 1) return pos;

  const double ideal = std::sqrt(4.0 / double(n));
  double temp = 0.25;
  for (int iter = 0; iter < 250; ++iter) {
    std::vector<std::pair<double, double>> disp(std::size_t(n), {0, 0});
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double dx = pos[std::size_t(i)].first - pos[std::size_t(j)].first;
        double dy = pos[std::size_t(i)].second - pos[std::size_t(j)].second;
        double d2 = dx * dx + dy * dy;
        if (d2 < 1e-9) {
          dx = 1e-3 * double(i - j);
          dy = 1e-3;
          d2 = dx * dx + dy * dy;
        }
        const double f = ideal * ideal / d2;
        disp[std::size_t(i)].first += dx * f;
        disp[std::size_t(i)].second += dy * f;
        disp[std::size_t(j)].first -= dx * f;
        disp[std::size_t(j)].second -= dy * f;
      }
    for (const auto& bond : mol.bonds) {
      const double dx = pos[std::size_t(bond.a)].first - pos[std::size_t(bond.b)].first;
      const double dy = pos[std::size_t(bond.a)].second - pos[std::size_t(bond.b)].second;
      const double d = std::max(1e-6, std::sqrt(dx * dx + dy * dy));
      const double f = d / ideal;
      disp[std::size_t(bond.a)].first -= dx / d * f;
      disp[std::size_t(bond.a)].second -= dy / d * f;
      disp[std::size_t(bond.b)].first += dx / d * f;
      disp[std::size_t(bond.b)].second += dy / d * f;
    }
    for (int i = 0; i < n; ++i) {
      const double d = std::max(
          1e-9, std::sqrt(disp[std::size_t(i)].first * disp[std::size_t(i)].first +
                          disp[std::size_t(i)].second * disp[std::size_t(i)].second));
      const double s = std::min(d, temp) / d;
      pos[std::size_t(i)].first += disp[std::size_t(i)].first * s;
      pos[std::size_t(i)].second += disp[std::size_t(i)].second * s;
    }
    temp *= 0.985;
  }

  double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
  for (const auto& [x, y] : pos) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-6});
  for (auto& [x, y] : pos) {
    x = (x - min_x) / span;
    y = (y - min_y) / span;
  }
  return pos;
}

std::string heat_color(double w) {
  // white -> warm red
  const double t = std::clamp(w, 0.0, 1.0);
  const int r = 255;
  const int g = int(std::lround(255.0 * (1.0 - 0.75 * t)));
  const int b = int(std::lround(255.0 * (1.0 - 0.95 * t)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

void draw_panel(std::ostream& out, const MolGraph& mol,
                const std::vector<double>& weights, double weight_cap,
                const std::vector<std::uint8_t>& centers, double x0, double y0,
                double size, const std::string& title) {
  const auto pos = layout_graph(mol);
  const double pad = 28;
  auto px = [&](int i) { return x0 + pad + pos[std::size_t(i)].first * (size - 2 * pad); };
  auto py = [&](int i) { return y0 + pad + pos[std::size_t(i)].second * (size - 2 * pad); };

  out << "<text x=\"" << x0 + size / 2 << "\" y=\"" << y0 + 16
      << "\" text-anchor=\"middle\" font-size=\"13\" fill=\"#333\">" << title
      << "</text>\n";
  for (const auto& bond : mol.bonds) {
    const double w = bond.order == BondOrder::Single ? 1.2 : 2.4;
    out << "<line x1=\"" << px(bond.a) << "\" y1=\"" << py(bond.a) << "\" x2=\""
        << px(bond.b) << "\" y2=\"" << py(bond.b)
        << "\" stroke=\"#777\" stroke-width=\"" << w << "\"/>\n";
  }
  for (int i = 0; i < mol.num_atoms(); ++i) {
    const double raw = i < int(weights.size()) ? weights[std::size_t(i)] : 0.0;
    const double w = weight_cap > 0 ? raw / weight_cap : 0.0;
    const bool center = i < int(centers.size()) && centers[std::size_t(i)];
    out << "<circle cx=\"" << px(i) << "\" cy=\"" << py(i)
        << "\" r=\"11\" fill=\"" << heat_color(w) << "\" stroke=\""
        << (center ? "#c23" : "#555") << "\" stroke-width=\""
        << (center ? 2.5 : 1.0) << "\"/>\n";
    out << "<text x=\"" << px(i) << "\" y=\"" << py(i) + 4
        << "\" text-anchor=\"middle\" font-size=\"10\" fill=\"#111\">"
        << element_symbol(mol.atoms[std::size_t(i)].element) << "</text>\n";
  }
}

}  // namespace

ExplainResult explain_reaction(const ModelBundle& bundle,
                               const FeaturizedReaction& feat) {
  const ReactionBatch batch = make_batch({&feat});
  ExplainResult res;
  res.reactant_atoms = feat.n;
  res.product_atoms = feat.m;
  res.rc_reactant = feat.rc_reactant;
  res.rc_product = feat.rc_product;

  AttnCapture cap;
  int heads = 0;
  bool vanilla = false;
  if (bundle.seq) {
    const auto& m = *bundle.seq;
    const EncodeResult enc = encode_batch(batch, m.encoder, nullptr);
    const RcMemory mem = reaction_memory(enc, batch, 0);
    decode_tokens({Vocabulary::kBos}, mem, m.decoder, nullptr, &cap);
    heads = m.decoder.cfg.heads;
    vanilla = m.decoder.cfg.vanilla_cross;
  } else {
    const auto& m = *bundle.reg;
    const auto cond = condition_matrices(m.conditions, batch);
    const EncodeResult enc = encode_batch(batch, m.encoder, &cond);
    const RcMemory mem = reaction_memory(enc, batch, 0);
    pooled_scalar(mem, m.head, nullptr, &cap);
    heads = m.head.attn.heads;
    vanilla = m.head.vanilla_cross;
  }

  const int split = restricted_head_start(heads, vanilla);
  res.broad = head_mean(cap, 0, split);
  res.focused = head_mean(cap, split, heads);
  return res;
}

void write_explain_csv(const std::string& path, const AlignedReaction& rxn,
                       const ExplainResult& res) {
  CsvTable table;
  table.header = {"side", "atom", "element", "map", "center", "broad", "focused"};
  auto emit = [&](const char* side, const MolGraph& mol, int offset,
                  const std::vector<std::uint8_t>& centers) {
    for (int i = 0; i < mol.num_atoms(); ++i) {
      const std::size_t key = std::size_t(offset + i);
      const auto& atom = mol.atoms[std::size_t(i)];
      table.rows.push_back(
          {side, std::to_string(i), element_symbol(atom.element),
           atom.map_num ? std::to_string(*atom.map_num) : "",
           (i < int(centers.size()) && centers[std::size_t(i)]) ? "1" : "0",
           key < res.broad.size() ? std::to_string(res.broad[key]) : "0",
           key < res.focused.size() ? std::to_string(res.focused[key]) : "0"});
    }
  };
  emit("reactant", rxn.reactant, 0, res.rc_reactant);
  emit("product", rxn.product, res.reactant_atoms, res.rc_product);
  write_csv(path, table);
}

void write_explain_svg(const std::string& path, const AlignedReaction& rxn,
                       const ExplainResult& res, bool focused) {
  const std::vector<double>& w =
      (focused && !res.focused.empty()) ? res.focused : res.broad;
  std::vector<double> wr(w.begin(),
                         w.begin() + std::min<std::size_t>(w.size(),
                                                           std::size_t(res.reactant_atoms)));
  std::vector<double> wp;
  for (std::size_t k = std::size_t(res.reactant_atoms); k < w.size(); ++k)
    wp.push_back(w[k]);
  double cap = 0;
  for (double v : w) cap = std::max(cap, v);

  const double panel = 360;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open svg for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * panel
      << "\" height=\"" << panel << "\" viewBox=\"0 0 " << 2 * panel << " "
      << panel << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  draw_panel(out, rxn.reactant, wr, cap, res.rc_reactant, 0, 0, panel,
             "reactant");
  draw_panel(out, rxn.product, wp, cap, res.rc_product, panel, 0, panel,
             "product");
  out << "</svg>\n";
}

}  // namespace rxnalign
