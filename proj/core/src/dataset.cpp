#include "rxnalign/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "rxnalign/rng.hpp"
#include "rxnalign/vocab.hpp"

namespace rxnalign {
namespace {

std::string row_id(const CsvTable& table, int id_col, std::size_t r) {
  if (id_col >= 0 && !table.rows[r][std::size_t(id_col)].empty())
    return table.rows[r][std::size_t(id_col)];
  return std::to_string(r + 1);
}

// Product-side map numbers decide which reactant-segment molecules actually
// react; the rest join the reagent set.
void split_by_contribution(const ReactionParts& parts,
                           std::vector<MolGraph>& contributing,
                           std::vector<MolGraph>& bystanders) {
  std::set<int> product_maps;
  for (const auto& mol : parts.products)
    for (const auto& atom : mol.atoms)
      if (atom.map_num) product_maps.insert(*atom.map_num);
  for (const auto& mol : parts.reactants) {
    bool hit = false;
    for (const auto& atom : mol.atoms)
      if (atom.map_num && product_maps.count(*atom.map_num)) {
        hit = true;
        break;
      }
    (hit ? contributing : bystanders).push_back(mol);
  }
}

}  // namespace

IngestResult ingest_table(const CsvTable& table, const IngestOptions& opts) {
  const int id_col = table.col("id");
  const auto need = [&](const std::string& name) {
    const int c = table.col(name);
    if (c < 0) throw DatasetError("missing column: " + name);
    return c;
  };
  const int rxn_col = need("reaction");
  std::array<int, kConditionSlots> slot_cols{};
  int target_col = -1, cond_col = -1;
  if (opts.schema == SchemaKind::Condition)
    for (int s = 0; s < kConditionSlots; ++s)
      slot_cols[std::size_t(s)] = need(kSlotColumns[std::size_t(s)]);
  if (opts.schema == SchemaKind::Regression) {
    target_col = need(opts.target_column);
    cond_col = table.col("conditions");
  }

  IngestResult out;
  // Slot values repeat heavily; canonicalize each distinct string once.
  std::map<std::string, std::string> slot_cache;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    DatasetRow row;
    row.id = row_id(table, id_col, r);
    row.reaction_text = cells[std::size_t(rxn_col)];

    auto reject = [&](const std::string& category, const std::string& detail) {
      out.quarantined.push_back({r + 1, category, detail});
    };

    ReactionParts parts;
    try {
      parts = parse_reaction(row.reaction_text);
    } catch (const ParseError& e) {
      reject("smiles", e.what());
      continue;
    }

    try {
      switch (opts.schema) {
        case SchemaKind::Condition: {
          // The molecules themselves are the prediction target; any middle
          // segment in the input is dropped rather than leaked to the model.
          parts.reagents.clear();
          auto rxn = std::make_shared<AlignedReaction>(make_aligned_reaction(parts));
          row.rxn = std::move(rxn);
          break;
        }
        case SchemaKind::Generation: {
          std::vector<MolGraph> contributing, bystanders;
          split_by_contribution(parts, contributing, bystanders);
          for (auto& mol : parts.reagents) bystanders.push_back(std::move(mol));
          if (contributing.empty()) {
            reject("align", "no reactant shares an atom map with the product");
            continue;
          }
          ReactionParts core;
          core.reactants = std::move(contributing);
          core.products = parts.products;
          auto rxn = std::make_shared<AlignedReaction>(make_aligned_reaction(core));
          row.rxn = std::move(rxn);
          for (const auto& mol : order_reagents(std::move(bystanders)))
            row.reagent_target.push_back(canonical_form(mol));
          break;
        }
        case SchemaKind::Regression: {
          auto rxn = std::make_shared<AlignedReaction>(make_aligned_reaction(parts));
          row.rxn = std::move(rxn);
          break;
        }
      }
    } catch (const AlignError& e) {
      reject("align", e.what());
      continue;
    } catch (const ParseError& e) {
      reject("smiles", e.what());
      continue;
    }

    if (opts.schema == SchemaKind::Condition) {
      bool ok = true;
      for (int s = 0; s < kConditionSlots && ok; ++s) {
        const std::string& raw = cells[std::size_t(slot_cols[std::size_t(s)])];
        if (raw.empty()) continue;
        auto it = slot_cache.find(raw);
        if (it == slot_cache.end()) {
          try {
            it = slot_cache.emplace(raw, canonical_form(parse_smiles(raw))).first;
          } catch (const ParseError& e) {
            reject("slot", std::string(kSlotColumns[std::size_t(s)]) + ": " + e.what());
            ok = false;
            break;
          }
        }
        row.slots[std::size_t(s)] = it->second;
      }
      if (!ok) continue;
    }

    if (opts.schema == SchemaKind::Regression) {
      if (cond_col >= 0 && !cells[std::size_t(cond_col)].empty()) {
        try {
          auto extra = std::make_shared<AlignedReaction>(*row.rxn);
          for (const auto& mol :
               split_fragments(parse_smiles(cells[std::size_t(cond_col)])))
            extra->condition_mols.push_back(mol);
          row.rxn = std::move(extra);
        } catch (const ParseError& e) {
          reject("smiles", std::string("conditions: ") + e.what());
          continue;
        }
      }
      const std::string& raw = cells[std::size_t(target_col)];
      try {
        std::size_t used = 0;
        row.target = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        reject("target", "not a number: " + raw);
        continue;
      }
      if (opts.ratio_to_energy) {
        if (!(row.target > 0)) {
          reject("target", "ratio must be positive: " + raw);
          continue;
        }
        row.target = ratio_to_ddg(row.target, opts.temperature_k);
      }
    }

    out.rows.push_back(std::move(row));
  }
  return out;
}

IngestResult ingest_csv(const std::string& path, const IngestOptions& opts) {
  return ingest_table(read_csv(path), opts);
}

std::array<std::string, kConditionSlots> condition_target_symbols(
    const DatasetRow& row) {
  std::array<std::string, kConditionSlots> out;
  for (int s = 0; s < kConditionSlots; ++s)
    out[std::size_t(s)] =
        row.slots[std::size_t(s)].empty() ? kNoneToken : row.slots[std::size_t(s)];
  return out;
}

std::string generation_target_text(const DatasetRow& row) {
  std::string out;
  for (std::size_t i = 0; i < row.reagent_target.size(); ++i) {
    if (i) out += '.';
    out += row.reagent_target[i];
  }
  return out;
}

void assign_splits(std::vector<DatasetRow>& rows, const SplitSpec& spec) {
  if (spec.train < 0 || spec.val < 0 || spec.train + spec.val > 1.0)
    throw DatasetError("split fractions must be nonnegative and sum to at most 1");
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  nd::Pcg rng(nd::mix_keys(spec.seed, 0x5354u));
  rng.shuffle(order);
  const auto n = rows.size();
  const auto n_train = std::size_t(double(n) * spec.train);
  const auto n_val = std::size_t(double(n) * spec.val);
  for (std::size_t i = 0; i < n; ++i) {
    const char* tag = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    rows[order[i]].split = tag;
  }
}

void write_split_file(const std::string& path,
                      const std::vector<DatasetRow>& rows) {
  CsvTable table;
  table.header = {"id", "split"};
  for (const auto& row : rows) table.rows.push_back({row.id, row.split});
  write_csv(path, table);
}

void apply_split_file(std::vector<DatasetRow>& rows, const std::string& path) {
  const CsvTable table = read_csv(path);
  const int id_col = table.col_or_throw("id");
  const int split_col = table.col_or_throw("split");
  std::map<std::string, std::string> by_id;
  for (const auto& cells : table.rows)
    by_id[cells[std::size_t(id_col)]] = cells[std::size_t(split_col)];
  for (auto& row : rows) {
    auto it = by_id.find(row.id);
    if (it == by_id.end())
      throw DatasetError("row id missing from split file: " + row.id);
    if (it->second != "train" && it->second != "val" && it->second != "test")
      throw DatasetError("unknown split tag for id " + row.id + ": " + it->second);
    row.split = it->second;
  }
}

void write_quarantine_file(const std::string& path,
                           const std::vector<QuarantineRecord>& records) {
  CsvTable table;
  table.header = {"row", "category", "detail"};
  for (const auto& rec : records)
    table.rows.push_back({std::to_string(rec.row), rec.category, rec.detail});
  write_csv(path, table);
}

}  // namespace rxnalign
