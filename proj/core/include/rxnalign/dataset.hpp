#pragma once

// CSV ingestion into aligned-reaction rows for the three task schemas, with
// per-row quarantine instead of hard failure, plus deterministic splits.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rxnalign/csv.hpp"
#include "rxnalign/rxncore.hpp"

namespace rxnalign {

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(std::string message)
      : std::runtime_error(std::move(message)) {}
};

enum class SchemaKind { Condition, Generation, Regression };

inline constexpr int kConditionSlots = 5;
inline constexpr std::array<const char*, kConditionSlots> kSlotColumns{
    "catalyst", "solvent1", "solvent2", "reagent1", "reagent2"};

struct IngestOptions {
  SchemaKind schema = SchemaKind::Condition;
  std::string target_column = "target";  // regression
  // Interpret the regression target as a product ratio and store the
  // equivalent free-energy difference in kcal/mol.
  bool ratio_to_energy = false;
  double temperature_k = kRoomTempK;
};

struct DatasetRow {
  std::string id;
  std::string reaction_text;
  std::shared_ptr<const AlignedReaction> rxn;
  // Condition schema: canonical SMILES per slot, empty when absent.
  std::array<std::string, kConditionSlots> slots;
  // Generation schema: canonical SMILES of the reagent set, role-ordered.
  std::vector<std::string> reagent_target;
  double target = 0;  // regression
  std::string split;
};

struct QuarantineRecord {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string category;  // smiles | align | slot | target
  std::string detail;
};

struct IngestResult {
  std::vector<DatasetRow> rows;
  std::vector<QuarantineRecord> quarantined;
};

// Throws DatasetError on structural problems (missing columns); records
// per-row problems in `quarantined` and keeps going.
IngestResult ingest_table(const CsvTable& table, const IngestOptions& opts);
IngestResult ingest_csv(const std::string& path, const IngestOptions& opts);

// Slot strings with "<none>" standing in for empty slots.
std::array<std::string, kConditionSlots> condition_target_symbols(
    const DatasetRow& row);
// Dot-joined reagent set, empty when the row has none.
std::string generation_target_text(const DatasetRow& row);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;  // test takes the remainder
  std::uint64_t seed = 0;
};

// Shuffles row order with the seed and tags rows train/val/test in place.
void assign_splits(std::vector<DatasetRow>& rows, const SplitSpec& spec);

void write_split_file(const std::string& path,
                      const std::vector<DatasetRow>& rows);
// Restores split tags by row id; every row must appear in the file.
void apply_split_file(std::vector<DatasetRow>& rows, const std::string& path);

void write_quarantine_file(const std::string& path,
                           const std::vector<QuarantineRecord>& records);

}  // namespace rxnalign
