#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "rxnalign/csv.hpp"
#include "support/synthetic.hpp"

// Shells out to the installed command line binary and checks each subcommand
// end to end on a small generated table.

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "rxnalign_cli_check";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(RXNALIGN_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult res;
  res.code = (raw >= 0 && WIFEXITED(raw)) ? WEXITSTATUS(raw) : raw;
  res.out = slurp(out);
  res.err = slurp(err);
  return res;
}

const fs::path& data_csv() {
  static fs::path p = [] {
    fs::path path = work_dir() / "conditions.csv";
    rxnalign::write_csv(path.string(), synth::condition_table(48, 31));
    return path;
  }();
  return p;
}

const fs::path& model_path() {
  static fs::path p = [] {
    const fs::path cfg = work_dir() / "train.cfg";
    const fs::path ckpt = work_dir() / "model.ckpt";
    std::ofstream f(cfg);
    f << "# tiny fit for the command round trip\n"
      << "task = condition\n"
      << "in = " << data_csv().string() << "\n"
      << "hidden = 16\n"
      << "heads = 2\n"
      << "blocks = 1\n"
      << "layers = 1\n"
      << "condition-layers = 1\n"
      << "epochs = 2\n"
      << "batch = 16\n"
      << "lr = 1e-3\n"
      << "out = " << ckpt.string() << "\n";
    f.close();
    RunResult res = run_cli("train --config " + cfg.string());
    REQUIRE(res.code == 0);
    REQUIRE(fs::exists(ckpt));
    // one progress line per epoch, so the config epochs value was honored
    std::size_t lines = 0, pos = 0;
    while ((pos = res.out.find("epoch ", pos)) != std::string::npos) {
      ++lines;
      pos += 6;
    }
    REQUIRE(lines == 2);
    return ckpt;
  }();
  return p;
}

const char* kProbeReaction =
    "[CH3:1][CH2:2][Br:3].[OH2:4]>>[CH3:1][CH2:2][OH:4]";

}  // namespace

TEST_CASE("preprocess writes splits, quarantine and the canonical table") {
  fs::path out_dir = work_dir() / "pre";
  RunResult res = run_cli("preprocess --task condition --in " +
                          data_csv().string() + " --out " + out_dir.string());
  CHECK(res.code == 0);
  json report = json::parse(res.out);
  CHECK(report["rows"] == 48);
  CHECK(report["quarantined"] == 0);
  CHECK(int(report["train"]) + int(report["val"]) + int(report["test"]) == 48);
  CHECK(fs::exists(out_dir / "splits.csv"));
  CHECK(fs::exists(out_dir / "quarantine.csv"));
  CHECK(fs::exists(out_dir / "processed.csv"));
  rxnalign::CsvTable processed =
      rxnalign::read_csv((out_dir / "processed.csv").string());
  CHECK(processed.rows.size() == 48);
  CHECK(processed.col("catalyst") >= 0);
}

TEST_CASE("train honors the config file and evaluate reports metrics") {
  fs::path report_path = work_dir() / "report.json";
  RunResult res = run_cli("evaluate --in " + data_csv().string() + " --model " +
                          model_path().string() +
                          " --subset all --k 1 --k 3 --beam 3 --out " +
                          report_path.string());
  CHECK(res.code == 0);
  json report = json::parse(slurp(report_path));
  CHECK(report["task"] == "condition");
  CHECK(report["count"] == 48);
  CHECK(int(report["groups"]) >= 1);
  REQUIRE(report["topk"].size() == 2);
  for (const auto& row : report["topk"]) {
    const double overall = row["overall"];
    CHECK(overall >= 0.0);
    CHECK(overall <= 1.0);
    CHECK(double(row["catalyst"]) >= overall - 1e-12);
  }
}

TEST_CASE("config rejects unknown keys") {
  fs::path cfg = work_dir() / "bad.cfg";
  std::ofstream(cfg) << "task = condition\nwat = 1\n";
  RunResult res = run_cli("train --config " + cfg.string());
  CHECK(res.code == 2);
  json err = json::parse(res.err);
  CHECK(err["category"] == "train");
}

TEST_CASE("predict writes ranked slot rows for a single reaction") {
  fs::path out = work_dir() / "preds.csv";
  RunResult res = run_cli(std::string("predict --model ") +
                          model_path().string() + " --reaction '" +
                          kProbeReaction + "' --beam 3 --results 2 --out " +
                          out.string());
  CHECK(res.code == 0);
  rxnalign::CsvTable preds = rxnalign::read_csv(out.string());
  CHECK(preds.header ==
        std::vector<std::string>{"id", "rank", "score", "catalyst", "solvent1",
                                 "solvent2", "reagent1", "reagent2"});
  REQUIRE(!preds.rows.empty());
  CHECK(preds.rows[0][0] == "r1");
  CHECK(preds.rows[0][1] == "1");
}

TEST_CASE("explain emits attention tables that sum to one") {
  fs::path out_dir = work_dir() / "explain";
  RunResult res = run_cli(std::string("explain --model ") +
                          model_path().string() + " --reaction '" +
                          kProbeReaction + "' --out " + out_dir.string());
  CHECK(res.code == 0);
  rxnalign::CsvTable table =
      rxnalign::read_csv((out_dir / "attention.csv").string());
  const int ci_center = table.col_or_throw("center");
  const int ci_broad = table.col_or_throw("broad");
  const int ci_focused = table.col_or_throw("focused");
  double broad_sum = 0, focused_sum = 0, off_center_focused = 0;
  for (const auto& cells : table.rows) {
    broad_sum += std::stod(cells[std::size_t(ci_broad)]);
    const double f = std::stod(cells[std::size_t(ci_focused)]);
    focused_sum += f;
    if (cells[std::size_t(ci_center)] == "0") off_center_focused += f;
  }
  CHECK(broad_sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(focused_sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(off_center_focused == doctest::Approx(0.0).epsilon(1e-9));

  const std::string svg = slurp(out_dir / "attention_broad.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(fs::exists(out_dir / "attention_center.svg"));
}

TEST_CASE("embed writes one feature row per atom and block") {
  fs::path out = work_dir() / "embed.csv";
  RunResult res = run_cli(std::string("embed --model ") + model_path().string() +
                          " --reaction '" + kProbeReaction + "' --out " +
                          out.string());
  CHECK(res.code == 0);
  rxnalign::CsvTable table = rxnalign::read_csv(out.string());
  CHECK(table.col("block") == 0);
  CHECK(table.col("e0") >= 0);
  CHECK(table.col("e15") >= 0);
  // 1 block, reactant 4 atoms + product 3 atoms
  CHECK(table.rows.size() == 7);
}

TEST_CASE("gradcheck subcommand passes every probe") {
  RunResult res = run_cli("gradcheck --seed 3");
  CHECK(res.code == 0);
  CHECK(res.out.find("pass ") != std::string::npos);
  CHECK(res.out.find("FAIL") == std::string::npos);
}

TEST_CASE("failures map to categorized nonzero exits") {
  SUBCASE("missing checkpoint") {
    RunResult res = run_cli("evaluate --in " + data_csv().string() +
                            " --model /nonexistent.ckpt");
    CHECK(res.code == 2);
    CHECK(json::parse(res.err)["category"] == "io");
  }
  SUBCASE("corrupt checkpoint") {
    fs::path bad = work_dir() / "garbage.ckpt";
    std::ofstream(bad) << "not a checkpoint at all";
    RunResult res = run_cli("evaluate --in " + data_csv().string() +
                            " --model " + bad.string());
    CHECK(res.code == 2);
    CHECK(json::parse(res.err)["category"] == "format");
  }
  SUBCASE("unparseable reaction") {
    RunResult res = run_cli(std::string("predict --model ") +
                            model_path().string() +
                            " --reaction 'C(C' --out " +
                            (work_dir() / "x.csv").string());
    CHECK(res.code == 2);
    CHECK(json::parse(res.err)["category"] == "smiles");
  }
  SUBCASE("structurally broken table") {
    fs::path bad = work_dir() / "noreaction.csv";
    std::ofstream(bad) << "id,smiles\n1,CCO\n";
    RunResult res = run_cli("preprocess --task condition --in " + bad.string() +
                            " --out " + (work_dir() / "prebad").string());
    CHECK(res.code == 2);
    CHECK(json::parse(res.err)["category"] == "dataset");
  }
}
