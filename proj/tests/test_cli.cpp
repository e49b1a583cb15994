#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "testutil.hpp"

#ifndef MODINV_CLI_PATH
#error "MODINV_CLI_PATH must name the CLI binary"
#endif

TEST_SUITE_BEGIN("cli");

namespace {

using nlohmann::json;

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Runs the CLI with stdout captured and stderr discarded.
CmdResult run_cli(const std::string& args, const testutil::TempDir& tmp) {
  const std::string out_path = tmp.file("stdout.txt");
  const std::string cmd = std::string(MODINV_CLI_PATH) + " " + args + " > " +
                          out_path + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WEXITSTATUS(status);
  result.out = slurp(out_path);
  return result;
}

// One shared generated corpus + trained model for the pipeline cases.
struct Pipeline {
  testutil::TempDir tmp{"cli"};
  std::string banks;  // --bank-a X --bank-b Y
  std::string model_path;

  Pipeline() {
    const auto dir = tmp.file("synth");
    CmdResult gen = run_cli("gen --classes 6 --dim-a 16 --dim-b 16 "
                            "--per-class 80 --sigma-a 0.3 --sigma-b 0.3 "
                            "--rho 0.5 --seed 7 --out " + dir, tmp);
    REQUIRE(gen.exit_code == 0);
    banks = " --bank-a " + dir + "/bank_a.sbeb --bank-b " + dir +
            "/bank_b.sbeb ";
    model_path = tmp.file("model.sbmd");
    CmdResult train = run_cli("train" + banks +
                              "--model srmm --switch s1 --epochs 8 "
                              "--batch-size 64 --layer-dim 32 "
                              "--seed-model 3 --out " + model_path, tmp);
    REQUIRE(train.exit_code == 0);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("gen is deterministic and writes a manifest") {
  testutil::TempDir tmp("cli_gen");
  const auto d1 = tmp.file("g1");
  const auto d2 = tmp.file("g2");
  const std::string flags = "gen --classes 3 --dim-a 8 --dim-b 8 "
                            "--per-class 20 --seed 9 --out ";
  CHECK(run_cli(flags + d1, tmp).exit_code == 0);
  CHECK(run_cli(flags + d2, tmp).exit_code == 0);
  CHECK(slurp(d1 + "/bank_a.sbeb") == slurp(d2 + "/bank_a.sbeb"));
  CHECK(slurp(d1 + "/bank_b.sbeb") == slurp(d2 + "/bank_b.sbeb"));

  const auto manifest = json::parse(slurp(d1 + "/manifest.json"));
  CHECK(manifest.at("classes") == 3);
  CHECK(manifest.at("seed") == 9);
  CHECK(manifest.at("records_per_bank") == 60);
}

TEST_CASE("usage errors exit with 64") {
  testutil::TempDir tmp("cli_usage");
  CHECK(run_cli("gen --classes 3", tmp).exit_code == 64);  // no --out
  CHECK(run_cli("frobnicate", tmp).exit_code == 64);
  CHECK(run_cli("train --out /tmp/x.sbmd", tmp).exit_code == 64);  // no banks
  CHECK(run_cli("gen --classes notanumber --out /tmp/g", tmp).exit_code == 64);
  CHECK(run_cli("eval --model m.sbmd --bank-a a --bank-b b --split bogus",
                tmp).exit_code == 64);
}

TEST_CASE("missing files exit with 2, bad banks with 3") {
  testutil::TempDir tmp("cli_io");
  CHECK(run_cli("eval --model /nonexistent/m.sbmd --bank-a a.sbeb "
                "--bank-b b.sbeb", tmp).exit_code == 2);
  // A bank with a broken magic is a data-format problem: exit 3.
  const auto bad = tmp.file("bad.sbeb");
  std::ofstream(bad, std::ios::binary) << "NOPExxxxxxxxxxxxxxxxxxxx";
  auto& p = pipeline();
  const auto r = run_cli("eval --model " + p.model_path + " --bank-a " + bad +
                         " --bank-b " + bad, tmp);
  CHECK(r.exit_code == 3);
}

TEST_CASE("eval emits schema-complete JSON on stdout") {
  auto& p = pipeline();
  const auto r = run_cli("eval --model " + p.model_path + p.banks, p.tmp);
  REQUIRE(r.exit_code == 0);
  const auto j = json::parse(r.out);
  for (const char* key :
       {"metric_kind", "value", "n", "baseline", "delta", "mask_a", "mask_b",
        "sigma", "split", "fusion_space", "counts", "hyperparameters"})
    CHECK(j.contains(key));
  CHECK(j.at("metric_kind") == "accuracy");
  CHECK(j.at("counts").contains("both"));
  CHECK(j.at("hyperparameters").at("architecture") == "single_branch");
}

TEST_CASE("identity mask equals the unmasked run bit-exactly") {
  auto& p = pipeline();
  const auto base = run_cli("eval --model " + p.model_path + p.banks, p.tmp);
  const auto masked = run_cli("eval --model " + p.model_path + p.banks +
                              "--mask-b 1.0", p.tmp);
  REQUIRE(base.exit_code == 0);
  REQUIRE(masked.exit_code == 0);
  const double v1 = json::parse(base.out).at("value");
  const double v2 = json::parse(masked.out).at("value");
  CHECK(v1 == v2);
}

TEST_CASE("sweep: default grid, determinism, eval equivalence") {
  auto& p = pipeline();
  const auto dir1 = p.tmp.file("sweep1");
  const auto dir2 = p.tmp.file("sweep2");
  const std::string flags = "sweep --model " + p.model_path + p.banks +
                            "--sigmas 0,0.1,0.5,1.0 --seed-mask 4 --out ";
  REQUIRE(run_cli(flags + dir1, p.tmp).exit_code == 0);
  REQUIRE(run_cli(flags + dir2, p.tmp).exit_code == 0);

  // Default availability grid has 7 levels -> 7 CSV rows.
  std::ifstream csv(dir1 + "/missing_b.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "level,value,delta");
  size_t rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 7);

  // Corruption report rows match the sigma list.
  std::ifstream ccsv(dir1 + "/corruption.csv");
  std::getline(ccsv, line);
  size_t crows = 0;
  while (std::getline(ccsv, line))
    if (!line.empty()) ++crows;
  CHECK(crows == 4);

  // Same seeds, same files.
  CHECK(slurp(dir1 + "/missing_b.json") == slurp(dir2 + "/missing_b.json"));
  CHECK(slurp(dir1 + "/missing_b.csv") == slurp(dir2 + "/missing_b.csv"));
  CHECK(slurp(dir1 + "/corruption.json") == slurp(dir2 + "/corruption.json"));

  // The availability-1.0 entry equals an unmasked eval, bit-exactly.
  const auto report = json::parse(slurp(dir1 + "/missing_b.json"));
  const auto ev = run_cli("eval --model " + p.model_path + p.banks, p.tmp);
  const double eval_value = json::parse(ev.out).at("value");
  CHECK(report.at("values")[0] == eval_value);
  CHECK(report.at("model_sha").get<std::string>().size() == 64);
  CHECK(report.at("hyperparameters").at("architecture") == "single_branch");

  // Full removal equals the A-only fallback evaluation.
  const auto b0 = run_cli("eval --model " + p.model_path + p.banks +
                          "--mask-b 0.0", p.tmp);
  const double b0_value = json::parse(b0.out).at("value");
  CHECK(report.at("values")[6] == b0_value);
}

TEST_CASE("train writes a JSONL log with config and epoch events") {
  auto& p = pipeline();
  const auto log_path = p.model_path + ".log.jsonl";
  std::ifstream is(log_path);
  REQUIRE(is.good());
  std::string line;
  size_t epochs = 0;
  bool config_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    if (j.at("event") == "config") {
      config_seen = true;
      CHECK(j.at("model") == "srmm");
      CHECK(j.at("hyperparameters").at("p_drop") == 0.5);
    } else {
      CHECK(j.at("event") == "epoch");
      CHECK(j.contains("loss"));
      CHECK(j.contains("train_accuracy"));
      ++epochs;
    }
  }
  CHECK(config_seen);
  CHECK(epochs == 8);
}

TEST_CASE("auroc metric works end to end on a binary task") {
  testutil::TempDir tmp("cli_auroc");
  const auto dir = tmp.file("bin");
  REQUIRE(run_cli("gen --classes 2 --dim-a 8 --dim-b 8 --per-class 80 "
                  "--seed 5 --out " + dir, tmp).exit_code == 0);
  const auto model = tmp.file("bin.sbmd");
  const std::string banks =
      " --bank-a " + dir + "/bank_a.sbeb --bank-b " + dir + "/bank_b.sbeb ";
  REQUIRE(run_cli("train" + banks + "--epochs 5 --batch-size 32 "
                  "--layer-dim 16 --out " + model, tmp).exit_code == 0);
  const auto r = run_cli("eval --metric auroc --model " + model + banks, tmp);
  REQUIRE(r.exit_code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("metric_kind") == "auroc");
  CHECK(j.at("value").get<double>() >= 0.5);
  CHECK(j.at("value").get<double>() <= 1.0);

  // AUROC on the 6-class pipeline corpus is a data error (exit 3).
  auto& p = pipeline();
  CHECK(run_cli("eval --metric auroc --model " + p.model_path + p.banks,
                tmp).exit_code == 3);
}

TEST_CASE("train supports the two-branch baselines") {
  auto& p = pipeline();
  const auto out = p.tmp.file("tbn.sbmd");
  const auto r = run_cli("train" + p.banks +
                         "--model tbn-early --epochs 3 --batch-size 64 "
                         "--layer-dim 32 --out " + out, p.tmp);
  CHECK(r.exit_code == 0);
  const auto ev = run_cli("eval --model " + out + p.banks, p.tmp);
  CHECK(ev.exit_code == 0);
  CHECK(json::parse(ev.out).at("hyperparameters").at("fusion") == "early");
}

TEST_CASE("train twice with identical seeds produces identical model files") {
  auto& p = pipeline();
  const auto out1 = p.tmp.file("repro1.sbmd");
  const auto out2 = p.tmp.file("repro2.sbmd");
  const std::string flags = "train" + p.banks +
                            "--model srmm --epochs 3 --batch-size 64 "
                            "--layer-dim 32 --seed-model 11 --out ";
  REQUIRE(run_cli(flags + out1, p.tmp).exit_code == 0);
  REQUIRE(run_cli(flags + out2, p.tmp).exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));
}

TEST_CASE("dump writes the documented CSV header and honors masks") {
  auto& p = pipeline();
  const auto out = p.tmp.file("dump.csv");
  REQUIRE(run_cli("dump --model " + p.model_path + p.banks + "--out " + out,
                  p.tmp).exit_code == 0);
  std::ifstream is(out);
  std::string header;
  std::getline(is, header);
  CHECK(header.rfind("id,label,modality,e0,e1", 0) == 0);
  size_t rows = 0, a_rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) {
      ++rows;
      if (line.find(",A,") != std::string::npos) ++a_rows;
    }
  CHECK(rows == 2 * 120);  // test split of 480 instances, both modalities
  CHECK(a_rows == 120);

  const auto masked = p.tmp.file("dump_b0.csv");
  REQUIRE(run_cli("dump --model " + p.model_path + p.banks +
                  "--mask-b 0.0 --out " + masked, p.tmp).exit_code == 0);
  std::ifstream is2(masked);
  std::getline(is2, header);
  rows = 0;
  size_t b_rows = 0;
  while (std::getline(is2, line))
    if (!line.empty()) {
      ++rows;
      if (line.find(",B,") != std::string::npos) ++b_rows;
    }
  CHECK(rows == 120);
  CHECK(b_rows == 0);
}

TEST_CASE("gradcheck passes clean and fails under fault injection") {
  auto& p = pipeline();
  const auto clean = run_cli("gradcheck --eps 1e-5 --prec double", p.tmp);
  CHECK(clean.exit_code == 0);
  CHECK(clean.out.find("eps=1e-05") != std::string::npos);
  CHECK(clean.out.find("prec=double") != std::string::npos);
  CHECK(clean.out.find("PASS") != std::string::npos);

  const auto broken = run_cli("gradcheck --inject-fault", p.tmp);
  CHECK(broken.exit_code == 1);
  CHECK(broken.out.find("FAIL") != std::string::npos);

  CHECK(run_cli("gradcheck --prec float", p.tmp).exit_code == 64);
}

TEST_CASE("config files supply defaults and flags override them") {
  auto& p = pipeline();
  const auto cfg_path = p.tmp.file("exp.json");
  {
    json cfg{{"classes", 4},      {"dim-a", 8},  {"dim-b", 8},
             {"per-class", 10},   {"seed", 21},  {"out", p.tmp.file("cfg_g")}};
    std::ofstream(cfg_path) << cfg.dump();
  }
  CHECK(run_cli("gen --config " + cfg_path, p.tmp).exit_code == 0);
  const auto manifest =
      json::parse(slurp(p.tmp.file("cfg_g") + "/manifest.json"));
  CHECK(manifest.at("classes") == 4);

  // A flag beats the config value.
  CHECK(run_cli("gen --config " + cfg_path + " --classes 2 --out " +
                p.tmp.file("cfg_g2"), p.tmp).exit_code == 0);
  const auto manifest2 =
      json::parse(slurp(p.tmp.file("cfg_g2") + "/manifest.json"));
  CHECK(manifest2.at("classes") == 2);
}

TEST_SUITE_END();
