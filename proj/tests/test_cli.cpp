#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "json.hpp"
#include "subsense/cli.hpp"
#include "subsense/digest.hpp"
#include "support.hpp"

using nlohmann::json;
using testsupport::read_file;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = subsense::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const char* name) { return std::string(SUBSENSE_FIXTURE_DIR) + "/" + name; }

const std::vector<std::string> kSmall = {"--d-model", "16", "--n-heads", "2", "--n-layers", "1",
                                         "--d-ff", "32", "--max-len", "16", "--dropout", "0.1",
                                         "--lr", "0.003", "--val-every", "10", "--max-epochs", "2",
                                         "--batch-size", "16"};

// synth + split into `dir`; returns the directory holding train/val/test.
fs::path synth_split(const TempDir& dir) {
  REQUIRE(run({"synth", "--n", "300", "--seed", "4", "--out-dir", (dir / "synth").string()}).code == 0);
  REQUIRE(run({"split", "--input", (dir / "synth" / "corpus.csv").string(), "--seed", "9", "--out-dir",
               (dir / "data").string()})
              .code == 0);
  return dir / "data";
}

Result train(const fs::path& data, const fs::path& synth, const fs::path& out, const std::string& mode,
             const std::string& seed, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"train", "--train", (data / "train.csv").string(), "--val",
                                   (data / "val.csv").string(), "--test", (data / "test.csv").string(),
                                   "--out-dir", out.string(), "--mode", mode, "--seed", seed,
                                   "--lexicon", (synth / "lexicon.tsv").string(), "--vocab-exclude",
                                   (synth / "planted.txt").string()};
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

}  // namespace

TEST_CASE("score prints subjectivity and identity matches") {
  const auto r = run({"score", "--text", "men and women are segregated in mosques ."});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("subjectivity 0.0000\n") != std::string::npos);
  CHECK(r.out.find("identity present=true\n") != std::string::npos);
  CHECK(r.out.find("identity matched women\n") != std::string::npos);

  const auto j = run({"score", "--text", "He was very good", "--json"});
  REQUIRE(j.code == 0);
  const auto parsed = json::parse(j.out);
  CHECK(parsed["subjectivity"].get<double>() == doctest::Approx(0.78));
  CHECK(parsed["identity_present"] == false);

  TempDir dir;
  testsupport::write_file(dir / "lines.txt", "awful women\nfine\n");
  const auto f = run({"score", "--file", (dir / "lines.txt").string()});
  REQUIRE(f.code == 0);
  CHECK(f.out == "1.0000\ttrue\twomen\tawful women\n0.5000\tfalse\t-\tfine\n");
}

TEST_CASE("SUBSENSE_LEXICON replaces the default lexicon") {
  TempDir dir;
  testsupport::write_file(dir / "lex.tsv", "# form subjectivity polarity intensity\nfine\t0.9\t0.1\t1.0\n");
  ::setenv("SUBSENSE_LEXICON", (dir / "lex.tsv").c_str(), 1);
  const auto r = run({"score", "--text", "fine"});
  ::unsetenv("SUBSENSE_LEXICON");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("subjectivity 0.9000\n", 0) == 0);
  CHECK(run({"score", "--text", "fine"}).out.rfind("subjectivity 0.5000\n", 0) == 0);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  const auto bad_flag = run({"score", "--bogus"});
  CHECK(bad_flag.code == 1);
  CHECK(bad_flag.err.find("error:") != std::string::npos);
  CHECK(bad_flag.err.find("Usage: subsense score") != std::string::npos);
  CHECK(run({"score"}).code == 1);  // neither --text nor --file
  CHECK(run({"split", "--input", "x.csv", "--out-dir", "y"}).code == 1);  // seed is mandatory
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"score", "--file", "/nonexistent/file.txt"}).code == 2);

  TempDir dir;
  CHECK(run({"convert", "--kind", "wiki", "--input", fixture("ws.csv"), "--output", (dir / "o.csv").string()})
            .code == 2);
  CHECK(run({"convert", "--kind", "nope", "--input", fixture("ws.csv"), "--output", (dir / "o.csv").string()})
            .code == 1);
  CHECK(run({"synth", "--n", "10", "--seed", "1", "--out-dir", dir.path().string()}).code == 2);
}

TEST_CASE("convert reports counts and digests") {
  TempDir dir;
  const auto r = run({"convert", "--kind", "twitter42k", "--input", fixture("twitter42k.tsv"), "--output",
                      (dir / "c.csv").string(), "--report", (dir / "r.json").string()});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["kept"] == 8);
  CHECK(j["dropped"] == 2);
  CHECK(j["toxic"] == 3);
  CHECK(j["input_digest"] == subsense::digest_file(fixture("twitter42k.tsv")));
  CHECK(json::parse(read_file(dir / "r.json")) == j);
  CHECK(fs::exists(dir / "c.csv"));
}

TEST_CASE("split and synth write their declared outputs only") {
  TempDir dir;
  const auto data = synth_split(dir);
  for (const char* f : {"corpus.csv", "lexicon.tsv", "planted.txt", "planted_scores.csv", "synth.json"}) {
    CHECK(fs::exists(dir / "synth" / f));
  }
  std::vector<std::string> written;
  for (const auto& e : fs::directory_iterator(data)) written.push_back(e.path().filename().string());
  std::sort(written.begin(), written.end());
  CHECK(written == std::vector<std::string>{"split.json", "test.csv", "train.csv", "val.csv"});
  const auto s = json::parse(read_file(data / "split.json"));
  CHECK(s["train"]["size"].get<int>() + s["val"]["size"].get<int>() + s["test"]["size"].get<int>() == 300);

  TempDir again;
  synth_split(again);
  CHECK(read_file(dir / "synth" / "corpus.csv") == read_file(again / "synth" / "corpus.csv"));
  CHECK(read_file(data / "train.csv") == read_file(again / "data" / "train.csv"));
}

TEST_CASE("train is deterministic and eval is idempotent") {
  TempDir dir;
  const auto data = synth_split(dir);
  const auto a = train(data, dir / "synth", dir / "run_a", "ss", "1");
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const auto b = train(data, dir / "synth", dir / "run_b", "ss", "1");
  REQUIRE(b.code == 0);

  const auto ma = json::parse(read_file(dir / "run_a" / "manifest.json"));
  const auto mb = json::parse(read_file(dir / "run_b" / "manifest.json"));
  CHECK(ma["checkpoint_digest"] == mb["checkpoint_digest"]);
  CHECK(ma["checkpoint_digest"] == subsense::digest_file(dir / "run_a" / "model.ckpt"));
  CHECK(ma["config_digest"] == mb["config_digest"]);
  CHECK(ma["seed"] == 1);
  CHECK(ma["mode"] == "ss");
  CHECK(ma["dataset_id"] == "data");
  CHECK(ma["inputs"]["train"]["digest"] == subsense::digest_file(data / "train.csv"));
  for (const auto& [key, name] : ma["artifacts"].items()) {
    CHECK_MESSAGE(fs::exists(dir / "run_a" / name.get<std::string>()), key);
  }
  CHECK(ma.contains("metrics"));
  CHECK(read_file(dir / "run_a" / "history.csv") == read_file(dir / "run_b" / "history.csv"));

  // A different seed or config field moves the digests.
  REQUIRE(train(data, dir / "synth", dir / "run_c", "ss", "2").code == 0);
  const auto mc = json::parse(read_file(dir / "run_c" / "manifest.json"));
  CHECK(mc["checkpoint_digest"] != ma["checkpoint_digest"]);
  REQUIRE(train(data, dir / "synth", dir / "run_d", "ss", "1", {"--min-freq", "2"}).code == 0);
  const auto md = json::parse(read_file(dir / "run_d" / "manifest.json"));
  CHECK(md["config_digest"] != ma["config_digest"]);

  const auto e1 = run({"eval", "--run", (dir / "run_a").string(), "--data", (data / "test.csv").string(),
                       "--out", (dir / "e1.json").string()});
  REQUIRE_MESSAGE(e1.code == 0, e1.err);
  const auto e2 = run({"eval", "--run", (dir / "run_a").string(), "--data", (data / "test.csv").string(),
                       "--out", (dir / "e2.json").string()});
  REQUIRE(e2.code == 0);
  CHECK(e1.out == e2.out);
  CHECK(read_file(dir / "e1.json") == read_file(dir / "e2.json"));
  CHECK(json::parse(read_file(dir / "e1.json"))["f1"] == ma["metrics"]["f1"]);

  const auto au = run({"audit", "--run", (dir / "run_a").string(), "--data", (data / "test.csv").string(),
                       "--format", "json", "--cells-csv", (dir / "cells.csv").string()});
  REQUIRE(au.code == 0);
  CHECK(json::parse(au.out)["cells"].size() == 8);
  CHECK(read_file(dir / "cells.csv").rfind("cell,index,subjectivity\n", 0) == 0);

  // Missing checkpoint is a data error.
  fs::remove(dir / "run_b" / "model.ckpt");
  CHECK(run({"eval", "--run", (dir / "run_b").string(), "--data", (data / "test.csv").string()}).code == 2);
}

TEST_CASE("config file is overridden by flags") {
  TempDir dir;
  const auto data = synth_split(dir);
  testsupport::write_file(dir / "cfg.json",
                          R"({"model": {"d_model": 8, "n_heads": 2, "d_ff": 16},
                              "schedule": {"batch_size": 8, "max_epochs": 1},
                              "mode": "so", "soc_weight": 0.5})");
  std::vector<std::string> args = {"train", "--train", (data / "train.csv").string(), "--val",
                                   (data / "val.csv").string(), "--out-dir", (dir / "run").string(),
                                   "--seed", "3", "--config", (dir / "cfg.json").string(),
                                   "--lexicon", (dir / "synth" / "lexicon.tsv").string(),
                                   "--max-len", "16", "--n-layers", "1", "--d-ff", "12", "--mode", "baseline"};
  const auto r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto m = json::parse(read_file(dir / "run" / "manifest.json"));
  CHECK(m["config"]["model"]["d_model"] == 8);
  CHECK(m["config"]["model"]["d_ff"] == 12);
  CHECK(m["config"]["schedule"]["batch_size"] == 8);
  CHECK(m["mode"] == "baseline");
  CHECK(m["soc_weight"] == 0.5);
  CHECK_FALSE(m.contains("metrics"));  // no --test given

  testsupport::write_file(dir / "bad.json", R"({"model": {"d_model": 7, "n_heads": 2}})");
  args[10] = (dir / "bad.json").string();
  args[6] = (dir / "run2").string();
  CHECK(run(args).code == 2);
}

TEST_CASE("corpus kind picks the default encoder length") {
  TempDir dir;
  const auto data = synth_split(dir);
  const auto len_for = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"train", "--train", (data / "train.csv").string(), "--val",
                                     (data / "val.csv").string(), "--seed", "1", "--d-model", "8",
                                     "--n-heads", "2", "--n-layers", "1", "--d-ff", "8", "--max-epochs", "1",
                                     "--lexicon", (dir / "synth" / "lexicon.tsv").string()};
    const auto out = dir / ("run" + std::to_string(extra.size()) + (extra.empty() ? "" : extra.back()));
    args.insert(args.end(), {"--out-dir", out.string()});
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return json::parse(read_file(out / "manifest.json"))["config"]["model"]["max_len"].get<int>();
  };
  CHECK(len_for({}) == 128);
  CHECK(len_for({"--kind", "wiki"}) == 400);
  CHECK(len_for({"--kind", "wiki", "--max-len", "20"}) == 20);
  CHECK(run({"train", "--train", "a", "--val", "b", "--out-dir", "c", "--seed", "1", "--kind", "nope"}).code == 1);
}

TEST_CASE("compare aggregates manifests") {
  TempDir dir;
  std::vector<std::string> manifests;
  const double f1s[] = {0.6, 0.8, 0.7, 0.7};
  for (int i = 0; i < 4; ++i) {
    const json m = {{"mode", i < 2 ? "baseline" : "ss"},
                    {"soc_weight", 0.0},
                    {"dataset_id", "toy"},
                    {"metrics", {{"f1", f1s[i]}, {"fp", 30 + i}, {"fn", 50}, {"tp", 1}, {"tn", 1}}}};
    const auto p = dir / ("m" + std::to_string(i) + ".json");
    testsupport::write_file(p, m.dump());
    manifests.push_back(p.string());
  }
  std::vector<std::string> args = {"compare"};
  args.insert(args.end(), manifests.begin(), manifests.end());
  args.insert(args.end(), {"--out", (dir / "agg.json").string()});
  const auto r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("dataset toy\n", 0) == 0);
  CHECK(r.out.find("baseline | 2    | 0.7000 | 0.1000") != std::string::npos);
  CHECK(r.out.find("ss       | 2    | 0.7000 | 0.0000") != std::string::npos);
  CHECK(r.out.find("baseline | 30.5 | 50.0") != std::string::npos);
  CHECK(run(args).out == r.out);
  const auto agg = json::parse(read_file(dir / "agg.json"));
  CHECK(agg["toy"]["baseline"]["std_f1"].get<double>() == doctest::Approx(0.1));

  testsupport::write_file(dir / "nometrics.json", R"({"mode": "ss"})");
  CHECK(run({"compare", (dir / "nometrics.json").string()}).code == 2);
}
