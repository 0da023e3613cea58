#include "subsense/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "subsense/audit.hpp"
#include "subsense/augment.hpp"
#include "subsense/datasets.hpp"
#include "subsense/digest.hpp"
#include "subsense/encoder.hpp"
#include "subsense/error.hpp"
#include "subsense/identity.hpp"
#include "subsense/subjectivity.hpp"
#include "subsense/textprep.hpp"
#include "subsense/trainer.hpp"

namespace subsense::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt4(double v) { return audit::fmt4(v); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << text;
  if (!out) throw ResourceError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create directory " + dir.string() + ": " + ec.message());
}

subjectivity::SubjectivityLexicon load_subjectivity(const std::string& path) {
  if (path.empty() && !std::getenv("SUBSENSE_LEXICON")) return subjectivity::reference_lexicon();
  if (path.empty()) return subjectivity::load_lexicon(subjectivity::default_lexicon_path()).lexicon;
  return subjectivity::load_lexicon(path).lexicon;
}

identity::IdentityLexicon load_identity(const std::string& path) {
  if (path.empty()) return identity::default_terms();
  return identity::IdentityLexicon::load(path);
}

std::unordered_set<std::string> load_word_set(const std::string& path) {
  std::unordered_set<std::string> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot read " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] != '#') out.insert(line);
  }
  return out;
}

// ---- score ---------------------------------------------------------------

struct ScoreArgs {
  std::string text, file, lexicon, identity;
  bool as_json = false;
};

json score_json(const std::string& text, const subjectivity::SubjectivityLexicon& lex,
                const identity::IdentityLexicon& ids) {
  const auto s = subjectivity::score(text, lex);
  const auto m = identity::detect(text, ids);
  json matches = json::array();
  for (const auto& t : m.matches) matches.push_back({{"term", t.term}, {"begin", t.begin}, {"end", t.end}});
  return {{"text", text},
          {"subjectivity", s.value},
          {"matched_entries", s.matched_count},
          {"identity_present", m.present},
          {"identity_matches", matches}};
}

void run_score(const ScoreArgs& a, std::ostream& out) {
  if (a.text.empty() == a.file.empty()) throw UsageError("score: give exactly one of --text or --file");
  const auto lex = load_subjectivity(a.lexicon);
  const auto ids = load_identity(a.identity);
  std::vector<std::string> texts;
  if (!a.text.empty()) {
    texts.push_back(a.text);
  } else {
    std::ifstream in(a.file);
    if (!in) throw ResourceError("cannot read " + a.file);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      texts.push_back(line);
    }
  }
  for (const auto& t : texts) {
    const auto j = score_json(t, lex, ids);
    if (a.as_json) {
      out << j.dump() << '\n';
      continue;
    }
    std::string terms;
    for (const auto& m : j["identity_matches"]) {
      terms += (terms.empty() ? "" : ",") + m["term"].get<std::string>();
    }
    if (texts.size() == 1) {
      out << "subjectivity " << fmt4(j["subjectivity"]) << '\n'
          << "matched_entries " << j["matched_entries"].get<std::size_t>() << '\n'
          << "identity present=" << (j["identity_present"].get<bool>() ? "true" : "false") << '\n'
          << "identity matched " << (terms.empty() ? "-" : terms) << '\n';
    } else {
      out << fmt4(j["subjectivity"]) << '\t' << (j["identity_present"].get<bool>() ? "true" : "false")
          << '\t' << (terms.empty() ? "-" : terms) << '\t' << t << '\n';
    }
  }
}

// ---- convert / split / synth ----------------------------------------------

struct ConvertArgs {
  std::string kind, input, output, report;
};

void run_convert(const ConvertArgs& a, std::ostream& out) {
  const auto kind = datasets::parse_kind(a.kind);
  if (!kind) throw UsageError("convert: unknown --kind " + a.kind);
  const auto conv = datasets::convert_file(*kind, a.input);
  datasets::write_canonical(fs::path(a.output), conv.comments);
  json report = datasets::to_json(conv.report);
  report["kind"] = std::string(datasets::kind_name(*kind));
  report["input_digest"] = digest_file(a.input);
  report["output"] = a.output;
  if (!a.report.empty()) write_json(a.report, report);
  out << report.dump(2) << '\n';
}

struct SplitArgs {
  std::string input, out_dir;
  std::optional<std::uint64_t> seed;
};

void run_split(const SplitArgs& a, std::ostream& out) {
  const auto comments = datasets::read_canonical(a.input);
  const auto parts = datasets::split(comments, *a.seed);
  ensure_dir(a.out_dir);
  json summary = {{"seed", *a.seed}, {"input", a.input}, {"input_digest", digest_file(a.input)}};
  const std::pair<const char*, const std::vector<Comment>*> named[] = {
      {"train", &parts.train}, {"val", &parts.val}, {"test", &parts.test}};
  for (const auto& [name, rows] : named) {
    const fs::path p = fs::path(a.out_dir) / (std::string(name) + ".csv");
    datasets::write_canonical(p, *rows);
    std::size_t toxic = 0;
    for (const auto& c : *rows) toxic += c.label == Label::Toxic ? 1 : 0;
    summary[name] = {{"path", p.string()}, {"size", rows->size()}, {"toxic", toxic}};
  }
  write_json(fs::path(a.out_dir) / "split.json", summary);
  out << summary.dump(2) << '\n';
}

struct SynthArgs {
  std::size_t n = 2000;
  double theta = 0.5;
  double noise = 0.0;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void run_synth(const SynthArgs& a, std::ostream& out) {
  const auto corpus = datasets::synth_generate(a.n, a.theta, a.noise, *a.seed);
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  datasets::write_canonical(dir / "corpus.csv", corpus.comments);

  // Test lexicon in the TSV form the loader reads back.
  std::vector<std::string> forms(corpus.planted_forms.begin(), corpus.planted_forms.end());
  std::sort(forms.begin(), forms.end());
  std::ostringstream tsv;
  tsv << "# form\tsubjectivity\tpolarity\tintensity\n";
  std::ostringstream planted;
  for (const auto& f : forms) {
    const auto* s = corpus.lexicon.find(f);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", s->subjectivity);
    tsv << f << '\t' << buf << "\t0\t1\n";
    planted << f << '\n';
  }
  write_text(dir / "lexicon.tsv", tsv.str());
  write_text(dir / "planted.txt", planted.str());

  std::ostringstream scores;
  csv::write_row(scores, {"id", "planted_score", "identity_present", "rule_label"});
  for (std::size_t i = 0; i < corpus.comments.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", corpus.planted_scores[i]);
    csv::write_row(scores, {corpus.comments[i].id, buf, corpus.identity_present[i] ? "1" : "0",
                            corpus.rule_label[i] ? "toxic" : "nontoxic"});
  }
  write_text(dir / "planted_scores.csv", scores.str());

  std::size_t toxic = 0;
  for (const auto& c : corpus.comments) toxic += c.label == Label::Toxic ? 1 : 0;
  const json summary = {{"n", a.n},           {"theta", a.theta},
                        {"noise", a.noise},   {"seed", *a.seed},
                        {"toxic", toxic},     {"corpus", (dir / "corpus.csv").string()},
                        {"lexicon", (dir / "lexicon.tsv").string()},
                        {"planted", (dir / "planted.txt").string()}};
  write_json(dir / "synth.json", summary);
  out << summary.dump(2) << '\n';
}

// ---- train / eval / audit -------------------------------------------------

struct TrainArgs {
  std::string train, val, test, out_dir, config, mode, lexicon, identity, vocab_exclude,
      dataset_id, kind;
  std::optional<std::uint64_t> seed;
  std::optional<double> soc_weight;
  std::optional<int> d_model, n_heads, n_layers, d_ff, max_len, vocab_size, batch_size, val_every,
      max_halvings, max_epochs, min_freq;
  std::optional<double> dropout, lr;
};

// Everything needed to rebuild the inputs of a trained model.
struct RunConfig {
  encoder::ModelConfig model;
  trainer::TrainSchedule schedule;
  augment::AugmentMode mode = augment::AugmentMode::Baseline;
  double soc_weight = 0.0;
  std::uint64_t seed = 0;
  int min_freq = 1;
  std::string lexicon, identity, vocab_exclude, dataset_id;
};

json to_json(const RunConfig& c) {
  return {{"model", encoder::to_json(c.model)},
          {"schedule", trainer::to_json(c.schedule)},
          {"mode", std::string(augment::mode_name(c.mode))},
          {"soc_weight", c.soc_weight},
          {"seed", c.seed},
          {"min_freq", c.min_freq},
          {"lexicon", c.lexicon},
          {"identity", c.identity},
          {"vocab_exclude", c.vocab_exclude},
          {"dataset_id", c.dataset_id}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("model")) c.model = encoder::model_config_from_json(j.at("model"));
    if (j.contains("schedule")) c.schedule = trainer::schedule_from_json(j.at("schedule"));
    if (j.contains("mode")) {
      const auto m = augment::parse_mode(j.at("mode").get<std::string>());
      if (!m) throw ConfigError("config: unknown mode");
      c.mode = *m;
    }
    c.soc_weight = j.value("soc_weight", c.soc_weight);
    c.seed = j.value("seed", c.seed);
    c.min_freq = j.value("min_freq", c.min_freq);
    c.lexicon = j.value("lexicon", c.lexicon);
    c.identity = j.value("identity", c.identity);
    c.vocab_exclude = j.value("vocab_exclude", c.vocab_exclude);
    c.dataset_id = j.value("dataset_id", c.dataset_id);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig resolve_config(const TrainArgs& a) {
  const json file = a.config.empty() ? json::object() : read_json(a.config);
  RunConfig c = run_config_from_json(file);
  if (!a.kind.empty()) {
    const auto kind = datasets::parse_kind(a.kind);
    if (!kind) throw UsageError("train: unknown --kind " + a.kind);
    const bool file_sets_len = file.contains("model") && file["model"].contains("max_len");
    if (!file_sets_len) c.model.max_len = datasets::default_max_len(*kind);
  }
  if (!a.mode.empty()) {
    const auto m = augment::parse_mode(a.mode);
    if (!m) throw UsageError("train: --mode must be baseline, ss or so");
    c.mode = *m;
  }
  c.seed = *a.seed;
  if (a.soc_weight) c.soc_weight = *a.soc_weight;
  if (a.d_model) c.model.d_model = *a.d_model;
  if (a.n_heads) c.model.n_heads = *a.n_heads;
  if (a.n_layers) c.model.n_layers = *a.n_layers;
  if (a.d_ff) c.model.d_ff = *a.d_ff;
  if (a.max_len) c.model.max_len = *a.max_len;
  if (a.vocab_size) c.model.vocab_size = *a.vocab_size;
  if (a.dropout) c.model.dropout_rate = *a.dropout;
  if (a.batch_size) c.schedule.batch_size = *a.batch_size;
  if (a.lr) c.schedule.lr0 = *a.lr;
  if (a.val_every) c.schedule.val_every = *a.val_every;
  if (a.max_halvings) c.schedule.max_halvings = *a.max_halvings;
  if (a.max_epochs) c.schedule.max_epochs = *a.max_epochs;
  if (a.min_freq) c.min_freq = *a.min_freq;
  if (!a.lexicon.empty()) c.lexicon = a.lexicon;
  if (!a.identity.empty()) c.identity = a.identity;
  if (!a.vocab_exclude.empty()) c.vocab_exclude = a.vocab_exclude;
  if (!a.dataset_id.empty()) c.dataset_id = a.dataset_id;
  if (c.dataset_id.empty()) c.dataset_id = fs::path(a.train).parent_path().filename().string();
  c.model.seed = c.seed;
  c.model.validate();
  c.schedule.validate();
  if (c.soc_weight < 0.0) throw ConfigError("config: soc_weight must be non-negative");
  if (c.min_freq < 1) throw ConfigError("config: min_freq must be at least 1");
  return c;
}

struct Resources {
  subjectivity::SubjectivityLexicon lexicon;
  identity::IdentityLexicon identity;
};

std::vector<augment::PreparedExample> prepare_all(std::span<const Comment> comments,
                                                  const textprep::Vocab& vocab,
                                                  const Resources& res, const RunConfig& c) {
  const augment::PrepareContext ctx{&vocab, &res.lexicon, &res.identity,
                                    static_cast<std::size_t>(c.model.max_len), c.mode};
  std::vector<augment::PreparedExample> out;
  out.reserve(comments.size());
  for (const auto& cm : comments) out.push_back(augment::prepare(cm.text, ctx));
  return out;
}

std::vector<trainer::TrainExample> to_train_examples(std::span<const Comment> comments,
                                                     const textprep::Vocab& vocab,
                                                     const Resources& res, const RunConfig& c) {
  const auto prepared = prepare_all(comments, vocab, res, c);
  std::vector<trainer::TrainExample> out;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    out.push_back(trainer::make_example(prepared[i], comments[i].label));
  }
  return out;
}

audit::EvalReport evaluate(std::span<const Comment> comments, const encoder::EncoderParams& params,
                           const textprep::Vocab& vocab, const Resources& res, const RunConfig& c) {
  if (comments.empty()) throw EmptyDatasetError("eval: empty dataset");
  const auto prepared = prepare_all(comments, vocab, res, c);
  std::vector<augment::AugmentedExample> xs;
  std::vector<audit::EvalRecord> records;
  std::vector<Label> preds, golds;
  for (const auto& p : prepared) xs.push_back(p.example);
  const auto predictions = trainer::predict_all(params, c.model, xs);
  for (std::size_t i = 0; i < comments.size(); ++i) {
    preds.push_back(predictions[i].label);
    golds.push_back(comments[i].label);
    records.push_back({preds[i], golds[i], prepared[i].identity.present, prepared[i].subjectivity});
  }
  audit::EvalReport r;
  r.counts = audit::confusion(preds, golds);
  r.f1 = audit::f1(r.counts);
  r.bias = audit::bias_groups(records);
  r.errors = audit::error_list(comments, preds, res.identity, res.lexicon);
  return r;
}

json metrics_json(const audit::EvalReport& r) {
  return {{"f1", r.f1}, {"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}};
}

json input_ref(const std::string& path) {
  if (path.empty()) return nullptr;
  return {{"path", path}, {"digest", digest_file(path)}};
}

void run_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg0 = resolve_config(a);
  const Resources res{load_subjectivity(cfg0.lexicon), load_identity(cfg0.identity)};
  const auto train_rows = datasets::read_canonical(a.train);
  const auto val_rows = datasets::read_canonical(a.val);
  const auto exclude = load_word_set(cfg0.vocab_exclude);
  const auto vocab = textprep::build_vocab(train_rows, static_cast<std::size_t>(cfg0.model.vocab_size),
                                           static_cast<std::size_t>(cfg0.min_freq), exclude);
  RunConfig cfg = cfg0;
  cfg.model.vocab_size = static_cast<int>(vocab.size());

  const auto train_set = to_train_examples(train_rows, vocab, res, cfg);
  const auto val_set = to_train_examples(val_rows, vocab, res, cfg);
  trainer::TrainOptions opts;
  opts.config = cfg.model;
  opts.schedule = cfg.schedule;
  opts.mode = cfg.mode;
  opts.soc_weight = cfg.soc_weight;
  opts.seed = cfg.seed;
  const auto result = trainer::train(train_set, val_set, opts);

  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  const json config_json = to_json(cfg);
  write_json(dir / "config.json", config_json);
  vocab.save(dir / "vocab.txt");
  encoder::save_checkpoint(dir / "model.ckpt", result.params, cfg.model);
  {
    std::ostringstream h;
    result.history.write_csv(h);
    write_text(dir / "history.csv", h.str());
  }

  json manifest = {{"config_digest", digest_text(config_json.dump())},
                   {"config", config_json},
                   {"seed", cfg.seed},
                   {"mode", std::string(augment::mode_name(cfg.mode))},
                   {"soc_weight", cfg.soc_weight},
                   {"dataset_id", cfg.dataset_id},
                   {"inputs",
                    {{"train", input_ref(a.train)},
                     {"val", input_ref(a.val)},
                     {"lexicon", input_ref(cfg.lexicon)},
                     {"identity", input_ref(cfg.identity)},
                     {"vocab_exclude", input_ref(cfg.vocab_exclude)}}},
                   {"artifacts",
                    {{"checkpoint", "model.ckpt"},
                     {"vocab", "vocab.txt"},
                     {"history", "history.csv"},
                     {"config", "config.json"}}},
                   {"checkpoint_digest", digest_file(dir / "model.ckpt")},
                   {"training",
                    {{"steps", result.history.records.size()},
                     {"epochs", result.history.epochs},
                     {"stop_reason", result.history.stop_reason},
                     {"best_val_f1", result.history.best_val_f1.value_or(0.0)},
                     {"best_step", result.history.best_step}}}};
  if (!a.test.empty()) {
    const auto test_rows = datasets::read_canonical(a.test);
    const auto report = evaluate(test_rows, result.params, vocab, res, cfg);
    write_json(dir / "report.json", audit::to_json(report));
    manifest["inputs"]["test"] = input_ref(a.test);
    manifest["artifacts"]["report"] = "report.json";
    manifest["metrics"] = metrics_json(report);
  }
  write_json(dir / "manifest.json", manifest);
  out << manifest.dump(2) << '\n';
}

struct LoadedRun {
  RunConfig config;
  textprep::Vocab vocab;
  encoder::Checkpoint checkpoint;
  Resources resources;
};

LoadedRun load_run(const fs::path& dir) {
  LoadedRun r;
  r.config = run_config_from_json(read_json(dir / "config.json"));
  r.vocab = textprep::Vocab::load(dir / "vocab.txt");
  r.checkpoint = encoder::load_checkpoint(dir / "model.ckpt");
  r.config.model = r.checkpoint.config;
  if (static_cast<std::size_t>(r.config.model.vocab_size) != r.vocab.size()) {
    throw SchemaError("run " + dir.string() + ": vocabulary size does not match checkpoint");
  }
  r.resources = {load_subjectivity(r.config.lexicon), load_identity(r.config.identity)};
  return r;
}

struct EvalArgs {
  std::string run, data, out, format = "json", cells_csv;
};

void run_eval(const EvalArgs& a, std::ostream& out) {
  const auto run = load_run(a.run);
  const auto rows = datasets::read_canonical(a.data);
  const auto report = evaluate(rows, run.checkpoint.params, run.vocab, run.resources, run.config);
  const fs::path target = a.out.empty() ? fs::path(a.run) / "report.json" : fs::path(a.out);
  write_json(target, audit::to_json(report));

  const fs::path manifest_path = fs::path(a.run) / "manifest.json";
  if (fs::exists(manifest_path) && a.out.empty()) {
    auto manifest = read_json(manifest_path);
    manifest["inputs"]["test"] = input_ref(a.data);
    manifest["artifacts"]["report"] = "report.json";
    manifest["metrics"] = metrics_json(report);
    write_json(manifest_path, manifest);
  }
  if (a.format == "text") {
    out << audit::render_text(report);
  } else {
    out << metrics_json(report).dump(2) << '\n';
  }
}

void run_audit(const EvalArgs& a, std::ostream& out) {
  const auto run = load_run(a.run);
  const auto rows = datasets::read_canonical(a.data);
  const auto report = evaluate(rows, run.checkpoint.params, run.vocab, run.resources, run.config);
  if (!a.out.empty()) write_json(a.out, audit::to_json(report));
  if (!a.cells_csv.empty()) {
    std::ostringstream cells;
    audit::write_cell_csv(cells, report.bias);
    write_text(a.cells_csv, cells.str());
  }
  if (a.format == "json") {
    out << audit::to_json(report).dump(2) << '\n';
  } else {
    out << audit::render_text(report);
  }
}

// ---- compare ---------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> manifests;
  std::string out;
};

std::string model_name(const json& m) {
  std::string name = m.at("mode").get<std::string>();
  if (m.value("soc_weight", 0.0) > 0.0) name += "+soc";
  return name;
}

void run_compare(const CompareArgs& a, std::ostream& out) {
  // dataset -> model -> runs, kept sorted for stable output.
  std::map<std::string, std::map<std::string, std::vector<audit::RunMetrics>>> groups;
  for (const auto& path : a.manifests) {
    const auto m = read_json(path);
    if (!m.contains("metrics")) {
      throw SchemaError(path + ": manifest has no metrics; run eval on a test split first");
    }
    const auto& x = m.at("metrics");
    groups[m.value("dataset_id", std::string())][model_name(m)].push_back(
        {x.at("f1").get<double>(), x.at("fp").get<double>(), x.at("fn").get<double>()});
  }
  json result = json::object();
  for (const auto& [dataset, models] : groups) {
    std::vector<audit::NamedAggregate> rows;
    for (const auto& [name, runs] : models) rows.push_back({name, audit::aggregate(runs)});
    out << "dataset " << (dataset.empty() ? "-" : dataset) << "\n\n";
    out << audit::render_f1_table(rows) << '\n';
    out << audit::render_error_table(rows) << '\n';
    if (rows.size() == 2) out << audit::render_error_comparison(rows[0], rows[1]) << '\n';
    json jrows = json::object();
    for (const auto& r : rows) jrows[r.name] = audit::to_json(r.aggregate);
    result[dataset] = jrows;
  }
  if (!a.out.empty()) write_json(a.out, result);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subjectivity-aware toxic comment classification toolkit", "subsense"};
  app.require_subcommand(1);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Subjectivity score and identity-term matches");
  score_cmd->add_option("--text", score.text, "Comment text");
  score_cmd->add_option("--file", score.file, "File with one comment per line");
  score_cmd->add_option("--lexicon", score.lexicon, "Subjectivity lexicon (.xml or .tsv)");
  score_cmd->add_option("--identity", score.identity, "Identity term list");
  score_cmd->add_flag("--json", score.as_json, "One JSON object per comment");

  ConvertArgs convert;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a raw corpus to canonical CSV");
  convert_cmd->add_option("--kind", convert.kind, "ws | twitter18k | twitter42k | wiki | synthetic")
      ->required();
  convert_cmd->add_option("--input", convert.input, "Raw CSV/TSV")->required();
  convert_cmd->add_option("--output", convert.output, "Canonical CSV")->required();
  convert_cmd->add_option("--report", convert.report, "Write the conversion report here");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Stratified 80/10/10 split");
  split_cmd->add_option("--input", split.input, "Canonical CSV")->required();
  split_cmd->add_option("--seed", split.seed, "Shuffle seed")->required();
  split_cmd->add_option("--out-dir", split.out_dir, "Writes train.csv, val.csv, test.csv")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with planted subjectivity");
  synth_cmd->add_option("--n", synth.n, "Number of comments")->capture_default_str();
  synth_cmd->add_option("--theta", synth.theta, "Subjectivity threshold")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Label flip probability")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->required();
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier");
  train_cmd->add_option("--train", train.train, "Training split (canonical CSV)")->required();
  train_cmd->add_option("--val", train.val, "Validation split")->required();
  train_cmd->add_option("--test", train.test, "Optional test split evaluated after training");
  train_cmd->add_option("--out-dir", train.out_dir, "Run directory")->required();
  train_cmd->add_option("--mode", train.mode, "baseline | ss | so");
  train_cmd->add_option("--seed", train.seed, "Run seed")->required();
  train_cmd->add_option("--soc-weight", train.soc_weight, "Occlusion penalty weight");
  train_cmd->add_option("--config", train.config, "JSON config; flags override it");
  train_cmd->add_option("--lexicon", train.lexicon, "Subjectivity lexicon");
  train_cmd->add_option("--identity", train.identity, "Identity term list");
  train_cmd->add_option("--vocab-exclude", train.vocab_exclude, "Words kept out of the vocabulary");
  train_cmd->add_option("--dataset-id", train.dataset_id, "Dataset label used by compare");
  train_cmd->add_option("--kind", train.kind, "Corpus kind; picks the default --max-len");
  train_cmd->add_option("--d-model", train.d_model);
  train_cmd->add_option("--n-heads", train.n_heads);
  train_cmd->add_option("--n-layers", train.n_layers);
  train_cmd->add_option("--d-ff", train.d_ff);
  train_cmd->add_option("--max-len", train.max_len);
  train_cmd->add_option("--vocab-size", train.vocab_size);
  train_cmd->add_option("--min-freq", train.min_freq);
  train_cmd->add_option("--dropout", train.dropout);
  train_cmd->add_option("--batch-size", train.batch_size);
  train_cmd->add_option("--lr", train.lr);
  train_cmd->add_option("--val-every", train.val_every);
  train_cmd->add_option("--max-halvings", train.max_halvings);
  train_cmd->add_option("--max-epochs", train.max_epochs);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained run on a canonical CSV");
  eval_cmd->add_option("--run", eval.run, "Run directory")->required();
  eval_cmd->add_option("--data", eval.data, "Canonical CSV")->required();
  eval_cmd->add_option("--out", eval.out, "Report path (default: <run>/report.json)");
  eval_cmd->add_option("--format", eval.format, "json | text")->check(CLI::IsMember({"json", "text"}));

  EvalArgs audit_args;
  audit_args.format = "text";
  auto* audit_cmd = app.add_subcommand("audit", "Identity x outcome bias cells and error list");
  audit_cmd->add_option("--run", audit_args.run, "Run directory")->required();
  audit_cmd->add_option("--data", audit_args.data, "Canonical CSV")->required();
  audit_cmd->add_option("--out", audit_args.out, "Write the JSON report here");
  audit_cmd->add_option("--cells-csv", audit_args.cells_csv, "Per-cell subjectivity dump");
  audit_cmd->add_option("--format", audit_args.format, "json | text")
      ->check(CLI::IsMember({"json", "text"}));

  CompareArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "Aggregate run manifests into F1 and FP/FN tables");
  compare_cmd->add_option("manifests", compare.manifests, "manifest.json files")->required();
  compare_cmd->add_option("--out", compare.out, "Write the aggregate as JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*score_cmd) run_score(score, out);
    else if (*convert_cmd) run_convert(convert, out);
    else if (*split_cmd) run_split(split, out);
    else if (*synth_cmd) run_synth(synth, out);
    else if (*train_cmd) run_train(train, out);
    else if (*eval_cmd) run_eval(eval, out);
    else if (*audit_cmd) run_audit(audit_args, out);
    else if (*compare_cmd) run_compare(compare, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace subsense::cli
