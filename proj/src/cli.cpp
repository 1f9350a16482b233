#include "mlvat/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlvat/benchmark.hpp"
#include "mlvat/error.hpp"
#include "mlvat/probe.hpp"
#include "mlvat/synthetic.hpp"
#include "mlvat/trainer.hpp"

namespace fs = std::filesystem;

namespace mlvat {

namespace {

constexpr const char* kRecordsFile = "records.tsv";
constexpr const char* kStoreFile = "embeddings.mlve";

struct Corpus {
  std::vector<LabeledRecord> records;
  EmbeddingStore store;
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// Flags for every RunConfig key plus --config; explicit flags override the file.
struct RunFlags {
  std::string config_file;
  std::string data;
  std::string store;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "key=value run config file");
    cmd.add_option("--data", data, "data directory or record manifest (default: $MLVAT_DATA_DIR)");
    cmd.add_option("--store", store, "MLVE embedding store (default: <data>/embeddings.mlve)");
    for (const auto& [key, value] : config_entries(RunConfig{})) {
      std::string names = "--" + dashed(key);
      if (key == "target_language") names += ",--target";
      std::string shown = value;
      if (shown.empty()) shown = key == "eval_language" ? "<target>" : "<all other languages>";
      cmd.add_option(names, overrides[key], "default: " + shown);
    }
  }

  RunConfig resolve(RunConfig base = {}) const {
    RunConfig cfg = config_file.empty() ? base : load_config_file(config_file, base);
    for (const auto& [key, value] : overrides) {
      if (!value.empty()) apply_config_entry(cfg, key, value);
    }
    cfg.validate();
    return cfg;
  }
};

fs::path data_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MLVAT_DATA_DIR"); env && *env) return env;
  throw Error(Errc::InvalidConfig, "no data location: pass --data or set MLVAT_DATA_DIR");
}

Corpus load_corpus(const std::string& data_flag, const std::string& store_flag) {
  const fs::path root = data_root(data_flag);
  Corpus c;
  fs::path store_path = store_flag;
  if (fs::is_regular_file(root)) {
    c.records = read_manifest(root);
    if (store_path.empty()) store_path = root.parent_path() / kStoreFile;
  } else if (fs::is_directory(root)) {
    c.records = fs::exists(root / kRecordsFile) ? read_manifest(root / kRecordsFile) : load_semeval_dir(root);
    if (store_path.empty()) store_path = root / kStoreFile;
  } else {
    throw Error(Errc::NotFound, "data location does not exist: " + root.string());
  }
  if (c.records.empty()) throw Error(Errc::NotFound, "no records found under " + root.string());
  c.store = EmbeddingStore::open(store_path);
  return c;
}

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::Io, "cannot write " + tmp.string());
    os << text;
    if (!os.flush()) throw Error(Errc::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_atomic(path, text);
  }
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// "1,2,5" or "1-5".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split_commas(text)) {
    try {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash));
        const auto hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(part);
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw Error(Errc::InvalidConfig, "bad seed list entry '" + part + "'");
    }
  }
  return seeds;
}

struct TrainCmd {
  RunFlags run;
  std::string out_path;
  std::string params_path;
  bool timing = false;
};

int do_train(const TrainCmd& t, std::ostream& out) {
  const RunConfig cfg = t.run.resolve();
  const Corpus corpus = load_corpus(t.run.data, t.run.store);
  const RunResult result = run_experiment(cfg, corpus.records, corpus.store);
  if (!t.params_path.empty()) save_params(t.params_path, result.params);
  emit(t.out_path, result_to_json(result, t.timing) + "\n", out);
  return 0;
}

struct SweepCmd {
  RunFlags run;
  std::string axis;
  std::string values;
  std::string seeds;
  std::size_t jobs = 1;
  std::string out_path;
  std::string csv_path;
};

int do_sweep(const SweepCmd& s, std::ostream& out) {
  const RunConfig base = s.run.resolve();
  const SweepAxis axis = parse_axis(s.axis);
  const auto cells = expand_sweep(base, axis, split_commas(s.values), parse_seeds(s.seeds));
  const Corpus corpus = load_corpus(s.run.data, s.run.store);
  const auto results = run_sweep(cells, corpus.records, corpus.store, std::max<std::size_t>(1, s.jobs));

  std::string jsonl;
  std::string csv = sweep_csv_header() + "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    jsonl += result_to_json(results[i]) + "\n";
    csv += sweep_csv_row(axis, cells[i], results[i]) + "\n";
  }
  emit(s.out_path, jsonl, out);
  emit(s.csv_path, csv, out);
  return 0;
}

struct ProbeCmd {
  RunFlags run;
  std::size_t jobs = 1;
  std::string csv_path;
};

int do_probe(const ProbeCmd& p, std::ostream& out) {
  const RunConfig cfg = p.run.resolve();
  const Corpus corpus = load_corpus(p.run.data, p.run.store);
  const LayerEvalReport report = probe_layers(corpus.store, corpus.records, cfg, std::max<std::size_t>(1, p.jobs));
  std::ostringstream os;
  os << std::setprecision(10);
  write_probe_csv(os, report);
  emit(p.csv_path, os.str(), out);
  return 0;
}

struct GenSynthCmd {
  bool benchmark = false;
  std::size_t clusters = 4;
  std::size_t per_cluster = 250;
  std::size_t dim = 32;
  std::size_t labels = 6;
  double noise = 0.5;
  double spread = 1.0;
  std::size_t domains = 1;
  double domain_shift = 0.0;
  std::size_t layers = 1;
  double train_fraction = 0.6;
  double dev_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string out_dir;
  CLI::App* app = nullptr;
};

int do_gen_synth(const GenSynthCmd& g, std::ostream& out) {
  SynthSpec spec = g.benchmark ? standard_benchmark_spec(g.seed) : SynthSpec{};
  auto given = [&g](const char* name) { return !g.benchmark || g.app->count(name) > 0; };
  if (given("--per-cluster")) spec.n_per_cluster = g.per_cluster;
  if (given("--dim")) spec.dim = g.dim;
  if (given("--labels")) spec.n_labels = g.labels;
  if (given("--noise")) spec.noise_sigma = g.noise;
  if (given("--spread")) spec.center_spread = g.spread;
  if (given("--domains")) spec.domains = g.domains;
  if (given("--domain-shift")) spec.domain_shift_sigma = g.domain_shift;
  if (given("--layers")) spec.n_layers = g.layers;
  if (given("--train-fraction")) spec.train_fraction = g.train_fraction;
  if (given("--dev-fraction")) spec.dev_fraction = g.dev_fraction;
  if (given("--clusters") || given("--labels")) {
    spec.label_patterns = chained_label_patterns(g.app->count("--clusters") || !g.benchmark ? g.clusters : 4, spec.n_labels);
  }
  spec.seed = g.seed;

  const fs::path dir = data_root(g.out_dir);
  const SynthData data = gen_synthetic(spec);
  fs::create_directories(dir);
  write_manifest(dir / kRecordsFile, data.records);
  data.store.write(dir / kStoreFile);

  nlohmann::ordered_json j;
  j["records"] = (dir / kRecordsFile).string();
  j["store"] = (dir / kStoreFile).string();
  j["n_records"] = data.records.size();
  j["n_layers"] = data.store.n_layers();
  j["dim"] = data.store.dim();
  j["languages"] = languages_of(data.records);
  out << j.dump() << "\n";
  return 0;
}

struct InspectCmd {
  std::string store;
  std::size_t head = 5;
};

int do_inspect(const InspectCmd& c, std::ostream& out) {
  const EmbeddingStore store = EmbeddingStore::open(c.store);
  nlohmann::ordered_json j;
  j["path"] = c.store;
  j["version"] = kEmbeddingStoreVersion;
  j["n_sentences"] = store.size();
  j["n_layers"] = store.n_layers();
  j["dim"] = store.dim();
  const auto n = std::min(c.head, store.size());
  j["ids"] = std::vector<std::string>(store.ids().begin(), store.ids().begin() + static_cast<std::ptrdiff_t>(n));
  out << j.dump() << "\n";
  return 0;
}

struct ReportCmd {
  std::vector<std::string> inputs;
  bool csv = false;
};

int do_report(const ReportCmd& r, std::ostream& out) {
  struct Group {
    nlohmann::ordered_json config;
    std::vector<double> ji, mif1, maf1;
  };
  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& path : r.inputs) {
    std::ifstream is(path);
    if (!is) throw Error(Errc::NotFound, "cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::ordered_json j;
      try {
        j = nlohmann::ordered_json::parse(line);
        auto cfg = j.at("config");
        cfg.erase("seed");
        const std::string key = cfg.dump();
        auto [it, inserted] = index.emplace(key, groups.size());
        if (inserted) groups.push_back({cfg, {}, {}, {}});
        Group& g = groups[it->second];
        g.ji.push_back(j.at("metrics").at("jaccard").get<double>());
        g.mif1.push_back(j.at("metrics").at("micro_f1").get<double>());
        g.maf1.push_back(j.at("metrics").at("macro_f1").get<double>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedRow, path + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  if (groups.empty()) throw Error(Errc::EmptyBatch, "no result records to report");

  // Label each group by the config keys that differ between groups.
  std::vector<std::string> varying;
  for (const auto& [key, value] : groups.front().config.items()) {
    for (const auto& g : groups) {
      if (g.config.value(key, nlohmann::ordered_json()) != value) {
        varying.push_back(key);
        break;
      }
    }
  }
  auto label = [&varying](const Group& g) {
    std::string s;
    for (const auto& k : varying) {
      if (!s.empty()) s += ' ';
      s += k + "=" + g.config.value(k, std::string());
    }
    return s.empty() ? std::string("all") : s;
  };

  auto pct = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * v;
    return os.str();
  };
  if (r.csv) {
    out << "group,n,jaccard_mean,jaccard_std,micro_f1_mean,micro_f1_std,macro_f1_mean,macro_f1_std\n";
    for (const auto& g : groups) {
      const auto a = summarize(g.ji), b = summarize(g.mif1), c = summarize(g.maf1);
      out << '"' << label(g) << "\"," << g.ji.size() << ',' << a.mean << ',' << a.stddev << ',' << b.mean << ','
          << b.stddev << ',' << c.mean << ',' << c.stddev << '\n';
    }
    return 0;
  }
  std::size_t width = 5;
  for (const auto& g : groups) width = std::max(width, label(g).size());
  out << std::left << std::setw(static_cast<int>(width)) << "group" << "  " << std::right << std::setw(3) << "n"
      << std::setw(16) << "JI" << std::setw(16) << "MiF1" << std::setw(16) << "MaF1" << '\n';
  for (const auto& g : groups) {
    const auto a = summarize(g.ji), b = summarize(g.mif1), c = summarize(g.maf1);
    auto cell = [&pct](const Summary& s) { return pct(s.mean) + " +- " + pct(s.stddev); };
    out << std::left << std::setw(static_cast<int>(width)) << label(g) << "  " << std::right << std::setw(3)
        << g.ji.size() << std::setw(16) << cell(a) << std::setw(16) << cell(b) << std::setw(16) << cell(c) << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Multilabel virtual adversarial training on fixed sentence embeddings", "mlvat");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  TrainCmd train;
  auto* train_cmd = app.add_subcommand("train", "train one head and emit a JSON result record");
  train.run.attach(*train_cmd);
  train_cmd->add_option("--out", train.out_path, "write the JSON line here instead of stdout");
  train_cmd->add_option("--save-params", train.params_path, "write the trained head as an MLVP checkpoint");
  train_cmd->add_flag("--timing", train.timing, "include wall-clock seconds in the record");

  SweepCmd sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over one axis and several seeds");
  sweep.run.attach(*sweep_cmd);
  sweep_cmd->add_option("--axis", sweep.axis, "epsilon|alpha|rho|ratio|unlabeled_batch|divergence|mode|seed")
      ->required();
  sweep_cmd->add_option("--values", sweep.values, "comma-separated axis values")->required();
  sweep_cmd->add_option("--seeds", sweep.seeds, "seed list, e.g. 1,2,3 or 1-5 (default: --seed)");
  sweep_cmd->add_option("--jobs", sweep.jobs, "parallel workers")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep.out_path, "JSON-lines results file (default: stdout)");
  sweep_cmd->add_option("--csv", sweep.csv_path, "CSV summary file (default: stdout)");

  ProbeCmd probe;
  auto* probe_cmd = app.add_subcommand("probe", "per-layer and cumulative-layer probing");
  probe.run.attach(*probe_cmd);
  probe_cmd->add_option("--jobs", probe.jobs, "parallel workers")->check(CLI::PositiveNumber);
  probe_cmd->add_option("--csv", probe.csv_path, "CSV report file (default: stdout)");

  GenSynthCmd gen;
  auto* gen_cmd = app.add_subcommand("gen-synth", "write a synthetic record manifest and MLVE store");
  gen.app = gen_cmd;
  gen_cmd->add_flag("--benchmark", gen.benchmark, "start from the standard benchmark spec");
  gen_cmd->add_option("--clusters", gen.clusters, "cluster count")->capture_default_str();
  gen_cmd->add_option("--per-cluster", gen.per_cluster, "points per cluster and domain")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim)->capture_default_str();
  gen_cmd->add_option("--labels", gen.labels)->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "within-cluster sigma")->capture_default_str();
  gen_cmd->add_option("--spread", gen.spread, "cluster center sigma")->capture_default_str();
  gen_cmd->add_option("--domains", gen.domains)->capture_default_str();
  gen_cmd->add_option("--domain-shift", gen.domain_shift, "per-domain offset sigma")->capture_default_str();
  gen_cmd->add_option("--layers", gen.layers)->capture_default_str();
  gen_cmd->add_option("--train-fraction", gen.train_fraction)->capture_default_str();
  gen_cmd->add_option("--dev-fraction", gen.dev_fraction)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--out", gen.out_dir, "output directory (default: $MLVAT_DATA_DIR)");

  InspectCmd inspect;
  auto* inspect_cmd = app.add_subcommand("inspect-store", "print the header of an MLVE store");
  inspect_cmd->add_option("store", inspect.store)->required();
  inspect_cmd->add_option("--head", inspect.head, "number of ids to list")->capture_default_str();

  ReportCmd report;
  auto* report_cmd = app.add_subcommand("report", "aggregate JSON-lines results over seeds");
  report_cmd->add_option("inputs", report.inputs, "result files")->required();
  report_cmd->add_flag("--csv", report.csv, "CSV instead of an aligned table");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "ERR:" << errc_name(Errc::InvalidConfig) << ": " << e.what() << "\n";
    return 1;
  }

  try {
    if (*train_cmd) return do_train(train, out);
    if (*sweep_cmd) return do_sweep(sweep, out);
    if (*probe_cmd) return do_probe(probe, out);
    if (*gen_cmd) return do_gen_synth(gen, out);
    if (*inspect_cmd) return do_inspect(inspect, out);
    if (*report_cmd) return do_report(report, out);
  } catch (const Error& e) {
    err << "ERR:" << errc_name(e.code()) << ": " << e.what() << "\n";
    return is_config_error(e.code()) ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "ERR:" << errc_name(Errc::Io) << ": " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mlvat
