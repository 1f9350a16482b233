#include "mlvat/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "mlvat/error.hpp"

namespace mlvat {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kLossStream = 0x1055;
constexpr std::size_t kEvalChunk = 512;

[[noreturn]] void bad_config(const std::string& why) { throw Error(Errc::InvalidConfig, why); }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    bad_config("'" + std::string(key) + "' expects a number, got '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    bad_config("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

int parse_int(std::string_view key, std::string_view text) {
  int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    bad_config("'" + std::string(key) + "' expects an integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad_config("'" + std::string(key) + "' expects true/false, got '" + std::string(text) + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string_view part = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!part.empty()) out.emplace_back(part);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

std::string_view pooling_name(LayerPooling p) { return p == LayerPooling::Single ? "single" : "cumulative"; }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

Mat64 label_matrix(const std::vector<const LabeledRecord*>& recs, std::size_t n_labels) {
  Mat64 y(recs.size(), n_labels);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i]->labels.size() != n_labels) {
      throw Error(Errc::ShapeMismatch, "record '" + recs[i]->id + "' has " + std::to_string(recs[i]->labels.size()) +
                                           " labels, expected " + std::to_string(n_labels));
    }
    for (std::size_t k = 0; k < n_labels; ++k) y(i, k) = recs[i]->labels[k];
  }
  return y;
}

RunResult train(const RunConfig& cfg, const std::vector<LabeledRecord>& records, const EmbeddingStore& store,
                const StepObserver& observer) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const bool adversarial = cfg.mode == TrainMode::Mlvat;

  const auto langs = languages_of(records);
  if (std::find(langs.begin(), langs.end(), cfg.target_language) == langs.end()) {
    bad_config("target language '" + cfg.target_language + "' does not occur in the corpus");
  }

  std::vector<LabeledRecord> others;
  if (adversarial) {
    const auto sources = cfg.unlabeled_sources.empty() ? langs : cfg.unlabeled_sources;
    for (const auto& r : records) {
      if (r.language != cfg.target_language &&
          std::find(sources.begin(), sources.end(), r.language) != sources.end()) {
        others.push_back(r);
      }
    }
  }
  SemiSupSplit split = make_semisup_split(records, cfg.target_language, cfg.rho, others, cfg.seed,
                                          cfg.train_on_train_plus_dev);
  if (!adversarial) split.unlabeled_ids.clear();
  if (split.labeled_ids.empty()) bad_config("labelled pool is empty for rho=" + format_double(cfg.rho));

  std::unordered_map<std::string, const LabeledRecord*> by_id;
  by_id.reserve(records.size());
  for (const auto& r : records) by_id.emplace(r.id, &r);
  std::vector<const LabeledRecord*> labeled;
  labeled.reserve(split.labeled_ids.size());
  for (const auto& id : split.labeled_ids) labeled.push_back(by_id.at(id));
  const std::size_t n_labels = labeled.front()->labels.size();

  const Mat64 labeled_x = gather_features(store, split.labeled_ids, cfg.features);
  const Mat64 labeled_y = label_matrix(labeled, n_labels);
  const Mat64 unlabeled_x = gather_features(store, split.unlabeled_ids, cfg.features);

  const std::string& eval_language = cfg.eval_language.empty() ? cfg.target_language : cfg.eval_language;
  if (std::find(langs.begin(), langs.end(), eval_language) == langs.end()) {
    bad_config("eval language '" + eval_language + "' does not occur in the corpus");
  }
  std::vector<LabeledRecord> eval_records;
  for (const auto& r : records) {
    if (r.language == eval_language && r.split == cfg.eval_split) eval_records.push_back(r);
  }

  Rng init_rng(cfg.seed, kInitStream);
  RunResult result;
  result.config = cfg;
  result.seed = cfg.seed;
  result.params = init_params(init_rng, store.dim(), cfg.hidden_dim, n_labels);
  result.n_labeled = labeled_x.rows;
  result.n_unlabeled = unlabeled_x.rows;
  result.n_eval = eval_records.size();

  AdamWConfig hp;
  hp.lr = cfg.lr;
  hp.weight_decay = cfg.weight_decay;
  OptimizerState opt = OptimizerState::init(result.params, hp);

  BatchPlan plan = cfg.plan;
  plan.shuffle_seed = cfg.seed;
  if (!adversarial) plan.unlabeled_batch = 0;
  BatchComposer composer(labeled_x, labeled_y, unlabeled_x, plan);
  Rng loss_rng(cfg.seed, kLossStream);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    composer.begin_epoch();
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    while (composer.has_next()) {
      const Batch batch = composer.next_batch();
      double loss = 0.0;
      MlpGrads grads;
      if (adversarial) {
        MlvatLoss l = mlvat_loss(result.params, batch.labeled_x, batch.labeled_y, batch.unlabeled_x, cfg.vat,
                                 cfg.dropout, loss_rng);
        loss = l.total;
        grads = std::move(l.grads);
      } else {
        LossAndGrads l = supervised_loss(result.params, batch.labeled_x, batch.labeled_y, cfg.dropout, loss_rng);
        loss = l.loss;
        grads = std::move(l.grads);
      }
      if (!std::isfinite(loss)) {
        throw Error(Errc::NumericalFailure, "non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      adamw_step(opt, result.params, grads);
      if (!all_finite(result.params)) {
        throw Error(Errc::NumericalFailure, "non-finite parameters at epoch " + std::to_string(epoch + 1));
      }
      ++result.steps;
      loss_sum += loss;
      ++n_batches;
      if (observer) observer(result.steps, result.params, loss);
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(n_batches));
  }

  result.report = evaluate(result.params, eval_records, store, cfg.features, cfg.threshold);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace

std::string_view mode_name(TrainMode m) noexcept { return m == TrainMode::Sup ? "sup" : "mlvat"; }

TrainMode parse_mode(std::string_view name) {
  if (name == "sup") return TrainMode::Sup;
  if (name == "mlvat") return TrainMode::Mlvat;
  bad_config("unknown mode '" + std::string(name) + "' (expected sup or mlvat)");
}

void RunConfig::validate() const {
  vat.validate();
  if (!(rho > 0.0 && rho <= 1.0)) bad_config("rho must lie in (0, 1]");
  if (plan.labeled_batch == 0) bad_config("labeled_batch must be >= 1");
  if (!(lr > 0.0)) bad_config("lr must be > 0");
  if (!(weight_decay >= 0.0)) bad_config("weight_decay must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad_config("dropout must lie in [0, 1)");
  if (hidden_dim == 0) bad_config("hidden_dim must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) bad_config("threshold must lie in [0, 1]");
  if (target_language.empty()) bad_config("target_language is required");
  if (train_on_train_plus_dev && eval_split == Split::Dev) {
    bad_config("eval_split=dev cannot be combined with train_on_train_plus_dev");
  }
  if (eval_split == Split::Train) bad_config("eval_split must be dev or test");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  return {
      {"mode", std::string(mode_name(cfg.mode))},
      {"target_language", cfg.target_language},
      {"rho", format_double(cfg.rho)},
      {"epsilon", format_double(cfg.vat.epsilon)},
      {"alpha", format_double(cfg.vat.alpha)},
      {"divergence", std::string(divergence_name(cfg.vat.divergence))},
      {"power_iters", std::to_string(cfg.vat.power_iters)},
      {"labeled_batch", std::to_string(cfg.plan.labeled_batch)},
      {"unlabeled_batch", std::to_string(cfg.plan.unlabeled_batch)},
      {"epochs", std::to_string(cfg.epochs)},
      {"lr", format_double(cfg.lr)},
      {"weight_decay", format_double(cfg.weight_decay)},
      {"dropout", format_double(cfg.dropout)},
      {"hidden_dim", std::to_string(cfg.hidden_dim)},
      {"seed", std::to_string(cfg.seed)},
      {"train_on_train_plus_dev", cfg.train_on_train_plus_dev ? "true" : "false"},
      {"eval_split", std::string(split_name(cfg.eval_split))},
      {"eval_language", cfg.eval_language},
      {"unlabeled_sources", join(cfg.unlabeled_sources)},
      {"threshold", format_double(cfg.threshold)},
      {"layer", std::to_string(cfg.features.layer)},
      {"layer_pooling", std::string(pooling_name(cfg.features.pooling))},
  };
}

void apply_config_entry(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "mode") cfg.mode = parse_mode(value);
  else if (key == "target_language" || key == "target") cfg.target_language = std::string(value);
  else if (key == "rho") cfg.rho = parse_double(key, value);
  else if (key == "epsilon") cfg.vat.epsilon = parse_double(key, value);
  else if (key == "alpha") cfg.vat.alpha = parse_double(key, value);
  else if (key == "divergence") cfg.vat.divergence = parse_divergence(value);
  else if (key == "power_iters") cfg.vat.power_iters = parse_uint(key, value);
  else if (key == "labeled_batch") cfg.plan.labeled_batch = parse_uint(key, value);
  else if (key == "unlabeled_batch") cfg.plan.unlabeled_batch = parse_uint(key, value);
  else if (key == "epochs") cfg.epochs = parse_uint(key, value);
  else if (key == "lr") cfg.lr = parse_double(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
  else if (key == "dropout") cfg.dropout = parse_double(key, value);
  else if (key == "hidden_dim") cfg.hidden_dim = parse_uint(key, value);
  else if (key == "seed") cfg.seed = parse_uint(key, value);
  else if (key == "train_on_train_plus_dev") cfg.train_on_train_plus_dev = parse_bool(key, value);
  else if (key == "eval_split") {
    try {
      cfg.eval_split = parse_split(value);
    } catch (const Error&) {
      bad_config("eval_split must be dev or test");
    }
  } else if (key == "eval_language") cfg.eval_language = std::string(value);
  else if (key == "unlabeled_sources") cfg.unlabeled_sources = split_list(value);
  else if (key == "threshold") cfg.threshold = parse_double(key, value);
  else if (key == "layer") cfg.features.layer = parse_int(key, value);
  else if (key == "layer_pooling") {
    if (value == "single") cfg.features.pooling = LayerPooling::Single;
    else if (value == "cumulative") cfg.features.pooling = LayerPooling::CumulativeMean;
    else bad_config("layer_pooling must be single or cumulative");
  } else {
    bad_config("unknown config key '" + std::string(key) + "'");
  }
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + "=" + v + "\n";
  return out;
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad_config("config line " + std::to_string(line_no) + ": expected key=value");
    apply_config_entry(base, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) bad_config("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

RunResult train_supervised(const RunConfig& cfg, const std::vector<LabeledRecord>& records,
                           const EmbeddingStore& store, const StepObserver& observer) {
  if (cfg.mode != TrainMode::Sup) bad_config("train_supervised requires mode=sup");
  return train(cfg, records, store, observer);
}

RunResult train_mlvat(const RunConfig& cfg, const std::vector<LabeledRecord>& records, const EmbeddingStore& store,
                      const StepObserver& observer) {
  if (cfg.mode != TrainMode::Mlvat) bad_config("train_mlvat requires mode=mlvat");
  return train(cfg, records, store, observer);
}

RunResult run_experiment(const RunConfig& cfg, const std::vector<LabeledRecord>& records,
                         const EmbeddingStore& store, const StepObserver& observer) {
  return train(cfg, records, store, observer);
}

MetricReport evaluate(const MlpParams& params, const std::vector<LabeledRecord>& records, const EmbeddingStore& store,
                      const FeatureSpec& features, double threshold) {
  MetricAccumulator acc(params.d_out());
  for (std::size_t begin = 0; begin < records.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(records.size(), begin + kEvalChunk);
    std::vector<std::string> ids;
    std::vector<const LabeledRecord*> chunk;
    for (std::size_t i = begin; i < end; ++i) {
      ids.push_back(records[i].id);
      chunk.push_back(&records[i]);
    }
    const Mat64 x = gather_features(store, ids, features);
    const LabelMatrix gold = LabelMatrix::from_dense(label_matrix(chunk, params.d_out()));
    acc.add(gold, predict_labels(predict_logits(params, x), threshold));
  }
  return acc.report(threshold);
}

std::string result_to_json(const RunResult& result, bool include_timing) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_entries(result.config)) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = result.seed;
  j["metrics"] = {{"jaccard", result.report.jaccard},
                  {"micro_f1", result.report.micro_f1},
                  {"macro_f1", result.report.macro_f1},
                  {"threshold", result.report.threshold},
                  {"n_samples", result.report.n_samples},
                  {"per_label_f1", result.report.per_label_f1}};
  j["epoch_losses"] = result.epoch_losses;
  j["n_labeled"] = result.n_labeled;
  j["n_unlabeled"] = result.n_unlabeled;
  j["n_eval"] = result.n_eval;
  j["steps"] = result.steps;
  if (include_timing) j["wall_seconds"] = result.wall_seconds;
  return j.dump();
}

std::string_view axis_name(SweepAxis a) noexcept {
  switch (a) {
    case SweepAxis::Epsilon: return "epsilon";
    case SweepAxis::Alpha: return "alpha";
    case SweepAxis::Rho: return "rho";
    case SweepAxis::Ratio: return "ratio";
    case SweepAxis::UnlabeledBatch: return "unlabeled_batch";
    case SweepAxis::Divergence: return "divergence";
    case SweepAxis::Mode: return "mode";
    case SweepAxis::Seed: return "seed";
  }
  return "unknown";
}

SweepAxis parse_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::Epsilon, SweepAxis::Alpha, SweepAxis::Rho, SweepAxis::Ratio,
                      SweepAxis::UnlabeledBatch, SweepAxis::Divergence, SweepAxis::Mode, SweepAxis::Seed}) {
    if (axis_name(a) == name) return a;
  }
  bad_config("unknown sweep axis '" + std::string(name) + "'");
}

std::vector<SweepCell> expand_sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                    const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) bad_config("sweep needs at least one value");
  std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
  if (axis == SweepAxis::Seed) seed_list = {base.seed};

  std::vector<SweepCell> cells;
  for (const auto& value : values) {
    for (std::uint64_t seed : seed_list) {
      RunConfig cfg = base;
      cfg.seed = seed;
      switch (axis) {
        case SweepAxis::Epsilon: apply_config_entry(cfg, "epsilon", value); break;
        case SweepAxis::Alpha: apply_config_entry(cfg, "alpha", value); break;
        case SweepAxis::Rho: apply_config_entry(cfg, "rho", value); break;
        case SweepAxis::UnlabeledBatch: apply_config_entry(cfg, "unlabeled_batch", value); break;
        case SweepAxis::Divergence: apply_config_entry(cfg, "divergence", value); break;
        case SweepAxis::Mode: apply_config_entry(cfg, "mode", value); break;
        case SweepAxis::Seed: apply_config_entry(cfg, "seed", value); break;
        case SweepAxis::Ratio:
          cfg.plan.unlabeled_batch = parse_uint("ratio", value) * cfg.plan.labeled_batch;
          break;
      }
      cfg.validate();
      cells.push_back({value, std::move(cfg)});
    }
  }
  return cells;
}

std::vector<RunResult> run_sweep(const std::vector<SweepCell>& cells, const std::vector<LabeledRecord>& records,
                                 const EmbeddingStore& store, std::size_t jobs) {
  std::vector<RunResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        results[i] = run_experiment(cells[i].config, records, store);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
        return;
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::string sweep_csv_header() {
  return "axis,value,mode,seed,rho,epsilon,alpha,divergence,unlabeled_batch,jaccard,micro_f1,macro_f1,final_loss";
}

std::string sweep_csv_row(SweepAxis axis, const SweepCell& cell, const RunResult& r) {
  const RunConfig& c = r.config;
  std::ostringstream os;
  os << axis_name(axis) << ',' << cell.value << ',' << mode_name(c.mode) << ',' << c.seed << ','
     << format_double(c.rho) << ',' << format_double(c.vat.epsilon) << ',' << format_double(c.vat.alpha) << ','
     << divergence_name(c.vat.divergence) << ',' << c.plan.unlabeled_batch << ',' << format_double(r.report.jaccard)
     << ',' << format_double(r.report.micro_f1) << ',' << format_double(r.report.macro_f1) << ','
     << (r.epoch_losses.empty() ? std::string("nan") : format_double(r.epoch_losses.back()));
  return os.str();
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace mlvat
