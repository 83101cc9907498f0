#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "gseo/common.hpp"
#include "gseo/corpus.hpp"
#include "gseo/evaluator.hpp"
#include "gseo/gateway.hpp"
#include "gseo/optimizer.hpp"
#include "gseo/prompts.hpp"
#include "gseo/simulator.hpp"
#include "gseo/text.hpp"

namespace gseo {

struct RunConfig {
  fs::path corpus_path;
  Adapter adapter = Adapter::Canonical;
  SubsetFilter filter;
  std::vector<MethodKind> methods;
  Modality modality = Modality::Multimodal;
  int n_runs = 3;
  int64_t seed_base = 0;
  std::string backend_kind = "mock";  // live | mock | replay
  std::string backend_id = "default";
  std::string base_url;
  std::string generator_model = "glm-4-9b";
  std::string judge_model = "glm-4-9b";
  std::string vlm_model = "qwen-2.5-vl-7b";
  double gen_temperature = 0.7;
  fs::path cache_dir = ".gseo-cache";
  fs::path prompts_dir;  // optional override directory
  int concurrency = 4;
  fs::path output_dir;  // empty: compute only, write nothing
};

// One row per (sample, target source, method, run). The improvement fields
// are computed from run-mean scores and therefore repeat across the arm's
// rows. A failed arm yields a single row with `error` set and no scores.
struct ExperimentRecord {
  std::string sample_id;
  std::string source_id;
  std::string dataset;
  MethodKind method;
  Modality modality = Modality::Unimodal;
  int run_index = 0;
  int n_runs = 0;
  VisibilityScore before_score;
  VisibilityScore after_score;
  std::array<double, 7> improvement_per_dimension{};
  double improvement_average = 0;
  std::string optimized_digest;
  std::string before_prompt_digest;
  std::string after_prompt_digest;
  std::string before_response_digest;
  std::string after_response_digest;
  std::string error;  // empty = success row
};

enum class SummaryMode { ByDataset, ByDimension };

// Rows ordered by method rank; columns fixed by the report shape. Cells hold
// pre-rounded means (mean of per-sample improvements); rendering rounds to
// two decimals, half away from zero. Unbacked cells render empty.
struct SummaryTable {
  std::vector<std::string> columns;     // without the leading "Method"
  std::vector<std::string> row_labels;
  std::vector<std::vector<std::optional<double>>> cells;

  std::string to_csv() const {
    std::string out = "Method";
    for (const auto& c : columns) out += "," + c;
    out += "\n";
    char buf[32];
    for (size_t r = 0; r < row_labels.size(); ++r) {
      out += row_labels[r];
      for (size_t c = 0; c < columns.size(); ++c) {
        out += ",";
        if (cells[r][c]) {
          double rounded = std::llround(*cells[r][c] * 100.0) / 100.0;
          std::snprintf(buf, sizeof(buf), "%.2f", rounded);
          out += buf;
        }
      }
      out += "\n";
    }
    return out;
  }
};

inline const std::array<const char*, 6>& dataset_columns() {
  static const std::array<const char*, 6> cols = {"Arxiv", "Manual", "Recipe",
                                                  "Web",   "Wiki",   "WIT"};
  return cols;
}

inline const std::array<const char*, 8>& dimension_columns() {
  static const std::array<const char*, 8> cols = {"Rele.", "Infl.", "Dive.", "Uniq.",
                                                  "Clic.", "Sub.Posi.", "Sub.Volu.", "Average"};
  return cols;
}

inline std::string dataset_column_for(const std::string& dataset) {
  if (dataset == "arxiv") return "Arxiv";
  if (dataset == "manual") return "Manual";
  if (dataset == "recipe") return "Recipe";
  if (dataset == "web") return "Web";
  if (dataset == "wiki") return "Wiki";
  if (dataset == "wit") return "WIT";
  return dataset;
}

namespace detail {

struct MethodLess {
  bool operator()(const MethodKind& a, const MethodKind& b) const {
    return method_rank(a) < method_rank(b);
  }
};

// Per-sample improvement: every run row of an arm repeats the arm value, so
// collapse rows to arms first, then arms to samples.
inline std::map<std::string, double> per_sample_means(
    const std::vector<const ExperimentRecord*>& rows,
    const std::function<double(const ExperimentRecord&)>& value) {
  std::map<std::string, std::map<std::string, double>> arm_values;  // sample -> source -> value
  for (const auto* r : rows) arm_values[r->sample_id][r->source_id] = value(*r);
  std::map<std::string, double> out;
  for (const auto& [sample, arms] : arm_values) {
    double sum = 0;
    for (const auto& [_, v] : arms) sum += v;
    out[sample] = sum / static_cast<double>(arms.size());
  }
  return out;
}

}  // namespace detail

inline SummaryTable summarize(const std::vector<ExperimentRecord>& records, SummaryMode mode) {
  std::vector<const ExperimentRecord*> ok;
  for (const auto& r : records) {
    if (r.error.empty()) ok.push_back(&r);
  }
  if (ok.empty()) raise(ErrorCode::EmptyRecords, "no successful records to summarize");

  std::set<MethodKind, detail::MethodLess> methods;
  for (const auto* r : ok) methods.insert(r->method);
  std::set<CaptionVariant> variants;
  for (const auto& m : methods) {
    if (m.is_capt_addi()) variants.insert(m.variant.value_or(CaptionVariant::Refined));
  }

  // The dataset table uses the plain method name unless several caption
  // variants are being compared; the dimension table always qualifies them.
  auto row_label = [&](const MethodKind& m) {
    if (!m.is_capt_addi()) return method_string(m);
    if (mode == SummaryMode::ByDimension || variants.size() > 1)
      return variant_report_label(m.variant.value_or(CaptionVariant::Refined));
    return std::string("capt_addi");
  };

  SummaryTable table;
  if (mode == SummaryMode::ByDataset) {
    for (const auto* c : dataset_columns()) table.columns.push_back(c);
  } else {
    for (const auto* c : dimension_columns()) table.columns.push_back(c);
  }

  for (const auto& m : methods) {
    table.row_labels.push_back(row_label(m));
    std::vector<std::optional<double>> row(table.columns.size());

    if (mode == SummaryMode::ByDataset) {
      for (size_t c = 0; c < table.columns.size(); ++c) {
        std::vector<const ExperimentRecord*> rows;
        for (const auto* r : ok) {
          if (r->method == m && dataset_column_for(r->dataset) == table.columns[c])
            rows.push_back(r);
        }
        if (rows.empty()) continue;
        auto by_sample = detail::per_sample_means(
            rows, [](const ExperimentRecord& r) { return r.improvement_average; });
        double sum = 0;
        for (const auto& [_, v] : by_sample) sum += v;
        row[c] = sum / static_cast<double>(by_sample.size());
      }
    } else {
      std::vector<const ExperimentRecord*> rows;
      for (const auto* r : ok) {
        if (r->method == m) rows.push_back(r);
      }
      for (size_t c = 0; c < table.columns.size(); ++c) {
        if (rows.empty()) continue;
        size_t dim = c;  // columns 0..6 are the dimensions, 7 is the average
        auto by_sample = detail::per_sample_means(rows, [dim](const ExperimentRecord& r) {
          return dim < 7 ? r.improvement_per_dimension[dim] : r.improvement_average;
        });
        double sum = 0;
        for (const auto& [_, v] : by_sample) sum += v;
        row[c] = sum / static_cast<double>(by_sample.size());
      }
    }
    table.cells.push_back(std::move(row));
  }
  return table;
}

// Content-addressed text artifacts under <dir>/<2 hex>/<digest>.txt.
class ArtifactStore {
 public:
  explicit ArtifactStore(fs::path dir) : dir_(std::move(dir)) {}

  // Digest is always computed; the file is written only when a directory was
  // configured.
  std::string save(const std::string& content) const {
    std::string digest = sha256_hex(content);
    if (!dir_.empty()) {
      fs::path p = dir_ / digest.substr(0, 2) / (digest + ".txt");
      if (!fs::exists(p)) {
        fs::create_directories(p.parent_path());
        write_file_atomic(p, content);
      }
    }
    return digest;
  }

 private:
  fs::path dir_;
};

inline json record_to_json(const ExperimentRecord& r) {
  json j;
  j["sample_id"] = r.sample_id;
  j["source_id"] = r.source_id;
  j["dataset"] = r.dataset;
  j["method"] = method_string(r.method);
  j["modality"] = modality_name(r.modality);
  if (!r.error.empty()) {
    j["error"] = r.error;
    return j;
  }
  j["run_index"] = r.run_index;
  j["n_runs"] = r.n_runs;
  j["before"] = visibility_to_json(r.before_score);
  j["after"] = visibility_to_json(r.after_score);
  json imp;
  for (size_t i = 0; i < 7; ++i) imp[kDimensionNames[i]] = r.improvement_per_dimension[i];
  imp["average"] = r.improvement_average;
  j["improvement"] = std::move(imp);
  j["optimized_digest"] = r.optimized_digest;
  j["before_prompt_digest"] = r.before_prompt_digest;
  j["after_prompt_digest"] = r.after_prompt_digest;
  j["before_response_digest"] = r.before_response_digest;
  j["after_response_digest"] = r.after_response_digest;
  return j;
}

inline ExperimentRecord record_from_json(const json& j) {
  ExperimentRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.source_id = j.at("source_id").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.method = parse_method(j.at("method").get<std::string>());
  r.modality = parse_modality(j.at("modality").get<std::string>());
  if (j.contains("error")) {
    r.error = j["error"].get<std::string>();
    return r;
  }
  r.run_index = j.at("run_index").get<int>();
  r.n_runs = j.at("n_runs").get<int>();
  r.before_score = visibility_from_json(j.at("before"));
  r.after_score = visibility_from_json(j.at("after"));
  const json& imp = j.at("improvement");
  for (size_t i = 0; i < 7; ++i) r.improvement_per_dimension[i] = imp.at(kDimensionNames[i]).get<double>();
  r.improvement_average = imp.at("average").get<double>();
  r.optimized_digest = j.value("optimized_digest", "");
  r.before_prompt_digest = j.value("before_prompt_digest", "");
  r.after_prompt_digest = j.value("after_prompt_digest", "");
  r.before_response_digest = j.value("before_response_digest", "");
  r.after_response_digest = j.value("after_response_digest", "");
  return r;
}

inline std::string records_to_jsonl(const std::vector<ExperimentRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<ExperimentRecord> records_from_jsonl(const std::string& body) {
  std::vector<ExperimentRecord> out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    out.push_back(record_from_json(json::parse(t)));
  }
  return out;
}

inline std::shared_ptr<Backend> make_backend(const RunConfig& cfg) {
  if (cfg.backend_kind == "mock") return std::make_shared<MockBackend>();
  if (cfg.backend_kind == "replay") return std::make_shared<ReplayBackend>();
  if (cfg.backend_kind == "live") {
    LiveBackend::Options opt;
    opt.base_url = cfg.base_url;
    return std::make_shared<LiveBackend>(std::move(opt));
  }
  raise(ErrorCode::ConfigError, "unknown backend kind: " + cfg.backend_kind);
}

inline PromptCatalog make_catalog(const RunConfig& cfg) {
  PromptCatalog catalog = PromptCatalog::builtin();
  if (!cfg.prompts_dir.empty()) catalog.load_dir(cfg.prompts_dir);
  return catalog;
}

struct RunResult {
  std::vector<ExperimentRecord> records;
  SummaryTable summary;
  size_t failed_arms = 0;
  std::vector<std::pair<std::string, OptimizedSource>> optimized;  // per successful arm
};

namespace detail {

struct Arm {
  const QuerySample* sample;
  size_t target_index;
  MethodKind method;
};

struct ArmOutcome {
  std::vector<ExperimentRecord> records;
  std::optional<std::pair<std::string, OptimizedSource>> optimized;
  bool failed = false;
};

inline ArmOutcome run_arm(const Arm& arm, const RunConfig& cfg, Gateway& gateway,
                          const PromptCatalog& catalog, const ArtifactStore& artifacts) {
  const QuerySample& sample = *arm.sample;
  const ContentSource& target = sample.sources[arm.target_index];

  ExperimentRecord base;
  base.sample_id = sample.sample_id;
  base.source_id = target.source_id;
  base.dataset = sample.dataset;
  base.method = arm.method;
  base.modality = cfg.modality;

  try {
    OptimizerConfig ocfg;
    ocfg.backend_id = cfg.backend_id;
    ocfg.generator_model = cfg.generator_model;
    ocfg.vlm_model = cfg.vlm_model;
    ocfg.seed_base = cfg.seed_base;
    Optimizer optimizer(gateway, catalog, ocfg);

    EvaluatorConfig ecfg;
    ecfg.backend_id = cfg.backend_id;
    ecfg.judge_model = cfg.judge_model;
    ecfg.seed = cfg.seed_base;
    Evaluator evaluator(gateway, catalog, ecfg);

    // The caption lines shown to the multimodal engine: the dataset caption
    // when present, otherwise the same structural caption stage 1 produces
    // (shared through the cache).
    auto sim_sources_for = [&](const std::string& replaced_text,
                               bool replace) -> std::vector<SimSource> {
      std::vector<SimSource> out;
      for (size_t i = 0; i < sample.sources.size(); ++i) {
        const ContentSource& src = sample.sources[i];
        SimSource sim;
        sim.source_id = src.source_id;
        sim.text = (replace && i == arm.target_index) ? replaced_text : src.text;
        if (cfg.modality == Modality::Multimodal) {
          for (const auto& img : src.images) {
            sim.captions.push_back(img.original_caption
                                       ? *img.original_caption
                                       : optimizer.generate_structural_caption(img));
          }
        }
        out.push_back(std::move(sim));
      }
      return out;
    };

    int target_ordinal = static_cast<int>(arm.target_index) + 1;

    GenerationPrompt before_prompt =
        build_generation_prompt(catalog, sample.query, sim_sources_for("", false), cfg.modality);
    std::vector<GseResponse> before_runs;
    std::vector<VisibilityScore> before_scores;
    for (int r = 0; r < cfg.n_runs; ++r) {
      GenerationOptions gopt{sample.sample_id, r, cfg.seed_base, cfg.backend_id,
                             cfg.generator_model, cfg.gen_temperature};
      before_runs.push_back(generate_response(gateway, before_prompt, gopt));
      before_scores.push_back(
          evaluator.score_visibility(before_runs.back(), target_ordinal, sample.query));
    }

    OptimizedSource optimized = optimizer.optimize(sample, target, arm.method);

    GenerationPrompt after_prompt = build_generation_prompt(
        catalog, sample.query, sim_sources_for(optimized.optimized_text, true), cfg.modality);
    std::vector<GseResponse> after_runs;
    std::vector<VisibilityScore> after_scores;
    for (int r = 0; r < cfg.n_runs; ++r) {
      GenerationOptions gopt{sample.sample_id, r, cfg.seed_base, cfg.backend_id,
                             cfg.generator_model, cfg.gen_temperature};
      after_runs.push_back(generate_response(gateway, after_prompt, gopt));
      after_scores.push_back(
          evaluator.score_visibility(after_runs.back(), target_ordinal, sample.query));
    }

    VisibilityScore before_mean = aggregate_runs(before_scores);
    VisibilityScore after_mean = aggregate_runs(after_scores);
    ImprovementReport rep = improvement_report(before_mean, after_mean, cfg.n_runs);

    std::string optimized_digest = artifacts.save(optimized.optimized_text);
    std::string before_prompt_digest = artifacts.save(before_prompt.user);
    std::string after_prompt_digest = artifacts.save(after_prompt.user);

    ArmOutcome outcome;
    for (int r = 0; r < cfg.n_runs; ++r) {
      ExperimentRecord rec = base;
      rec.run_index = r;
      rec.n_runs = cfg.n_runs;
      rec.before_score = before_scores[r];
      rec.after_score = after_scores[r];
      rec.improvement_per_dimension = rep.per_dimension;
      rec.improvement_average = rep.average_improvement;
      rec.optimized_digest = optimized_digest;
      rec.before_prompt_digest = before_prompt_digest;
      rec.after_prompt_digest = after_prompt_digest;
      rec.before_response_digest = artifacts.save(before_runs[r].raw_text);
      rec.after_response_digest = artifacts.save(after_runs[r].raw_text);
      outcome.records.push_back(std::move(rec));
    }
    outcome.optimized = {sample.sample_id, std::move(optimized)};
    return outcome;
  } catch (const Error& e) {
    ArmOutcome outcome;
    ExperimentRecord rec = base;
    rec.error = std::string(error_code_name(e.code())) + ": " + e.detail();
    outcome.records.push_back(std::move(rec));
    outcome.failed = true;
    return outcome;
  } catch (const std::exception& e) {
    ArmOutcome outcome;
    ExperimentRecord rec = base;
    rec.error = std::string("Unexpected: ") + e.what();
    outcome.records.push_back(std::move(rec));
    outcome.failed = true;
    return outcome;
  }
}

}  // namespace detail

inline void validate_config(const RunConfig& cfg) {
  if (cfg.n_runs < 1) raise(ErrorCode::ConfigError, "n_runs must be >= 1");
  if (cfg.methods.empty()) raise(ErrorCode::ConfigError, "methods must be non-empty");
  if (cfg.corpus_path.empty()) raise(ErrorCode::ConfigError, "corpus path missing");
}

// Full sweep against an injected gateway (tests wrap backends to count or
// script calls). Arms run concurrently; records come back sorted by
// (sample_id, method, source_id, run_index).
inline RunResult run_experiment(const RunConfig& cfg, Gateway& gateway,
                                const PromptCatalog& catalog) {
  validate_config(cfg);
  Corpus corpus = load_corpus(cfg.corpus_path, cfg.adapter);
  Corpus subset = select_subset(corpus, cfg.filter, static_cast<uint64_t>(cfg.seed_base));

  ArtifactStore artifacts(cfg.output_dir.empty() ? fs::path() : cfg.output_dir / "artifacts");

  std::vector<detail::Arm> arms;
  for (const auto& sample : subset.samples) {
    for (const auto& method : cfg.methods) {
      for (size_t t = 0; t < sample.sources.size(); ++t) arms.push_back({&sample, t, method});
    }
  }

  std::vector<detail::ArmOutcome> outcomes(arms.size());
  std::atomic<size_t> next{0};
  size_t workers = std::min<size_t>(std::max(cfg.concurrency, 1), std::max<size_t>(arms.size(), 1));
  std::vector<std::thread> threads;
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= arms.size()) return;
        outcomes[i] = detail::run_arm(arms[i], cfg, gateway, catalog, artifacts);
      }
    });
  }
  for (auto& t : threads) t.join();

  RunResult result;
  for (auto& outcome : outcomes) {
    if (outcome.failed) ++result.failed_arms;
    for (auto& rec : outcome.records) result.records.push_back(std::move(rec));
    if (outcome.optimized) result.optimized.push_back(std::move(*outcome.optimized));
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const ExperimentRecord& a, const ExperimentRecord& b) {
              if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
              int ra = method_rank(a.method), rb = method_rank(b.method);
              if (ra != rb) return ra < rb;
              if (a.source_id != b.source_id) return a.source_id < b.source_id;
              return a.run_index < b.run_index;
            });

  bool any_ok = false;
  for (const auto& r : result.records) any_ok = any_ok || r.error.empty();
  if (any_ok) result.summary = summarize(result.records, SummaryMode::ByDataset);

  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    write_file_atomic(cfg.output_dir / "records.jsonl", records_to_jsonl(result.records));
    if (any_ok) write_file_atomic(cfg.output_dir / "summary.csv", result.summary.to_csv());
    std::vector<OptimizedSource> opts;
    for (const auto& [_, o] : result.optimized) opts.push_back(o);
    std::string review = alignment_review_csv(opts);
    if (review.find('\n') != review.rfind('\n'))  // more than the header line
      write_file_atomic(cfg.output_dir / "alignment_review.csv", review);
  }
  return result;
}

inline RunResult run_experiment(const RunConfig& cfg) {
  PromptCatalog catalog = make_catalog(cfg);
  Gateway gateway(make_backend(cfg), cfg.cache_dir, cfg.concurrency);
  return run_experiment(cfg, gateway, catalog);
}

// The caption-variant ablation: identical pipeline and seeds, methods fixed
// to the three capt_addi variants, summarized per dimension.
inline RunResult ablate(RunConfig cfg, Gateway& gateway, const PromptCatalog& catalog) {
  cfg.methods = {MethodKind::capt_addi(CaptionVariant::Original),
                 MethodKind::capt_addi(CaptionVariant::Structural),
                 MethodKind::capt_addi(CaptionVariant::Refined)};
  RunResult result = run_experiment(cfg, gateway, catalog);
  bool any_ok = false;
  for (const auto& r : result.records) any_ok = any_ok || r.error.empty();
  if (any_ok) {
    result.summary = summarize(result.records, SummaryMode::ByDimension);
    if (!cfg.output_dir.empty())
      write_file_atomic(cfg.output_dir / "summary.csv", result.summary.to_csv());
  }
  return result;
}

inline RunResult ablate(const RunConfig& cfg) {
  PromptCatalog catalog = make_catalog(cfg);
  Gateway gateway(make_backend(cfg), cfg.cache_dir, cfg.concurrency);
  return ablate(cfg, gateway, catalog);
}

// Structured key-value config file (JSON object, keys mirror RunConfig).
inline RunConfig load_run_config(const fs::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    raise(ErrorCode::ConfigError, path.string() + ": not a JSON object");
  RunConfig cfg;
  if (j.contains("corpus")) cfg.corpus_path = j["corpus"].get<std::string>();
  if (j.contains("adapter"))
    cfg.adapter = j["adapter"].get<std::string>() == "mramg" ? Adapter::Mramg : Adapter::Canonical;
  if (j.contains("datasets")) cfg.filter.datasets = j["datasets"].get<std::vector<std::string>>();
  if (j.contains("sample_ids"))
    cfg.filter.sample_ids = j["sample_ids"].get<std::vector<std::string>>();
  if (j.contains("limit")) cfg.filter.limit = j["limit"].get<size_t>();
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"]) cfg.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("modality")) cfg.modality = parse_modality(j["modality"].get<std::string>());
  if (j.contains("n_runs")) cfg.n_runs = j["n_runs"].get<int>();
  if (j.contains("seed")) cfg.seed_base = j["seed"].get<int64_t>();
  if (j.contains("backend")) cfg.backend_kind = j["backend"].get<std::string>();
  if (j.contains("backend_id")) cfg.backend_id = j["backend_id"].get<std::string>();
  if (j.contains("base_url")) cfg.base_url = j["base_url"].get<std::string>();
  if (j.contains("generator_model")) cfg.generator_model = j["generator_model"].get<std::string>();
  if (j.contains("judge_model")) cfg.judge_model = j["judge_model"].get<std::string>();
  if (j.contains("vlm_model")) cfg.vlm_model = j["vlm_model"].get<std::string>();
  if (j.contains("temperature")) cfg.gen_temperature = j["temperature"].get<double>();
  if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
  if (j.contains("prompts_dir")) cfg.prompts_dir = j["prompts_dir"].get<std::string>();
  if (j.contains("concurrency")) cfg.concurrency = j["concurrency"].get<int>();
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  return cfg;
}

}  // namespace gseo
