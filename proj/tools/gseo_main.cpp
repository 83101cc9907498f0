#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gseo/runner.hpp"

namespace {

struct GlobalOpts {
  std::string config;
  std::string cache_dir;
  std::string backend;
  std::string out;
  int concurrency = 0;
  int64_t seed = 0;
};

struct SweepOpts {
  std::string corpus;
  std::string adapter = "canonical";
  std::vector<std::string> datasets;
  std::vector<std::string> sample_ids;
  size_t limit = 0;
  std::vector<std::string> methods;
  std::string modality;
  int runs = 0;
  std::string generator_model;
  std::string judge_model;
  std::string vlm_model;
  std::string base_url;
  std::string prompts_dir;
  double temperature = 0.7;
};

void add_global_flags(CLI::App* sub, GlobalOpts& g) {
  sub->add_option("--config", g.config, "JSON config file; explicit flags override it");
  sub->add_option("--cache-dir", g.cache_dir, "response cache directory");
  sub->add_option("--backend", g.backend, "backend kind: live, mock, or replay")
      ->check(CLI::IsMember({"live", "mock", "replay"}));
  sub->add_option("--concurrency", g.concurrency, "max concurrent backend calls");
  sub->add_option("--seed", g.seed, "base seed for sampling, generation, and judging");
  sub->add_option("--out", g.out, "output path (directory for run/ablate, file otherwise)");
}

void add_sweep_flags(CLI::App* sub, SweepOpts& s) {
  sub->add_option("--corpus", s.corpus, "corpus file or directory");
  sub->add_option("--adapter", s.adapter, "input format: canonical or mramg")
      ->check(CLI::IsMember({"canonical", "mramg"}));
  sub->add_option("--datasets", s.datasets, "restrict to these datasets")->delimiter(',');
  sub->add_option("--sample-ids", s.sample_ids, "restrict to these sample ids")->delimiter(',');
  sub->add_option("--limit", s.limit, "cap the subset size (seeded shuffle first)");
  sub->add_option("--modality", s.modality, "unimodal or multimodal")
      ->check(CLI::IsMember({"unimodal", "multimodal"}));
  sub->add_option("--runs", s.runs, "independent generation runs per phase");
  sub->add_option("--generator-model", s.generator_model, "model id for generation");
  sub->add_option("--judge-model", s.judge_model, "model id for judging");
  sub->add_option("--vlm-model", s.vlm_model, "model id for image captioning");
  sub->add_option("--base-url", s.base_url, "live backend base URL (or GSEO_BASE_URL)");
  sub->add_option("--prompts-dir", s.prompts_dir, "directory of prompt template overrides");
  sub->add_option("--temperature", s.temperature, "generation temperature");
}

bool flag_given(CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

gseo::RunConfig build_config(CLI::App* sub, const GlobalOpts& g, const SweepOpts& s) {
  gseo::RunConfig cfg;
  if (flag_given(sub, "--config")) cfg = gseo::load_run_config(g.config);
  if (flag_given(sub, "--cache-dir")) cfg.cache_dir = g.cache_dir;
  if (flag_given(sub, "--backend")) cfg.backend_kind = g.backend;
  if (flag_given(sub, "--concurrency")) cfg.concurrency = g.concurrency;
  if (flag_given(sub, "--seed")) cfg.seed_base = g.seed;
  if (flag_given(sub, "--out")) cfg.output_dir = g.out;
  if (flag_given(sub, "--corpus")) cfg.corpus_path = s.corpus;
  if (flag_given(sub, "--adapter"))
    cfg.adapter = s.adapter == "mramg" ? gseo::Adapter::Mramg : gseo::Adapter::Canonical;
  if (flag_given(sub, "--datasets")) cfg.filter.datasets = s.datasets;
  if (flag_given(sub, "--sample-ids")) cfg.filter.sample_ids = s.sample_ids;
  if (flag_given(sub, "--limit")) cfg.filter.limit = s.limit;
  if (flag_given(sub, "--methods")) {
    cfg.methods.clear();
    for (const auto& m : s.methods) cfg.methods.push_back(gseo::parse_method(m));
  }
  if (flag_given(sub, "--modality")) cfg.modality = gseo::parse_modality(s.modality);
  if (flag_given(sub, "--runs")) cfg.n_runs = s.runs;
  if (flag_given(sub, "--generator-model")) cfg.generator_model = s.generator_model;
  if (flag_given(sub, "--judge-model")) cfg.judge_model = s.judge_model;
  if (flag_given(sub, "--vlm-model")) cfg.vlm_model = s.vlm_model;
  if (flag_given(sub, "--base-url")) cfg.base_url = s.base_url;
  if (flag_given(sub, "--prompts-dir")) cfg.prompts_dir = s.prompts_dir;
  if (flag_given(sub, "--temperature")) cfg.gen_temperature = s.temperature;
  return cfg;
}

void emit(const std::string& out_path, const std::string& body) {
  if (out_path.empty()) {
    std::cout << body;
  } else {
    gseo::write_file_atomic(out_path, body);
  }
}

int cmd_ingest(CLI::App* sub, const GlobalOpts& g, const SweepOpts& s) {
  gseo::RunConfig cfg = build_config(sub, g, s);
  gseo::Corpus corpus = gseo::load_corpus(cfg.corpus_path, cfg.adapter);
  gseo::ValidationReport report = gseo::validate_corpus(corpus);
  emit(cfg.output_dir.string(), gseo::corpus_to_jsonl(corpus));
  std::cerr << "samples=" << report.samples << " sources=" << report.sources
            << " images=" << report.images
            << " images_without_caption=" << report.images_without_caption << "\n";
  return 0;
}

int cmd_optimize(CLI::App* sub, const GlobalOpts& g, const SweepOpts& s) {
  gseo::RunConfig cfg = build_config(sub, g, s);
  gseo::validate_config(cfg);
  gseo::Corpus corpus = gseo::load_corpus(cfg.corpus_path, cfg.adapter);
  gseo::Corpus subset =
      gseo::select_subset(corpus, cfg.filter, static_cast<uint64_t>(cfg.seed_base));
  gseo::PromptCatalog catalog = gseo::make_catalog(cfg);
  gseo::Gateway gateway(gseo::make_backend(cfg), cfg.cache_dir, cfg.concurrency);
  gseo::OptimizerConfig ocfg{cfg.backend_id, cfg.generator_model, cfg.vlm_model, cfg.seed_base};
  gseo::Optimizer optimizer(gateway, catalog, ocfg);

  std::string out;
  size_t failed = 0;
  for (const auto& sample : subset.samples) {
    for (const auto& method : cfg.methods) {
      for (const auto& source : sample.sources) {
        try {
          gseo::OptimizedSource opt = optimizer.optimize(sample, source, method);
          out += gseo::optimized_to_json(sample.sample_id, opt).dump();
          out += '\n';
        } catch (const gseo::Error& e) {
          ++failed;
          std::cerr << sample.sample_id << "/" << source.source_id << " failed: " << e.what()
                    << "\n";
        }
      }
    }
  }
  emit(cfg.output_dir.string(), out);
  if (failed) std::cerr << "failed sources: " << failed << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_simulate(CLI::App* sub, const GlobalOpts& g, const SweepOpts& s) {
  gseo::RunConfig cfg = build_config(sub, g, s);
  if (cfg.corpus_path.empty()) gseo::raise(gseo::ErrorCode::ConfigError, "corpus path missing");
  gseo::Corpus corpus = gseo::load_corpus(cfg.corpus_path, cfg.adapter);
  gseo::Corpus subset =
      gseo::select_subset(corpus, cfg.filter, static_cast<uint64_t>(cfg.seed_base));
  gseo::PromptCatalog catalog = gseo::make_catalog(cfg);
  gseo::Gateway gateway(gseo::make_backend(cfg), cfg.cache_dir, cfg.concurrency);
  gseo::OptimizerConfig ocfg{cfg.backend_id, cfg.generator_model, cfg.vlm_model, cfg.seed_base};
  gseo::Optimizer optimizer(gateway, catalog, ocfg);

  std::string out;
  for (const auto& sample : subset.samples) {
    std::vector<gseo::SimSource> sources;
    for (const auto& src : sample.sources) {
      gseo::SimSource sim;
      sim.source_id = src.source_id;
      sim.text = src.text;
      if (cfg.modality == gseo::Modality::Multimodal) {
        for (const auto& img : src.images) {
          sim.captions.push_back(img.original_caption
                                     ? *img.original_caption
                                     : optimizer.generate_structural_caption(img));
        }
      }
      sources.push_back(std::move(sim));
    }
    gseo::GenerationPrompt prompt =
        gseo::build_generation_prompt(catalog, sample.query, sources, cfg.modality);
    for (int r = 0; r < cfg.n_runs; ++r) {
      gseo::GenerationOptions gopt{sample.sample_id, r,   cfg.seed_base,
                                   cfg.backend_id,   cfg.generator_model, cfg.gen_temperature};
      gseo::GseResponse resp = gseo::generate_response(gateway, prompt, gopt);
      out += gseo::gse_response_to_json(resp).dump();
      out += '\n';
    }
  }
  emit(cfg.output_dir.string(), out);
  return 0;
}

int cmd_evaluate(CLI::App* sub, const GlobalOpts& g, const SweepOpts& s,
                 const std::string& responses_path, int target_ordinal) {
  gseo::RunConfig cfg = build_config(sub, g, s);
  if (cfg.corpus_path.empty()) gseo::raise(gseo::ErrorCode::ConfigError, "corpus path missing");
  gseo::Corpus corpus = gseo::load_corpus(cfg.corpus_path, cfg.adapter);
  gseo::PromptCatalog catalog = gseo::make_catalog(cfg);
  gseo::Gateway gateway(gseo::make_backend(cfg), cfg.cache_dir, cfg.concurrency);
  gseo::EvaluatorConfig ecfg{cfg.backend_id, cfg.judge_model, cfg.seed_base};
  gseo::Evaluator evaluator(gateway, catalog, ecfg);

  std::map<std::string, const gseo::QuerySample*> by_id;
  for (const auto& sample : corpus.samples) by_id[sample.sample_id] = &sample;

  std::string out;
  size_t failed = 0;
  std::istringstream in(gseo::read_file(responses_path));
  std::string line;
  while (std::getline(in, line)) {
    std::string t = gseo::trim(line);
    if (t.empty()) continue;
    gseo::GseResponse resp = gseo::gse_response_from_json(gseo::json::parse(t));
    auto it = by_id.find(resp.sample_id);
    if (it == by_id.end()) {
      ++failed;
      std::cerr << resp.sample_id << ": not in corpus\n";
      continue;
    }
    try {
      gseo::VisibilityScore score =
          evaluator.score_visibility(resp, target_ordinal, it->second->query);
      gseo::json j;
      j["sample_id"] = resp.sample_id;
      j["run_index"] = resp.run_index;
      j["target_ordinal"] = target_ordinal;
      j["scores"] = gseo::visibility_to_json(score);
      out += j.dump();
      out += '\n';
    } catch (const gseo::Error& e) {
      ++failed;
      std::cerr << resp.sample_id << "/run" << resp.run_index << " failed: " << e.what() << "\n";
    }
  }
  emit(cfg.output_dir.string(), out);
  if (failed) std::cerr << "failed responses: " << failed << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_run(CLI::App* sub, const GlobalOpts& g, const SweepOpts& s, bool ablation) {
  gseo::RunConfig cfg = build_config(sub, g, s);
  if (!ablation) gseo::validate_config(cfg);
  gseo::RunResult result = ablation ? gseo::ablate(cfg) : gseo::run_experiment(cfg);
  size_t ok = 0;
  for (const auto& r : result.records) ok += r.error.empty() ? 1 : 0;
  std::cerr << "records=" << result.records.size() << " ok=" << ok
            << " failed_arms=" << result.failed_arms << "\n";
  if (ok > 0) std::cout << result.summary.to_csv();
  return 0;
}

int cmd_report(const std::string& records_path, const std::string& mode,
               const std::string& out_path) {
  std::vector<gseo::ExperimentRecord> records =
      gseo::records_from_jsonl(gseo::read_file(records_path));
  gseo::SummaryTable table = gseo::summarize(
      records, mode == "dimension" ? gseo::SummaryMode::ByDimension : gseo::SummaryMode::ByDataset);
  emit(out_path, table.to_csv());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative search visibility experiment harness"};
  app.require_subcommand(1);

  GlobalOpts g_ingest, g_optimize, g_simulate, g_evaluate, g_run, g_ablate, g_report, g_prompts;
  SweepOpts s_ingest, s_optimize, s_simulate, s_evaluate, s_run, s_ablate;

  auto* ingest = app.add_subcommand("ingest", "load a corpus and emit canonical JSONL");
  add_global_flags(ingest, g_ingest);
  add_sweep_flags(ingest, s_ingest);

  auto* optimize = app.add_subcommand("optimize", "optimize target sources and emit JSONL");
  add_global_flags(optimize, g_optimize);
  add_sweep_flags(optimize, s_optimize);
  optimize->add_option("--methods", s_optimize.methods, "optimization methods")->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "generate engine responses and emit JSONL");
  add_global_flags(simulate, g_simulate);
  add_sweep_flags(simulate, s_simulate);

  auto* evaluate = app.add_subcommand("evaluate", "judge responses and emit score JSONL");
  add_global_flags(evaluate, g_evaluate);
  add_sweep_flags(evaluate, s_evaluate);
  std::string responses_path;
  int target_ordinal = 1;
  evaluate->add_option("--responses", responses_path, "responses JSONL file")->required();
  evaluate->add_option("--target-ordinal", target_ordinal, "1-based source under evaluation");

  auto* run = app.add_subcommand("run", "full before/after sweep with records and summary");
  add_global_flags(run, g_run);
  add_sweep_flags(run, s_run);
  run->add_option("--methods", s_run.methods, "optimization methods")->delimiter(',');

  auto* ablate = app.add_subcommand("ablate", "caption-variant sweep with per-dimension summary");
  add_global_flags(ablate, g_ablate);
  add_sweep_flags(ablate, s_ablate);

  auto* report = app.add_subcommand("report", "summarize a records file into a CSV table");
  add_global_flags(report, g_report);
  std::string records_path, report_mode = "dataset";
  report->add_option("--records", records_path, "records JSONL file")->required();
  report->add_option("--mode", report_mode, "dataset or dimension")
      ->check(CLI::IsMember({"dataset", "dimension"}));

  auto* prompts = app.add_subcommand("prompts", "prompt template utilities");
  auto* prompts_export = prompts->add_subcommand("export", "write built-in templates to a directory");
  add_global_flags(prompts_export, g_prompts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(ingest, g_ingest, s_ingest);
    if (*optimize) return cmd_optimize(optimize, g_optimize, s_optimize);
    if (*simulate) return cmd_simulate(simulate, g_simulate, s_simulate);
    if (*evaluate)
      return cmd_evaluate(evaluate, g_evaluate, s_evaluate, responses_path, target_ordinal);
    if (*run) return cmd_run(run, g_run, s_run, false);
    if (*ablate) return cmd_run(ablate, g_ablate, s_ablate, true);
    if (*report) return cmd_report(records_path, report_mode, g_report.out);
    if (*prompts_export) {
      if (g_prompts.out.empty())
        gseo::raise(gseo::ErrorCode::ConfigError, "prompts export requires --out <dir>");
      gseo::PromptCatalog::builtin().export_dir(g_prompts.out);
      return 0;
    }
  } catch (const gseo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
