#pragma once

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include "gseo/common.hpp"
#include "gseo/gateway.hpp"
#include "gseo/optimizer.hpp"
#include "gseo/prompts.hpp"
#include "gseo/simulator.hpp"

namespace gseo {

inline constexpr std::array<const char*, 7> kDimensionNames = {
    "relevance",    "fluency",     "diversity",     "uniqueness",
    "click_follow", "positional_salience", "content_volume"};

// Judge scores are integers in {0..5}; dimensions become real-valued only
// after run aggregation. average always equals the mean of the seven.
struct VisibilityScore {
  double relevance = 0, fluency = 0, diversity = 0, uniqueness = 0;
  double click_follow = 0, positional_salience = 0, content_volume = 0;
  double average = 0;

  double& dim(size_t i) {
    switch (i) {
      case 0: return relevance;
      case 1: return fluency;
      case 2: return diversity;
      case 3: return uniqueness;
      case 4: return click_follow;
      case 5: return positional_salience;
      default: return content_volume;
    }
  }
  double dim(size_t i) const { return const_cast<VisibilityScore*>(this)->dim(i); }

  void recompute_average() {
    double sum = 0;
    for (size_t i = 0; i < 7; ++i) sum += dim(i);
    average = sum / 7.0;
  }
};

// Relative improvement ratio in percent: (after - before) / (before + 1) * 100.
inline double improvement(double before, double after) {
  if (before < 0.0 || before > 5.0 || after < 0.0 || after > 5.0)
    raise(ErrorCode::DomainViolation,
          "scores out of [0,5]: " + std::to_string(before) + ", " + std::to_string(after));
  return (after - before) / (before + 1.0) * 100.0;
}

inline VisibilityScore aggregate_runs(const std::vector<VisibilityScore>& scores) {
  if (scores.empty()) raise(ErrorCode::EmptyList, "no scores to aggregate");
  VisibilityScore out;
  for (const auto& s : scores) {
    for (size_t i = 0; i < 7; ++i) out.dim(i) += s.dim(i);
  }
  for (size_t i = 0; i < 7; ++i) out.dim(i) /= static_cast<double>(scores.size());
  out.recompute_average();
  return out;
}

// Last "Score:" marker wins; returns the integer after it, or nullopt when no
// marker carries one.
inline std::optional<long> parse_score_marker(const std::string& raw) {
  size_t pos = raw.rfind("Score:");
  if (pos == std::string::npos) return std::nullopt;
  const char* start = raw.c_str() + pos + 6;
  while (*start == ' ' || *start == '\t') ++start;
  char* end = nullptr;
  long val = std::strtol(start, &end, 10);
  if (end == start) return std::nullopt;
  return val;
}

struct ImprovementReport {
  std::string sample_id;
  MethodKind method;
  Modality modality = Modality::Unimodal;
  std::array<double, 7> per_dimension{};  // improvement percent per dimension
  double average_improvement = 0;
  int n_runs = 0;
  VisibilityScore before;  // run-mean
  VisibilityScore after;   // run-mean
};

// The formula applied dimension-wise and to the run-mean averages.
inline ImprovementReport improvement_report(const VisibilityScore& before,
                                            const VisibilityScore& after, int n_runs) {
  ImprovementReport rep;
  rep.n_runs = n_runs;
  rep.before = before;
  rep.after = after;
  for (size_t i = 0; i < 7; ++i) rep.per_dimension[i] = improvement(before.dim(i), after.dim(i));
  rep.average_improvement = improvement(before.average, after.average);
  return rep;
}

struct EvaluatorConfig {
  std::string backend_id = "default";
  std::string judge_model;
  int64_t seed = 0;  // judging is pinned to one seed; runs vary generation only
};

// LLM-as-judge scoring: one rubric prompt per dimension, temperature 0,
// strict terminal "Score: <k>" parsing. A malformed reply is retried twice
// with a format reminder; an out-of-range integer is an error immediately.
class Evaluator {
 public:
  static constexpr int64_t kSeedStep = 1000003;

  Evaluator(Gateway& gateway, const PromptCatalog& prompts, EvaluatorConfig cfg)
      : gateway_(gateway), prompts_(prompts), cfg_(std::move(cfg)) {}

  int score_dimension(const GseResponse& response, int target_ordinal, const std::string& query,
                      size_t dim_index) {
    if (dim_index >= 7) raise(ErrorCode::InvalidRequest, "dimension index out of range");
    if (target_ordinal < 1 || target_ordinal > static_cast<int>(response.source_order.size()))
      raise(ErrorCode::InvalidRequest, "target ordinal out of range");
    std::string name = kDimensionNames[dim_index];
    std::string user = prompts_.render("judge_" + name,
                                       {{"query", query},
                                        {"response", response.raw_text},
                                        {"target_ordinal", std::to_string(target_ordinal)}});
    std::string raw;
    for (int attempt = 0; attempt < 3; ++attempt) {
      ChatRequest req;
      req.backend_id = cfg_.backend_id;
      req.model = cfg_.judge_model;
      req.messages.push_back({"system", prompts_.text("judge_system"), std::nullopt});
      std::string content = user;
      if (attempt >= 1) content += "\n\n" + prompts_.text("reminder_score");
      req.messages.push_back({"user", content, std::nullopt});
      req.temperature = 0.0;
      req.seed = cfg_.seed + (attempt >= 2 ? kSeedStep : 0);
      req.tag = "judge_" + name;
      raw = gateway_.complete(req).text;
      auto parsed = parse_score_marker(raw);
      if (!parsed) continue;
      if (*parsed < 0 || *parsed > 5)
        raise(ErrorCode::ScoreOutOfRange, std::to_string(*parsed));
      return static_cast<int>(*parsed);
    }
    raise(ErrorCode::ScoreParseFailure, raw);
  }

  VisibilityScore score_visibility(const GseResponse& response, int target_ordinal,
                                   const std::string& query) {
    VisibilityScore out;
    for (size_t i = 0; i < 7; ++i) {
      try {
        out.dim(i) = score_dimension(response, target_ordinal, query, i);
      } catch (const Error& e) {
        raise(e.code(), std::string(kDimensionNames[i]) + ": " + e.detail());
      }
    }
    out.recompute_average();
    return out;
  }

 private:
  Gateway& gateway_;
  const PromptCatalog& prompts_;
  EvaluatorConfig cfg_;
};

inline json visibility_to_json(const VisibilityScore& s) {
  json j;
  for (size_t i = 0; i < 7; ++i) j[kDimensionNames[i]] = s.dim(i);
  j["average"] = s.average;
  return j;
}

inline VisibilityScore visibility_from_json(const json& j) {
  VisibilityScore s;
  for (size_t i = 0; i < 7; ++i) s.dim(i) = j.at(kDimensionNames[i]).get<double>();
  s.average = j.at("average").get<double>();
  return s;
}

}  // namespace gseo
