#pragma once

#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "gseo/common.hpp"
#include "gseo/gateway.hpp"
#include "gseo/prompts.hpp"
#include "gseo/text.hpp"

namespace gseo {

enum class Modality { Unimodal, Multimodal };

inline const char* modality_name(Modality m) {
  return m == Modality::Unimodal ? "unimodal" : "multimodal";
}

inline Modality parse_modality(const std::string& s) {
  if (s == "unimodal") return Modality::Unimodal;
  if (s == "multimodal") return Modality::Multimodal;
  raise(ErrorCode::ConfigError, "unknown modality: " + s);
}

struct Sentence {
  std::string text;
  std::set<int> citations;  // ordinals within [1, N]
  std::set<int> dangling;   // bracketed numbers outside [1, N], kept and flagged
};

struct GseResponse {
  std::string sample_id;
  int run_index = 0;
  Modality modality = Modality::Unimodal;
  std::string raw_text;
  std::vector<Sentence> sentences;
  std::vector<std::string> source_order;  // ordinal i cites source_order[i-1]
};

struct GenerationPrompt {
  std::string system;
  std::string user;
  Modality modality = Modality::Unimodal;
  std::vector<std::string> source_order;
};

struct SimSource {
  std::string source_id;
  std::string text;
  std::vector<std::string> captions;  // used only in multimodal mode
};

// Deterministic prompt assembly: instruction block, the question, then one
// numbered block per source. Multimodal adds one caption line per source; a
// unimodal prompt differs from its multimodal twin only in those lines.
inline GenerationPrompt build_generation_prompt(const PromptCatalog& prompts,
                                                const std::string& query,
                                                const std::vector<SimSource>& sources,
                                                Modality modality) {
  if (sources.empty()) raise(ErrorCode::EmptySources, "no sources for generation");
  std::string blocks;
  for (size_t i = 0; i < sources.size(); ++i) {
    std::string ordinal = std::to_string(i + 1);
    if (!blocks.empty()) blocks += "\n";
    blocks += "Source [" + ordinal + "]:\n" + sources[i].text + "\n";
    if (modality == Modality::Multimodal && !sources[i].captions.empty()) {
      std::string joined;
      for (const auto& cap : sources[i].captions) {
        if (!joined.empty()) joined += " | ";
        std::string flat = cap;
        for (char& c : flat) {
          if (c == '\n' || c == '\r') c = ' ';
        }
        joined += flat;
      }
      blocks += "Image captions for Source [" + ordinal + "]: " + joined + "\n";
    }
  }
  blocks = rtrim(blocks);

  GenerationPrompt out;
  out.system = prompts.text("gse_system");
  out.user = prompts.render("gse_user", {{"query", query}, {"sources", blocks}});
  out.modality = modality;
  for (const auto& s : sources) out.source_order.push_back(s.source_id);
  return out;
}

// Strips bracketed citation markers (with any whitespace run directly before
// them), segments the remaining text into sentences, and assigns each marker
// to the sentence it follows. Out-of-range ordinals are kept as dangling.
inline std::vector<Sentence> parse_citations(const std::string& raw_text, int n_sources) {
  std::string clean;
  clean.reserve(raw_text.size());
  std::vector<std::pair<size_t, int>> markers;  // (offset into clean, ordinal)

  size_t i = 0;
  const size_t n = raw_text.size();
  while (i < n) {
    size_t j = i;
    while (j < n && is_space(raw_text[j])) ++j;
    if (j < n && raw_text[j] == '[') {
      size_t k = j + 1;
      long val = 0;
      bool digits = false;
      while (k < n && std::isdigit(static_cast<unsigned char>(raw_text[k]))) {
        val = val * 10 + (raw_text[k] - '0');
        digits = true;
        ++k;
      }
      if (digits && k < n && raw_text[k] == ']') {
        markers.push_back({clean.size(), static_cast<int>(val)});
        i = k + 1;
        continue;
      }
    }
    clean.push_back(raw_text[i]);
    ++i;
  }

  auto spans = split_sentences(clean);
  std::vector<Sentence> out;
  out.reserve(spans.size());
  for (const auto& sp : spans) out.push_back({clean.substr(sp.begin, sp.end - sp.begin), {}, {}});
  if (out.empty()) return out;

  for (const auto& [offset, ordinal] : markers) {
    size_t idx = 0;
    for (size_t s = 0; s < spans.size(); ++s) {
      if (spans[s].begin <= offset) idx = s;
    }
    if (ordinal >= 1 && ordinal <= n_sources)
      out[idx].citations.insert(ordinal);
    else
      out[idx].dangling.insert(ordinal);
  }
  return out;
}

struct GenerationOptions {
  std::string sample_id;
  int run_index = 0;
  int64_t seed_base = 0;
  std::string backend_id = "default";
  std::string model;
  double temperature = 0.7;  // three runs must differ; seeds keep them replayable
};

inline GseResponse generate_response(Gateway& gateway, const GenerationPrompt& prompt,
                                     const GenerationOptions& opt) {
  ChatRequest req;
  req.backend_id = opt.backend_id;
  req.model = opt.model;
  req.messages.push_back({"system", prompt.system, std::nullopt});
  req.messages.push_back({"user", prompt.user, std::nullopt});
  req.temperature = opt.temperature;
  req.seed = opt.seed_base + opt.run_index;
  req.tag = "generate_response";
  ChatResponse resp = gateway.complete(req);
  if (trim(resp.text).empty()) raise(ErrorCode::DegenerateResponse, opt.sample_id);

  GseResponse out;
  out.sample_id = opt.sample_id;
  out.run_index = opt.run_index;
  out.modality = prompt.modality;
  out.raw_text = resp.text;
  out.sentences = parse_citations(resp.text, static_cast<int>(prompt.source_order.size()));
  out.source_order = prompt.source_order;
  return out;
}

inline json gse_response_to_json(const GseResponse& r) {
  json j;
  j["sample_id"] = r.sample_id;
  j["run_index"] = r.run_index;
  j["modality"] = modality_name(r.modality);
  j["raw_text"] = r.raw_text;
  j["sentences"] = json::array();
  for (const auto& s : r.sentences) {
    json js;
    js["text"] = s.text;
    js["citations"] = json::array();
    for (int c : s.citations) js["citations"].push_back(c);
    js["dangling"] = json::array();
    for (int c : s.dangling) js["dangling"].push_back(c);
    j["sentences"].push_back(std::move(js));
  }
  j["source_order"] = r.source_order;
  return j;
}

inline GseResponse gse_response_from_json(const json& j) {
  GseResponse r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.run_index = j.at("run_index").get<int>();
  r.modality = parse_modality(j.at("modality").get<std::string>());
  r.raw_text = j.at("raw_text").get<std::string>();
  for (const auto& js : j.at("sentences")) {
    Sentence s;
    s.text = js.at("text").get<std::string>();
    for (const auto& c : js.at("citations")) s.citations.insert(c.get<int>());
    if (js.contains("dangling"))
      for (const auto& c : js["dangling"]) s.dangling.insert(c.get<int>());
    r.sentences.push_back(std::move(s));
  }
  for (const auto& s : j.at("source_order")) r.source_order.push_back(s.get<std::string>());
  return r;
}

}  // namespace gseo
