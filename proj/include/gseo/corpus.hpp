#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gseo/common.hpp"
#include "gseo/text.hpp"

namespace gseo {

using json = nlohmann::ordered_json;

struct ImageAsset {
  std::string image_id;
  std::string locator;  // http(s) URL or local path
  std::optional<std::string> original_caption;
};

struct ContentSource {
  std::string source_id;
  std::string text;
  std::vector<ImageAsset> images;
};

struct QuerySample {
  std::string sample_id;
  std::string dataset;  // wit, wiki, web, arxiv, recipe, manual
  std::string query;
  std::vector<ContentSource> sources;
};

struct Corpus {
  std::string name;
  std::vector<QuerySample> samples;
};

enum class Adapter { Canonical, Mramg };

enum class Difficulty { Easy, Medium, Hard };

inline Difficulty dataset_difficulty(const std::string& dataset) {
  if (dataset == "wit" || dataset == "wiki" || dataset == "web") return Difficulty::Easy;
  if (dataset == "arxiv") return Difficulty::Medium;
  if (dataset == "recipe" || dataset == "manual") return Difficulty::Hard;
  raise(ErrorCode::SchemaViolation, "unknown dataset: " + dataset);
}

inline const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "?";
}

// web pairs two sources per query; every other dataset uses one.
inline size_t expected_source_count(const std::string& dataset) {
  return dataset == "web" ? 2u : 1u;
}

struct Violation {
  std::string kind;  // DuplicateId | DanglingReference | CardinalityViolation | EmptyText | EmptyLocator | MissingImageFile | UnknownDataset
  std::string subject;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  size_t samples = 0;
  size_t sources = 0;
  size_t images = 0;
  size_t images_without_caption = 0;
  bool ok() const { return violations.empty(); }
};

inline bool is_remote_locator(const std::string& locator) {
  return locator.rfind("http://", 0) == 0 || locator.rfind("https://", 0) == 0;
}

// Structural checks for every corpus invariant: id uniqueness across the
// corpus, per-dataset source cardinality, non-empty text, resolvable image
// locators. Missing captions are counted, not flagged; captions are
// synthesized downstream when absent.
inline ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport rep;
  std::set<std::string> sample_ids, source_ids, image_ids;
  for (const auto& s : corpus.samples) {
    ++rep.samples;
    if (!sample_ids.insert(s.sample_id).second)
      rep.violations.push_back({"DuplicateId", s.sample_id, "sample_id repeats"});
    bool known_dataset =
        s.dataset == "wit" || s.dataset == "wiki" || s.dataset == "web" ||
        s.dataset == "arxiv" || s.dataset == "recipe" || s.dataset == "manual";
    if (!known_dataset)
      rep.violations.push_back({"UnknownDataset", s.sample_id, s.dataset});
    if (known_dataset && s.sources.size() != expected_source_count(s.dataset))
      rep.violations.push_back({"CardinalityViolation", s.sample_id,
                                "dataset " + s.dataset + " expects " +
                                    std::to_string(expected_source_count(s.dataset)) +
                                    " sources, found " + std::to_string(s.sources.size())});
    if (s.sources.empty())
      rep.violations.push_back({"EmptyText", s.sample_id, "sample has no sources"});
    for (const auto& src : s.sources) {
      ++rep.sources;
      if (!source_ids.insert(src.source_id).second)
        rep.violations.push_back({"DuplicateId", src.source_id, "source_id repeats"});
      if (trim(src.text).empty())
        rep.violations.push_back(
            {"EmptyText", s.sample_id + "/" + src.source_id, "source text empty after trim"});
      for (const auto& img : src.images) {
        ++rep.images;
        if (!img.original_caption) ++rep.images_without_caption;
        std::string subject = s.sample_id + "/" + src.source_id + "/" + img.image_id;
        if (!image_ids.insert(img.image_id).second)
          rep.violations.push_back({"DuplicateId", img.image_id, "image_id repeats"});
        if (img.locator.empty())
          rep.violations.push_back({"EmptyLocator", subject, "image has no locator"});
        else if (!is_remote_locator(img.locator) && !fs::exists(img.locator))
          rep.violations.push_back({"MissingImageFile", subject, img.locator});
      }
    }
  }
  return rep;
}

namespace detail {

inline std::string loc(const std::string& file, size_t line) {
  return file + ":" + std::to_string(line);
}

inline const json* find_key(const json& obj, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    auto it = obj.find(n);
    if (it != obj.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

inline std::string as_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  return v.dump();
}

inline std::string dataset_from_name(std::string name) {
  // "MRAMG-Wit" and "wit" both mean dataset wit.
  std::string lower = to_lower(name);
  const std::string prefix = "mramg-";
  if (lower.rfind(prefix, 0) == 0) lower = lower.substr(prefix.size());
  return lower;
}

inline ImageAsset parse_image(const json& jimg, Adapter adapter, const std::string& where) {
  if (!jimg.is_object()) raise(ErrorCode::SchemaViolation, where + ": image entry is not an object");
  ImageAsset img;
  if (adapter == Adapter::Canonical) {
    if (const json* v = find_key(jimg, {"image_id"})) img.image_id = as_string(*v);
    if (const json* v = find_key(jimg, {"locator"})) img.locator = as_string(*v);
    if (const json* v = find_key(jimg, {"caption"})) {
      std::string cap = rtrim(as_string(*v));
      if (!trim(cap).empty()) img.original_caption = cap;
    }
  } else {
    if (const json* v = find_key(jimg, {"image_id", "id"})) img.image_id = as_string(*v);
    if (const json* v = find_key(jimg, {"image_url", "url", "image_path", "path", "locator"}))
      img.locator = as_string(*v);
    if (const json* v = find_key(jimg, {"image_caption", "caption"})) {
      std::string cap = rtrim(as_string(*v));
      if (!trim(cap).empty()) img.original_caption = cap;
    }
  }
  if (img.image_id.empty()) raise(ErrorCode::SchemaViolation, where + ": image missing id");
  return img;
}

// MRAMG exports keep a top-level image table in some splits; sources may then
// reference images by id instead of embedding them.
using ImageTable = std::map<std::string, ImageAsset>;

inline ContentSource parse_source(const json& jsrc, Adapter adapter, const ImageTable& table,
                                  const std::string& where) {
  if (!jsrc.is_object()) raise(ErrorCode::SchemaViolation, where + ": source entry is not an object");
  ContentSource src;
  if (adapter == Adapter::Canonical) {
    if (const json* v = find_key(jsrc, {"source_id"})) src.source_id = as_string(*v);
    if (const json* v = find_key(jsrc, {"text"})) src.text = rtrim(as_string(*v));
  } else {
    if (const json* v = find_key(jsrc, {"doc_id", "source_id", "pid", "id"}))
      src.source_id = as_string(*v);
    if (const json* v = find_key(jsrc, {"text", "content", "contents"}))
      src.text = rtrim(as_string(*v));
  }
  if (src.source_id.empty()) raise(ErrorCode::SchemaViolation, where + ": source missing id");
  const json* imgs = (adapter == Adapter::Canonical)
                         ? find_key(jsrc, {"images"})
                         : find_key(jsrc, {"images", "image_list", "image_ids"});
  if (imgs != nullptr) {
    if (!imgs->is_array()) raise(ErrorCode::SchemaViolation, where + ": images is not an array");
    for (const auto& jimg : *imgs) {
      if (jimg.is_object()) {
        src.images.push_back(parse_image(jimg, adapter, where));
      } else if (adapter == Adapter::Mramg && (jimg.is_string() || jimg.is_number())) {
        std::string ref = as_string(jimg);
        auto it = table.find(ref);
        if (it == table.end()) raise(ErrorCode::DanglingReference, ref);
        src.images.push_back(it->second);
      } else {
        raise(ErrorCode::SchemaViolation, where + ": image entry has unsupported type");
      }
    }
  }
  return src;
}

inline QuerySample parse_sample(const json& rec, Adapter adapter,
                                const std::string& fallback_dataset, const std::string& where) {
  if (!rec.is_object()) raise(ErrorCode::SchemaViolation, where + ": record is not an object");
  QuerySample s;
  if (adapter == Adapter::Canonical) {
    if (const json* v = find_key(rec, {"sample_id"})) s.sample_id = as_string(*v);
    if (const json* v = find_key(rec, {"query"})) s.query = rtrim(as_string(*v));
    if (const json* v = find_key(rec, {"dataset"})) s.dataset = dataset_from_name(as_string(*v));
  } else {
    if (const json* v = find_key(rec, {"sample_id", "qa_id", "id"})) s.sample_id = as_string(*v);
    if (const json* v = find_key(rec, {"query", "question"})) s.query = rtrim(as_string(*v));
    if (const json* v = find_key(rec, {"dataset", "dataset_name", "source_dataset"}))
      s.dataset = dataset_from_name(as_string(*v));
  }
  if (s.sample_id.empty()) raise(ErrorCode::SchemaViolation, where + ": record missing sample id");
  if (trim(s.query).empty()) raise(ErrorCode::SchemaViolation, where + ": record missing query");
  if (s.dataset.empty()) s.dataset = fallback_dataset;
  if (s.dataset.empty()) raise(ErrorCode::SchemaViolation, where + ": record missing dataset");

  ImageTable table;
  if (adapter == Adapter::Mramg) {
    if (const json* v = find_key(rec, {"images", "image_list"})) {
      if (v->is_array()) {
        for (const auto& jimg : *v) {
          if (!jimg.is_object()) continue;
          ImageAsset img = parse_image(jimg, adapter, where);
          table.emplace(img.image_id, img);
        }
      }
    }
  }

  const json* docs = (adapter == Adapter::Canonical)
                         ? find_key(rec, {"sources"})
                         : find_key(rec, {"sources", "documents", "docs", "provenance", "doc_list"});
  if (docs == nullptr || !docs->is_array() || docs->empty())
    raise(ErrorCode::SchemaViolation, where + ": record has no sources");
  for (const auto& jsrc : *docs) s.sources.push_back(parse_source(jsrc, adapter, table, where));

  // A lone top-level image list with a single untagged source belongs to that
  // source (common benchmark layout).
  if (adapter == Adapter::Mramg && !table.empty() && s.sources.size() == 1 &&
      s.sources[0].images.empty()) {
    if (const json* v = find_key(rec, {"images", "image_list"})) {
      for (const auto& jimg : *v) {
        if (jimg.is_object()) s.sources[0].images.push_back(parse_image(jimg, adapter, where));
      }
    }
  }
  return s;
}

}  // namespace detail

// One file of newline-delimited JSON records; a leading '[' means one JSON
// array instead. fallback_dataset covers records without a dataset tag.
inline std::vector<QuerySample> parse_corpus_file(const fs::path& path, Adapter adapter) {
  std::string body = read_file(path);
  std::string fallback = detail::dataset_from_name(path.stem().string());
  std::vector<QuerySample> out;

  size_t first = body.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;

  if (body[first] == '[') {
    json arr;
    try {
      arr = json::parse(body);
    } catch (const json::exception& e) {
      raise(ErrorCode::SchemaViolation, detail::loc(path.string(), 1) + ": " + e.what());
    }
    size_t idx = 0;
    for (const auto& rec : arr) {
      ++idx;
      out.push_back(detail::parse_sample(rec, adapter, fallback, detail::loc(path.string(), idx)));
    }
    return out;
  }

  std::istringstream in(body);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    json rec;
    try {
      rec = json::parse(t);
    } catch (const json::exception& e) {
      raise(ErrorCode::SchemaViolation, detail::loc(path.string(), line_no) + ": " + e.what());
    }
    out.push_back(detail::parse_sample(rec, adapter, fallback, detail::loc(path.string(), line_no)));
  }
  return out;
}

// Loads one file or every *.json/*.jsonl in a directory (sorted by filename so
// ordering is stable). The returned corpus always passes validate_corpus; the
// first violation found is raised instead of returned.
inline Corpus load_corpus(const fs::path& path, Adapter adapter = Adapter::Canonical) {
  if (!fs::exists(path)) raise(ErrorCode::UnreadablePath, path.string());
  Corpus corpus;
  corpus.name = fs::is_directory(path) ? path.filename().string() : path.stem().string();
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      if (ext == ".json" || ext == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    if (files.empty()) raise(ErrorCode::UnreadablePath, path.string() + ": no corpus files");
  } else {
    files.push_back(path);
  }
  for (const auto& f : files) {
    auto samples = parse_corpus_file(f, adapter);
    for (auto& s : samples) corpus.samples.push_back(std::move(s));
  }

  ValidationReport rep = validate_corpus(corpus);
  if (!rep.ok()) {
    const Violation& v = rep.violations.front();
    if (v.kind == "DanglingReference") raise(ErrorCode::DanglingReference, v.subject);
    raise(ErrorCode::SchemaViolation, v.kind + " at " + v.subject + ": " + v.detail);
  }
  return corpus;
}

struct SubsetFilter {
  std::optional<std::vector<std::string>> datasets;
  std::optional<std::vector<std::string>> sample_ids;
  std::optional<size_t> limit;  // >= 1 when present
};

// Filtering preserves corpus order; a limit shuffles the matches with the
// seed before truncating, and the shuffled order is kept.
inline Corpus select_subset(const Corpus& corpus, const SubsetFilter& filter, uint64_t seed) {
  std::set<std::string> want_datasets, want_ids;
  if (filter.datasets)
    for (const auto& d : *filter.datasets) want_datasets.insert(detail::dataset_from_name(d));
  if (filter.sample_ids) want_ids.insert(filter.sample_ids->begin(), filter.sample_ids->end());

  Corpus out;
  out.name = corpus.name;
  for (const auto& s : corpus.samples) {
    if (filter.datasets && want_datasets.count(s.dataset) == 0) continue;
    if (filter.sample_ids && want_ids.count(s.sample_id) == 0) continue;
    out.samples.push_back(s);
  }
  if (out.samples.empty()) raise(ErrorCode::EmptySelection, "no samples match the filter");
  if (filter.limit) {
    if (*filter.limit < 1) raise(ErrorCode::InvalidRequest, "limit must be >= 1");
    deterministic_shuffle(out.samples, seed);
    if (out.samples.size() > *filter.limit) out.samples.resize(*filter.limit);
  }
  return out;
}

inline json sample_to_json(const QuerySample& s) {
  json rec;
  rec["sample_id"] = s.sample_id;
  rec["dataset"] = s.dataset;
  rec["query"] = s.query;
  rec["sources"] = json::array();
  for (const auto& src : s.sources) {
    json jsrc;
    jsrc["source_id"] = src.source_id;
    jsrc["text"] = src.text;
    jsrc["images"] = json::array();
    for (const auto& img : src.images) {
      json jimg;
      jimg["image_id"] = img.image_id;
      jimg["locator"] = img.locator;
      if (img.original_caption) jimg["caption"] = *img.original_caption;
      jsrc["images"].push_back(std::move(jimg));
    }
    rec["sources"].push_back(std::move(jsrc));
  }
  return rec;
}

// Canonical JSONL: UTF-8, one sample per line, fixed key order.
inline std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

}  // namespace gseo
