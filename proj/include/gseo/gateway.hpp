#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gseo/common.hpp"
#include "gseo/corpus.hpp"
#include "gseo/injection.hpp"
#include "gseo/text.hpp"

namespace gseo {

struct ChatMessage {
  std::string role;  // "system" | "user"
  std::string content;
  std::optional<std::string> image_ref;  // vision requests only
};

struct ChatRequest {
  std::string backend_id;
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<int64_t> seed;
  std::optional<int> max_tokens;
  std::string tag;  // free-form label, excluded from the cache identity
};

struct ChatResponse {
  std::string text;
  bool cache_hit = false;
  std::optional<int64_t> latency_ms;  // absent on cache hits and mock calls
  int attempt_count = 1;
};

struct CacheKey {
  std::string digest;  // 64 hex chars
};

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

// Field-order-fixed, whitespace-free serialization. Excludes max_tokens and
// tag; includes everything that changes the model's output.
inline std::string canonical_serialization(const ChatRequest& req) {
  json j;
  j["backend_id"] = req.backend_id;
  j["model"] = req.model;
  j["messages"] = json::array();
  for (const auto& m : req.messages) {
    json jm;
    jm["role"] = m.role;
    jm["content"] = m.content;
    if (m.image_ref) jm["image_ref"] = *m.image_ref;
    j["messages"].push_back(std::move(jm));
  }
  j["temperature"] = detail::fixed4(req.temperature);
  if (req.seed)
    j["seed"] = *req.seed;
  else
    j["seed"] = nullptr;
  return j.dump();
}

inline CacheKey cache_key(const ChatRequest& req) {
  return CacheKey{sha256_hex(canonical_serialization(req))};
}

inline void validate_request(const ChatRequest& req) {
  if (req.messages.empty()) raise(ErrorCode::InvalidRequest, "messages empty");
  for (const auto& m : req.messages) {
    if (m.role != "system" && m.role != "user")
      raise(ErrorCode::InvalidRequest, "unsupported role: " + m.role);
    if (m.content.empty() && !m.image_ref)
      raise(ErrorCode::InvalidRequest, "message without content or image");
  }
  if (req.temperature < 0.0 || req.temperature > 2.0)
    raise(ErrorCode::InvalidRequest, "temperature out of [0,2]");
}

// One file per key at <dir>/<first 2 hex>/<digest>.json holding the request
// summary and response text. Writes are atomic; concurrent readers are safe.
class ResponseCache {
 public:
  explicit ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  fs::path path_for(const std::string& digest) const {
    return dir_ / digest.substr(0, 2) / (digest + ".json");
  }

  std::optional<std::string> lookup(const std::string& digest) const {
    auto body = try_read_file(path_for(digest));
    if (!body) return std::nullopt;
    json j = json::parse(*body, nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j["text"].is_string()) return std::nullopt;
    return j["text"].get<std::string>();
  }

  void store(const CacheKey& key, const ChatRequest& req, const std::string& text) const {
    json j;
    j["digest"] = key.digest;
    j["backend_id"] = req.backend_id;
    j["model"] = req.model;
    j["tag"] = req.tag;
    j["temperature"] = detail::fixed4(req.temperature);
    if (req.seed)
      j["seed"] = *req.seed;
    else
      j["seed"] = nullptr;
    j["messages"] = json::array();
    for (const auto& m : req.messages) {
      json jm;
      jm["role"] = m.role;
      jm["content"] = m.content;
      if (m.image_ref) jm["image_ref"] = *m.image_ref;
      j["messages"].push_back(std::move(jm));
    }
    j["text"] = text;
    fs::path p = path_for(key.digest);
    fs::create_directories(p.parent_path());
    write_file_atomic(p, j.dump() + "\n");
  }

 private:
  fs::path dir_;
};

struct BackendResult {
  std::string text;
  int attempt_count = 1;
  std::optional<int64_t> latency_ms;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendResult invoke(const ChatRequest& req, const CacheKey& key) = 0;
};

// Serves exclusively from the cache; reaching it at all means the key was
// absent.
class ReplayBackend : public Backend {
 public:
  BackendResult invoke(const ChatRequest&, const CacheKey& key) override {
    raise(ErrorCode::ReplayMiss, key.digest);
  }
};

namespace detail {

inline int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return 0;
}

inline int digest_byte(const std::string& digest, size_t i) {
  if (digest.size() < 2 * i + 2) return 0;
  return hex_val(digest[2 * i]) * 16 + hex_val(digest[2 * i + 1]);
}

inline std::string last_user_content(const ChatRequest& req) {
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  return req.messages.back().content;
}

// Extracts "<marker><value to end of line>".
inline std::string line_after(const std::string& text, const std::string& marker) {
  size_t pos = text.find(marker);
  if (pos == std::string::npos) return "";
  size_t start = pos + marker.size();
  size_t end = text.find('\n', start);
  if (end == std::string::npos) end = text.size();
  return text.substr(start, end - start);
}

inline std::string join_words(const std::vector<std::string>& words, size_t begin, size_t end) {
  std::string out;
  for (size_t i = begin; i < end && i < words.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace detail

// Deterministic offline model. Precedence: test hook, exact (tag, digest)
// fixture, tag-level template, tag-aware simulation, generic digest text.
// The simulations parse the real prompt layouts so the full pipeline runs
// offline with format-conforming outputs.
class MockBackend : public Backend {
 public:
  using Hook = std::function<std::optional<std::string>(const ChatRequest&)>;

  void set_hook(Hook hook) { hook_ = std::move(hook); }
  void add_fixture(const std::string& tag, const std::string& digest, std::string text) {
    fixtures_[{tag, digest}] = std::move(text);
  }
  void add_template(const std::string& tag, std::string text) {
    templates_[tag] = std::move(text);
  }

  BackendResult invoke(const ChatRequest& req, const CacheKey& key) override {
    if (hook_) {
      if (auto forced = hook_(req)) return {*forced, 1, std::nullopt};
    }
    auto fit = fixtures_.find({req.tag, key.digest});
    if (fit != fixtures_.end()) return {fit->second, 1, std::nullopt};
    auto tit = templates_.find(req.tag);
    if (tit != templates_.end()) return {tit->second, 1, std::nullopt};
    return {simulate(req, key.digest), 1, std::nullopt};
  }

 private:
  static std::string simulate(const ChatRequest& req, const std::string& digest) {
    const std::string& tag = req.tag;
    if (tag == "structural_caption") return simulate_caption(digest);
    if (tag == "refine_caption") return simulate_refine(req);
    if (tag == "inject_caption") return simulate_inject(req);
    if (tag == "tran_seo" || tag == "flue_expr" || tag == "quat_addi" || tag == "stat_addi")
      return simulate_baseline(req, tag);
    if (tag == "generate_response") return simulate_generation(req, digest);
    if (tag.rfind("judge_", 0) == 0) return simulate_judge(digest);
    return "mock:" + tag + ":" + digest.substr(0, 16);
  }

  static std::string simulate_caption(const std::string& digest) {
    static const char* objects[] = {"lighthouse", "violinist",  "market stall", "footbridge",
                                    "cargo ship", "orchard",    "reading hall", "workbench"};
    static const char* actions[] = {"stands quietly", "draws a small crowd", "glows at dusk",
                                    "spans the stream", "rests at anchor",   "ripens slowly",
                                    "fills with visitors", "holds scattered tools"};
    static const char* scenes[] = {"on a rocky coastline", "in a busy square",
                                   "under heavy clouds",   "near the old harbor",
                                   "behind stone walls",   "beside a misty river",
                                   "beneath tall windows", "at the edge of town"};
    int a = detail::digest_byte(digest, 0) % 8;
    int b = detail::digest_byte(digest, 1) % 8;
    int c = detail::digest_byte(digest, 2) % 8;
    return std::string("A ") + objects[a] + " " + actions[b] + " " + scenes[c] + ".";
  }

  static std::string simulate_refine(const ChatRequest& req) {
    std::string user = detail::last_user_content(req);
    std::string original = detail::line_after(user, "\nOriginal Caption: ");
    if (original.empty()) original = "the pictured scene";
    std::string refined = trim(original);
    while (!refined.empty() && is_sentence_end(refined.back())) refined.pop_back();
    return "Rewritten Caption: " + refined + ", captured in vivid detail.";
  }

  static std::string simulate_inject(const ChatRequest& req) {
    std::string user = detail::last_user_content(req);
    size_t in_pos = user.find("### Input\nSource: ");
    size_t out_pos = user.rfind("\n\n### Output");
    if (in_pos == std::string::npos || out_pos == std::string::npos || out_pos <= in_pos)
      return "Source: " + user;
    size_t src_start = in_pos + std::string("### Input\nSource: ").size();
    std::string segment = user.substr(src_start, out_pos - src_start);
    size_t text_pos = segment.rfind("\nText: ");
    if (text_pos == std::string::npos) return "Source: " + segment;
    std::string source = segment.substr(0, text_pos);
    std::string text = segment.substr(text_pos + std::string("\nText: ").size());
    FallbackInsert ins = deterministic_fallback_insert(source, text);
    return "Source: " + ins.optimized;
  }

  static std::string simulate_baseline(const ChatRequest& req, const std::string& tag) {
    std::string user = detail::last_user_content(req);
    size_t in_pos = user.find("### Input\nQuery: ");
    size_t out_pos = user.rfind("\n\n### Output");
    if (in_pos == std::string::npos || out_pos == std::string::npos || out_pos <= in_pos)
      return "Source: " + user;
    std::string segment = user.substr(in_pos, out_pos - in_pos);
    std::string query = detail::line_after(segment, "Query: ");
    size_t src_pos = segment.find("\nSource: ");
    std::string source = src_pos == std::string::npos
                             ? segment
                             : segment.substr(src_pos + std::string("\nSource: ").size());
    if (tag == "tran_seo") return "Source: " + source + " Key topics: " + query;
    if (tag == "flue_expr") return "Source: " + source + " Put plainly, it reads smoothly now.";
    if (tag == "quat_addi")
      return "Source: " + source + " \"These findings hold up,\" one expert notes.";
    return "Source: " + source + " Surveys report a 42 percent figure in support.";
  }

  static std::string simulate_generation(const ChatRequest& req, const std::string& digest) {
    std::string user = detail::last_user_content(req);
    std::string out;
    size_t pos = 0;
    int n = 0;
    for (int i = 1;; ++i) {
      std::string marker = "Source [" + std::to_string(i) + "]:\n";
      size_t m = user.find(marker, pos);
      if (m == std::string::npos) break;
      size_t start = m + marker.size();
      size_t end = user.find("\n\n", start);
      if (end == std::string::npos) end = user.size();
      std::string block = user.substr(start, end - start);
      size_t cap = block.find("\nImage captions for Source [");
      if (cap != std::string::npos) block.resize(cap);
      auto words = tokenize(block);
      std::string head = detail::join_words(words, 0, 6);
      std::string tail =
          words.size() > 6 ? detail::join_words(words, words.size() - 6, words.size()) : "";
      if (!out.empty()) out.push_back(' ');
      out += "Source " + std::to_string(i) + " explains " + head + " [" + std::to_string(i) + "].";
      if (!tail.empty())
        out += " It also covers " + tail + " [" + std::to_string(i) + "].";
      pos = end;
      n = i;
    }
    if (n == 0) return "No sources were provided.";
    static const char* slants[] = {"practical", "cautious", "detailed", "balanced",
                                   "direct",    "thorough", "careful",  "concise"};
    int favored = detail::digest_byte(digest, 3) % n + 1;
    int tone = detail::digest_byte(digest, 4) % 8;
    out += " Overall the " + std::string(slants[tone]) + " account favors source " +
           std::to_string(favored) + " [" + std::to_string(favored) + "].";
    return out;
  }

  static std::string simulate_judge(const std::string& digest) {
    int k = detail::digest_byte(digest, 0) % 6;
    return "The cited material contributes at a measurable level along this dimension.\nScore: " +
           std::to_string(k);
  }

  Hook hook_;
  std::map<std::pair<std::string, std::string>, std::string> fixtures_;
  std::map<std::string, std::string> templates_;
};

struct HttpResult {
  int status = 0;
  std::string body;
  bool transport_error = false;
  std::string error;
};

namespace detail {

inline bool transient_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status < 600);
}

inline std::string base64_encode(const std::string& bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 3 <= bytes.size()) {
    uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                 static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
    i += 3;
  }
  size_t rem = bytes.size() - i;
  if (rem == 1) {
    uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out += "=";
  }
  return out;
}

inline std::string image_mime(const std::string& path) {
  auto ends_with = [&](const char* ext) {
    std::string lower = to_lower(path);
    std::string e = ext;
    return lower.size() >= e.size() && lower.compare(lower.size() - e.size(), e.size(), e) == 0;
  };
  if (ends_with(".png")) return "image/png";
  if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
  if (ends_with(".gif")) return "image/gif";
  if (ends_with(".webp")) return "image/webp";
  return "application/octet-stream";
}

}  // namespace detail

// OpenAI-compatible chat-completions client with exponential backoff (base
// 1s, factor 2, max 5 attempts) on transport errors and HTTP 408/429/5xx.
// Transport and sleep are injectable so retry behavior is testable offline.
class LiveBackend : public Backend {
 public:
  struct Options {
    std::string base_url;                   // falls back to GSEO_BASE_URL
    std::string api_key_env = "GSEO_API_KEY";
    int max_attempts = 5;
    std::function<HttpResult(const std::string& body)> transport;
    std::function<void(int seconds)> sleep_fn;
  };

  explicit LiveBackend(Options opt) : opt_(std::move(opt)) {
    if (opt_.base_url.empty()) opt_.base_url = read_env("GSEO_BASE_URL").value_or("");
    while (!opt_.base_url.empty() && opt_.base_url.back() == '/') opt_.base_url.pop_back();
    if (!opt_.sleep_fn)
      opt_.sleep_fn = [](int seconds) {
        std::this_thread::sleep_for(std::chrono::seconds(seconds));
      };
  }

  BackendResult invoke(const ChatRequest& req, const CacheKey&) override {
    std::string body = build_payload(req).dump();
    auto transport = opt_.transport ? opt_.transport : default_transport();

    HttpResult last;
    for (int attempt = 1; attempt <= opt_.max_attempts; ++attempt) {
      auto t0 = std::chrono::steady_clock::now();
      HttpResult r = transport(body);
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
      if (!r.transport_error && r.status == 200) {
        return {parse_completion(r.body), attempt, ms};
      }
      if (!r.transport_error && !detail::transient_status(r.status)) {
        raise(ErrorCode::PermanentRejection,
              "status " + std::to_string(r.status) + ": " + r.body.substr(0, 500));
      }
      last = r;
      if (attempt < opt_.max_attempts) opt_.sleep_fn(1 << (attempt - 1));
    }
    std::string why = last.transport_error ? ("transport: " + last.error)
                                           : ("status " + std::to_string(last.status));
    raise(ErrorCode::TransientExhausted,
          why + " after " + std::to_string(opt_.max_attempts) + " attempts");
  }

 private:
  json build_payload(const ChatRequest& req) const {
    json payload;
    payload["model"] = req.model;
    payload["messages"] = json::array();
    for (const auto& m : req.messages) {
      json jm;
      jm["role"] = m.role;
      if (!m.image_ref) {
        jm["content"] = m.content;
      } else {
        json parts = json::array();
        if (!m.content.empty()) parts.push_back({{"type", "text"}, {"text", m.content}});
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url(*m.image_ref)}}}});
        jm["content"] = std::move(parts);
      }
      payload["messages"].push_back(std::move(jm));
    }
    payload["temperature"] = req.temperature;
    if (req.seed) payload["seed"] = *req.seed;
    if (req.max_tokens) payload["max_tokens"] = *req.max_tokens;
    return payload;
  }

  static std::string image_url(const std::string& locator) {
    if (is_remote_locator(locator)) return locator;
    auto bytes = try_read_file(locator);
    if (!bytes) raise(ErrorCode::ImageUnreadable, locator);
    return "data:" + detail::image_mime(locator) + ";base64," + detail::base64_encode(*bytes);
  }

  static std::string parse_completion(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded())
      raise(ErrorCode::PermanentRejection, "status 200: unparseable body");
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      raise(ErrorCode::PermanentRejection, "status 200: unexpected shape: " + body.substr(0, 500));
    }
  }

  std::function<HttpResult(const std::string&)> default_transport() const {
    if (opt_.base_url.empty())
      raise(ErrorCode::BackendUnconfigured, "no base URL (set GSEO_BASE_URL)");
    std::string key = read_env(opt_.api_key_env).value_or("");
    if (key.empty())
      raise(ErrorCode::BackendUnconfigured, "no API key (set " + opt_.api_key_env + ")");
    std::string base = opt_.base_url;
    return [base, key](const std::string& body) -> HttpResult {
      httplib::Client cli(base);
      cli.set_connection_timeout(30);
      cli.set_read_timeout(300);
      httplib::Headers headers = {{"Authorization", "Bearer " + key}};
      auto res = cli.Post("/v1/chat/completions", headers, body, "application/json");
      if (!res) return {0, "", true, httplib::to_string(res.error())};
      return {res->status, res->body, false, ""};
    };
  }

  Options opt_;
};

// Counts backend invocations and tracks the in-flight high-water mark.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

  BackendResult invoke(const ChatRequest& req, const CacheKey& key) override {
    calls_.fetch_add(1);
    int now = in_flight_.fetch_add(1) + 1;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    struct Drop {
      std::atomic<int>& n;
      ~Drop() { n.fetch_sub(1); }
    } drop{in_flight_};
    return inner_->invoke(req, key);
  }

  int calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

// Captures every request that reaches the backend (cache misses only).
class RecordingBackend : public Backend {
 public:
  explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

  BackendResult invoke(const ChatRequest& req, const CacheKey& key) override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      captured_.push_back(req);
    }
    return inner_->invoke(req, key);
  }

  std::vector<ChatRequest> captured() const {
    std::lock_guard<std::mutex> lock(mu_);
    return captured_;
  }

 private:
  std::shared_ptr<Backend> inner_;
  mutable std::mutex mu_;
  mutable std::vector<ChatRequest> captured_;
};

// Front door for all model traffic: validates, consults the cache, bounds
// backend concurrency, and persists every fresh completion.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, fs::path cache_dir, int concurrency = 4)
      : backend_(std::move(backend)),
        cache_(std::move(cache_dir)),
        slots_(std::make_unique<std::counting_semaphore<>>(concurrency > 0 ? concurrency : 1)) {}

  const ResponseCache& cache() const { return cache_; }

  ChatResponse complete(const ChatRequest& req) {
    validate_request(req);
    if (!backend_) raise(ErrorCode::BackendUnconfigured, "no backend configured");
    CacheKey key = cache_key(req);
    if (auto hit = cache_.lookup(key.digest)) return {*hit, true, std::nullopt, 1};

    slots_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    if (auto hit = cache_.lookup(key.digest)) return {*hit, true, std::nullopt, 1};
    BackendResult r = backend_->invoke(req, key);
    cache_.store(key, req, r.text);
    return {r.text, false, r.latency_ms, r.attempt_count};
  }

  // Sends the prompt plus an image content part. Local locators must be
  // readable; remote ones are passed through for the backend to resolve.
  ChatResponse caption_image(const ImageAsset& image, const std::string& prompt,
                             ChatRequest base) {
    if (image.locator.empty()) raise(ErrorCode::ImageUnreadable, image.image_id);
    if (!is_remote_locator(image.locator) && !fs::exists(image.locator))
      raise(ErrorCode::ImageUnreadable, image.locator);
    base.messages.push_back({"user", prompt, image.locator});
    return complete(base);
  }

 private:
  std::shared_ptr<Backend> backend_;
  ResponseCache cache_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace gseo
