#pragma once

#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gseo {

namespace fs = std::filesystem;

enum class ErrorCode {
  // corpus
  UnreadablePath,
  SchemaViolation,
  DanglingReference,
  EmptySelection,
  // gateway
  InvalidRequest,
  TransientExhausted,
  PermanentRejection,
  ReplayMiss,
  BackendUnconfigured,
  ImageUnreadable,
  // optimizer
  EmptyCaption,
  ParseFailure,
  EmptyInput,
  NoUsableCaption,
  // simulator
  EmptySources,
  DegenerateResponse,
  // evaluator
  ScoreParseFailure,
  ScoreOutOfRange,
  DomainViolation,
  EmptyList,
  // runner
  EmptyRecords,
  ConfigError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnreadablePath: return "UnreadablePath";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::TransientExhausted: return "TransientExhausted";
    case ErrorCode::PermanentRejection: return "PermanentRejection";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::BackendUnconfigured: return "BackendUnconfigured";
    case ErrorCode::ImageUnreadable: return "ImageUnreadable";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoUsableCaption: return "NoUsableCaption";
    case ErrorCode::EmptySources: return "EmptySources";
    case ErrorCode::DegenerateResponse: return "DegenerateResponse";
    case ErrorCode::ScoreParseFailure: return "ScoreParseFailure";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::EmptyRecords: return "EmptyRecords";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(std::move(message)) {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

inline std::optional<std::string> read_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::UnreadablePath, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::optional<std::string> try_read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write-temp-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static std::atomic<uint64_t> counter{0};
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << ::getpid() << "."
           << counter.fetch_add(1);
  fs::path tmp = path.has_parent_path() ? path.parent_path() / tmp_name.str()
                                        : fs::path(tmp_name.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open temp file " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("rename failed for " + path.string() + ": " + ec.message());
  }
}

// Deterministic 64-bit generator used wherever seeded behavior must be
// reproducible across platforms (std::shuffle and the distributions are
// implementation-defined, so they are avoided for anything persisted).
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform-ish in [0, bound); bound > 0. Modulo bias is irrelevant at the
  // corpus sizes involved and keeps the sequence portable.
  uint64_t bounded(uint64_t bound) { return next() % bound; }

 private:
  uint64_t state_;
};

template <typename T>
void deterministic_shuffle(std::vector<T>& items, uint64_t seed) {
  SplitMix64 rng(seed);
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace gseo
