#pragma once

#include <unistd.h>

#include <atomic>
#include <string>

#include "gseo/common.hpp"

namespace testutil {

inline gseo::fs::path fixture_dir() { return gseo::fs::path(GSEO_FIXTURE_DIR); }
inline gseo::fs::path repo_dir() { return gseo::fs::path(GSEO_REPO_DIR); }

// Fresh directory under the system temp area, removed on scope exit.
struct TempDir {
  gseo::fs::path path;

  TempDir() {
    static std::atomic<uint64_t> counter{0};
    path = gseo::fs::temp_directory_path() /
           ("gseo-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    gseo::fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    gseo::fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testutil
