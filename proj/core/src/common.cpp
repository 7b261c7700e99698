// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

namespace taxel {

namespace {

LogLevel parse_level() {
  const char* env = std::getenv("TAXEL_LOG");
  if (env == nullptr) return LogLevel::Info;
  const std::string_view v{env};
  if (v == "error") return LogLevel::Error;
  if (v == "warn") return LogLevel::Warn;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::Error: return "error";
    case LogLevel::Warn: return "warn";
    case LogLevel::Info: return "info";
    case LogLevel::Debug: return "debug";
  }
  return "?";
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = parse_level();
  return level;
}

void log(LogLevel level, std::string_view msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "[taxel %s] %.*s\n", level_tag(level),
               static_cast<int>(msg.size()), msg.data());
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  std::uint64_t a = splitmix64(s);
  return splitmix64(s) ^ a;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (jobs <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void ensure_fresh_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path path(dir);
  if (fs::exists(path)) {
    if (!fs::is_directory(path))
      throw std::runtime_error(dir + " exists and is not a directory");
    if (!fs::is_empty(path))
      throw std::runtime_error("output directory " + dir + " is not empty");
  } else {
    fs::create_directories(path);
  }
}

}  // namespace taxel
