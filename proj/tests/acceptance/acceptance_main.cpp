// Runs every acceptance criterion and prints one PASS/FAIL line for each.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <thread>

#include "criteria.hpp"

int main(int argc, char** argv) {
  geomatch::acceptance::Settings settings;
  settings.workdir = std::filesystem::temp_directory_path() / "geomatch-acceptance";
  settings.cli = GEOMATCH_CLI_PATH;
  settings.threads = std::max(1u, std::thread::hardware_concurrency());
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workdir" && i + 1 < argc) {
      settings.workdir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::cerr << "usage: geomatch_acceptance [--workdir DIR] [--only NAME]\n";
      return 2;
    }
  }
  std::filesystem::create_directories(settings.workdir);

  int failures = 0;
  for (const auto& c : geomatch::acceptance::all_criteria(settings)) {
    if (!only.empty() && c.name.find(only) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    geomatch::acceptance::Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !out.pass;
    std::printf("%s  %-28s %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c.name.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
