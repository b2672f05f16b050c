#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace modeljoin {

// Everything a command run depends on; the seed lands in every output
// artifact's manifest so runs are reproducible.
struct RunConfig {
  std::string command;
  std::string meta_path;
  std::string query_path;
  std::string data_dir;
  std::string models_dir;
  std::string out_path;
  std::uint64_t seed = 1;
  std::uint64_t n = 0;
  double alpha = 0.01;
  int clusters = 50;
  int embed_dim = 64;
  int negatives = 5;
  int epochs = 3;
  int sg_epochs = 5;
  double lr = 0.0005;
  int hidden = 200;
  int workers = 1;
  std::int64_t oracle_cap = 5'000'000;
  std::uint64_t reject_budget = 0;
};

// Runs one CLI invocation (args exclude the program name) and returns the
// process exit code. Errors map to distinct nonzero codes per kind.
int run_cli(const std::vector<std::string>& args);

}  // namespace modeljoin
