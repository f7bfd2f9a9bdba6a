#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace icuflow {

struct SyntheticOptions {
  std::uint64_t seed = 7;
  std::size_t n_stays = 20;
  double expired_fraction = 0.5;
};

// Writes the full set of eICU-shaped fixture files (default_schema names)
// into out_dir, deterministically for a given seed. Each stay carries a
// hidden severity in [0, 1] that drives its vitals, labs, reference
// predictions, and actual outcome, so downstream accuracy checks have real
// signal to find. Generated stays always pass the completeness rule.
void generate_synthetic(const std::filesystem::path& out_dir, const SyntheticOptions& options);

// The file names generate_synthetic produces, in write order.
std::vector<std::string> synthetic_file_names();

}  // namespace icuflow
