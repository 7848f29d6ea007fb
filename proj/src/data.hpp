#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "model.hpp"
#include "preprocessing.hpp"

namespace sftl {

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Vertical + sample split of one CSV into the two party views.
struct DatasetSpec {
  std::string csv_path;
  std::string label_column = "label";
  // Explicit feature partition by column name; when both lists are empty
  // the non-label columns are split in half (first half to the source).
  std::vector<std::string> source_columns;
  std::vector<std::string> target_columns;
  double overlap_frac = 0.2;
  std::uint32_t n_labeled = 0;  // 0: every target row with a label (= N_T)
  std::uint64_t seed = 1;
};

struct SplitResult {
  SourceData source;
  TargetData target;
  TrainShape shape;
};

SplitResult load_and_split(const DatasetSpec& spec);

// Seeded synthetic binary-classification generator: features uniform in
// [-1,1], labels from a random separating hyperplane (optionally with label
// noise), so the Bayes-optimal F1 is known.
void write_synthetic_csv(const std::string& path, std::uint32_t samples,
                         std::uint32_t source_features, std::uint32_t target_features,
                         std::uint64_t seed, double label_noise = 0.0);

double weighted_f1(std::span<const int> truth, std::span<const int> predicted);

}  // namespace sftl
