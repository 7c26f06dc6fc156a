#pragma once

// Datasets, CSV ingestion, toy generators, benchmark surrogates,
// standardization and contamination injectors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rvi/objectives.hpp"

namespace rvi {

enum class Task { regression, binary_classification, unsupervised };

const char* task_name(Task t);
Task parse_task(const std::string& name);

/// Row-major N x D inputs with one target per row.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  Task task = Task::regression;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  /// Marks injected or generated outliers; empty when none are tracked.
  std::vector<bool> outlier_mask;
  /// Noise-free regression targets, when the generator knows them.
  std::vector<double> clean_targets;
  /// Where the rows came from, e.g. "toy_regression" or "surrogate:powerplant".
  std::string source;

  void validate() const;
  double x(std::size_t row, std::size_t col) const { return inputs[row * d + col]; }
  std::size_t outlier_count() const;
  Batch to_batch() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Parses a headered CSV whose last column is the target.
Dataset load_csv(const std::filesystem::path& path, Task task = Task::regression);
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// 1000 points y = -0.5 x - 0.1 + N(0, 0.1^2), x ~ N(0, 1), plus 24 outliers
/// with (x, y) ~ N((-15, -15), I) unless `with_outliers` is false.
Dataset generate_toy_regression(std::uint64_t seed, bool with_outliers = true, std::size_t inliers = 1000);

/// 1000 points per class: label 1 around (-1, -1) with unit spread, label 0
/// around (1, 1) with spread 0.5. 30 outliers near (7, 0) with spread
/// sqrt(10) are labelled 1.
Dataset generate_toy_classification(std::uint64_t seed, bool with_outliers = true, std::size_t per_class = 1000);

/// Synthetic stand-ins with the size and dimension of the UCI benchmarks.
Dataset generate_powerplant_surrogate(std::uint64_t seed, std::size_t n = 9568);
Dataset generate_eeg_surrogate(std::uint64_t seed, std::size_t n = 14980);

/// Per-feature (and, for regression, target) affine standardization.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  double target_mean = 0.0;
  double target_scale = 1.0;
  bool targets = false;

  static Standardizer fit(const Dataset& train, bool standardize_targets);
  Dataset apply(const Dataset& data) const;
  Dataset invert(const Dataset& data) const;
  double invert_target(double y) const { return y * target_scale + target_mean; }
};

enum class ContaminationMode { input, output, both };

const char* contamination_mode_name(ContaminationMode m);
ContaminationMode parse_contamination_mode(const std::string& name);

struct ContaminationSpec {
  double fraction = 0.0;
  ContaminationMode mode = ContaminationMode::both;
  double noise_std = 6.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ContaminationResult {
  Dataset data;
  /// Sorted indices of modified rows.
  std::vector<std::size_t> rows;
  /// Features that received input noise.
  std::vector<std::size_t> features;
  /// Non-empty when the request rounded to zero rows.
  std::string warning;
};

/// Adds N(0, noise_std^2) to the inputs and/or targets of floor(fraction N)
/// rows drawn without replacement. Regression perturbs every feature;
/// classification perturbs D/2 features drawn once, and output contamination
/// flips labels.
ContaminationResult contaminate(const Dataset& data, const ContaminationSpec& spec);

struct Split {
  Dataset train;
  Dataset test;
};

/// Seeded shuffle, then the first (1 - test_fraction) N rows train.
Split train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Uniform subsample without replacement; keeps everything when n >= rows.
Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed);

}  // namespace rvi
