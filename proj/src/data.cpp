#include "rvi/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rvi {

const char* task_name(Task t) {
  switch (t) {
    case Task::regression: return "regression";
    case Task::binary_classification: return "classification";
    case Task::unsupervised: return "unsupervised";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "regression") return Task::regression;
  if (name == "classification" || name == "binary_classification") return Task::binary_classification;
  if (name == "unsupervised") return Task::unsupervised;
  throw ConfigError("unknown task '" + name + "'");
}

void Dataset::validate() const {
  if (inputs.size() != n * d) throw ShapeError("dataset inputs do not match N x D");
  if (targets.size() != n) throw ShapeError("dataset has " + std::to_string(targets.size()) + " targets for " +
                                            std::to_string(n) + " rows");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!std::isfinite(inputs[i])) {
      throw NumericError("non-finite input at row " + std::to_string(i / std::max<std::size_t>(d, 1)));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(targets[i])) throw NumericError("non-finite target at row " + std::to_string(i));
    if (task == Task::binary_classification && targets[i] != 0.0 && targets[i] != 1.0) {
      throw ConfigError("classification target at row " + std::to_string(i) + " is not 0 or 1");
    }
  }
  if (!outlier_mask.empty() && outlier_mask.size() != n) throw ShapeError("outlier mask does not match N");
  if (!clean_targets.empty() && clean_targets.size() != n) throw ShapeError("clean targets do not match N");
}

std::size_t Dataset::outlier_count() const {
  return static_cast<std::size_t>(std::count(outlier_mask.begin(), outlier_mask.end(), true));
}

Batch Dataset::to_batch() const { return Batch{Tensor({n, d}, inputs), Tensor({n, 1}, targets)}; }

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.n = rows.size();
  out.d = d;
  out.task = task;
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.source = source;
  out.inputs.reserve(rows.size() * d);
  for (std::size_t r : rows) {
    if (r >= n) throw ShapeError("subset row out of range");
    out.inputs.insert(out.inputs.end(), inputs.begin() + static_cast<std::ptrdiff_t>(r * d),
                      inputs.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
    out.targets.push_back(targets[r]);
    if (!outlier_mask.empty()) out.outlier_mask.push_back(outlier_mask[r]);
    if (!clean_targets.empty()) out.clean_targets.push_back(clean_targets[r]);
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, Task task) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty");
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 1) throw ConfigError("'" + path.string() + "' has no columns");
  Dataset data;
  data.d = header.size() - 1;
  data.feature_names.assign(header.begin(), header.end() - 1);
  data.target_name = header.back();
  data.task = task;
  data.source = "csv:" + path.filename().string();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                        " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const std::string where = "row " + std::to_string(row) + ", column " + std::to_string(c + 1) + " ('" +
                                header[c] + "')";
      if (cell.empty()) throw ConfigError(where + ": missing value");
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ConfigError(where + ": non-numeric value '" + cell + "'");
      }
      (c + 1 == cells.size() ? data.targets : data.inputs).push_back(v);
    }
    ++data.n;
  }
  if (data.n == 0) throw ConfigError("'" + path.string() + "' has no data rows");
  data.validate();
  return data;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  for (std::size_t j = 0; j < data.d; ++j) {
    out << (j < data.feature_names.size() ? data.feature_names[j] : "x" + std::to_string(j + 1)) << ',';
  }
  out << data.target_name << '\n';
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t j = 0; j < data.d; ++j) out << format_double(data.x(i, j)) << ',';
    out << format_double(data.targets[i]) << '\n';
  }
  if (!out) throw ConfigError("failed while writing '" + path.string() + "'");
}

Dataset generate_toy_regression(std::uint64_t seed, bool with_outliers, std::size_t inliers) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.d = 1;
  data.feature_names = {"x"};
  data.source = "toy_regression";
  for (std::size_t i = 0; i < inliers; ++i) {
    const double x = normal(rng);
    const double f = -0.5 * x - 0.1;
    data.inputs.push_back(x);
    data.clean_targets.push_back(f);
    data.targets.push_back(f + 0.1 * normal(rng));
    data.outlier_mask.push_back(false);
  }
  if (with_outliers) {
    for (int i = 0; i < 24; ++i) {
      const double x = -15.0 + normal(rng);
      data.inputs.push_back(x);
      data.targets.push_back(-15.0 + normal(rng));
      data.clean_targets.push_back(-0.5 * x - 0.1);
      data.outlier_mask.push_back(true);
    }
  }
  data.n = data.targets.size();
  return data;
}

Dataset generate_toy_classification(std::uint64_t seed, bool with_outliers, std::size_t per_class) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.d = 2;
  data.feature_names = {"x1", "x2"};
  data.task = Task::binary_classification;
  data.source = "toy_classification";
  auto add = [&](double m1, double m2, double sd, double label, bool outlier) {
    data.inputs.push_back(m1 + sd * normal(rng));
    data.inputs.push_back(m2 + sd * normal(rng));
    data.targets.push_back(label);
    data.outlier_mask.push_back(outlier);
  };
  for (std::size_t i = 0; i < per_class; ++i) add(-1.0, -1.0, 1.0, 1.0, false);
  for (std::size_t i = 0; i < per_class; ++i) add(1.0, 1.0, 0.5, 0.0, false);
  if (with_outliers) {
    for (int i = 0; i < 30; ++i) add(7.0, 0.0, std::sqrt(10.0), 1.0, true);
  }
  data.n = data.targets.size();
  return data;
}

Dataset generate_powerplant_surrogate(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.d = 4;
  data.n = n;
  data.feature_names = {"AT", "V", "AP", "RH"};
  data.target_name = "PE";
  data.source = "surrogate:powerplant";
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = normal(rng);
    const double z2 = 0.84 * z1 + std::sqrt(1.0 - 0.84 * 0.84) * normal(rng);
    const double z3 = -0.5 * z1 + std::sqrt(0.75) * normal(rng);
    const double z4 = -0.54 * z1 + std::sqrt(1.0 - 0.54 * 0.54) * normal(rng);
    data.inputs.insert(data.inputs.end(), {19.65 + 7.45 * z1, 54.3 + 12.7 * z2, 1013.3 + 5.9 * z3, 73.3 + 14.6 * z4});
    const double f = 454.4 - 13.0 * z1 - 3.0 * z2 + 0.8 * z3 - 2.2 * z4 + 1.6 * z1 * z1 - 1.1 * z1 * z4 +
                     2.0 * std::sin(1.5 * z2);
    data.clean_targets.push_back(f);
    data.targets.push_back(f + 4.0 * normal(rng));
  }
  return data;
}

Dataset generate_eeg_surrogate(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset data;
  data.d = 14;
  data.n = n;
  data.task = Task::binary_classification;
  data.target_name = "eyeDetection";
  data.source = "surrogate:eeg";
  for (std::size_t j = 0; j < data.d; ++j) data.feature_names.push_back("ch" + std::to_string(j + 1));
  std::vector<double> z(data.d);
  for (std::size_t i = 0; i < n; ++i) {
    // Two shared factors give the channels realistic correlation.
    const double a = normal(rng), b = normal(rng);
    for (std::size_t j = 0; j < data.d; ++j) {
      const double la = 0.6 * std::cos(0.4 * static_cast<double>(j));
      const double lb = 0.5 * std::sin(0.3 * static_cast<double>(j) + 0.2);
      z[j] = la * a + lb * b + std::sqrt(1.0 - la * la - lb * lb) * normal(rng);
      data.inputs.push_back(4300.0 + 40.0 * z[j]);
    }
    const double logit = 1.2 * z[0] - 0.9 * z[3] + 0.7 * z[6] - 0.8 * z[9] + 0.6 * z[13] + 1.1 * std::tanh(z[1] * z[4]) +
                         0.5 * (z[2] * z[2] - 1.0) - 0.2;
    data.targets.push_back(unif(rng) < 1.0 / (1.0 + std::exp(-2.5 * logit)) ? 1.0 : 0.0);
  }
  return data;
}

Standardizer Standardizer::fit(const Dataset& train, bool standardize_targets) {
  train.validate();
  if (train.n < 2) throw ConfigError("standardization needs at least two rows");
  Standardizer s;
  s.mean.assign(train.d, 0.0);
  s.scale.assign(train.d, 0.0);
  const double n = static_cast<double>(train.n);
  for (std::size_t i = 0; i < train.n; ++i) {
    for (std::size_t j = 0; j < train.d; ++j) s.mean[j] += train.x(i, j) / n;
  }
  for (std::size_t i = 0; i < train.n; ++i) {
    for (std::size_t j = 0; j < train.d; ++j) s.scale[j] += (train.x(i, j) - s.mean[j]) * (train.x(i, j) - s.mean[j]);
  }
  for (auto& v : s.scale) {
    v = std::sqrt(v / n);
    if (!(v > 0.0)) v = 1.0;
  }
  s.targets = standardize_targets && train.task == Task::regression;
  if (s.targets) {
    double m = 0.0, v = 0.0;
    for (double y : train.targets) m += y / n;
    for (double y : train.targets) v += (y - m) * (y - m);
    s.target_mean = m;
    s.target_scale = v > 0.0 ? std::sqrt(v / n) : 1.0;
  }
  return s;
}

Dataset Standardizer::apply(const Dataset& data) const {
  if (data.d != mean.size()) throw ShapeError("standardizer was fitted on a different dimension");
  Dataset out = data;
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t j = 0; j < data.d; ++j) out.inputs[i * data.d + j] = (data.x(i, j) - mean[j]) / scale[j];
  }
  if (targets) {
    for (auto& y : out.targets) y = (y - target_mean) / target_scale;
    for (auto& y : out.clean_targets) y = (y - target_mean) / target_scale;
  }
  return out;
}

Dataset Standardizer::invert(const Dataset& data) const {
  if (data.d != mean.size()) throw ShapeError("standardizer was fitted on a different dimension");
  Dataset out = data;
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t j = 0; j < data.d; ++j) out.inputs[i * data.d + j] = data.x(i, j) * scale[j] + mean[j];
  }
  if (targets) {
    for (auto& y : out.targets) y = invert_target(y);
    for (auto& y : out.clean_targets) y = invert_target(y);
  }
  return out;
}

const char* contamination_mode_name(ContaminationMode m) {
  switch (m) {
    case ContaminationMode::input: return "input";
    case ContaminationMode::output: return "output";
    case ContaminationMode::both: return "both";
  }
  return "?";
}

ContaminationMode parse_contamination_mode(const std::string& name) {
  if (name == "input") return ContaminationMode::input;
  if (name == "output") return ContaminationMode::output;
  if (name == "both") return ContaminationMode::both;
  throw ConfigError("unknown contamination mode '" + name + "'");
}

void ContaminationSpec::validate() const {
  if (!(fraction >= 0.0 && fraction < 0.5)) throw ConfigError("contamination fraction must lie in [0, 0.5)");
  if (!(noise_std > 0.0)) throw ConfigError("contamination noise_std must be positive");
}

ContaminationResult contaminate(const Dataset& data, const ContaminationSpec& spec) {
  spec.validate();
  data.validate();
  ContaminationResult out{data, {}, {}, {}};
  if (out.data.outlier_mask.empty()) out.data.outlier_mask.assign(data.n, false);
  const auto count = static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(data.n) + 1e-9));
  if (count == 0) {
    if (spec.fraction > 0.0) out.warning = "contamination fraction rounds to zero rows; data left unchanged";
    return out;
  }
  Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  std::vector<std::size_t> order(data.n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  out.rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.rows.begin(), out.rows.end());

  const bool classify = data.task == Task::binary_classification;
  if (spec.mode != ContaminationMode::output) {
    std::vector<std::size_t> features(data.d);
    std::iota(features.begin(), features.end(), 0);
    if (classify) {
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(data.d / 2);
      std::sort(features.begin(), features.end());
    }
    out.features = features;
  }
  for (std::size_t r : out.rows) {
    for (std::size_t j : out.features) out.data.inputs[r * data.d + j] += noise(rng);
    if (spec.mode != ContaminationMode::input) {
      if (classify) {
        out.data.targets[r] = 1.0 - out.data.targets[r];
      } else {
        out.data.targets[r] += noise(rng);
      }
    }
    out.data.outlier_mask[r] = true;
  }
  return out;
}

Split train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
  std::vector<std::size_t> order(data.n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.n)));
  if (n_test == 0 || n_test >= data.n) throw ConfigError("split leaves an empty train or test set");
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> test(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  return Split{data.subset(train), data.subset(test)};
}

Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n >= data.n) return data;
  std::vector<std::size_t> order(data.n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(n);
  std::sort(order.begin(), order.end());
  return data.subset(order);
}

}  // namespace rvi
