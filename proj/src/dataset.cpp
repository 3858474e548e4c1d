#include "delta/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace delta {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string basename_stem(const std::string& path) {
  std::size_t slash = path.find_last_of("/\\");
  std::string base =
      slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = base.find_last_of('.');
  if (dot != std::string::npos) base = base.substr(0, dot);
  return base;
}

bool is_ett_family(const std::string& stem) {
  std::string lower = stem;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower.rfind("ett", 0) == 0;
}

}  // namespace

std::uint64_t TimeSeriesDataset::checksum() const {
  if (!values.defined()) return 0;
  return fnv1a(values.data(),
               static_cast<std::size_t>(values.numel()) * sizeof(double));
}

TimeSeriesDataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw IngestError("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw IngestError("dataset file '" + path + "' is empty");
  auto header = split_csv_line(trim(line));
  if (header.size() < 2)
    throw IngestError("dataset file '" + path +
                      "' needs a timestamp column plus at least one variable "
                      "(line 1)");
  TimeSeriesDataset ds;
  ds.name = basename_stem(path);
  for (std::size_t i = 1; i < header.size(); ++i)
    ds.variable_names.push_back(trim(header[i]));
  int c = static_cast<int>(ds.variable_names.size());

  std::vector<double> flat;  // time-major while reading
  int line_no = 1;
  int t = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    auto cells = split_csv_line(trimmed);
    if (static_cast<int>(cells.size()) != c + 1)
      throw IngestError("dataset file '" + path + "': line " +
                        std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(c + 1));
    for (int i = 0; i < c; ++i) {
      const std::string cell = trim(cells[static_cast<std::size_t>(i) + 1]);
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        flat.push_back(v);
      } catch (const std::exception&) {
        throw IngestError("dataset file '" + path + "': line " +
                          std::to_string(line_no) + ", column '" +
                          ds.variable_names[static_cast<std::size_t>(i)] +
                          "': cannot parse value '" + cell + "'");
      }
    }
    ++t;
  }
  if (t == 0)
    throw IngestError("dataset file '" + path + "' has a header but no rows");

  // transpose to variables-major [c, t]
  ds.values = Tensor::zeros({c, t});
  double* dst = ds.values.data();
  for (int ti = 0; ti < t; ++ti)
    for (int ci = 0; ci < c; ++ci)
      dst[static_cast<std::size_t>(ci) * t + ti] =
          flat[static_cast<std::size_t>(ti) * c + ci];

  if (is_ett_family(ds.name)) {
    ds.split_ratios = {0.6, 0.2, 0.2};
    ds.frequency = "h";
  } else {
    ds.split_ratios = {0.7, 0.1, 0.2};
  }
  return ds;
}

SplitRanges dataset_splits(const TimeSeriesDataset& ds, int lookback,
                           int horizon) {
  return split_by_ratio(ds.length(), ds.split_ratios, lookback, horizon);
}

void apply_global_zscore(TimeSeriesDataset& ds, const SplitRanges& splits) {
  if (ds.zscored)
    throw ContractError("apply_global_zscore: dataset '" + ds.name +
                        "' is already standardized");
  int c = ds.variables();
  int t = ds.length();
  int tb = splits.train.begin, te = splits.train.end;
  if (te <= tb)
    throw ConfigError("apply_global_zscore: empty train split");
  ds.z_mu.assign(static_cast<std::size_t>(c), 0.0);
  ds.z_sigma.assign(static_cast<std::size_t>(c), 1.0);
  double* v = ds.values.data();
  for (int ci = 0; ci < c; ++ci) {
    double* row = v + static_cast<std::size_t>(ci) * t;
    double mean = 0.0;
    for (int ti = tb; ti < te; ++ti) mean += row[ti];
    mean /= (te - tb);
    double var = 0.0;
    for (int ti = tb; ti < te; ++ti) {
      double d = row[ti] - mean;
      var += d * d;
    }
    var /= (te - tb);
    double sd = std::sqrt(var);
    if (sd == 0.0) sd = 1.0;  // constant variable: centering only
    ds.z_mu[static_cast<std::size_t>(ci)] = mean;
    ds.z_sigma[static_cast<std::size_t>(ci)] = sd;
    double inv = 1.0 / sd;
    for (int ti = 0; ti < t; ++ti) row[ti] = (row[ti] - mean) * inv;
  }
  ds.zscored = true;
}

WindowBatch gather_windows(const TimeSeriesDataset& ds,
                           const std::vector<int>& starts, int lookback,
                           int horizon) {
  if (starts.empty())
    throw ContractError("gather_windows: no window starts given");
  int c = ds.variables();
  int t = ds.length();
  int b = static_cast<int>(starts.size());
  for (int s : starts)
    if (s < 0 || s + lookback + horizon > t)
      throw ContractError("gather_windows: window at " + std::to_string(s) +
                          " exceeds series length " + std::to_string(t));
  WindowBatch batch;
  batch.inputs = Tensor::zeros({b, c, lookback});
  batch.targets = Tensor::zeros({b, c, horizon});
  const double* src = ds.values.data();
  double* xin = batch.inputs.data();
  double* tgt = batch.targets.data();
  for (int bi = 0; bi < b; ++bi) {
    int s = starts[static_cast<std::size_t>(bi)];
    for (int ci = 0; ci < c; ++ci) {
      const double* row = src + static_cast<std::size_t>(ci) * t;
      double* xrow = xin + (static_cast<std::size_t>(bi) * c + ci) * lookback;
      for (int k = 0; k < lookback; ++k) xrow[k] = row[s + k];
      double* trow = tgt + (static_cast<std::size_t>(bi) * c + ci) * horizon;
      for (int k = 0; k < horizon; ++k) trow[k] = row[s + lookback + k];
    }
  }
  return batch;
}

}  // namespace delta
