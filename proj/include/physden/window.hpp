#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "physden/tensor.hpp"

namespace physden {

/// One multi-channel time series: c named rows sampled every dt seconds.
struct SampleWindow {
  std::vector<std::string> names;
  std::vector<std::string> units;
  RowMatrixd values;  // c x T
  double dt = 1.0;

  SampleWindow() = default;
  SampleWindow(std::vector<std::string> names, RowMatrixd values, double dt, std::vector<std::string> units = {});

  Index channels() const { return values.rows(); }
  Index length() const { return values.cols(); }

  std::optional<Index> find(const std::string& name) const;
  Index index_of(const std::string& name) const;  // throws SpecError when absent
  bool has(const std::string& name) const { return find(name).has_value(); }

  auto row(const std::string& name) { return values.row(index_of(name)); }
  auto row(const std::string& name) const { return values.row(index_of(name)); }

  /// Rows for `names`, in that order.
  RowMatrixd select(const std::vector<std::string>& channel_names) const;
  void assign(const std::vector<std::string>& channel_names, const RowMatrixd& rows);

  /// Throws ValidationError when c < 1, T < 3, dt <= 0 or names repeat.
  void validate() const;
};

void save_csv(const SampleWindow& window, const std::filesystem::path& path);

/// Reads a `t,<channels>` CSV. When `schema` is non-empty every listed
/// channel must be present.
SampleWindow load_csv(const std::filesystem::path& path, const std::vector<std::string>& schema = {});

}  // namespace physden
