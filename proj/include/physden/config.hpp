#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "physden/dataset.hpp"
#include "physden/training.hpp"

namespace physden {

/// Sectioned key-value run configuration ([data], [model], [train],
/// [physics], [output]). Command-line `section.key=value` overrides win
/// over the file. Unknown keys are rejected so typos do not go unnoticed.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

  void set(const std::string& dotted_key, const std::string& value);
  bool has(const std::string& dotted_key) const;
  std::string get(const std::string& dotted_key, const std::string& fallback) const;
  double get_double(const std::string& dotted_key, double fallback) const;
  long get_int(const std::string& dotted_key, long fallback) const;
  bool get_bool(const std::string& dotted_key, bool fallback) const;
  /// Throws ValidationError naming the key when absent.
  double require_double(const std::string& dotted_key) const;
  std::string require(const std::string& dotted_key) const;

  PhysicsFamily family() const;
  SimulationConfig simulation() const;
  TrainConfig training() const;
  /// [physics] entries other than `family`, as spec constants.
  std::map<std::string, double> physics_constants() const;
  std::filesystem::path output_dir() const;
  std::uint64_t seed() const;

  void validate_keys() const;

 private:
  boost::property_tree::ptree tree_;
};

Widths parse_widths(const std::string& text);

}  // namespace physden
