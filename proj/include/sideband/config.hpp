#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sideband/analytic.hpp"
#include "sideband/pipeline.hpp"

namespace sideband::config {

/// Unknown key, malformed value or inconsistent settings; a usage error.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KeySpec {
  std::string key;
  std::string default_value;  // empty: unset
  std::string doc;
};

/// Every accepted key with its default. Keys of the form
/// cal.quantum_efficiency.<channel> are accepted in addition.
const std::vector<KeySpec>& known_keys();

/// Flat key = value settings, seeded with the defaults. '#' starts a comment.
class Config {
 public:
  Config();

  void load(std::istream& in, const std::string& source = "<config>");
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  /// "key=value"
  void assign(std::string_view assignment);

  bool is_set(const std::string& key) const;
  const std::string& raw(const std::string& key) const;
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  /// Fully resolved settings, one "key = value" line per key, sorted by key.
  void write(std::ostream& os) const;

 private:
  std::map<std::string, std::string> values_;
};

/// model.r takes precedence over model.sinh2_r when set.
ModelParams model_params(const Config& cfg);
pipeline::CalibrationSet calibration(const Config& cfg);
pipeline::SimulatorConfig simulator(const Config& cfg);

struct GridAxes {
  std::vector<double> phi;
  std::vector<double> dtheta;
};

GridAxes grid_axes(const Config& cfg);

}  // namespace sideband::config
