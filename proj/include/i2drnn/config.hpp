#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "i2drnn/capacity.hpp"
#include "i2drnn/datagen.hpp"
#include "i2drnn/training.hpp"

namespace i2drnn {

/// Flat `key = value` settings. Every known key has a default; unknown keys are rejected.
class Config {
 public:
  Config();
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// `key=value` form, as given on the command line.
  void set_assignment(const std::string& kv);
  bool known(const std::string& key) const;

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;
  std::vector<long> get_lags(const std::string& key) const;

  /// Every key, sorted, one `key = value` per line.
  std::string resolved() const;
  void save(const std::filesystem::path& path) const;

  static std::vector<std::string> keys();

 private:
  std::map<std::string, std::string> values_;
};

CopyTaskSpec copy_spec(const Config& c);
FarimaSpec farima_spec(const Config& c);
Hyper hyper(const Config& c);
MiOptions mi_options(const Config& c);
CapacityOptions capacity_options(const Config& c);
/// `from:step:to` or a comma list.
std::vector<std::size_t> size_grid(const std::string& s);

/// The dataset a config describes, split and normalized; deterministic in `seed`.
SequenceDataset build_dataset(const Config& c);
ModelConfig model_config(const Config& c, const SequenceDataset& ds);

}  // namespace i2drnn
