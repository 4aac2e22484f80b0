#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recipeforge/mask_diffusion.hpp"
#include "recipeforge/quantity_diffusion.hpp"
#include "recipeforge/scoring.hpp"

namespace recipeforge {

/// Flat `dotted.key = value` configuration. Every key has a default; unknown
/// keys are rejected. Keys under `paths.` hold file paths, stored absolute.
class RunConfig {
 public:
  RunConfig();

  /// Applies a config file over the current values. Relative paths resolve
  /// against the file's directory. Throws DataError on syntax or unknown keys.
  void merge_file(const std::filesystem::path& path);
  /// Throws std::invalid_argument for unknown keys. Relative paths resolve
  /// against the working directory.
  void set(const std::string& key, const std::string& value);
  /// "key=value" form of set.
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
  std::uint64_t integer(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;  // comma-separated, empty entries dropped
  std::optional<std::filesystem::path> path(const std::string& key) const;
  /// Like path() but throws DataError when unset or missing on disk.
  std::filesystem::path existing_path(const std::string& key) const;

  /// Sorted `key = value` lines.
  std::string resolved_text() const;
  /// FNV-1a of resolved_text().
  std::string hash() const;

  static const std::map<std::string, std::string>& defaults();

 private:
  void assign(const std::string& key, std::string value, const std::filesystem::path& base);
  std::map<std::string, std::string> values_;
};

/// Per-stage seeds are derived from the run seed so stages never share streams.
enum class Stage : std::uint64_t { synth = 11, train_mask = 12, train_quantity = 13, sample = 14, rediscover = 15, validate = 16 };
std::uint64_t stage_seed(const RunConfig& config, Stage stage);

NoiseSchedule schedule_from(const RunConfig& config);
SdeSpec sde_from(const RunConfig& config);
MaskTrainingConfig mask_training_from(const RunConfig& config);
QuantityTrainingConfig quantity_training_from(const RunConfig& config);
PersonProfile profile_from(const RunConfig& config);
PersonalizationConfig personalization_from(const RunConfig& config);

}  // namespace recipeforge
