#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "occreg/dynamic_filter.hpp"
#include "occreg/registration.hpp"

namespace occreg {

enum class MotionModel { constant_velocity, identity };

struct OdometryConfig {
  GicpConfig coarse;
  GicpConfig refined;
  /// Adds P_S to the first pass as well.
  bool coarse_semantic_filter = false;
  bool semantic_filter = true;
  bool dynamic_filter = true;
  bool pfilter = true;
  /// Ablation baseline: drop every movable point instead of running the dynamic filter.
  bool label_based_filter = false;
  DynamicFilterConfig dynamic;
  double pindex_threshold = 0.5;
  double crop_radius = 60.0;
  int downsample_period = 5;
  MotionModel motion_model = MotionModel::constant_velocity;
  /// Taxonomy file; empty selects the built-in 17-class set.
  std::string taxonomy;

  void validate() const;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Sets one `key = value` field. Throws ConfigError on an unknown key or a
/// malformed value.
void apply_setting(OdometryConfig& config, std::string_view key, std::string_view value);

/// Applies `key = value` lines on top of `base`; `#` starts a comment.
OdometryConfig parse_config(std::string_view text, OdometryConfig base = {});
OdometryConfig load_config(const std::filesystem::path& path, OdometryConfig base = {});

/// Every field as `key = value` lines, in a form parse_config reads back exactly.
std::string format_config(const OdometryConfig& config);

const char* to_string(MotionModel model);
const char* to_string(CorrespondenceSearch search);

}  // namespace occreg
