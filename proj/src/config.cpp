#include "occreg/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace occreg {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || std::isnan(out)) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

long long parse_int(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects true or false, got '" + std::string(v) + "'");
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(OdometryConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const OdometryConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <class T>
Field number_field(T OdometryConfig::*member) {
  return {[member](OdometryConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*member = parse_double(k, v);
            } else {
              c.*member = static_cast<T>(parse_int(k, v));
            }
          },
          [member](const OdometryConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field bool_field(bool OdometryConfig::*member) {
  return {[member](OdometryConfig& c, std::string_view k, std::string_view v) { c.*member = parse_bool(k, v); },
          [member](const OdometryConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

template <class T>
Field dynamic_field(T DynamicFilterConfig::*member) {
  return {[member](OdometryConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.dynamic.*member = parse_double(k, v);
            } else {
              c.dynamic.*member = static_cast<T>(parse_int(k, v));
            }
          },
          [member](const OdometryConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.dynamic.*member);
            else return std::to_string(c.dynamic.*member);
          }};
}

template <class T>
Field gicp_field(GicpConfig OdometryConfig::*pass, T GicpConfig::*member) {
  return {[pass, member](OdometryConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              (c.*pass).*member = parse_double(k, v);
            } else {
              (c.*pass).*member = static_cast<T>(parse_int(k, v));
            }
          },
          [pass, member](const OdometryConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt((c.*pass).*member);
            else return std::to_string((c.*pass).*member);
          }};
}

Field search_field(GicpConfig OdometryConfig::*pass) {
  return {[pass](OdometryConfig& c, std::string_view k, std::string_view v) {
            if (v == "nearest_then_filter") {
              (c.*pass).search = CorrespondenceSearch::nearest_then_filter;
            } else if (v == "nearest_admissible") {
              (c.*pass).search = CorrespondenceSearch::nearest_admissible;
            } else {
              throw ConfigError("config: '" + std::string(k) + "' expects nearest_then_filter or nearest_admissible");
            }
          },
          [pass](const OdometryConfig& c) { return std::string(to_string((c.*pass).search)); }};
}

// std::map keeps format_config output sorted and stable.
const std::map<std::string, Field, std::less<>>& fields() {
  static const auto table = [] {
    std::map<std::string, Field, std::less<>> t;
    for (auto [prefix, pass] : {std::pair{"coarse.", &OdometryConfig::coarse}, {"refined.", &OdometryConfig::refined}}) {
      const std::string p = prefix;
      t[p + "max_corr_dist"] = gicp_field(pass, &GicpConfig::max_corr_dist);
      t[p + "max_iterations"] = gicp_field(pass, &GicpConfig::max_iterations);
      t[p + "translation_eps"] = gicp_field(pass, &GicpConfig::translation_eps);
      t[p + "rotation_eps"] = gicp_field(pass, &GicpConfig::rotation_eps);
      t[p + "k_neighbors"] = gicp_field(pass, &GicpConfig::k_neighbors);
      t[p + "epsilon_reg"] = gicp_field(pass, &GicpConfig::epsilon_reg);
      t[p + "lambda0"] = gicp_field(pass, &GicpConfig::lambda0);
      t[p + "max_retries"] = gicp_field(pass, &GicpConfig::max_retries);
      t[p + "min_correspondences"] = gicp_field(pass, &GicpConfig::min_correspondences);
      t[p + "search"] = search_field(pass);
    }
    t["coarse.semantic_filter"] = bool_field(&OdometryConfig::coarse_semantic_filter);
    t["semantic_filter"] = bool_field(&OdometryConfig::semantic_filter);
    t["dynamic_filter"] = bool_field(&OdometryConfig::dynamic_filter);
    t["pfilter"] = bool_field(&OdometryConfig::pfilter);
    t["label_based_filter"] = bool_field(&OdometryConfig::label_based_filter);
    t["displacement_threshold"] = dynamic_field(&DynamicFilterConfig::displacement_threshold);
    t["cluster_radius"] = dynamic_field(&DynamicFilterConfig::cluster_radius);
    t["min_cluster_size"] = dynamic_field(&DynamicFilterConfig::min_cluster_size);
    t["match_radius"] = dynamic_field(&DynamicFilterConfig::match_radius);
    t["pindex_threshold"] = number_field(&OdometryConfig::pindex_threshold);
    t["crop_radius"] = number_field(&OdometryConfig::crop_radius);
    t["downsample_period"] = number_field(&OdometryConfig::downsample_period);
    t["motion_model"] = Field{[](OdometryConfig& c, std::string_view k, std::string_view v) {
                                if (v == "constant_velocity") {
                                  c.motion_model = MotionModel::constant_velocity;
                                } else if (v == "identity") {
                                  c.motion_model = MotionModel::identity;
                                } else {
                                  throw ConfigError("config: '" + std::string(k) +
                                                    "' expects constant_velocity or identity");
                                }
                              },
                              [](const OdometryConfig& c) { return std::string(to_string(c.motion_model)); }};
    t["taxonomy"] = Field{[](OdometryConfig& c, std::string_view, std::string_view v) { c.taxonomy = v; },
                          [](const OdometryConfig& c) { return c.taxonomy; }};
    return t;
  }();
  return table;
}

}  // namespace

void OdometryConfig::validate() const {
  coarse.validate();
  refined.validate();
  dynamic.validate();
  if (!(pindex_threshold >= 0.0) || !(crop_radius > 0.0) || downsample_period < 0) {
    throw ConfigError("OdometryConfig: thresholds must be non-negative and crop_radius positive");
  }
}

const char* to_string(MotionModel model) {
  return model == MotionModel::identity ? "identity" : "constant_velocity";
}

const char* to_string(CorrespondenceSearch search) {
  return search == CorrespondenceSearch::nearest_then_filter ? "nearest_then_filter" : "nearest_admissible";
}

void apply_setting(OdometryConfig& config, std::string_view key, std::string_view value) {
  const auto it = fields().find(trim(key));
  if (it == fields().end()) throw ConfigError("config: unknown key '" + std::string(trim(key)) + "'");
  it->second.set(config, trim(key), trim(value));
}

OdometryConfig parse_config(std::string_view text, OdometryConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

OdometryConfig load_config(const std::filesystem::path& path, OdometryConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const OdometryConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace occreg
