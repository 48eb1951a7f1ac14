#ifndef DEPTHPOSE_CONFIG_HPP_
#define DEPTHPOSE_CONFIG_HPP_

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "depthpose/data.hpp"
#include "depthpose/trainer.hpp"

#ifndef DEPTHPOSE_VERSION
#define DEPTHPOSE_VERSION "unknown"
#endif

namespace depthpose {

// Flat key=value configuration. '#' starts a comment; blank lines are
// ignored; every key maps onto one TrainConfig field.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const char* pair_rule_name(PairRule r) {
  switch (r) {
    case PairRule::AnyAngle:
      return "any_angle";
    case PairRule::AllAngles:
      return "all_angles";
    case PairRule::Sum:
      return "sum";
  }
  return "any_angle";
}

inline PairRule parse_pair_rule(std::string_view s) {
  if (s == "any_angle") return PairRule::AnyAngle;
  if (s == "all_angles") return PairRule::AllAngles;
  if (s == "sum") return PairRule::Sum;
  throw ConfigError("unknown pair rule '" + std::string(s) +
                    "' (any_angle, all_angles, sum)");
}

namespace detail {

struct ConfigKey {
  std::string_view name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

inline double to_double(std::string_view v) {
  const auto d = parse_number(v);
  if (!d) throw ConfigError("expected a number, got '" + std::string(v) + "'");
  return *d;
}

inline std::uint64_t to_uint(std::string_view v) {
  std::uint64_t n = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("expected a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return n;
}

inline bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + std::string(v) + "'");
}

#define DEPTHPOSE_NUM_KEY(key, field)                                   \
  ConfigKey {                                                           \
    key, [](const TrainConfig& c) { return format_number(c.field); },   \
        [](TrainConfig& c, std::string_view v) { c.field = to_double(v); } \
  }
#define DEPTHPOSE_UINT_KEY(key, field)                                  \
  ConfigKey {                                                           \
    key, [](const TrainConfig& c) { return std::to_string(c.field); },  \
        [](TrainConfig& c, std::string_view v) {                        \
          c.field = static_cast<decltype(c.field)>(to_uint(v));         \
        }                                                               \
  }
#define DEPTHPOSE_BOOL_KEY(key, field)                                  \
  ConfigKey {                                                           \
    key,                                                                \
        [](const TrainConfig& c) {                                      \
          return std::string(c.field ? "true" : "false");               \
        },                                                              \
        [](TrainConfig& c, std::string_view v) { c.field = to_bool(v); } \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      DEPTHPOSE_UINT_KEY("batch_size", batch_size),
      DEPTHPOSE_NUM_KEY("momentum", momentum),
      DEPTHPOSE_NUM_KEY("weight_decay", weight_decay),
      DEPTHPOSE_NUM_KEY("lr_initial", lr_initial),
      DEPTHPOSE_NUM_KEY("lr_final", lr_final),
      DEPTHPOSE_UINT_KEY("epochs", epochs),
      DEPTHPOSE_UINT_KEY("pairs_per_epoch", pairs_per_epoch),
      DEPTHPOSE_UINT_KEY("seed", seed),
      DEPTHPOSE_BOOL_KEY("augmentation", augmentation),
      DEPTHPOSE_BOOL_KEY("siamese", siamese),
      ConfigKey{"pair_rule",
                [](const TrainConfig& c) {
                  return std::string(pair_rule_name(c.pair_rule));
                },
                [](TrainConfig& c, std::string_view v) {
                  c.pair_rule = parse_pair_rule(v);
                }},
      DEPTHPOSE_NUM_KEY("pair_threshold_deg", pair_threshold_deg),
      DEPTHPOSE_NUM_KEY("loss_weight_cnn_1", loss_weights.cnn_1),
      DEPTHPOSE_NUM_KEY("loss_weight_cnn_2", loss_weights.cnn_2),
      DEPTHPOSE_NUM_KEY("loss_weight_siam", loss_weights.siam),
      DEPTHPOSE_NUM_KEY("pitch_max_deg", angle_range.pitch_max),
      DEPTHPOSE_NUM_KEY("roll_max_deg", angle_range.roll_max),
      DEPTHPOSE_NUM_KEY("yaw_max_deg", angle_range.yaw_max),
      DEPTHPOSE_NUM_KEY("augment_offset_fraction", augment.offset_fraction),
      DEPTHPOSE_NUM_KEY("augment_noise_fraction", augment.noise_sigma_fraction),
      DEPTHPOSE_NUM_KEY("face_width_mm", face_width_mm),
      DEPTHPOSE_NUM_KEY("divergence_factor", divergence_factor),
      DEPTHPOSE_NUM_KEY("validation_fraction", validation_fraction),
      DEPTHPOSE_UINT_KEY("threads", threads),
  };
  return keys;
}

#undef DEPTHPOSE_NUM_KEY
#undef DEPTHPOSE_UINT_KEY
#undef DEPTHPOSE_BOOL_KEY

}  // namespace detail

inline std::vector<std::string_view> config_key_names() {
  std::vector<std::string_view> names;
  for (const auto& k : detail::config_keys()) names.push_back(k.name);
  return names;
}

/// Applies one key=value assignment; unknown keys are rejected.
inline void set_config_value(TrainConfig& cfg, std::string_view key,
                             std::string_view value) {
  for (const auto& k : detail::config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline std::string get_config_value(const TrainConfig& cfg,
                                    std::string_view key) {
  for (const auto& k : detail::config_keys()) {
    if (k.name == key) return k.get(cfg);
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// Parses key=value lines on top of `base`.
inline TrainConfig parse_config(std::istream& in, TrainConfig base = {},
                                const std::string& source = "config") {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) {
      v = v.substr(0, hash);
    }
    v = detail::trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    try {
      set_config_value(base, detail::trim(v.substr(0, eq)),
                       detail::trim(v.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return base;
}

inline TrainConfig load_config(const std::filesystem::path& path,
                               TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, std::move(base), path.string());
}

inline std::string config_text(const TrainConfig& cfg) {
  std::ostringstream os;
  for (const auto& k : detail::config_keys()) {
    os << k.name << '=' << k.get(cfg) << '\n';
  }
  return os.str();
}

/// Run record written beside every output: the effective configuration plus
/// the code version and the command that produced it.
inline void write_manifest(const std::filesystem::path& path,
                           const TrainConfig& cfg, const std::string& command,
                           const std::vector<std::pair<std::string, std::string>>&
                               extra = {}) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write manifest " + path.string());
  out << "# depthpose run manifest\n"
      << "code_version=" << DEPTHPOSE_VERSION << '\n'
      << "command=" << command << '\n';
  for (const auto& [k, v] : extra) out << k << '=' << v << '\n';
  out << config_text(cfg);
}

/// Reads a manifest back as a configuration; non-config keys are skipped.
inline TrainConfig load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  std::ostringstream kept;
  std::string line;
  const auto names = config_key_names();
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.starts_with("#")) continue;
    const std::string key = line.substr(0, eq);
    if (std::find(names.begin(), names.end(), key) != names.end()) {
      kept << line << '\n';
    }
  }
  std::istringstream src(kept.str());
  return parse_config(src, {}, path.string());
}

}  // namespace depthpose

#endif  // DEPTHPOSE_CONFIG_HPP_
