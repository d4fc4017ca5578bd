#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rootseg/frangi.hpp"
#include "rootseg/line_intersect.hpp"
#include "rootseg/net/unet.hpp"
#include "rootseg/synth.hpp"
#include "rootseg/train_config.hpp"

namespace rootseg {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CmaSettings {
  long long max_evaluations = 150;
  double initial_sigma = 0.3;
  int population_size = 0;
};

struct DataPaths {
  std::string manifest;
  std::string input;  // directory of images to segment
  std::string model;
  std::string frangi_params;
  std::string pred;
  std::string truth;
  std::string resume;
};

// Everything one run needs. A single global seed drives scene generation,
// training and tuning.
struct RunConfig {
  std::uint64_t seed = 1;
  int synth_count = 10;
  SceneConfig scene;
  FrangiParams frangi;
  net::ArchSpec arch;
  TrainConfig train;
  GridSpec grid;
  CmaSettings cma;
  DataPaths data;

  // Pushes the global seed into the module configs.
  void sync_seed() {
    scene.seed = seed;
    train.seed = seed;
  }

  void validate() const {
    if (synth_count < 1) throw ConfigError("synth.count must be >= 1");
    scene.validate();
    frangi.validate();
    arch.validate();
    train.validate();
    net::output_geometry(arch, train.input_size);
    if (!(grid.square_size_mm > 0) || !(grid.mm_per_pixel > 0))
      throw ConfigError("grid.square_size_mm and grid.mm_per_pixel must be positive");
    if (grid.panel_width_mm < 0 || grid.panel_height_mm < 0) throw ConfigError("grid panel size must be >= 0");
    if (cma.max_evaluations < 0) throw ConfigError("cma.max_evaluations must be >= 0");
    if (!(cma.initial_sigma > 0)) throw ConfigError("cma.initial_sigma must be positive");
    if (cma.population_size == 1 || cma.population_size < 0)
      throw ConfigError("cma.population_size must be 0 (automatic) or >= 2");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError(key + ": cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
  else if constexpr (std::is_same_v<T, std::string>) return v;
  else if constexpr (std::is_floating_point_v<T>) return format_double(v);
  else return std::to_string(v);
}

template <typename T>
T from_text(const std::string& key, const std::string& v) {
  if constexpr (std::is_same_v<T, bool>) return parse_bool(key, v);
  else if constexpr (std::is_same_v<T, std::string>) return v;
  else return parse_number<T>(key, v);
}

template <typename S, typename T>
ConfigField field(const std::string& key, S RunConfig::*section, T S::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*section.*member = from_text<T>(key, v); },
          [=](const RunConfig& c) { return to_text(c.*section.*member); }};
}

template <typename T>
ConfigField top(const std::string& key, T RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = from_text<T>(key, v); },
          [=](const RunConfig& c) { return to_text(c.*member); }};
}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    using R = RunConfig;
    std::vector<ConfigField> f{
        top("seed", &R::seed),
        top("synth.count", &R::synth_count),
        field("scene.height", &R::scene, &SceneConfig::height),
        field("scene.width", &R::scene, &SceneConfig::width),
        field("scene.root_count_min", &R::scene, &SceneConfig::root_count_min),
        field("scene.root_count_max", &R::scene, &SceneConfig::root_count_max),
        field("scene.root_width_min", &R::scene, &SceneConfig::root_width_min),
        field("scene.root_width_max", &R::scene, &SceneConfig::root_width_max),
        field("scene.root_brightness_min", &R::scene, &SceneConfig::root_brightness_min),
        field("scene.root_brightness_max", &R::scene, &SceneConfig::root_brightness_max),
        field("scene.root_length_min", &R::scene, &SceneConfig::root_length_min),
        field("scene.root_length_max", &R::scene, &SceneConfig::root_length_max),
        field("scene.background_noise_sigma", &R::scene, &SceneConfig::background_noise_sigma),
        field("scene.curvature", &R::scene, &SceneConfig::curvature),
        field("scene.blotch_amplitude", &R::scene, &SceneConfig::blotch_amplitude),
        field("scene.debris_count_min", &R::scene, &SceneConfig::debris_count_min),
        field("scene.debris_count_max", &R::scene, &SceneConfig::debris_count_max),
        field("scene.debris_length_min", &R::scene, &SceneConfig::debris_length_min),
        field("scene.debris_length_max", &R::scene, &SceneConfig::debris_length_max),
    };
    // Scales are written as a comma separated list.
    f.push_back({"frangi.sigmas",
                 [](R& c, const std::string& v) {
                   std::vector<double> s;
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) s.push_back(parse_number<double>("frangi.sigmas", trim(item)));
                   if (s.empty()) throw ConfigError("frangi.sigmas: empty list");
                   c.frangi.sigmas = s;
                 },
                 [](const R& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.frangi.sigmas.size(); ++i)
                     out += (i ? "," : "") + format_double(c.frangi.sigmas[i]);
                   return out;
                 }});
    std::vector<ConfigField> rest{
        field("frangi.beta", &R::frangi, &FrangiParams::beta),
        field("frangi.c", &R::frangi, &FrangiParams::c),
        field("frangi.threshold", &R::frangi, &FrangiParams::vesselness_threshold),
        field("frangi.min_component_size", &R::frangi, &FrangiParams::min_component_size),
        field("arch.depth", &R::arch, &net::ArchSpec::depth),
        field("arch.base_channels", &R::arch, &net::ArchSpec::base_channels),
        field("arch.norm_groups", &R::arch, &net::ArchSpec::norm_groups),
        field("train.batch_size", &R::train, &TrainConfig::batch_size),
        field("train.initial_lr", &R::train, &TrainConfig::initial_lr),
        field("train.momentum", &R::train, &TrainConfig::momentum),
        field("train.weight_decay", &R::train, &TrainConfig::weight_decay),
        field("train.lr_decay_factor", &R::train, &TrainConfig::lr_decay_factor),
        field("train.lr_decay_every", &R::train, &TrainConfig::lr_decay_every),
        field("train.ce_weight", &R::train, &TrainConfig::ce_weight),
        field("train.max_epochs", &R::train, &TrainConfig::max_epochs),
        field("train.tiles_sampled_per_image", &R::train, &TrainConfig::tiles_sampled_per_image),
        field("train.tiles_kept_per_image", &R::train, &TrainConfig::tiles_kept_per_image),
        field("train.input_size", &R::train, &TrainConfig::input_size),
        field("train.threshold", &R::train, &TrainConfig::threshold),
        field("train.augment", &R::train, &TrainConfig::augment),
        field("train.validation_size", &R::train, &TrainConfig::validation_size),
        field("grid.square_size_mm", &R::grid, &GridSpec::square_size_mm),
        field("grid.mm_per_pixel", &R::grid, &GridSpec::mm_per_pixel),
        field("grid.panel_width_mm", &R::grid, &GridSpec::panel_width_mm),
        field("grid.panel_height_mm", &R::grid, &GridSpec::panel_height_mm),
        field("cma.max_evaluations", &R::cma, &CmaSettings::max_evaluations),
        field("cma.initial_sigma", &R::cma, &CmaSettings::initial_sigma),
        field("cma.population_size", &R::cma, &CmaSettings::population_size),
        field("data.manifest", &R::data, &DataPaths::manifest),
        field("data.input", &R::data, &DataPaths::input),
        field("data.model", &R::data, &DataPaths::model),
        field("data.frangi_params", &R::data, &DataPaths::frangi_params),
        field("data.pred", &R::data, &DataPaths::pred),
        field("data.truth", &R::data, &DataPaths::truth),
        field("data.resume", &R::data, &DataPaths::resume),
    };
    f.insert(f.end(), rest.begin(), rest.end());
    return f;
  }();
  return fields;
}

}  // namespace detail

// Sets one key. Unknown keys are rejected.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : detail::config_fields())
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

// "key = value" lines; '#' starts a comment. When `prefix` is non-empty only
// keys starting with it are accepted.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source = "<config>",
                              const std::string& prefix = "") {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (!prefix.empty() && key.rfind(prefix, 0) != 0) throw ConfigError(where + "key '" + key + "' not allowed here");
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void apply_config_file(RunConfig& cfg, const std::string& path, const std::string& prefix = "") {
  apply_config_text(cfg, read_text_file(path), path, prefix);
}

// Every key, one per line, in a form apply_config_text reads back exactly.
inline std::string dump_config(const RunConfig& cfg, const std::string& prefix = "") {
  std::string out;
  for (const auto& f : detail::config_fields())
    if (prefix.empty() || f.key.rfind(prefix, 0) == 0) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

inline FrangiParams read_frangi_params(const std::string& path) {
  RunConfig c;
  apply_config_file(c, path, "frangi.");
  c.frangi.validate();
  return c.frangi;
}

inline std::string frangi_params_text(const FrangiParams& p) {
  RunConfig c;
  c.frangi = p;
  return dump_config(c, "frangi.");
}

}  // namespace rootseg
