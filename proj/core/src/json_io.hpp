#pragma once

// Internal JSON helpers shared by the config and checkpoint formats.

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "pdegcn/dataset.hpp"
#include "pdegcn/errors.hpp"
#include "pdegcn/network.hpp"

namespace pdegcn::detail {

using nlohmann::json;

/// Rejects non-objects and keys outside `allowed`.
inline void require_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw UsageError(std::string(where) + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw UsageError(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

inline std::string key_path(std::string_view where, std::string_view key) {
  return std::string(where) + "." + std::string(key);
}

inline void read_field(const json& obj, std::string_view where, const char* key, double& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number()) throw UsageError(key_path(where, key) + ": expected a number");
  out = obj[key].get<double>();
}

template <typename Unsigned>
  requires std::is_unsigned_v<Unsigned>
void read_field(const json& obj, std::string_view where, const char* key, Unsigned& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_unsigned()) throw UsageError(key_path(where, key) + ": expected a non-negative integer");
  out = obj[key].get<Unsigned>();
}

inline void read_field(const json& obj, std::string_view where, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_boolean()) throw UsageError(key_path(where, key) + ": expected true or false");
  out = obj[key].get<bool>();
}

inline void read_field(const json& obj, std::string_view where, const char* key, std::string& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_string()) throw UsageError(key_path(where, key) + ": expected a string");
  out = obj[key].get<std::string>();
}

template <typename Enum, typename Parse>
void read_enum(const json& obj, std::string_view where, const char* key, Enum& out, Parse parse) {
  std::string name;
  if (!obj.contains(key)) return;
  read_field(obj, where, key, name);
  out = parse(name);
}

inline json model_to_json(const ModelConfig& c) {
  return {{"dynamics", to_string(c.dynamics)},
          {"layers", c.layers},
          {"channels", c.channels},
          {"step_size", c.step_size},
          {"activation", to_string(c.activation)},
          {"symmetric", c.symmetric},
          {"dropout", c.dropout},
          {"normalization", to_string(c.normalization)},
          {"alpha_init", c.alpha_init},
          {"leapfrog_start", to_string(c.leapfrog_start)}};
}

inline ModelConfig model_from_json(const json& obj, std::string_view where) {
  require_keys(obj, where,
               {"dynamics", "layers", "channels", "step_size", "activation", "symmetric", "dropout",
                "normalization", "alpha_init", "leapfrog_start"});
  ModelConfig c;
  read_enum(obj, where, "dynamics", c.dynamics, parse_dynamics);
  read_field(obj, where, "layers", c.layers);
  read_field(obj, where, "channels", c.channels);
  read_field(obj, where, "step_size", c.step_size);
  read_enum(obj, where, "activation", c.activation, parse_activation);
  read_field(obj, where, "symmetric", c.symmetric);
  read_field(obj, where, "dropout", c.dropout);
  read_enum(obj, where, "normalization", c.normalization, parse_normalization);
  read_field(obj, where, "alpha_init", c.alpha_init);
  read_enum(obj, where, "leapfrog_start", c.leapfrog_start, parse_leapfrog_start);
  return c;
}

inline json shape_to_json(const ModelShape& s) {
  return {{"input_channels", s.input_channels},
          {"edge_channels", s.edge_channels},
          {"output_channels", s.output_channels}};
}

inline ModelShape shape_from_json(const json& obj, std::string_view where) {
  require_keys(obj, where, {"input_channels", "edge_channels", "output_channels"});
  ModelShape s;
  read_field(obj, where, "input_channels", s.input_channels);
  read_field(obj, where, "edge_channels", s.edge_channels);
  read_field(obj, where, "output_channels", s.output_channels);
  return s;
}

/// The split seed is written only when `with_seed` is set.
inline json split_to_json(const SplitSpec& s, bool with_seed) {
  json out = {{"mode", to_string(s.mode)},
              {"per_class", s.per_class},
              {"val_count", s.val_count},
              {"test_count", s.test_count},
              {"train_fraction", s.train_fraction},
              {"val_fraction", s.val_fraction}};
  if (with_seed) out["seed"] = s.seed;
  return out;
}

inline SplitSpec split_from_json(const json& obj, std::string_view where, bool* has_seed = nullptr) {
  require_keys(obj, where, {"mode", "seed", "per_class", "val_count", "test_count", "train_fraction", "val_fraction"});
  SplitSpec s;
  read_enum(obj, where, "mode", s.mode, parse_split_mode);
  read_field(obj, where, "seed", s.seed);
  read_field(obj, where, "per_class", s.per_class);
  read_field(obj, where, "val_count", s.val_count);
  read_field(obj, where, "test_count", s.test_count);
  read_field(obj, where, "train_fraction", s.train_fraction);
  read_field(obj, where, "val_fraction", s.val_fraction);
  if (has_seed) *has_seed = obj.contains("seed");
  return s;
}

}  // namespace pdegcn::detail
