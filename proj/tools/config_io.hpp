#pragma once

// JSON form of TrainConfig. Keys are the struct field names; nested configs
// are nested objects. Reading is strict: unknown keys, wrong types and bad
// enum names raise ConfigError.

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mveb/train.hpp"

namespace mveb::cli {

using Json = nlohmann::json;

namespace detail {

template <typename E>
struct EnumNames;

template <>
struct EnumNames<KernelFamily> {
  static constexpr std::pair<KernelFamily, const char*> table[] = {{KernelFamily::vmf, "vmf"},
                                                                    {KernelFamily::rbf, "rbf"}};
};
template <>
struct EnumNames<BandwidthMode> {
  static constexpr std::pair<BandwidthMode, const char*> table[] = {
      {BandwidthMode::fixed, "fixed"}, {BandwidthMode::median_heuristic, "median_heuristic"}};
};
template <>
struct EnumNames<Wiring> {
  static constexpr std::pair<Wiring, const char*> table[] = {{Wiring::symmetric, "symmetric"},
                                                              {Wiring::momentum_target, "momentum_target"}};
};
template <>
struct EnumNames<LossKind> {
  static constexpr std::pair<LossKind, const char*> table[] = {
      {LossKind::mveb, "mveb"}, {LossKind::infonce, "infonce"}, {LossKind::decorrelation, "decorrelation"}};
};

template <typename E>
Json enum_to_json(E value) {
  for (const auto& [v, name] : EnumNames<E>::table)
    if (v == value) return name;
  throw ConfigError("unnamed enum value");
}

template <typename E>
E enum_from_json(const Json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  const auto s = j.get<std::string>();
  std::string allowed;
  for (const auto& [v, name] : EnumNames<E>::table) {
    if (s == name) return v;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("config key '" + key + "' has unknown value '" + s + "' (expected one of: " + allowed + ")");
}

template <typename T>
T field(const Json& obj, const char* key, const std::string& path) {
  const std::string full = path.empty() ? key : path + "." + key;
  const Json& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("config key '" + full + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + full + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
        throw ConfigError("config key '" + full + "' must be nonnegative");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError("config key '" + full + "' must be a number");
  }
  return v.get<T>();
}

/// Every key of `given` must exist in `schema`, with matching object nesting.
inline void check_keys(const Json& given, const Json& schema, const std::string& path) {
  if (!given.is_object()) throw ConfigError("config section '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + full + "'");
    if (schema.at(key).is_object()) check_keys(value, schema.at(key), full);
  }
}

}  // namespace detail

inline Json to_json(const TrainConfig& c) {
  using detail::enum_to_json;
  Json j;
  j["beta"] = c.beta;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["lr"] = c.lr;
  j["sgd_momentum"] = c.sgd_momentum;
  j["weight_decay"] = c.weight_decay;
  j["wiring"] = enum_to_json(c.wiring);
  j["ema_base"] = c.ema_base;
  j["stein"] = {{"kernel",
                 {{"family", enum_to_json(c.stein.kernel.family)},
                  {"bandwidth", c.stein.kernel.bandwidth},
                  {"mode", enum_to_json(c.stein.kernel.mode)},
                  {"bandwidth_floor", c.stein.kernel.bandwidth_floor}}},
                {"ridge_eta", c.stein.ridge_eta}};
  j["data"] = {{"num_classes", c.data.num_classes},       {"latent_dim", c.data.latent_dim},
               {"input_dim", c.data.input_dim},           {"shared_scale", c.data.shared_scale},
               {"nuisance_scale", c.data.nuisance_scale}, {"noise_scale", c.data.noise_scale},
               {"class_jitter", c.data.class_jitter},     {"seed", c.data.seed}};
  j["loss_kind"] = enum_to_json(c.loss_kind);
  j["baseline"] = {{"temperature", c.baseline.temperature},
                   {"decorrelation_lambda", c.baseline.decorrelation_lambda}};
  j["seed"] = c.seed;
  j["hidden_width"] = c.hidden_width;
  j["embed_dim"] = c.embed_dim;
  j["log_interval"] = c.log_interval;
  j["probe_interval"] = c.probe_interval;
  j["probe_train_size"] = c.probe_train_size;
  j["probe_test_size"] = c.probe_test_size;
  j["probe"] = {{"steps", c.probe.steps}, {"lr", c.probe.lr}, {"l2", c.probe.l2}};
  return j;
}

/// Missing keys keep their defaults. Does not call validate().
inline TrainConfig from_json(const Json& given) {
  using detail::enum_from_json;
  using detail::field;
  const Json schema = to_json(TrainConfig{});
  detail::check_keys(given, schema, "");
  Json j = schema;
  j.merge_patch(given);

  TrainConfig c;
  c.beta = field<double>(j, "beta", "");
  c.batch_size = field<int>(j, "batch_size", "");
  c.steps = field<int>(j, "steps", "");
  c.lr = field<double>(j, "lr", "");
  c.sgd_momentum = field<double>(j, "sgd_momentum", "");
  c.weight_decay = field<double>(j, "weight_decay", "");
  c.wiring = enum_from_json<Wiring>(j.at("wiring"), "wiring");
  c.ema_base = field<double>(j, "ema_base", "");
  const Json& k = j.at("stein").at("kernel");
  c.stein.kernel.family = enum_from_json<KernelFamily>(k.at("family"), "stein.kernel.family");
  c.stein.kernel.bandwidth = field<double>(k, "bandwidth", "stein.kernel");
  c.stein.kernel.mode = enum_from_json<BandwidthMode>(k.at("mode"), "stein.kernel.mode");
  c.stein.kernel.bandwidth_floor = field<double>(k, "bandwidth_floor", "stein.kernel");
  c.stein.ridge_eta = field<double>(j.at("stein"), "ridge_eta", "stein");
  const Json& d = j.at("data");
  c.data.num_classes = field<int>(d, "num_classes", "data");
  c.data.latent_dim = field<int>(d, "latent_dim", "data");
  c.data.input_dim = field<int>(d, "input_dim", "data");
  c.data.shared_scale = field<double>(d, "shared_scale", "data");
  c.data.nuisance_scale = field<double>(d, "nuisance_scale", "data");
  c.data.noise_scale = field<double>(d, "noise_scale", "data");
  c.data.class_jitter = field<double>(d, "class_jitter", "data");
  c.data.seed = field<std::uint64_t>(d, "seed", "data");
  c.loss_kind = enum_from_json<LossKind>(j.at("loss_kind"), "loss_kind");
  c.baseline.temperature = field<double>(j.at("baseline"), "temperature", "baseline");
  c.baseline.decorrelation_lambda = field<double>(j.at("baseline"), "decorrelation_lambda", "baseline");
  c.seed = field<std::uint64_t>(j, "seed", "");
  c.hidden_width = field<int>(j, "hidden_width", "");
  c.embed_dim = field<int>(j, "embed_dim", "");
  c.log_interval = field<int>(j, "log_interval", "");
  c.probe_interval = field<int>(j, "probe_interval", "");
  c.probe_train_size = field<int>(j, "probe_train_size", "");
  c.probe_test_size = field<int>(j, "probe_test_size", "");
  c.probe.steps = field<int>(j.at("probe"), "steps", "probe");
  c.probe.lr = field<double>(j.at("probe"), "lr", "probe");
  c.probe.l2 = field<double>(j.at("probe"), "l2", "probe");
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

/// A leaf of the config tree exposed as a command-line flag.
struct FlagSpec {
  std::string flag;          // e.g. "--stein-kernel-family"
  Json::json_pointer where;  // e.g. /stein/kernel/family
  std::string description;
};

/// One flag per leaf: the key path joined with '-', underscores as '-'.
inline std::vector<FlagSpec> config_flags() {
  std::vector<FlagSpec> out;
  const Json flat = to_json(TrainConfig{}).flatten();
  for (const auto& [pointer, value] : flat.items()) {
    std::string name = pointer.substr(1);
    for (char& ch : name)
      if (ch == '/' || ch == '_') ch = '-';
    std::string desc = "config " + pointer + " (default " + value.dump() + ")";
    out.push_back(FlagSpec{"--" + name, Json::json_pointer(pointer), desc});
  }
  return out;
}

/// Converts a flag's text to the JSON type of the default at `where`.
inline Json parse_flag_value(const FlagSpec& spec, const std::string& text) {
  const Json proto = to_json(TrainConfig{}).at(spec.where);
  try {
    std::size_t used = 0;
    if (proto.is_string()) return text;
    if (proto.is_number_unsigned()) {
      if (!text.empty() && text.front() == '-') throw std::invalid_argument("negative");
      const unsigned long long v = std::stoull(text, &used);
      if (used == text.size()) return v;
    } else if (proto.is_number_integer()) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return v;
    } else if (proto.is_number()) {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid value '" + text + "' for " + spec.flag);
}

inline void write_config(std::ostream& os, const TrainConfig& cfg) { os << to_json(cfg).dump(2) << '\n'; }

}  // namespace mveb::cli
