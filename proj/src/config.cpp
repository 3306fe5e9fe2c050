#include "tikzlab/config.hpp"

#include <algorithm>
#include <cstdlib>

#include "tikzlab/error.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab {

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> kKeys = {
      "engine_cmd",   "raster_cmd",     "embedder_addr",     "seed",      "max_attempts",
      "timeout_s",    "dpi",            "kid_subset_size",   "kid_subsets", "crystalbleu_k",
      "clipscore_variant", "eed_alpha", "eed_rho",           "eed_deletion", "eed_insertion",
      "repair_schedule", "keep_scratch", "cache_dir"};
  return kKeys;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(value, &used));
    } else if constexpr (std::is_signed_v<T>) {
      out = static_cast<T>(std::stoll(value, &used));
    } else {
      if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(value, &used));
    }
    if (used == value.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigInvalid("bad value for " + key + ": '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigInvalid("bad boolean for " + key + ": '" + value + "'");
}

}  // namespace

void set_config_value(Config& c, const std::string& key, const std::string& value) {
  if (key == "engine_cmd") {
    c.engine_cmd = value;
  } else if (key == "raster_cmd") {
    c.raster_cmd = value;
  } else if (key == "embedder_addr") {
    c.embedder_addr = value;
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "max_attempts") {
    c.max_attempts = parse_number<int>(key, value);
    if (c.max_attempts < 1) throw ConfigInvalid("max_attempts must be >= 1");
  } else if (key == "timeout_s") {
    c.timeout_s = parse_number<double>(key, value);
    if (!(c.timeout_s > 0)) throw ConfigInvalid("timeout_s must be positive");
  } else if (key == "dpi") {
    c.dpi = parse_number<int>(key, value);
    if (c.dpi <= 0) throw ConfigInvalid("dpi must be positive");
  } else if (key == "kid_subset_size") {
    c.kid_subset_size = parse_number<std::size_t>(key, value);
    if (c.kid_subset_size < 2) throw ConfigInvalid("kid_subset_size must be >= 2");
  } else if (key == "kid_subsets") {
    c.kid_subsets = parse_number<std::size_t>(key, value);
    if (c.kid_subsets < 1) throw ConfigInvalid("kid_subsets must be >= 1");
  } else if (key == "crystalbleu_k") {
    c.crystalbleu_k = parse_number<std::size_t>(key, value);
  } else if (key == "clipscore_variant") {
    if (value != "cosine100" && value != "weighted") throw ConfigInvalid("clipscore_variant must be cosine100 or weighted");
    c.clipscore_variant = value;
  } else if (key == "eed_alpha") {
    c.eed_alpha = parse_number<double>(key, value);
  } else if (key == "eed_rho") {
    c.eed_rho = parse_number<double>(key, value);
  } else if (key == "eed_deletion") {
    c.eed_deletion = parse_number<double>(key, value);
  } else if (key == "eed_insertion") {
    c.eed_insertion = parse_number<double>(key, value);
  } else if (key == "repair_schedule") {
    if (value != "just_before" && value != "formula") throw ConfigInvalid("repair_schedule must be just_before or formula");
    c.repair_schedule = value;
  } else if (key == "keep_scratch") {
    c.keep_scratch = parse_bool(key, value);
  } else if (key == "cache_dir") {
    c.cache_dir = value;
  } else {
    throw ConfigInvalid("unknown config key: " + key);
  }
}

std::map<std::string, std::string> parse_config_text(std::string_view content) {
  std::map<std::string, std::string> out;
  std::size_t lineno = 0;
  for (const auto raw : text::split_lines(content)) {
    ++lineno;
    const auto line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigInvalid("config line " + std::to_string(lineno) + " is not key = value");
    }
    std::string key(text::trim(line.substr(0, eq)));
    std::string value(text::trim(line.substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigInvalid("config line " + std::to_string(lineno) + " has an empty key");
    out[key] = value;
  }
  return out;
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

Config resolve_config(const std::optional<std::filesystem::path>& file,
                      const std::map<std::string, std::string>& flags, const EnvLookup& env) {
  Config c;
  if (file) {
    if (!std::filesystem::exists(*file)) throw ConfigInvalid("config file not found: " + file->string());
    for (const auto& [k, v] : parse_config_text(text::read_file(*file))) set_config_value(c, k, v);
  }
  for (const auto& key : config_keys()) {
    std::string name = "TIKZLAB_" + key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (auto v = env(name)) set_config_value(c, key, *v);
  }
  for (const auto& [k, v] : flags) set_config_value(c, k, v);
  return c;
}

nlohmann::ordered_json to_json(const Config& c) {
  nlohmann::ordered_json j;
  j["engine_cmd"] = c.engine_cmd;
  j["raster_cmd"] = c.raster_cmd;
  j["embedder_addr"] = c.embedder_addr;
  j["seed"] = c.seed;
  j["max_attempts"] = c.max_attempts;
  j["timeout_s"] = c.timeout_s;
  j["dpi"] = c.dpi;
  j["kid_subset_size"] = c.kid_subset_size;
  j["kid_subsets"] = c.kid_subsets;
  j["crystalbleu_k"] = c.crystalbleu_k;
  j["clipscore_variant"] = c.clipscore_variant;
  j["eed_alpha"] = c.eed_alpha;
  j["eed_rho"] = c.eed_rho;
  j["eed_deletion"] = c.eed_deletion;
  j["eed_insertion"] = c.eed_insertion;
  j["repair_schedule"] = c.repair_schedule;
  j["keep_scratch"] = c.keep_scratch;
  j["cache_dir"] = c.cache_dir;
  return j;
}

}  // namespace tikzlab
