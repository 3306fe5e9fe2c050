#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tikzlab {

struct Config {
  std::string engine_cmd = "pdflatex";
  std::string raster_cmd = "pdftoppm";
  std::string embedder_addr;  // empty: no embedder
  std::uint64_t seed = 0;
  int max_attempts = 10;
  double timeout_s = 60.0;
  int dpi = 300;
  std::size_t kid_subset_size = 1000;
  std::size_t kid_subsets = 100;
  std::size_t crystalbleu_k = 500;
  std::string clipscore_variant = "cosine100";  // or "weighted"
  double eed_alpha = 2.0;
  double eed_rho = 0.3;
  double eed_deletion = 0.2;
  double eed_insertion = 1.0;
  std::string repair_schedule = "just_before";  // or "formula"
  bool keep_scratch = false;
  std::string cache_dir;  // empty: no embedding cache
};

/// Every key accepted by set_config_value, in serialization order.
const std::vector<std::string>& config_keys();

/// Throws ConfigInvalid for an unknown key or unparsable value.
void set_config_value(Config& config, const std::string& key, const std::string& value);

/// "key = value" lines; '#' starts a comment. Throws ConfigInvalid.
std::map<std::string, std::string> parse_config_text(std::string_view text);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// The process environment.
std::optional<std::string> process_env(const std::string& name);

/// Layers defaults < config file < TIKZLAB_<KEY> environment < explicit flags.
Config resolve_config(const std::optional<std::filesystem::path>& file,
                      const std::map<std::string, std::string>& flags, const EnvLookup& env = process_env);

nlohmann::ordered_json to_json(const Config& config);

}  // namespace tikzlab
