#pragma once

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <unistd.h>

namespace support {

namespace fs = std::filesystem;

inline fs::path test_dir() { return TIKZLAB_TEST_DIR; }
inline fs::path fixture(std::string_view rel) { return test_dir() / "fixtures" / rel; }
inline fs::path data(std::string_view rel) { return test_dir() / "data" / rel; }
inline fs::path tool(std::string_view name) { return fs::path(TIKZLAB_TOOLS_DIR) / name; }
inline fs::path rules_file() { return fs::path(TIKZLAB_DATA_DIR) / "preamble_rules.txt"; }

inline nlohmann::json load_json(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "cannot open " << path);
  return nlohmann::json::parse(in);
}

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Points every engine/converter lookup at the scripted stand-ins.
inline void use_fake_texbin() { ::setenv("TIKZLAB_TEXBIN", fixture("texbin").c_str(), 1); }

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "tikzlab-test-XXXXXX").string();
    REQUIRE(::mkdtemp(pattern.data()) != nullptr);
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

}  // namespace support
