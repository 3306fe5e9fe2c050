#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace tikzlab::proc {

/// Splits a command line on whitespace; single and double quotes group words.
std::vector<std::string> split_command(std::string_view cmd);

/// Search path used for every spawned tool: $TIKZLAB_TEXBIN (if set) then $PATH.
std::vector<std::filesystem::path> search_path();

/// Resolves `name` to an executable file. Names containing '/' are checked as-is.
std::optional<std::filesystem::path> find_executable(std::string_view name);

struct RunOptions {
  std::filesystem::path cwd;
  std::optional<std::chrono::duration<double>> timeout;
  std::string stdin_data;
};

struct RunResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
  std::string err;
  double seconds = 0.0;
};

/// Runs argv to completion (or until the timeout kills its process group).
/// argv[0] must already be resolved or resolvable through search_path().
RunResult run(const std::vector<std::string>& argv, const RunOptions& options = {});

/// A long-lived child speaking a line protocol over stdin/stdout.
class LineProcess {
 public:
  explicit LineProcess(const std::vector<std::string>& argv);
  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;
  ~LineProcess();

  void write_line(std::string_view line);
  /// Returns nullopt on EOF or timeout.
  std::optional<std::string> read_line(std::chrono::duration<double> timeout);
  bool alive();

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
};

}  // namespace tikzlab::proc
