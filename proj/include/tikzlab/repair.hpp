#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tikzlab/compiler.hpp"
#include "tikzlab/error.hpp"

namespace tikzlab::proc {
class LineProcess;
}

namespace tikzlab::repair {

struct SamplerRequest {
  std::string id;
  std::string caption;
  std::string prefix;  // empty, or whole lines ending in '\n'
  int max_new = 2048;
};

/// Source of code continuations. A sampler serves one request at a time.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual std::string sample(const SamplerRequest& request) = 0;
};

/// Speaks the newline-delimited JSON sampler protocol with a child process.
/// Throws ProtocolError on malformed or mismatched responses, EOF, or timeout.
class SubprocessSampler : public Sampler {
 public:
  explicit SubprocessSampler(const std::string& command,
                             std::chrono::duration<double> timeout = std::chrono::seconds(600));
  ~SubprocessSampler() override;
  std::string sample(const SamplerRequest& request) override;

 private:
  std::unique_ptr<proc::LineProcess> process_;
  std::chrono::duration<double> timeout_;
};

enum class Schedule {
  just_before,  // i = 1 keeps lines [1, L); later iterations back off 4^(i-1)
  formula,      // every iteration backs off 4^(i-1), so i = 1 keeps [1, L-1)
};

/// Lines strictly below the returned value are kept. Always >= 1.
int truncation_point(int error_line, int repair_iter, Schedule schedule = Schedule::just_before);

struct AttemptStat {
  std::optional<int> error_line;   // earliest error of this attempt's compile
  std::optional<int> truncate_at;  // absent for the initial full sample
  std::size_t regenerated_lines = 0;
  std::size_t total_lines = 0;     // lines of the document that was truncated
  std::size_t errors = 0;
  bool produced_image = false;
};

struct RepairOutcome {
  std::string code;
  std::vector<AttemptStat> attempts;
  bool success = false;
  double sampled_units = 0.0;
  std::size_t final_errors = 0;
};

class SamplerFailure : public Error {
 public:
  SamplerFailure(const std::string& what, RepairOutcome partial)
      : Error(what), partial_(std::move(partial)) {}
  const RepairOutcome& partial() const { return partial_; }

 private:
  RepairOutcome partial_;
};

struct RepairOptions {
  int max_attempts = 10;  // total samples, the initial one included
  Schedule schedule = Schedule::just_before;
  int max_new = 2048;
};

RepairOutcome generate_with_repair(const std::string& caption, Sampler& sampler, DocumentCompiler& compiler,
                                   const RepairOptions& options = {}, const std::string& request_id = "r");

/// Mean sampled_units. Throws EmptyInput.
double csr(const std::vector<RepairOutcome>& outcomes);

/// Mean final_errors. Throws EmptyInput.
double cer(const std::vector<RepairOutcome>& outcomes);

}  // namespace tikzlab::repair
