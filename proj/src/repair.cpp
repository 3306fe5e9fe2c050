#include "tikzlab/repair.hpp"

#include <algorithm>
#include <numeric>

#include "tikzlab/text.hpp"

namespace tikzlab::repair {

int truncation_point(int error_line, int repair_iter, Schedule schedule) {
  if (error_line < 1) throw InvalidArgument("error line must be >= 1");
  if (repair_iter < 1) throw InvalidArgument("repair iteration must be >= 1");
  if (schedule == Schedule::just_before && repair_iter == 1) return error_line;
  // 4^(i-1) overflows quickly; anything past the line count clamps to 1 anyway.
  long long back = 1;
  for (int k = 1; k < repair_iter && back <= error_line; ++k) back *= 4;
  return static_cast<int>(std::max<long long>(1, error_line - back));
}

namespace {

std::string keep_lines_below(std::string_view code, int t) {
  std::size_t pos = 0;
  for (int line = 1; line < t; ++line) {
    const auto nl = code.find('\n', pos);
    if (nl == std::string_view::npos) return std::string(code) + "\n";
    pos = nl + 1;
  }
  return std::string(code.substr(0, pos));
}

}  // namespace

RepairOutcome generate_with_repair(const std::string& caption, Sampler& sampler, DocumentCompiler& compiler,
                                   const RepairOptions& options, const std::string& request_id) {
  if (options.max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");

  RepairOutcome outcome;
  SamplerRequest request{request_id + "-0", caption, "", options.max_new};
  AttemptStat stat;
  std::optional<int> last_t;
  int iter = 0;

  for (int attempt = 0;; ++attempt) {
    try {
      outcome.code = request.prefix + sampler.sample(request);
    } catch (const Error& e) {
      throw SamplerFailure(e.what(), outcome);
    }
    const auto report = compiler.compile(outcome.code);
    stat.error_line = first_error_line(report);
    stat.errors = error_count(report);
    stat.produced_image = report.produced_image;
    outcome.attempts.push_back(stat);
    outcome.sampled_units += attempt == 0
                                 ? 1.0
                                 : static_cast<double>(stat.regenerated_lines) / static_cast<double>(stat.total_lines);
    outcome.final_errors = stat.errors;
    if (report.produced_image) {
      outcome.success = true;
      break;
    }
    if (attempt + 1 >= options.max_attempts) break;

    int t = 1;
    if (stat.error_line) {
      const bool persists = last_t && *stat.error_line >= *last_t;
      iter = persists ? iter + 1 : 1;
      t = truncation_point(*stat.error_line, iter, options.schedule);
    } else {
      iter = 0;
    }
    const auto total = std::max<std::size_t>(1, text::count_lines(outcome.code));
    t = std::min<int>(t, static_cast<int>(total) + 1);
    last_t = t;

    stat = AttemptStat{};
    stat.truncate_at = t;
    stat.total_lines = total;
    stat.regenerated_lines = total - static_cast<std::size_t>(t - 1);
    request.id = request_id + "-" + std::to_string(attempt + 1);
    request.prefix = keep_lines_below(outcome.code, t);
  }
  return outcome;
}

double csr(const std::vector<RepairOutcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInput("csr of an empty outcome list");
  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.sampled_units;
  return sum / static_cast<double>(outcomes.size());
}

double cer(const std::vector<RepairOutcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInput("cer of an empty outcome list");
  double sum = 0.0;
  for (const auto& o : outcomes) sum += static_cast<double>(o.final_errors);
  return sum / static_cast<double>(outcomes.size());
}

}  // namespace tikzlab::repair
