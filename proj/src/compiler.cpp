#include "tikzlab/compiler.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <regex>
#include <set>
#include <unistd.h>

#include "tikzlab/error.hpp"
#include "tikzlab/subprocess.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab {

namespace fs = std::filesystem;

namespace {

// "<file>:<line>: <message>" as printed under -file-line-error.
const std::regex& file_line_re() {
  static const std::regex re(R"(^([^:\s][^:]*\.[A-Za-z]+|\./[^:]+):(\d+): (.*)$)");
  return re;
}

const std::regex& anchor_re() {
  static const std::regex re(R"(^l\.(\d+)(\s|$))");
  return re;
}

const std::regex& warning_re() {
  static const std::regex re(R"(^((LaTeX|Package [^ ]+|Class [^ ]+) Warning: .*)$)");
  return re;
}

const std::regex& input_line_re() {
  static const std::regex re(R"(on input line (\d+))");
  return re;
}

const std::regex& box_warning_re() {
  static const std::regex re(R"(^(Over|Under)full \\[hv]box .*?at lines? (\d+))");
  return re;
}

bool same_file(std::string_view a, std::string_view b) {
  auto norm = [](std::string_view s) {
    while (text::starts_with(s, "./")) s.remove_prefix(2);
    return s;
  };
  return norm(a) == norm(b);
}

// Digits that do not fit an int are treated as no line at all.
std::optional<int> line_number(const std::string& digits) {
  int value = 0;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || end != digits.data() + digits.size()) return std::nullopt;
  return value;
}

std::string strip_cr(std::string_view s) {
  std::string out(s);
  if (!out.empty() && out.back() == '\r') out.pop_back();
  return out;
}

}  // namespace

std::size_t error_count(const CompileReport& report) {
  return static_cast<std::size_t>(std::count_if(report.diagnostics.begin(), report.diagnostics.end(),
                                                [](const Diagnostic& d) { return d.severity == Severity::error; }));
}

std::optional<int> first_error_line(const CompileReport& report) {
  std::optional<int> best;
  for (const auto& d : report.diagnostics) {
    if (d.severity != Severity::error || !d.line) continue;
    if (!best || *d.line < *best) best = d.line;
  }
  return best;
}

std::vector<Diagnostic> parse_log(std::string_view log, std::string_view main_file) {
  // Logs may hold arbitrary bytes; regexes run on a lossy-decoded copy.
  const std::string clean = text::decode_utf8_lossy(log).text;
  const auto lines = text::split_lines(clean);

  std::vector<Diagnostic> out;
  std::set<std::tuple<int, int, std::string>> seen;
  // Index into `out` of the error still waiting for its "l.<n>" anchor.
  std::optional<std::size_t> pending;
  std::size_t pending_age = 0;
  constexpr std::size_t kAnchorWindow = 12;

  auto push = [&](Diagnostic d) -> std::optional<std::size_t> {
    const auto key = std::make_tuple(static_cast<int>(d.severity), d.line.value_or(-1), d.message);
    if (d.line && seen.count(key)) return std::nullopt;
    if (d.line) seen.insert(key);
    out.push_back(std::move(d));
    return out.size() - 1;
  };

  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string line = strip_cr(lines[k]);
    std::smatch m;
    if (pending && ++pending_age > kAnchorWindow) pending.reset();

    if (std::regex_match(line, m, file_line_re())) {
      Diagnostic d;
      d.severity = Severity::error;
      d.message = m[3].str();
      d.raw = line;
      if (main_file.empty() || same_file(m[1].str(), main_file)) d.line = line_number(m[2].str());
      push(std::move(d));
      // The l.<n> context that follows repeats this record's line.
      pending.reset();
      continue;
    }
    if (text::starts_with(line, "! ")) {
      if (line.find("==> Fatal error occurred") != std::string::npos) continue;
      Diagnostic d;
      d.severity = Severity::error;
      d.message = line.substr(2);
      d.raw = line;
      pending = push(std::move(d));
      pending_age = 0;
      continue;
    }
    if (std::regex_search(line, m, anchor_re())) {
      if (pending) {
        auto& d = out[*pending];
        const auto parsed = line_number(m[1].str());
        if (!d.line && parsed) {
          const int n = *parsed;
          const auto key = std::make_tuple(static_cast<int>(d.severity), n, d.message);
          if (seen.count(key)) {
            out.erase(out.begin() + static_cast<std::ptrdiff_t>(*pending));
          } else {
            d.line = n;
            d.raw += "\n" + line;
            seen.insert(key);
          }
        }
        pending.reset();
      }
      continue;
    }
    if (std::regex_match(line, m, warning_re())) {
      Diagnostic d;
      d.severity = Severity::warning;
      std::string message = m[1].str();
      // Warnings wrap at 79 columns and continue on "(pkg)" lines; a blank line ends them.
      std::size_t j = k + 1;
      while (j < lines.size() && !text::trim(lines[j]).empty() && j - k < 8) {
        std::string next = strip_cr(lines[j]);
        if (text::starts_with(next, "(") && next.find(')') != std::string::npos) {
          message += " " + std::string(text::trim(next.substr(next.find(')') + 1)));
        } else if (lines[j - 1].size() >= 79) {
          message += next;
        } else {
          message += " " + std::string(text::trim(next));
        }
        ++j;
      }
      k = j - 1;
      std::smatch lm;
      if (std::regex_search(message, lm, input_line_re())) d.line = line_number(lm[1].str());
      d.message = message;
      d.raw = line;
      push(std::move(d));
      continue;
    }
    if (std::regex_search(line, m, box_warning_re())) {
      Diagnostic d;
      d.severity = Severity::warning;
      d.message = line;
      d.raw = line;
      d.line = line_number(m[2].str());
      push(std::move(d));
    }
  }
  return out;
}

std::size_t pdf_page_count(std::string_view pdf) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = pdf.find("/Type", pos)) != std::string_view::npos) {
    pos += 5;
    std::size_t i = pos;
    while (i < pdf.size() && (pdf[i] == ' ' || pdf[i] == '\n' || pdf[i] == '\r' || pdf[i] == '\t')) ++i;
    if (pdf.substr(i, 5) == "/Page" &&
        (i + 5 >= pdf.size() || !std::isalpha(static_cast<unsigned char>(pdf[i + 5])))) {
      ++count;
    }
  }
  return count;
}

CompileReport compile(std::string_view document, const fs::path& workdir, const CompileOptions& options) {
  auto argv = proc::split_command(options.engine_cmd);
  if (argv.empty()) throw EngineMissing("empty engine command");
  const auto exe = proc::find_executable(argv[0]);
  if (!exe) throw EngineMissing("TeX engine not found on search path: " + argv[0]);
  argv[0] = exe->string();

  fs::create_directories(workdir);
  const std::string job(kJobName);
  text::write_file(workdir / (job + ".tex"), document);
  argv.insert(argv.end(), {"-interaction=nonstopmode", "-file-line-error", "-no-shell-escape",
                           job + ".tex"});

  proc::RunOptions run_options;
  run_options.cwd = workdir;
  run_options.timeout = std::chrono::duration<double>(options.timeout_s);
  const auto result = proc::run(argv, run_options);

  CompileReport report;
  report.engine = options.engine_cmd;
  report.duration = result.seconds;
  const fs::path log_path = workdir / (job + ".log");
  report.log = fs::exists(log_path) ? text::read_file(log_path) : result.out;
  report.diagnostics = parse_log(report.log, job + ".tex");

  const fs::path pdf = workdir / (job + ".pdf");
  if (result.timed_out) {
    report.timed_out = true;
    report.diagnostics.push_back({Severity::error, "Timeout", std::nullopt,
                                  "engine killed after " + std::to_string(options.timeout_s) + " s"});
    return report;
  }
  const bool has_pdf = fs::exists(pdf) && fs::file_size(pdf) > 0;
  report.success = result.exit_code == 0 && has_pdf;
  if (has_pdf) {
    report.pdf_path = pdf;
    report.produced_image = pdf_page_count(text::read_file(pdf)) >= 1;
  }
  return report;
}

TexCompiler::TexCompiler(CompileOptions options, fs::path scratch_root)
    : options_(std::move(options)), scratch_root_(std::move(scratch_root)) {
  fs::create_directories(scratch_root_);
}

CompileReport TexCompiler::compile(std::string_view document) {
  static std::atomic<unsigned long> counter{0};
  const auto dir = scratch_root_ / ("job-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  auto report = tikzlab::compile(document, dir, options_);
  if (!options_.keep_scratch) {
    // The PDF path dies with the scratch directory.
    report.pdf_path.reset();
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  return report;
}

std::vector<fs::path> rasterize(const fs::path& pdf, int dpi, const std::string& raster_cmd,
                                bool first_page_only, fs::path out_dir) {
  if (dpi <= 0) throw InvalidArgument("dpi must be positive");
  if (!fs::exists(pdf)) throw CorruptPdf("no such file: " + pdf.string());
  {
    const std::string head = text::read_file(pdf).substr(0, 5);
    if (head != "%PDF-") throw CorruptPdf("not a PDF: " + pdf.string());
  }
  auto argv = proc::split_command(raster_cmd);
  if (argv.empty()) throw ConverterMissing("empty converter command");
  const auto exe = proc::find_executable(argv[0]);
  if (!exe) throw ConverterMissing("PDF converter not found on search path: " + argv[0]);
  argv[0] = exe->string();

  if (out_dir.empty()) out_dir = pdf.parent_path();
  fs::create_directories(out_dir);
  const fs::path tmp = out_dir / ".raster-tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  argv.insert(argv.end(), {"-png", "-r", std::to_string(dpi)});
  if (first_page_only) argv.insert(argv.end(), {"-f", "1", "-l", "1"});
  argv.push_back(fs::absolute(pdf).string());
  argv.push_back((tmp / "raw").string());
  const auto result = proc::run(argv, {});
  if (result.exit_code != 0) {
    fs::remove_all(tmp);
    throw CorruptPdf("converter failed on " + pdf.string() + ": " + result.err);
  }

  // pdftoppm names pages raw-1.png or raw-01.png depending on page count.
  std::vector<std::pair<int, fs::path>> pages;
  for (const auto& entry : fs::directory_iterator(tmp)) {
    const auto stem = entry.path().stem().string();
    const auto dash = stem.rfind('-');
    if (entry.path().extension() != ".png" || dash == std::string::npos) continue;
    try {
      pages.emplace_back(std::stoi(stem.substr(dash + 1)), entry.path());
    } catch (const std::exception&) {
    }
  }
  std::sort(pages.begin(), pages.end());
  if (pages.empty()) {
    fs::remove_all(tmp);
    throw CorruptPdf("converter produced no pages for " + pdf.string());
  }
  std::vector<fs::path> out;
  for (std::size_t k = 0; k < pages.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "page-%04zu.png", k + 1);
    const auto dest = out_dir / name;
    fs::rename(pages[k].second, dest);
    out.push_back(dest);
  }
  fs::remove_all(tmp);
  return out;
}

}  // namespace tikzlab
