#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tikzlab {

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string message;
  std::optional<int> line;  // 1-based line in the compiled document
  std::string raw;
};

struct CompileReport {
  bool success = false;         // engine exit 0 and PDF present
  bool produced_image = false;  // PDF holds at least one page
  bool timed_out = false;
  std::vector<Diagnostic> diagnostics;
  std::optional<std::filesystem::path> pdf_path;
  double duration = 0.0;
  std::string engine;
  std::string log;
};

std::size_t error_count(const CompileReport& report);

/// Earliest line among error diagnostics, if any error carries one.
std::optional<int> first_error_line(const CompileReport& report);

/// Anything that turns a standalone document into a CompileReport.
/// Implementations must be safe to call from several threads at once.
class DocumentCompiler {
 public:
  virtual ~DocumentCompiler() = default;
  virtual CompileReport compile(std::string_view document) = 0;
};

/// Log parser for TeX engines run with -file-line-error. When `main_file` is
/// non-empty, file-line records for other files keep their message but carry no line.
std::vector<Diagnostic> parse_log(std::string_view log, std::string_view main_file = {});

/// Page objects in a PDF, counted by scanning for "/Type /Page" dictionaries.
std::size_t pdf_page_count(std::string_view pdf_bytes);

struct CompileOptions {
  std::string engine_cmd = "pdflatex";
  double timeout_s = 60.0;
  bool keep_scratch = false;
};

/// Compiles `document` as workdir/<jobname>.tex. The engine runs in nonstop mode
/// with file-line-error on and shell-escape off. Throws EngineMissing.
CompileReport compile(std::string_view document, const std::filesystem::path& workdir,
                      const CompileOptions& options = {});

/// DocumentCompiler that owns a scratch root and gives each compile its own directory.
class TexCompiler : public DocumentCompiler {
 public:
  TexCompiler(CompileOptions options, std::filesystem::path scratch_root);
  CompileReport compile(std::string_view document) override;
  const CompileOptions& options() const { return options_; }

 private:
  CompileOptions options_;
  std::filesystem::path scratch_root_;
};

inline constexpr std::string_view kJobName = "document";

/// Converts a PDF to page-0001.png, page-0002.png, ... in `out_dir` (default: the
/// PDF's directory). Throws InvalidArgument for dpi 0, ConverterMissing, CorruptPdf.
std::vector<std::filesystem::path> rasterize(const std::filesystem::path& pdf, int dpi,
                                             const std::string& raster_cmd = "pdftoppm",
                                             bool first_page_only = false,
                                             std::filesystem::path out_dir = {});

}  // namespace tikzlab
