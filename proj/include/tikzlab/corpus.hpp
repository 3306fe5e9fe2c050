#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace tikzlab {
class DocumentCompiler;
}

namespace tikzlab::corpus {

enum class Origin { arxiv, stackexchange, curated, artificial };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view s);

/// A TeX source tree. `files` maps relative paths to decoded UTF-8 text.
struct TexProject {
  std::string root_file;
  std::map<std::string, std::string> files;
  Origin origin = Origin::arxiv;
  std::size_t replacement_chars = 0;
};

/// Loads every *.tex/.sty/.cls/.tikz/.pgf file below `dir`. The root file is the
/// first (in path order) file that contains both \documentclass and \begin{document}.
TexProject load_project(const std::filesystem::path& dir, Origin origin);

struct IncludeExpansion {
  std::string text;
  std::vector<std::string> unresolved;  // directive arguments left in place
};

constexpr int kMaxIncludeDepth = 16;

/// Recursively replaces \input and \include directives with file contents.
/// Throws CycleDetected for include cycles or nesting deeper than kMaxIncludeDepth.
IncludeExpansion expand_includes(const TexProject& project);

struct Snippet {
  std::string text;
  std::size_t begin = 0;  // byte offset of "\begin{tikzpicture}"
  std::size_t end = 0;    // one past "\end{tikzpicture}"
};

struct Extraction {
  std::vector<Snippet> snippets;
  std::size_t unbalanced = 0;  // begins without a matching end
};

/// Outermost tikzpicture environments in document order. Commented-out markers are ignored.
Extraction extract_tikz_environments(std::string_view tex);

enum class MacroKind { def, newcommand, newenvironment, other };

struct MacroDef {
  std::string name;    // "\foo" for commands, "foo" for environments
  std::string body;    // the braced replacement text(s)
  MacroKind kind = MacroKind::other;
  std::string source;  // the full definition as written
};

struct MacroTable {
  std::vector<MacroDef> defs;  // definition order; a redefinition moves to its new position
  std::size_t redefinitions = 0;
  std::size_t unsupported = 0;  // \edef, \gdef, \let, ... seen but not parsed
};

MacroTable parse_macro_definitions(std::string_view tex);

/// Transitive closure of the definitions referenced from `snippet`, in definition order.
std::vector<MacroDef> collect_used_macros(std::string_view snippet,
                                          const std::vector<MacroDef>& defs);

struct Rule {
  bool allow = false;
  std::string pattern;
  std::regex regex;
};

struct RuleSet {
  std::vector<Rule> rules;
  std::string version;
  bool allows(std::string_view line) const;
};

/// Parses "ALLOW <regex>" / "DENY <regex>" lines. '#' starts a comment line; a
/// "# version: X" comment sets the version tag.
RuleSet parse_rules(std::string_view rule_text);
RuleSet load_rules(const std::filesystem::path& path);

/// Splits `tex` at \begin{document}; returns the region between the
/// \documentclass line and \begin{document} (empty if there is no document environment).
std::string preamble_of(std::string_view tex);

/// Keeps the logical lines of `preamble` that the rules allow. Lines continue
/// while braces are open, so multi-line commands are judged as one unit.
std::string retain_preamble(std::string_view preamble, const RuleSet& rules);

inline constexpr std::string_view kDocumentClass = "\\documentclass[tikz]{standalone}";

std::string assemble_document(std::string_view snippet, const std::vector<MacroDef>& macros,
                              std::string_view preamble);

struct TikzRecord {
  std::string id;
  std::string caption;
  std::string code;
  Origin origin = Origin::arxiv;
  std::string license;
  bool augmented = false;
  std::optional<std::string> created;
};

std::string record_id(std::string_view code);

struct ExtractionStats {
  std::size_t projects = 0;
  std::size_t snippets = 0;
  std::size_t unbalanced = 0;
  std::size_t unresolved_includes = 0;
  std::size_t rejected_encoding = 0;
  std::size_t rejected_multiple_pictures = 0;
  std::size_t duplicates = 0;
  std::size_t macro_redefinitions = 0;
  std::size_t unsupported_macro_forms = 0;
};

/// Full per-project pipeline up to (not including) compilability filtering.
std::vector<TikzRecord> extract_records(const TexProject& project, const RuleSet& rules,
                                        std::string_view license, ExtractionStats& stats);

/// Drops records whose code hash was already seen, keeping first occurrences.
std::vector<TikzRecord> deduplicate(std::vector<TikzRecord> records, std::size_t* duplicates = nullptr);

struct FilterResult {
  std::vector<TikzRecord> kept;
  std::size_t rejected = 0;
};

/// Keeps records whose document compiles to an image. Runs `jobs` compiles at once;
/// `compiler` must be safe for concurrent use.
FilterResult filter_compilable(const std::vector<TikzRecord>& records, DocumentCompiler& compiler,
                               unsigned jobs = 1);

// Stack Exchange ingestion ---------------------------------------------------

struct SeAnswer {
  long id = 0;
  long score = 0;
  std::string body;                    // HTML-decoded post body
  std::vector<std::string> tikz_code;  // code blocks containing a tikzpicture
  std::optional<std::string> created;
};

struct SeCandidate {
  long question_id = 0;
  std::string title;
  std::string body;
  std::vector<std::string> tags;
  std::vector<SeAnswer> answers;
};

struct SeIngestStats {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t questions = 0;
  std::size_t answers_kept = 0;
};

inline constexpr std::string_view kTikzTag = "tikz-pgf";
inline constexpr long kMinAnswerScore = 1;

/// Reads a Posts.xml stream. Only questions tagged kTikzTag with at least one answer
/// of score >= kMinAnswerScore containing a tikzpicture are returned.
std::vector<SeCandidate> ingest_stackexchange(std::istream& dump, SeIngestStats& stats,
                                              std::string_view tag = kTikzTag,
                                              long min_score = kMinAnswerScore);

/// Hook for caption synthesis; the default leaves captions empty.
using Captioner = std::string (*)(const SeCandidate&);

/// Converts candidates into records, one per (answer, code block) pair.
std::vector<TikzRecord> stackexchange_records(const std::vector<SeCandidate>& candidates,
                                              const RuleSet& rules, ExtractionStats& stats,
                                              Captioner captioner = nullptr);

}  // namespace tikzlab::corpus
