#include "tikzlab/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "tikzlab/compiler.hpp"
#include "tikzlab/error.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab::corpus {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kBeginPicture = "\\begin{tikzpicture}";
constexpr std::string_view kEndPicture = "\\end{tikzpicture}";

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '@'; }

// Same-length copy of `tex` with every comment replaced by spaces, so offsets
// found in the mask are valid in the original.
std::string mask_comments(std::string_view tex) {
  std::string out(tex);
  std::size_t line_start = 0;
  while (line_start < out.size()) {
    std::size_t nl = out.find('\n', line_start);
    if (nl == std::string::npos) nl = out.size();
    const auto line = std::string_view(out).substr(line_start, nl - line_start);
    const auto pct = text::comment_start(line);
    if (pct != std::string_view::npos) {
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(line_start + pct),
                out.begin() + static_cast<std::ptrdiff_t>(nl), ' ');
    }
    line_start = nl + 1;
  }
  return out;
}

// Blanks [begin, end) in `s`, preserving newlines so line structure survives.
void blank(std::string& s, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end && i < s.size(); ++i) {
    if (s[i] != '\n') s[i] = ' ';
  }
}

std::size_t skip_spaces(std::string_view s, std::size_t i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
  return i;
}

// Index one past the group closing the one opened at s[open] (which must be `open_ch`).
std::optional<std::size_t> match_group(std::string_view s, std::size_t open, char open_ch = '{',
                                       char close_ch = '}') {
  if (open >= s.size() || s[open] != open_ch) return std::nullopt;
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '\\') {
      ++i;
      continue;
    }
    if (s[i] == open_ch) ++depth;
    else if (s[i] == close_ch && --depth == 0) return i + 1;
  }
  return std::nullopt;
}

// Finds `cmd` (e.g. "\input") at or after `from` where the next char is not a letter.
std::size_t find_command(std::string_view s, std::string_view cmd, std::size_t from) {
  while (true) {
    const auto pos = s.find(cmd, from);
    if (pos == std::string_view::npos) return pos;
    const auto after = pos + cmd.size();
    if (after >= s.size() || !is_letter(s[after])) return pos;
    from = pos + 1;
  }
}

std::string normalize_path(std::string_view p) {
  std::string s(text::trim(p));
  while (text::starts_with(s, "./")) s.erase(0, 2);
  return fs::path(s).lexically_normal().generic_string();
}

std::optional<std::string> resolve_include(const TexProject& project, std::string_view arg) {
  const std::string base = normalize_path(arg);
  for (const auto& candidate : {base + ".tex", base}) {
    if (project.files.count(candidate)) return candidate;
  }
  return std::nullopt;
}

struct Directive {
  std::size_t begin;
  std::size_t end;
  std::string arg;
};

std::optional<Directive> next_directive(std::string_view masked, std::size_t from) {
  while (from < masked.size()) {
    const auto in = find_command(masked, "\\input", from);
    const auto inc = find_command(masked, "\\include", from);
    const auto pos = std::min(in, inc);
    if (pos == std::string_view::npos) return std::nullopt;
    const bool is_input = pos == in;
    std::size_t i = skip_spaces(masked, pos + (is_input ? 6 : 8));
    if (i < masked.size() && masked[i] == '{') {
      if (auto close = match_group(masked, i)) {
        return Directive{pos, *close, std::string(masked.substr(i + 1, *close - i - 2))};
      }
    } else if (is_input) {
      // TeX primitive form: \input name
      std::size_t j = i;
      while (j < masked.size() && !std::isspace(static_cast<unsigned char>(masked[j])) &&
             masked[j] != '\\' && masked[j] != '}' && masked[j] != '%') {
        ++j;
      }
      if (j > i) return Directive{pos, j, std::string(masked.substr(i, j - i))};
    }
    from = pos + 1;
  }
  return std::nullopt;
}

std::string expand_file(const TexProject& project, const std::string& file,
                        std::vector<std::string>& stack, std::vector<std::string>& unresolved) {
  if (static_cast<int>(stack.size()) > kMaxIncludeDepth) {
    throw CycleDetected("include nesting deeper than " + std::to_string(kMaxIncludeDepth) +
                        " at " + file);
  }
  const std::string& src = project.files.at(file);
  const std::string masked = mask_comments(src);
  std::string out;
  std::size_t pos = 0;
  while (auto d = next_directive(masked, pos)) {
    out.append(src, pos, d->begin - pos);
    const auto target = resolve_include(project, d->arg);
    if (!target) {
      unresolved.push_back(d->arg);
      out.append(src, d->begin, d->end - d->begin);
    } else {
      if (std::find(stack.begin(), stack.end(), *target) != stack.end()) {
        throw CycleDetected("include cycle: " + file + " -> " + *target);
      }
      stack.push_back(*target);
      out += expand_file(project, *target, stack, unresolved);
      stack.pop_back();
      const bool followed_by_space =
          d->end < src.size() && std::isspace(static_cast<unsigned char>(src[d->end]));
      if (!followed_by_space) out.push_back(' ');
    }
    pos = d->end;
  }
  out.append(src, pos, std::string::npos);
  return out;
}

struct ParsedDef {
  MacroDef def;
  std::size_t begin;
  std::size_t end;
};

// Control-sequence name starting at s[i] == '\\'. Returns one past its end.
std::optional<std::size_t> control_sequence_end(std::string_view s, std::size_t i) {
  if (i >= s.size() || s[i] != '\\' || i + 1 >= s.size()) return std::nullopt;
  std::size_t j = i + 1;
  if (!is_letter(s[j])) return j + 1;
  while (j < s.size() && is_letter(s[j])) ++j;
  return j;
}

std::optional<std::size_t> skip_optional_arg(std::string_view s, std::size_t i) {
  i = skip_spaces(s, i);
  if (i < s.size() && s[i] == '[') {
    auto close = match_group(s, i, '[', ']');
    if (!close) return std::nullopt;
    return *close;
  }
  return i;
}

std::optional<ParsedDef> parse_def(std::string_view s, std::size_t pos) {
  std::size_t i = skip_spaces(s, pos + 4);
  const auto name_end = control_sequence_end(s, i);
  if (!name_end) return std::nullopt;
  std::string name(s.substr(i, *name_end - i));
  const auto open = s.find('{', *name_end);
  if (open == std::string_view::npos) return std::nullopt;
  // Parameter text may only hold #n markers and delimiters, never a group or a new command.
  for (std::size_t k = *name_end; k < open; ++k) {
    if (s[k] == '}' || s[k] == '\n') return std::nullopt;
  }
  const auto close = match_group(s, open);
  if (!close) return std::nullopt;
  MacroDef def{std::move(name), std::string(s.substr(open + 1, *close - open - 2)), MacroKind::def,
               std::string(s.substr(pos, *close - pos))};
  return ParsedDef{std::move(def), pos, *close};
}

std::optional<ParsedDef> parse_newcommand(std::string_view s, std::size_t pos, std::size_t cmd_len) {
  std::size_t i = pos + cmd_len;
  if (i < s.size() && s[i] == '*') ++i;
  i = skip_spaces(s, i);
  std::string name;
  if (i < s.size() && s[i] == '{') {
    const auto close = match_group(s, i);
    if (!close) return std::nullopt;
    name = std::string(text::trim(s.substr(i + 1, *close - i - 2)));
    i = *close;
  } else {
    const auto end = control_sequence_end(s, i);
    if (!end) return std::nullopt;
    name = std::string(s.substr(i, *end - i));
    i = *end;
  }
  if (name.empty() || name[0] != '\\') return std::nullopt;
  for (int k = 0; k < 2; ++k) {
    auto next = skip_optional_arg(s, i);
    if (!next) return std::nullopt;
    i = *next;
  }
  i = skip_spaces(s, i);
  const auto close = match_group(s, i);
  if (!close) return std::nullopt;
  MacroDef def{std::move(name), std::string(s.substr(i + 1, *close - i - 2)),
               MacroKind::newcommand, std::string(s.substr(pos, *close - pos))};
  return ParsedDef{std::move(def), pos, *close};
}

std::optional<ParsedDef> parse_newenvironment(std::string_view s, std::size_t pos) {
  std::size_t i = pos + std::string_view("\\newenvironment").size();
  if (i < s.size() && s[i] == '*') ++i;
  i = skip_spaces(s, i);
  const auto name_close = match_group(s, i);
  if (!name_close) return std::nullopt;
  std::string name(text::trim(s.substr(i + 1, *name_close - i - 2)));
  i = *name_close;
  for (int k = 0; k < 2; ++k) {
    auto next = skip_optional_arg(s, i);
    if (!next) return std::nullopt;
    i = *next;
  }
  i = skip_spaces(s, i);
  const auto begin_close = match_group(s, i);
  if (!begin_close) return std::nullopt;
  const std::size_t j = skip_spaces(s, *begin_close);
  const auto end_close = match_group(s, j);
  if (!end_close) return std::nullopt;
  std::string body(s.substr(i + 1, *begin_close - i - 2));
  body += s.substr(j + 1, *end_close - j - 2);
  MacroDef def{std::move(name), std::move(body), MacroKind::newenvironment,
               std::string(s.substr(pos, *end_close - pos))};
  return ParsedDef{std::move(def), pos, *end_close};
}

std::vector<ParsedDef> scan_definitions(std::string_view masked, std::size_t* unsupported) {
  static const std::vector<std::string_view> kCommandForms = {
      "\\newcommand", "\\renewcommand", "\\providecommand"};
  static const std::vector<std::string_view> kUnsupported = {
      "\\edef", "\\gdef", "\\xdef", "\\let", "\\DeclareRobustCommand", "\\NewDocumentCommand",
      "\\RenewDocumentCommand", "\\DeclareMathOperator", "\\renewenvironment", "\\newcommandx"};
  std::vector<ParsedDef> found;
  std::size_t i = 0;
  while ((i = masked.find('\\', i)) != std::string_view::npos) {
    std::optional<ParsedDef> parsed;
    bool matched = false;
    if (find_command(masked.substr(i, 5), "\\def", 0) == 0) {
      matched = true;
      parsed = parse_def(masked, i);
    } else if (find_command(masked.substr(i, 16), "\\newenvironment", 0) == 0) {
      matched = true;
      parsed = parse_newenvironment(masked, i);
    } else {
      for (auto form : kCommandForms) {
        const auto window = masked.substr(i, form.size() + 1);
        if (find_command(window, form, 0) == 0) {
          matched = true;
          parsed = parse_newcommand(masked, i, form.size());
          break;
        }
      }
    }
    if (!matched && unsupported) {
      for (auto form : kUnsupported) {
        if (find_command(masked.substr(i, form.size() + 1), form, 0) == 0) {
          ++*unsupported;
          break;
        }
      }
    }
    if (parsed) {
      const auto end = parsed->end;
      found.push_back(std::move(*parsed));
      i = end;
    } else {
      const auto end = control_sequence_end(masked, i);
      i = end ? *end : i + 1;
    }
  }
  return found;
}

bool macro_used_in(const MacroDef& def, std::string_view text) {
  if (def.kind == MacroKind::newenvironment) {
    return text.find("\\begin{" + def.name + "}") != std::string_view::npos;
  }
  if (is_letter(def.name.back())) return find_command(text, def.name, 0) != std::string_view::npos;
  return text.find(def.name) != std::string_view::npos;
}

// Logical preamble units: lines joined while braces are open.
std::vector<std::string> logical_lines(std::string_view preamble) {
  std::vector<std::string> units;
  std::string cur;
  int depth = 0;
  for (auto line : text::split_lines(preamble)) {
    const auto pct = text::comment_start(line);
    if (pct != std::string_view::npos) line = line.substr(0, pct);
    if (!cur.empty()) cur.push_back('\n');
    cur.append(line);
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (line[k] == '\\') {
        ++k;
        continue;
      }
      if (line[k] == '{') ++depth;
      else if (line[k] == '}') depth = std::max(0, depth - 1);
    }
    if (depth == 0) {
      units.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) units.push_back(std::move(cur));
  return units;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

// Caption of the figure environment enclosing [begin, end), if any.
std::string enclosing_caption(std::string_view masked, std::string_view original, std::size_t begin,
                              std::size_t end) {
  const auto fig_begin = masked.rfind("\\begin{figure", begin);
  if (fig_begin == std::string_view::npos) return {};
  const auto closed_before = masked.find("\\end{figure", fig_begin);
  if (closed_before != std::string_view::npos && closed_before < begin) return {};
  const auto fig_end = masked.find("\\end{figure", end);
  if (fig_end == std::string_view::npos) return {};
  std::size_t pos = fig_begin;
  while ((pos = find_command(masked, "\\caption", pos)) != std::string_view::npos && pos < fig_end) {
    if (pos >= begin && pos < end) {
      pos = end;
      continue;
    }
    auto i = skip_optional_arg(masked, pos + 8);
    if (!i) return {};
    const std::size_t open = skip_spaces(masked, *i);
    const auto close = match_group(masked, open);
    if (!close) return {};
    std::string caption(original.substr(open + 1, *close - open - 2));
    // Labels carry no descriptive text.
    std::size_t lab;
    while ((lab = caption.find("\\label{")) != std::string::npos) {
      const auto lab_close = match_group(caption, lab + 6);
      caption.erase(lab, (lab_close ? *lab_close : caption.size()) - lab);
    }
    return collapse_whitespace(caption);
  }
  return {};
}

}  // namespace

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::arxiv: return "arxiv";
    case Origin::stackexchange: return "stackexchange";
    case Origin::curated: return "curated";
    case Origin::artificial: return "artificial";
  }
  return "arxiv";
}

Origin origin_from_string(std::string_view s) {
  if (s == "arxiv") return Origin::arxiv;
  if (s == "stackexchange") return Origin::stackexchange;
  if (s == "curated") return Origin::curated;
  if (s == "artificial") return Origin::artificial;
  throw InvalidArgument("unknown origin: " + std::string(s));
}

TexProject load_project(const fs::path& dir, Origin origin) {
  static const std::set<std::string> kExtensions = {".tex", ".sty", ".cls", ".tikz", ".pgf"};
  TexProject project;
  project.origin = origin;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && kExtensions.count(entry.path().extension().string())) {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    auto decoded = text::decode_utf8_lossy(text::read_file(p));
    project.replacement_chars += decoded.replacements;
    const auto rel = fs::relative(p, dir).generic_string();
    if (project.root_file.empty() && p.extension() == ".tex") {
      const std::string masked = mask_comments(decoded.text);
      if (masked.find("\\documentclass") != std::string::npos &&
          masked.find("\\begin{document}") != std::string::npos) {
        project.root_file = rel;
      }
    }
    project.files.emplace(rel, std::move(decoded.text));
  }
  if (project.root_file.empty()) {
    throw MalformedProject("no root document (\\documentclass + \\begin{document}) in " +
                           dir.string());
  }
  return project;
}

IncludeExpansion expand_includes(const TexProject& project) {
  if (!project.files.count(project.root_file)) {
    throw MalformedProject("root file missing from project: " + project.root_file);
  }
  IncludeExpansion out;
  std::vector<std::string> stack{project.root_file};
  out.text = expand_file(project, project.root_file, stack, out.unresolved);
  return out;
}

Extraction extract_tikz_environments(std::string_view tex) {
  const std::string masked = mask_comments(tex);
  Extraction out;
  std::size_t pos = 0;
  std::size_t start = 0;
  int depth = 0;
  while (true) {
    const auto b = masked.find(kBeginPicture, pos);
    const auto e = masked.find(kEndPicture, pos);
    if (b == std::string::npos && e == std::string::npos) break;
    if (b < e) {
      if (depth == 0) start = b;
      ++depth;
      pos = b + kBeginPicture.size();
    } else {
      pos = e + kEndPicture.size();
      if (depth == 0) continue;  // stray \end
      if (--depth == 0) {
        out.snippets.push_back({std::string(tex.substr(start, pos - start)), start, pos});
      }
    }
  }
  if (depth > 0) ++out.unbalanced;
  return out;
}

MacroTable parse_macro_definitions(std::string_view tex) {
  const std::string masked = mask_comments(tex);
  MacroTable table;
  for (auto& parsed : scan_definitions(masked, &table.unsupported)) {
    auto& def = parsed.def;
    // Keep the original text (comments inside definitions were masked only for scanning).
    def.source = std::string(tex.substr(parsed.begin, parsed.end - parsed.begin));
    auto existing = std::find_if(table.defs.begin(), table.defs.end(), [&](const MacroDef& d) {
      return d.name == def.name && (d.kind == MacroKind::newenvironment) ==
                                       (def.kind == MacroKind::newenvironment);
    });
    if (existing != table.defs.end()) {
      table.defs.erase(existing);
      ++table.redefinitions;
    }
    table.defs.push_back(std::move(def));
  }
  return table;
}

std::vector<MacroDef> collect_used_macros(std::string_view snippet, const std::vector<MacroDef>& defs) {
  std::vector<bool> kept(defs.size(), false);
  std::vector<std::string_view> frontier{snippet};
  while (!frontier.empty()) {
    std::vector<std::string_view> next;
    for (std::size_t k = 0; k < defs.size(); ++k) {
      if (kept[k]) continue;
      for (auto text : frontier) {
        if (macro_used_in(defs[k], text)) {
          kept[k] = true;
          next.push_back(defs[k].body);
          break;
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<MacroDef> out;
  for (std::size_t k = 0; k < defs.size(); ++k) {
    if (kept[k]) out.push_back(defs[k]);
  }
  return out;
}

bool RuleSet::allows(std::string_view line) const {
  const std::string s(line);
  for (const auto& rule : rules) {
    if (std::regex_search(s, rule.regex)) return rule.allow;
  }
  return false;
}

RuleSet parse_rules(std::string_view rule_text) {
  RuleSet set;
  std::size_t lineno = 0;
  for (auto raw : text::split_lines(rule_text)) {
    ++lineno;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view kVersion = "# version:";
      if (text::starts_with(line, kVersion)) set.version = std::string(text::trim(line.substr(kVersion.size())));
      continue;
    }
    Rule rule;
    std::string_view rest;
    if (text::starts_with(line, "ALLOW ")) {
      rule.allow = true;
      rest = line.substr(6);
    } else if (text::starts_with(line, "DENY ")) {
      rest = line.substr(5);
    } else {
      throw RuleFileError("line " + std::to_string(lineno) + ": expected ALLOW or DENY");
    }
    rule.pattern = std::string(text::trim(rest));
    try {
      rule.regex = std::regex(rule.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw RuleFileError("line " + std::to_string(lineno) + ": bad regex: " + e.what());
    }
    set.rules.push_back(std::move(rule));
  }
  return set;
}

RuleSet load_rules(const fs::path& path) { return parse_rules(text::read_file(path)); }

std::string preamble_of(std::string_view tex) {
  const std::string masked = mask_comments(tex);
  const auto doc = masked.find("\\begin{document}");
  if (doc == std::string::npos) return {};
  std::size_t start = 0;
  const auto cls = find_command(masked, "\\documentclass", 0);
  if (cls != std::string::npos && cls < doc) {
    auto i = skip_optional_arg(masked, cls + 14);
    if (i) {
      const auto open = skip_spaces(masked, *i);
      if (auto close = match_group(masked, open)) start = *close;
    }
  }
  return std::string(tex.substr(start, doc - start));
}

std::string retain_preamble(std::string_view preamble, const RuleSet& rules) {
  std::string out;
  for (const auto& unit : logical_lines(preamble)) {
    if (text::trim(unit).empty()) continue;
    if (!rules.allows(unit)) continue;
    if (!out.empty()) out.push_back('\n');
    out += unit;
  }
  return out;
}

std::string assemble_document(std::string_view snippet, const std::vector<MacroDef>& macros,
                              std::string_view preamble) {
  std::string out(kDocumentClass);
  out.push_back('\n');
  std::string_view pre = preamble;
  while (!pre.empty() && (pre.back() == '\n' || pre.back() == ' ')) pre.remove_suffix(1);
  if (!pre.empty()) {
    out += pre;
    out.push_back('\n');
  }
  for (const auto& m : macros) {
    out += m.source;
    out.push_back('\n');
  }
  out += "\\begin{document}\n";
  out += snippet;
  out += "\n\\end{document}";
  return out;
}

std::string record_id(std::string_view code) { return text::sha256_hex(code); }

std::vector<TikzRecord> extract_records(const TexProject& project, const RuleSet& rules,
                                        std::string_view license, ExtractionStats& stats) {
  ++stats.projects;
  const auto expanded = expand_includes(project);
  stats.unresolved_includes += expanded.unresolved.size();
  const std::string& tex = expanded.text;
  const auto extraction = extract_tikz_environments(tex);
  stats.unbalanced += extraction.unbalanced;
  stats.snippets += extraction.snippets.size();

  std::string outside = tex;
  for (const auto& s : extraction.snippets) blank(outside, s.begin, s.end);
  const auto table = parse_macro_definitions(outside);
  stats.macro_redefinitions += table.redefinitions;
  stats.unsupported_macro_forms += table.unsupported;

  // Definitions are re-emitted only when used, so strip them before rule filtering.
  std::string without_defs = tex;
  for (const auto& parsed : scan_definitions(mask_comments(outside), nullptr)) {
    blank(without_defs, parsed.begin, parsed.end);
  }
  const std::string preamble = retain_preamble(preamble_of(without_defs), rules);
  const std::string masked = mask_comments(tex);

  std::vector<TikzRecord> records;
  for (const auto& snippet : extraction.snippets) {
    const auto macros = collect_used_macros(snippet.text, table.defs);
    std::string code = assemble_document(snippet.text, macros, preamble);
    if (text::has_replacement_char(code)) {
      ++stats.rejected_encoding;
      continue;
    }
    if (extract_tikz_environments(code).snippets.size() != 1) {
      ++stats.rejected_multiple_pictures;
      continue;
    }
    TikzRecord rec;
    rec.id = record_id(code);
    rec.code = std::move(code);
    rec.caption = enclosing_caption(masked, tex, snippet.begin, snippet.end);
    rec.origin = project.origin;
    rec.license = std::string(license);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<TikzRecord> deduplicate(std::vector<TikzRecord> records, std::size_t* duplicates) {
  std::unordered_set<std::string> seen;
  std::vector<TikzRecord> out;
  for (auto& r : records) {
    if (seen.insert(record_id(r.code)).second) {
      out.push_back(std::move(r));
    } else if (duplicates) {
      ++*duplicates;
    }
  }
  return out;
}

FilterResult filter_compilable(const std::vector<TikzRecord>& records, DocumentCompiler& compiler,
                               unsigned jobs) {
  std::vector<char> ok(records.size(), 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const auto k = next.fetch_add(1);
      if (k >= records.size()) return;
      try {
        const auto report = compiler.compile(records[k].code);
        ok[k] = report.success && report.produced_image;
      } catch (const EngineMissing& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::make_exception_ptr(CompilerUnavailable(e.what()));
        next = records.size();
        return;
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(records.size(), 1))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  FilterResult result;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (ok[k]) result.kept.push_back(records[k]);
    else ++result.rejected;
  }
  return result;
}

}  // namespace tikzlab::corpus
