#include <algorithm>
#include <istream>
#include <map>
#include <sstream>

#include "tikzlab/corpus.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab::corpus {

namespace {

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x110000) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.append("\xEF\xBF\xBD");
  }
}

// Decodes XML/HTML character references. Unknown named entities are kept verbatim.
std::string decode_entities(std::string_view s) {
  static const std::map<std::string, std::string, std::less<>> kNamed = {
      {"lt", "<"}, {"gt", ">"}, {"amp", "&"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", "\xC2\xA0"}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      try {
        const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
        const auto digits = std::string(name.substr(hex ? 2 : 1));
        std::size_t used = 0;
        const unsigned long cp = std::stoul(digits, &used, hex ? 16 : 10);
        if (used != digits.size()) throw std::invalid_argument("partial");
        append_utf8(out, cp);
        i = semi;
        continue;
      } catch (const std::exception&) {
        out.push_back('&');
        continue;
      }
    }
    if (auto it = kNamed.find(name); it != kNamed.end()) {
      out += it->second;
      i = semi;
    } else {
      out.push_back('&');
    }
  }
  return out;
}

using Attributes = std::map<std::string, std::string, std::less<>>;

std::optional<Attributes> parse_row(std::string_view row) {
  Attributes attrs;
  std::size_t i = 4;  // past "<row"
  while (i < row.size()) {
    while (i < row.size() && std::isspace(static_cast<unsigned char>(row[i]))) ++i;
    if (i >= row.size()) return std::nullopt;
    if (row.substr(i, 2) == "/>") return attrs;
    const auto eq = row.find('=', i);
    if (eq == std::string_view::npos) return std::nullopt;
    const std::string name(text::trim(row.substr(i, eq - i)));
    if (name.empty() || name.find_first_of(" <>\"") != std::string::npos) return std::nullopt;
    std::size_t q = eq + 1;
    if (q >= row.size() || (row[q] != '"' && row[q] != '\'')) return std::nullopt;
    const auto close = row.find(row[q], q + 1);
    if (close == std::string_view::npos) return std::nullopt;
    attrs[name] = decode_entities(row.substr(q + 1, close - q - 1));
    i = close + 1;
  }
  return std::nullopt;
}

std::vector<std::string> parse_tags(std::string_view tags) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : tags) {
    if (c == '<' || c == '>' || c == '|') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> code_blocks(std::string_view html) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = html.find("<pre", pos)) != std::string_view::npos) {
    const auto code = html.find("<code>", pos);
    const auto pre_end = html.find("</pre>", pos);
    if (code == std::string_view::npos || pre_end == std::string_view::npos || code > pre_end) {
      pos += 4;
      continue;
    }
    const auto code_end = html.find("</code>", code);
    if (code_end == std::string_view::npos || code_end > pre_end) {
      pos = pre_end;
      continue;
    }
    out.push_back(decode_entities(html.substr(code + 6, code_end - code - 6)));
    pos = pre_end + 6;
  }
  return out;
}

long to_long(const Attributes& a, std::string_view key, long fallback = 0) {
  auto it = a.find(key);
  if (it == a.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (const std::exception&) {
    return fallback;
  }
}

}  // namespace

std::vector<SeCandidate> ingest_stackexchange(std::istream& dump, SeIngestStats& stats,
                                              std::string_view tag, long min_score) {
  std::ostringstream buffer;
  buffer << dump.rdbuf();
  const std::string xml = text::decode_utf8_lossy(buffer.str()).text;

  std::map<long, SeCandidate> questions;
  std::vector<std::pair<long, SeAnswer>> answers;
  std::size_t pos = 0;
  while ((pos = xml.find("<row", pos)) != std::string::npos) {
    ++stats.rows;
    const auto end = xml.find("/>", pos);
    const auto next = xml.find("<row", pos + 4);
    if (end == std::string::npos || (next != std::string::npos && next < end)) {
      ++stats.malformed;
      pos = next == std::string::npos ? xml.size() : next;
      continue;
    }
    const auto row = std::string_view(xml).substr(pos, end + 2 - pos);
    pos = end + 2;
    const auto attrs = parse_row(row);
    if (!attrs || !attrs->count("Id") || !attrs->count("PostTypeId")) {
      ++stats.malformed;
      continue;
    }
    const long type = to_long(*attrs, "PostTypeId");
    if (type == 1) {
      auto tags = parse_tags(attrs->count("Tags") ? attrs->at("Tags") : "");
      if (std::find(tags.begin(), tags.end(), tag) == tags.end()) continue;
      SeCandidate q;
      q.question_id = to_long(*attrs, "Id");
      q.title = attrs->count("Title") ? attrs->at("Title") : "";
      q.body = attrs->count("Body") ? attrs->at("Body") : "";
      q.tags = std::move(tags);
      questions.emplace(q.question_id, std::move(q));
    } else if (type == 2) {
      SeAnswer a;
      a.id = to_long(*attrs, "Id");
      a.score = to_long(*attrs, "Score");
      a.body = attrs->count("Body") ? attrs->at("Body") : "";
      if (attrs->count("CreationDate")) a.created = attrs->at("CreationDate");
      answers.emplace_back(to_long(*attrs, "ParentId", -1), std::move(a));
    }
  }

  for (auto& [parent, answer] : answers) {
    auto q = questions.find(parent);
    if (q == questions.end() || answer.score < min_score) continue;
    for (auto& block : code_blocks(answer.body)) {
      if (block.find("\\begin{tikzpicture}") != std::string::npos) answer.tikz_code.push_back(std::move(block));
    }
    if (answer.tikz_code.empty()) continue;
    ++stats.answers_kept;
    q->second.answers.push_back(std::move(answer));
  }

  std::vector<SeCandidate> out;
  for (auto& [id, q] : questions) {
    if (q.answers.empty()) continue;
    ++stats.questions;
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<TikzRecord> stackexchange_records(const std::vector<SeCandidate>& candidates,
                                              const RuleSet& rules, ExtractionStats& stats,
                                              Captioner captioner) {
  std::vector<TikzRecord> out;
  for (const auto& q : candidates) {
    const std::string caption = captioner ? captioner(q) : std::string();
    for (const auto& a : q.answers) {
      for (const auto& code : a.tikz_code) {
        TexProject project;
        project.origin = Origin::stackexchange;
        project.root_file = "answer.tex";
        if (code.find("\\documentclass") != std::string::npos &&
            code.find("\\begin{document}") != std::string::npos) {
          project.files[project.root_file] = code;
        } else {
          // A bare fragment: what precedes the first picture acts as its preamble.
          const auto first = code.find("\\begin{tikzpicture}");
          project.files[project.root_file] = "\\documentclass{article}\n" + code.substr(0, first) +
                                             "\n\\begin{document}\n" + code.substr(first) +
                                             "\n\\end{document}\n";
        }
        auto records = extract_records(project, rules, "CC BY-SA", stats);
        for (auto& r : records) {
          r.caption = caption;
          r.created = a.created;
          out.push_back(std::move(r));
        }
      }
    }
  }
  return out;
}

}  // namespace tikzlab::corpus
