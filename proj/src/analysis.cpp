#include "tikzlab/analysis.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "tikzlab/error.hpp"

namespace tikzlab::analysis {

namespace {

enum class CharClass { space, alnum, digit, period, comma, apostrophe, keep, special };

// Decodes one UTF-8 code point at s[i]; advances i. Invalid bytes decode as themselves.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto c = static_cast<unsigned char>(s[i]);
  int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
  if (i + static_cast<std::size_t>(len) > s.size()) len = 1;
  char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
  for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  i += static_cast<std::size_t>(len);
  return cp;
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_unicode_punct(char32_t cp) {
  return (cp >= 0xA1 && cp <= 0xBF && cp != 0xAA && cp != 0xB2 && cp != 0xB3 && cp != 0xB5 &&
          cp != 0xB9 && cp != 0xBA && cp != 0xBC && cp != 0xBD && cp != 0xBE) ||
         cp == 0xD7 || cp == 0xF7 || (cp >= 0x2010 && cp <= 0x205E) || (cp >= 0x2190 && cp <= 0x23FF) ||
         (cp >= 0x2500 && cp <= 0x27BF) || (cp >= 0x3001 && cp <= 0x303F) || (cp >= 0xFF01 && cp <= 0xFF0F);
}

CharClass classify(char32_t cp) {
  if (is_unicode_space(cp)) return CharClass::space;
  if (cp >= '0' && cp <= '9') return CharClass::digit;
  if (cp < 0x80) {
    if (std::isalpha(static_cast<int>(cp))) return CharClass::alnum;
    switch (cp) {
      case '.': return CharClass::period;
      case ',': return CharClass::comma;
      case '\'': return CharClass::apostrophe;
      case '`': case '-': return CharClass::keep;
      default: return CharClass::special;
    }
  }
  return is_unicode_punct(cp) ? CharClass::special : CharClass::alnum;
}

bool is_alpha_class(CharClass c) { return c == CharClass::alnum; }

const std::set<std::string, std::less<>>& nonbreaking_prefixes() {
  static const std::set<std::string, std::less<>> kPrefixes = [] {
    std::set<std::string, std::less<>> s;
    for (char c = 'A'; c <= 'Z'; ++c) s.insert(std::string(1, c));
    for (const char* p : {"Adj", "Adm", "Adv", "Asst", "Bart", "Bldg", "Brig", "Bros", "Capt", "Cmdr",
                          "Col", "Comdr", "Con", "Corp", "Cpl", "DR", "Dr", "Drs", "Ens", "Gen", "Gov",
                          "Hon", "Hr", "Hosp", "Insp", "Lt", "MM", "MR", "MRS", "MS", "Maj", "Messrs",
                          "Mlle", "Mme", "Mr", "Mrs", "Ms", "Msgr", "Op", "Ord", "Pfc", "Ph", "Prof",
                          "Pvt", "Rep", "Reps", "Res", "Rev", "Rt", "Sen", "Sens", "Sfc", "Sgt", "Sr",
                          "St", "Supt", "Surg", "v", "vs", "i.e", "rev", "e.g", "Rs", "Nos", "Nr",
                          "Jan", "Feb", "Mar", "Apr", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"}) {
      s.insert(p);
    }
    return s;
  }();
  return kPrefixes;
}

bool numeric_only_prefix(std::string_view p) { return p == "No" || p == "Art" || p == "pp"; }

bool has_ascii_alpha(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80;
  });
}

// Splits one whitespace-free chunk into tokens (periods at word ends are handled later).
void split_chunk(std::string_view chunk, Tokens& out) {
  struct Unit {
    std::string_view bytes;
    CharClass cls;
  };
  std::vector<Unit> units;
  for (std::size_t i = 0; i < chunk.size();) {
    const std::size_t start = i;
    const char32_t cp = next_code_point(chunk, i);
    units.push_back({chunk.substr(start, i - start), classify(cp)});
  }
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t k = 0; k < units.size(); ++k) {
    const auto& u = units[k];
    const CharClass prev = k > 0 ? units[k - 1].cls : CharClass::space;
    const CharClass next = k + 1 < units.size() ? units[k + 1].cls : CharClass::space;
    switch (u.cls) {
      case CharClass::special:
        flush();
        out.emplace_back(u.bytes);
        break;
      case CharClass::comma:
        if (prev == CharClass::digit && next == CharClass::digit) {
          word.append(u.bytes);
        } else {
          flush();
          out.emplace_back(",");
        }
        break;
      case CharClass::apostrophe:
        if ((is_alpha_class(prev) && is_alpha_class(next)) ||
            (prev == CharClass::digit && k + 1 < units.size() && units[k + 1].bytes == "s")) {
          // "isn't" -> "isn" "'t", "1990's" -> "1990" "'s"
          flush();
          word.append(u.bytes);
        } else if (prev == CharClass::digit && is_alpha_class(next)) {
          word.append(u.bytes);
        } else {
          flush();
          out.emplace_back("'");
        }
        break;
      case CharClass::period: {
        std::size_t run = k;
        while (run < units.size() && units[run].cls == CharClass::period) ++run;
        if (run - k >= 2) {
          flush();
          out.emplace_back(std::string(run - k, '.'));
          k = run - 1;
        } else {
          word.push_back('.');
        }
        break;
      }
      default:
        word.append(u.bytes);
    }
  }
  flush();
}

bool starts_lowercase(std::string_view s) {
  return !s.empty() && s[0] >= 'a' && s[0] <= 'z';
}

bool starts_digit(std::string_view s) { return !s.empty() && s[0] >= '0' && s[0] <= '9'; }

}  // namespace

Tokens tokenize(std::string_view raw, const TokenizeOptions& options) {
  std::string folded;
  if (options.lowercase) {
    folded.assign(raw);
    std::transform(folded.begin(), folded.end(), folded.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    raw = folded;
  }
  const std::string_view text = raw;
  Tokens pieces;
  std::size_t i = 0;
  std::size_t chunk_start = std::string_view::npos;
  while (i < text.size()) {
    const std::size_t at = i;
    const char32_t cp = next_code_point(text, i);
    if (is_unicode_space(cp)) {
      if (chunk_start != std::string_view::npos) split_chunk(text.substr(chunk_start, at - chunk_start), pieces);
      chunk_start = std::string_view::npos;
    } else if (chunk_start == std::string_view::npos) {
      chunk_start = at;
    }
  }
  if (chunk_start != std::string_view::npos) split_chunk(text.substr(chunk_start), pieces);

  Tokens tokens;
  tokens.reserve(pieces.size() + 8);
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    auto& tok = pieces[k];
    const bool ends_with_period = tok.size() > 1 && tok.back() == '.' &&
                                  tok.find_first_not_of('.') != std::string::npos;
    if (!ends_with_period) {
      tokens.push_back(std::move(tok));
      continue;
    }
    const std::string_view prefix(tok.data(), tok.size() - 1);
    const bool last = k + 1 == pieces.size();
    bool keep = (prefix.find('.') != std::string_view::npos && has_ascii_alpha(prefix)) ||
                (nonbreaking_prefixes().count(prefix) && !numeric_only_prefix(prefix)) ||
                (!last && starts_lowercase(pieces[k + 1]));
    if (!keep && numeric_only_prefix(prefix) && !last && starts_digit(pieces[k + 1])) keep = true;
    if (keep) {
      tokens.push_back(std::move(tok));
    } else {
      tokens.emplace_back(prefix);
      tokens.emplace_back(".");
    }
  }
  return tokens;
}

std::string strip_comments(std::string_view code) {
  std::string out;
  out.reserve(code.size());
  std::size_t start = 0;
  while (start <= code.size()) {
    const auto nl = code.find('\n', start);
    const auto line = code.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    std::size_t cut = std::string_view::npos;
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (line[k] == '%' && (k == 0 || line[k - 1] != '\\')) {
        cut = k;
        break;
      }
    }
    out.append(line.substr(0, cut));
    if (nl == std::string_view::npos) break;
    out.push_back('\n');
    start = nl + 1;
  }
  return out;
}

std::string ngram_key(const Tokens& tokens, std::size_t pos, std::size_t n) {
  std::string key;
  for (std::size_t k = 0; k < n; ++k) {
    if (k) key.push_back('\x1f');
    key += tokens[pos + k];
  }
  return key;
}

NGramIndex::NGramIndex(std::size_t n) : n_(n) {
  if (n == 0) throw InvalidArgument("n-gram order must be positive");
}

void NGramIndex::add(const Tokens& document) {
  source_size_ += document.size();
  if (document.size() < n_) return;
  for (std::size_t p = 0; p + n_ <= document.size(); ++p) grams_.insert(ngram_key(document, p, n_));
}

void NGramIndex::merge(const NGramIndex& other) {
  if (other.n_ != n_) throw InvalidArgument("cannot merge n-gram indexes of different order");
  grams_.insert(other.grams_.begin(), other.grams_.end());
  source_size_ += other.source_size_;
}

double ngram_novelty(const std::vector<Tokens>& generated, const NGramIndex& training) {
  const std::size_t n = training.n();
  std::unordered_set<std::string> unique;
  for (const auto& doc : generated) {
    for (std::size_t p = 0; p + n <= doc.size(); ++p) unique.insert(ngram_key(doc, p, n));
  }
  if (unique.empty()) throw NoNGrams("generated corpus has no " + std::to_string(n) + "-grams");
  const auto novel = std::count_if(unique.begin(), unique.end(),
                                   [&](const std::string& g) { return !training.contains(g); });
  return static_cast<double>(novel) / static_cast<double>(unique.size());
}

namespace {

std::pair<std::size_t, std::size_t> copied_positions(const Tokens& caption, const Tokens& code, std::size_t n) {
  if (caption.size() < n) return {0, 0};
  std::unordered_set<std::string> code_grams;
  for (std::size_t p = 0; p + n <= code.size(); ++p) code_grams.insert(ngram_key(code, p, n));
  std::size_t copied = 0;
  const std::size_t total = caption.size() - n + 1;
  for (std::size_t p = 0; p < total; ++p) copied += code_grams.count(ngram_key(caption, p, n));
  return {copied, total};
}

}  // namespace

double caption_copying(const Tokens& caption, const Tokens& code, std::size_t n) {
  if (n == 0) throw InvalidArgument("n-gram order must be positive");
  const auto [copied, total] = copied_positions(caption, code, n);
  if (total == 0) throw NoNGrams("caption shorter than " + std::to_string(n) + " tokens");
  return static_cast<double>(copied) / static_cast<double>(total);
}

double caption_copying_corpus(const std::vector<Tokens>& captions, const std::vector<Tokens>& codes,
                              std::size_t n) {
  if (captions.size() != codes.size()) throw InvalidArgument("captions and codes are not aligned");
  if (n == 0) throw InvalidArgument("n-gram order must be positive");
  std::size_t copied = 0, total = 0;
  for (std::size_t k = 0; k < captions.size(); ++k) {
    const auto [c, t] = copied_positions(captions[k], codes[k], n);
    copied += c;
    total += t;
  }
  if (total == 0) throw NoNGrams("no caption has " + std::to_string(n) + " tokens");
  return static_cast<double>(copied) / static_cast<double>(total);
}

Tokens code_tokens(std::string_view code, const TokenizeOptions& options) {
  return tokenize(strip_comments(code), options);
}

std::map<std::string, double> complexity_stats(const std::vector<SystemDocument>& corpus) {
  if (corpus.empty()) throw EmptyGroup("no documents");
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& doc : corpus) {
    auto& [sum, count] = sums[doc.system];
    sum += static_cast<double>(code_tokens(doc.code).size());
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [system, sc] : sums) out[system] = sc.first / static_cast<double>(sc.second);
  return out;
}

}  // namespace tikzlab::analysis
