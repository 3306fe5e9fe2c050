#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace tikzlab::analysis {

using Tokens = std::vector<std::string>;

struct TokenizeOptions {
  bool lowercase = false;  // ASCII case folding, applied before tokenizing
};

/// Moses-compatible tokenizer subset (English rules, no escaping, no aggressive
/// hyphen splitting). Hyphens stay inside words; "isn't" splits as "isn" "'t".
Tokens tokenize(std::string_view text, const TokenizeOptions& options = {});

/// Removes everything from the first '%' not preceded by a backslash to the end
/// of each line. Line structure is preserved.
std::string strip_comments(std::string_view code);

/// Joins n tokens starting at `pos` into a single key.
std::string ngram_key(const Tokens& tokens, std::size_t pos, std::size_t n);

/// Set of all n-grams of one order over a corpus.
class NGramIndex {
 public:
  explicit NGramIndex(std::size_t n);

  void add(const Tokens& document);
  void merge(const NGramIndex& other);
  bool contains(const std::string& key) const { return grams_.count(key) > 0; }

  std::size_t n() const { return n_; }
  std::size_t size() const { return grams_.size(); }
  std::size_t source_size() const { return source_size_; }
  const std::unordered_set<std::string>& grams() const { return grams_; }

 private:
  std::size_t n_;
  std::unordered_set<std::string> grams_;
  std::size_t source_size_ = 0;
};

/// Fraction of unique generated n-grams that are absent from the training index.
/// Throws NoNGrams if no generated document has n tokens.
double ngram_novelty(const std::vector<Tokens>& generated, const NGramIndex& training);

/// Fraction of caption n-gram positions whose n-gram occurs as a contiguous run
/// in the code tokens. Throws NoNGrams if the caption is shorter than n.
double caption_copying(const Tokens& caption, const Tokens& code, std::size_t n);

/// Pooled copying over a corpus: copied positions / caption positions, summed over
/// pairs whose caption has at least n tokens.
double caption_copying_corpus(const std::vector<Tokens>& captions, const std::vector<Tokens>& codes,
                              std::size_t n);

struct SystemDocument {
  std::string system;
  std::string code;
};

/// Mean comment-stripped token count per system. Throws EmptyGroup if the input is empty.
std::map<std::string, double> complexity_stats(const std::vector<SystemDocument>& corpus);

/// Comment-stripped, tokenized view of code used by every code-side analysis.
Tokens code_tokens(std::string_view code, const TokenizeOptions& options = {});

}  // namespace tikzlab::analysis
