#include "tikzlab/bws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "tikzlab/error.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab::bws {

void validate(const AnnotationRecord& r) {
  const auto has = [&](const std::string& x) { return std::find(r.items.begin(), r.items.end(), x) != r.items.end(); };
  if (r.best == r.worst) throw InvalidRecord("tuple " + r.tuple_id + ": best and worst are the same item");
  if (!has(r.best)) throw InvalidRecord("tuple " + r.tuple_id + ": best item " + r.best + " not in tuple");
  if (!has(r.worst)) throw InvalidRecord("tuple " + r.tuple_id + ": worst item " + r.worst + " not in tuple");
}

std::map<std::string, double> bws_scores(const std::vector<AnnotationRecord>& annotations) {
  if (annotations.empty()) throw EmptyInput("no annotations");
  struct Tally {
    long appearances = 0, best = 0, worst = 0;
  };
  std::map<std::string, Tally> tally;
  for (const auto& r : annotations) {
    validate(r);
    for (const auto& item : r.items) ++tally[item].appearances;
    ++tally[r.best].best;
    ++tally[r.worst].worst;
  }
  std::map<std::string, double> out;
  for (const auto& [item, t] : tally) {
    out[item] = static_cast<double>(t.best - t.worst) / static_cast<double>(t.appearances);
  }
  return out;
}

std::vector<double> fractional_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw LengthMismatch("spearman inputs differ in length");
  if (xs.empty()) throw LengthMismatch("spearman of empty inputs");
  const auto rx = fractional_ranks(xs);
  const auto ry = fractional_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("spearman of a constant vector is undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double split_rho(const std::vector<AnnotationRecord>& annotations, const std::vector<bool>& first_half) {
  if (first_half.size() != annotations.size()) throw LengthMismatch("split mask does not match annotations");
  std::vector<AnnotationRecord> a, b;
  for (std::size_t k = 0; k < annotations.size(); ++k) (first_half[k] ? a : b).push_back(annotations[k]);
  if (a.empty() || b.empty()) throw Unsplittable("one half of the split is empty");
  const auto sa = bws_scores(a);
  const auto sb = bws_scores(b);
  if (sa.size() != sb.size()) throw Unsplittable("an item appears in only one half");
  std::vector<double> xs, ys;
  for (const auto& [item, score] : sa) {
    auto it = sb.find(item);
    if (it == sb.end()) throw Unsplittable("item " + item + " appears in only one half");
    xs.push_back(score);
    ys.push_back(it->second);
  }
  return spearman(xs, ys);
}

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace

ShrResult split_half_reliability(const std::vector<AnnotationRecord>& annotations, std::uint64_t seed,
                                 std::size_t repeats) {
  if (annotations.size() < 2) throw Unsplittable("need at least two annotations to split");
  if (repeats == 0) throw InvalidArgument("repeats must be positive");
  ShrResult result;
  result.seed = seed;
  result.repeats = repeats;
  const std::size_t n = annotations.size();
  double sum = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (r + 1));
    std::vector<std::size_t> idx(n);
    bool done = false;
    for (std::size_t attempt = 0; attempt <= kMaxSplitRetries && !done; ++attempt) {
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t k = n - 1; k > 0; --k) std::swap(idx[k], idx[bounded(rng, k + 1)]);
      std::vector<bool> mask(n, false);
      for (std::size_t k = 0; k < n / 2; ++k) mask[idx[k]] = true;
      try {
        sum += split_rho(annotations, mask);
        done = true;
      } catch (const Unsplittable&) {
        ++result.resamples;
      } catch (const DegenerateInput&) {
        ++result.resamples;
      }
    }
    if (!done) throw Unsplittable("no valid split found after " + std::to_string(kMaxSplitRetries) + " retries");
  }
  result.rho = sum / static_cast<double>(repeats);
  return result;
}

std::map<std::string, double> min_max_normalize(const std::map<std::string, double>& scores) {
  if (scores.empty()) throw DegenerateRange("no scores to normalize");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end(),
                                            [](const auto& a, const auto& b) { return a.second < b.second; });
  const double min = lo->second, max = hi->second;
  if (max == min) throw DegenerateRange("all scores are equal");
  std::map<std::string, double> out;
  for (const auto& [item, s] : scores) out[item] = (s - min) / (max - min);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw InvalidRecord("unterminated quoted field: " + std::string(line));
  for (auto& f : fields) f = std::string(text::trim(f));
  return fields;
}

}  // namespace

std::vector<AnnotationRecord> read_annotations_csv(std::istream& in) {
  static const std::vector<std::string> kHeader = {"tuple_id", "item1", "item2", "item3",
                                                    "item4",    "best",  "worst", "annotator"};
  std::string line;
  if (!std::getline(in, line)) throw InvalidRecord("annotation file is empty");
  if (split_csv_line(line) != kHeader) throw InvalidRecord("unexpected annotation header: " + line);
  std::vector<AnnotationRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != kHeader.size()) {
      throw InvalidRecord("line " + std::to_string(lineno) + ": expected 8 fields, got " + std::to_string(f.size()));
    }
    AnnotationRecord r{f[0], {f[1], f[2], f[3], f[4]}, f[5], f[6], f[7]};
    validate(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tikzlab::bws
