#include "tikzlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

#include "tikzlab/embedder.hpp"
#include "tikzlab/error.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab::metrics {

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("embeddings differ in length: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double clip_score(const Eigen::VectorXd& text_emb, const Eigen::VectorXd& image_emb, ClipVariant variant) {
  const double w = variant == ClipVariant::weighted ? 2.5 : 1.0;
  return 100.0 * w * std::max(cosine(text_emb, image_emb), 0.0);
}

double clip_score_img(const Eigen::VectorXd& ref_image_emb, const Eigen::VectorXd& gen_image_emb,
                      ClipVariant variant) {
  return clip_score(ref_image_emb, gen_image_emb, variant);
}

// KID -------------------------------------------------------------------------

namespace {

// Sum of k(a_i, b_j) over i != j for the cubic polynomial kernel.
double offdiag_kernel_sum(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double d = static_cast<double>(a.cols());
  const Eigen::MatrixXd k = ((a * b.transpose()).array() / d + 1.0).cube().matrix();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      if (i != j) sum += k(i, j);
    }
  }
  return sum;
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  // Rejection sampling keeps the draw unbiased and identical across standard libraries.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

Eigen::MatrixXd subset_rows(const Eigen::MatrixXd& x, std::size_t m, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (m == n) return x;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t k = 0; k < m; ++k) std::swap(idx[k], idx[k + bounded(rng, n - k)]);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m), x.cols());
  for (std::size_t k = 0; k < m; ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

}  // namespace

double kid(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& ref, const KidOptions& options) {
  if (gen.rows() < 2 || ref.rows() < 2) throw TooFewSamples("KID needs at least two samples per side");
  if (gen.cols() != ref.cols()) throw DimensionMismatch("KID feature dimensions differ");
  if (options.subsets == 0 || options.subset_size < 2) throw InvalidArgument("KID subset options out of range");
  const std::size_t m = std::min({options.subset_size, static_cast<std::size_t>(gen.rows()),
                                  static_cast<std::size_t>(ref.rows())});
  std::mt19937_64 rng(options.seed);
  const double pairs = static_cast<double>(m) * static_cast<double>(m - 1);
  double total = 0.0;
  for (std::size_t s = 0; s < options.subsets; ++s) {
    const Eigen::MatrixXd x = subset_rows(gen, m, rng);
    const Eigen::MatrixXd y = subset_rows(ref, m, rng);
    total += (offdiag_kernel_sum(x, x) + offdiag_kernel_sum(y, y) - 2.0 * offdiag_kernel_sum(x, y)) / pairs;
  }
  return total / static_cast<double>(options.subsets);
}

// CrystalBLEU -------------------------------------------------------------------

namespace {

using Counts = std::unordered_map<std::string, std::size_t>;

Counts ngram_counts(const analysis::Tokens& tokens, std::size_t n) {
  Counts c;
  for (std::size_t p = 0; p + n <= tokens.size(); ++p) ++c[analysis::ngram_key(tokens, p, n)];
  return c;
}

}  // namespace

std::set<std::string> trivially_shared_ngrams(const std::vector<analysis::Tokens>& references, std::size_t k,
                                              std::size_t max_order) {
  if (k == 0) return {};
  Counts pooled;
  for (const auto& ref : references) {
    for (std::size_t n = 1; n <= max_order; ++n) {
      for (auto& [g, c] : ngram_counts(ref, n)) pooled[g] += c;
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(pooled.begin(), pooled.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::set<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.insert(ranked[i].first);
  return out;
}

double crystal_bleu(const std::vector<analysis::Tokens>& candidates, const std::vector<analysis::Tokens>& references,
                    const BleuOptions& options) {
  if (candidates.empty()) throw EmptyCorpus("no candidates");
  if (candidates.size() != references.size()) throw MissingAlignment("candidate and reference counts differ");
  if (options.max_order == 0) throw InvalidArgument("BLEU order must be positive");
  const auto ignored = trivially_shared_ngrams(references, options.ignore_top_k, options.max_order);

  std::vector<double> matched(options.max_order, 0.0), possible(options.max_order, 0.0);
  double hyp_len = 0.0, ref_len = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    hyp_len += static_cast<double>(candidates[s].size());
    ref_len += static_cast<double>(references[s].size());
    for (std::size_t n = 1; n <= options.max_order; ++n) {
      const auto ref_counts = ngram_counts(references[s], n);
      for (const auto& [g, c] : ngram_counts(candidates[s], n)) {
        if (ignored.count(g)) continue;
        possible[n - 1] += static_cast<double>(c);
        if (auto it = ref_counts.find(g); it != ref_counts.end()) matched[n - 1] += static_cast<double>(std::min(c, it->second));
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < options.max_order; ++n) {
    if (matched[n] == 0.0) return 0.0;
    log_sum += std::log(matched[n] / possible[n]);
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_sum / static_cast<double>(options.max_order));
}

// EED ---------------------------------------------------------------------------

namespace {

std::u32string code_points(std::string_view s) {
  std::u32string out;
  out.push_back(U' ');
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + static_cast<std::size_t>(len) > s.size()) len = 1;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  out.push_back(U' ');
  return out;
}

}  // namespace

double eed(std::string_view hypothesis, std::string_view reference, const EedOptions& o) {
  const auto hyp = code_points(hypothesis);
  const auto ref = code_points(reference);
  const std::size_t cols = hyp.size() + 1;
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<long> visits(cols, -1);
  std::vector<double> row(cols, 1.0), next(cols, inf);
  row[0] = 0.0;
  for (std::size_t w = 1; w <= ref.size(); ++w) {
    for (std::size_t i = 0; i < cols; ++i) {
      if (i == 0) {
        next[i] = row[i] + 1.0;
      } else {
        const double sub = hyp[i - 1] == ref[w - 1] ? 0.0 : 1.0;
        next[i] = std::min({next[i - 1] + o.deletion, row[i - 1] + sub, row[i] + o.insertion});
      }
    }
    const auto best = static_cast<std::size_t>(std::min_element(next.begin(), next.end()) - next.begin());
    ++visits[best];
    if (ref[w - 1] == U' ') {
      const double jump = o.alpha + next[best];
      for (auto& x : next) x = std::min(x, jump);
    }
    std::swap(row, next);
    std::fill(next.begin(), next.end(), inf);
  }
  // Column 0 is the alignment origin rather than a hypothesis character.
  double coverage = 0.0;
  for (std::size_t i = o.origin_column ? 0 : 1; i < cols; ++i) coverage += visits[i] >= 0 ? static_cast<double>(visits[i]) : 1.0;
  coverage *= o.rho;
  return std::min(1.0, (row.back() + coverage) / (static_cast<double>(ref.size()) + coverage));
}

double eed_corpus(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                  const EedOptions& options) {
  if (hypotheses.empty()) throw EmptyCorpus("no hypotheses");
  if (hypotheses.size() != references.size()) throw MissingAlignment("hypothesis and reference counts differ");
  double sum = 0.0;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) sum += eed(hypotheses[k], references[k], options);
  return sum / static_cast<double>(hypotheses.size());
}

// Reports -----------------------------------------------------------------------

namespace {

Cell mean_cell(const std::vector<double>& xs, const std::string& missing_note) {
  Cell c;
  c.n = xs.size();
  if (xs.empty()) {
    c.note = missing_note;
  } else {
    c.value = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  }
  return c;
}

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
  for (std::size_t k = 0; k < rows.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  return m;
}

}  // namespace

MetricReport metric_report(const std::vector<SystemPredictions>& systems,
                           const std::map<std::string, ReferenceItem>& references, Embedder* embedder,
                           const ReportOptions& options) {
  MetricReport report;
  if (embedder) report.embedder_model = embedder->model_id();
  const auto wants = [&](const char* m) { return options.metrics.count(m) > 0; };
  bool embedder_ok = embedder != nullptr;
  std::string embed_note = embedder ? "" : "no embedder";

  for (const auto& sys : systems) {
    std::vector<const ReferenceItem*> refs;
    for (const auto& item : sys.items) {
      auto it = references.find(item.id);
      if (it == references.end()) throw MissingAlignment("prediction " + item.id + " has no reference");
      refs.push_back(&it->second);
    }

    SystemRow row;
    row.system = sys.name;
    if (wants("cer") || wants("csr")) {
      std::vector<double> cer_vals, csr_vals;
      for (const auto& item : sys.items) {
        if (item.final_errors) cer_vals.push_back(*item.final_errors);
        if (item.sampled_units) csr_vals.push_back(*item.sampled_units);
      }
      if (wants("cer")) row.cells["cer"] = mean_cell(cer_vals, "no repair accounting in predictions");
      if (wants("csr")) row.cells["csr"] = mean_cell(csr_vals, "no repair accounting in predictions");
    }
    if (wants("eed")) {
      std::vector<double> vals;
      for (std::size_t k = 0; k < sys.items.size(); ++k) vals.push_back(eed(sys.items[k].code, refs[k]->code, options.eed));
      row.cells["eed"] = mean_cell(vals, "no predictions");
    }
    if (wants("crystalbleu")) {
      Cell c;
      c.n = sys.items.size();
      if (sys.items.empty()) {
        c.note = "no predictions";
      } else {
        std::vector<analysis::Tokens> cand, ref;
        for (std::size_t k = 0; k < sys.items.size(); ++k) {
          cand.push_back(analysis::tokenize(sys.items[k].code));
          ref.push_back(analysis::tokenize(refs[k]->code));
        }
        c.value = crystal_bleu(cand, ref, options.bleu);
      }
      row.cells["crystalbleu"] = c;
    }

    const bool any_embedding = wants("clip") || wants("clip_img") || wants("kid");
    if (any_embedding && embedder_ok) {
      try {
        std::vector<double> clip_vals, clip_img_vals;
        std::vector<Eigen::VectorXd> gen_feats, ref_feats;
        for (std::size_t k = 0; k < sys.items.size(); ++k) {
          const auto& item = sys.items[k];
          if (!item.image) continue;
          const Eigen::VectorXd gen = embedder->embed_image(*item.image);
          if (wants("clip")) clip_vals.push_back(clip_score(embedder->embed_text(refs[k]->caption), gen, options.clip_variant));
          if (refs[k]->image) {
            const Eigen::VectorXd ref = embedder->embed_image(*refs[k]->image);
            if (wants("clip_img")) clip_img_vals.push_back(clip_score_img(ref, gen, options.clip_variant));
            gen_feats.push_back(gen);
            ref_feats.push_back(ref);
          }
        }
        if (wants("clip")) row.cells["clip"] = mean_cell(clip_vals, "no generated images");
        if (wants("clip_img")) row.cells["clip_img"] = mean_cell(clip_img_vals, "no image pairs");
        if (wants("kid")) {
          Cell c;
          c.n = gen_feats.size();
          if (gen_feats.size() < 2) {
            c.note = "fewer than two image pairs";
          } else {
            c.value = kid(stack(gen_feats), stack(ref_feats), options.kid);
          }
          row.cells["kid"] = c;
        }
      } catch (const EmbedderUnavailable& e) {
        embedder_ok = false;
        embed_note = std::string("embedder unavailable: ") + e.what();
      }
    }
    if (any_embedding && !embedder_ok) {
      for (const char* m : {"kid", "clip_img", "clip"}) {
        if (wants(m)) row.cells[m] = Cell{std::nullopt, 0, embed_note};
      }
    }
    report.rows.push_back(std::move(row));
  }
  // A failure part-way through must not leave some systems with embedding values.
  if (embedder && !embedder_ok) {
    for (auto& row : report.rows) {
      for (const char* m : {"kid", "clip_img", "clip"}) {
        if (wants(m)) row.cells[m] = Cell{std::nullopt, 0, embed_note};
      }
    }
  }
  return report;
}

}  // namespace tikzlab::metrics
