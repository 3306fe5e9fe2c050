#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tikzlab/analysis.hpp"

namespace tikzlab {
class Embedder;
}

namespace tikzlab::metrics {

enum class ClipVariant {
  cosine100,  // 100 * max(cos, 0)
  weighted,   // 100 * 2.5 * max(cos, 0), the reference's w = 2.5 rescaling
};

/// Throws DimensionMismatch, ZeroVector.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

double clip_score(const Eigen::VectorXd& text_emb, const Eigen::VectorXd& image_emb,
                  ClipVariant variant = ClipVariant::cosine100);
double clip_score_img(const Eigen::VectorXd& ref_image_emb, const Eigen::VectorXd& gen_image_emb,
                      ClipVariant variant = ClipVariant::cosine100);

struct KidOptions {
  std::size_t subset_size = 1000;  // capped at the smaller sample count
  std::size_t subsets = 100;
  std::uint64_t seed = 0;
};

/// Unbiased polynomial-kernel MMD^2 (k(x,y) = (x.y/d + 1)^3), averaged over random
/// subsets. Rows are samples. Throws TooFewSamples, DimensionMismatch.
double kid(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& ref, const KidOptions& options = {});

struct BleuOptions {
  std::size_t max_order = 4;
  std::size_t ignore_top_k = 500;  // 0 gives plain corpus BLEU
};

/// The k most frequent n-grams (orders 1..max_order pooled) of `references`.
/// Ties break on the gram text so the set is deterministic.
std::set<std::string> trivially_shared_ngrams(const std::vector<analysis::Tokens>& references,
                                              std::size_t k, std::size_t max_order = 4);

/// Corpus BLEU with one reference per candidate, uniform weights, brevity penalty and
/// no smoothing, ignoring the trivially shared n-grams. Throws EmptyCorpus, MissingAlignment.
double crystal_bleu(const std::vector<analysis::Tokens>& candidates, const std::vector<analysis::Tokens>& references,
                    const BleuOptions& options = {});

struct EedOptions {
  double alpha = 2.0;     // jump cost
  double rho = 0.3;       // coverage penalty weight
  double deletion = 0.2;
  double insertion = 1.0;
  // Count the alignment origin in the coverage penalty, as the reference EED.py does.
  // Off by default so that eed(x, x) is exactly 0.
  bool origin_column = false;
};

/// Character-level extended edit distance of one sentence pair, in [0, 1].
double eed(std::string_view hypothesis, std::string_view reference, const EedOptions& options = {});

/// Mean sentence-level EED. Throws EmptyCorpus, MissingAlignment.
double eed_corpus(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                  const EedOptions& options = {});

// Reports ---------------------------------------------------------------------

inline const std::vector<std::string> kColumns = {"cer", "csr", "eed", "kid", "clip_img", "clip", "crystalbleu"};

struct PredictionItem {
  std::string id;
  std::string code;
  std::optional<double> sampled_units;
  std::optional<double> final_errors;
  std::optional<std::filesystem::path> image;
};

struct ReferenceItem {
  std::string id;
  std::string code;
  std::string caption;
  std::optional<std::filesystem::path> image;
};

struct SystemPredictions {
  std::string name;
  std::vector<PredictionItem> items;
};

struct Cell {
  std::optional<double> value;
  std::size_t n = 0;
  std::string note;  // why a value is missing
};

struct SystemRow {
  std::string system;
  std::map<std::string, Cell> cells;
};

struct ReportOptions {
  std::set<std::string> metrics{kColumns.begin(), kColumns.end()};
  KidOptions kid;
  BleuOptions bleu;
  EedOptions eed;
  ClipVariant clip_variant = ClipVariant::cosine100;
};

struct MetricReport {
  std::vector<SystemRow> rows;
  std::string embedder_model;  // empty when no embedder was used
};

/// One row per system. `embedder` may be null, in which case embedding columns are
/// reported as missing. Throws MissingAlignment when a prediction id has no reference.
MetricReport metric_report(const std::vector<SystemPredictions>& systems,
                           const std::map<std::string, ReferenceItem>& references, Embedder* embedder,
                           const ReportOptions& options = {});

}  // namespace tikzlab::metrics
