#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace tikzlab::bws {

struct AnnotationRecord {
  std::string tuple_id;
  std::array<std::string, 4> items;
  std::string best;
  std::string worst;
  std::string annotator;
};

/// Throws InvalidRecord unless best and worst are distinct members of the tuple.
void validate(const AnnotationRecord& record);

/// best fraction minus worst fraction per item. Throws EmptyInput, InvalidRecord.
std::map<std::string, double> bws_scores(const std::vector<AnnotationRecord>& annotations);

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> fractional_ranks(const std::vector<double>& xs);

/// Pearson correlation of fractional ranks. Throws LengthMismatch, DegenerateInput.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Spearman correlation between the scores of the two halves selected by `first_half`.
/// Throws Unsplittable if an item is missing from either half.
double split_rho(const std::vector<AnnotationRecord>& annotations, const std::vector<bool>& first_half);

struct ShrResult {
  double rho = 0.0;             // mean over repeats
  std::size_t repeats = 0;
  std::size_t resamples = 0;    // splits redrawn because an item fell into one half only
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxSplitRetries = 1000;

/// Mean Spearman correlation over `repeats` random half splits of the annotation
/// records. Bit-reproducible for a fixed seed. Throws Unsplittable.
ShrResult split_half_reliability(const std::vector<AnnotationRecord>& annotations, std::uint64_t seed,
                                 std::size_t repeats = 100);

/// Throws DegenerateRange when all values are equal (or fewer than two).
std::map<std::string, double> min_max_normalize(const std::map<std::string, double>& scores);

/// Reads "tuple_id,item1,item2,item3,item4,best,worst,annotator" CSV. Fields may be
/// double-quoted. Throws InvalidRecord on a bad header or row.
std::vector<AnnotationRecord> read_annotations_csv(std::istream& in);

}  // namespace tikzlab::bws
