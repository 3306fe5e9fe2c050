#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "tikzlab/corpus.hpp"
#include "tikzlab/metrics.hpp"

namespace tikzlab {
class Embedder;
}

namespace tikzlab::augment {

inline constexpr std::size_t kMinCaptionTokens = 30;
inline constexpr std::size_t kCandidateCount = 5;

/// True iff the caption has fewer than kMinCaptionTokens tokens.
bool needs_augmentation(std::string_view caption);

struct RankedCandidate {
  std::string text;
  double score = 0.0;
};

/// Candidates sorted by clip score against the image, best first; ties keep input order.
/// Throws EmptyInput, EmbedderUnavailable.
std::vector<RankedCandidate> rank_candidates(const Eigen::VectorXd& image_embedding,
                                             const std::vector<std::string>& candidates, Embedder& embedder,
                                             metrics::ClipVariant variant = metrics::ClipVariant::cosine100);

/// Original caption, a single space, then the winner. An empty winner returns the original.
std::string augment_caption(std::string_view original, std::string_view winner);

struct AugmentStats {
  std::size_t augmented = 0;
  std::size_t already_augmented = 0;
  std::size_t long_enough = 0;
  std::size_t missing_image = 0;
  std::size_t no_candidates = 0;
};

/// Augments one record in place if it is short and not yet augmented. `candidates`
/// empty means "ask the embedder's captioner". Returns true if the record changed.
bool augment_record(corpus::TikzRecord& record, const std::filesystem::path& image,
                    std::vector<std::string> candidates, Embedder& embedder, AugmentStats& stats,
                    std::size_t candidate_count = kCandidateCount);

}  // namespace tikzlab::augment
