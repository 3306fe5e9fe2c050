#include "tikzlab/augment.hpp"

#include <algorithm>

#include "tikzlab/analysis.hpp"
#include "tikzlab/embedder.hpp"
#include "tikzlab/error.hpp"

namespace tikzlab::augment {

bool needs_augmentation(std::string_view caption) {
  return analysis::tokenize(caption).size() < kMinCaptionTokens;
}

std::vector<RankedCandidate> rank_candidates(const Eigen::VectorXd& image_embedding,
                                             const std::vector<std::string>& candidates, Embedder& embedder,
                                             metrics::ClipVariant variant) {
  if (candidates.empty()) throw EmptyInput("no candidate descriptions");
  std::vector<RankedCandidate> ranked;
  ranked.reserve(candidates.size());
  for (const auto& c : candidates) {
    ranked.push_back({c, metrics::clip_score(embedder.embed_text(c), image_embedding, variant)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) { return a.score > b.score; });
  return ranked;
}

std::string augment_caption(std::string_view original, std::string_view winner) {
  if (winner.empty()) return std::string(original);
  std::string out(original);
  out.push_back(' ');
  out.append(winner);
  return out;
}

bool augment_record(corpus::TikzRecord& record, const std::filesystem::path& image,
                    std::vector<std::string> candidates, Embedder& embedder, AugmentStats& stats,
                    std::size_t candidate_count) {
  if (record.augmented) {
    ++stats.already_augmented;
    return false;
  }
  if (!needs_augmentation(record.caption)) {
    ++stats.long_enough;
    return false;
  }
  if (!std::filesystem::exists(image)) {
    ++stats.missing_image;
    return false;
  }
  if (candidates.empty()) candidates = embedder.caption_image(image);
  if (candidates.size() > candidate_count) candidates.resize(candidate_count);
  if (candidates.empty()) {
    ++stats.no_candidates;
    return false;
  }
  const auto ranked = rank_candidates(embedder.embed_image(image), candidates, embedder);
  record.caption = augment_caption(record.caption, ranked.front().text);
  record.augmented = true;
  ++stats.augmented;
  return true;
}

}  // namespace tikzlab::augment
