#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include "tikzlab/augment.hpp"
#include "tikzlab/embedder.hpp"
#include "tikzlab/error.hpp"
#include "tikzlab/records.hpp"

using namespace tikzlab;
using namespace tikzlab::augment;

namespace {

// Mock embedder that also answers caption requests from a fixed list.
class CaptioningMock : public MockEmbedder {
 public:
  CaptioningMock(std::vector<std::string> caps) : MockEmbedder(0, 64), caps_(std::move(caps)) {}
  std::vector<std::string> caption_image(const std::filesystem::path&) override {
    ++asked;
    return caps_;
  }
  int asked = 0;

 private:
  std::vector<std::string> caps_;
};

std::map<std::string, std::vector<std::string>> fixture_candidates() {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& j : records::read_jsonl(support::fixture("augment/candidates.jsonl"))) {
    out[j["id"]] = j["candidates"].get<std::vector<std::string>>();
  }
  return out;
}

}  // namespace

TEST_CASE("length threshold") {
  CHECK(needs_augmentation("A blue square."));
  std::string caption;
  for (int k = 0; k < 29; ++k) caption += "w ";
  CHECK(needs_augmentation(caption));
  caption += "w";
  CHECK_FALSE(needs_augmentation(caption));
}

TEST_CASE("caption joining") {
  CHECK(augment_caption("A blue square.", "a blue square") == "A blue square. a blue square");
  CHECK(augment_caption("A dot.", "") == "A dot.");
  CHECK(augment_caption("", "x") == " x");
}

TEST_CASE("ranking puts the seeded description first") {
  MockEmbedder mock(0, 64);
  const auto cands = fixture_candidates().at("short1");
  const auto image = mock.embed_image(support::fixture("augment/images/short1.png"));
  const auto ranked = rank_candidates(image, cands, mock);
  REQUIRE(ranked.size() == cands.size());
  CHECK(ranked.front().text == "a blue square on a white background");
  CHECK(ranked.front().score == doctest::Approx(100.0).epsilon(1e-12));
  for (std::size_t k = 1; k < ranked.size(); ++k) CHECK(ranked[k - 1].score >= ranked[k].score);
  CHECK_THROWS_AS(rank_candidates(image, {}, mock), EmptyInput);
}

TEST_CASE("ties keep input order") {
  MockEmbedder mock(0, 8);
  const auto image = mock.embed_text("same");
  const auto ranked = rank_candidates(image, {"same", "same", "other"}, mock);
  CHECK(ranked[0].text == "same");
  CHECK(ranked[1].text == "same");
  CHECK(ranked[0].score == ranked[1].score);
}

TEST_CASE("record paths") {
  const auto recs = records::read_records(support::fixture("augment/records.jsonl"));
  const auto cands = fixture_candidates();
  const auto images = support::fixture("augment/images");
  MockEmbedder mock(0, 64);
  AugmentStats stats;

  auto short1 = recs[0];
  CHECK(augment_record(short1, images / "short1.png", cands.at("short1"), mock, stats));
  CHECK(short1.caption == "A blue square. a blue square on a white background");
  CHECK(short1.augmented);
  // a second pass leaves it alone
  CHECK_FALSE(augment_record(short1, images / "short1.png", cands.at("short1"), mock, stats));
  CHECK(stats.already_augmented == 1);

  auto long1 = recs[1];
  CHECK_FALSE(augment_record(long1, images / "long1.png", cands.at("long1"), mock, stats));
  CHECK(long1.caption == recs[1].caption);
  CHECK(stats.long_enough == 1);

  auto noimage = recs[2];
  CHECK_FALSE(augment_record(noimage, images / "noimage.png", {"x"}, mock, stats));
  CHECK_FALSE(noimage.augmented);
  CHECK(stats.missing_image == 1);
  CHECK(stats.augmented == 1);
}

TEST_CASE("captioner fallback and candidate cap") {
  const auto image = support::fixture("augment/images/short1.png");
  corpus::TikzRecord rec;
  rec.caption = "Short.";

  // only the first five candidates are ranked, so the seeded sixth never wins
  CaptioningMock captioner({"c1", "c2", "c3", "c4", "c5", "a blue square on a white background"});
  AugmentStats stats;
  CHECK(augment_record(rec, image, {}, captioner, stats));
  CHECK(captioner.asked == 1);
  CHECK(rec.caption.rfind("Short. c", 0) == 0);

  corpus::TikzRecord other;
  other.caption = "Short.";
  CaptioningMock silent({});
  CHECK_FALSE(augment_record(other, image, {}, silent, stats));
  CHECK(stats.no_candidates == 1);

  MockEmbedder plain(0, 8);
  corpus::TikzRecord third;
  third.caption = "Short.";
  CHECK_THROWS_AS(augment_record(third, image, {}, plain, stats), EmbedderUnavailable);
}
