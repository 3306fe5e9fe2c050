#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <cmath>

#include "generators.hpp"
#include "oracles.hpp"
#include "tikzlab/embedder.hpp"
#include "tikzlab/error.hpp"
#include "tikzlab/metrics.hpp"
#include "tikzlab/records.hpp"

using namespace tikzlab;
using namespace tikzlab::metrics;
using analysis::Tokens;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd to_matrix(const nlohmann::json& rows) {
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

EedOptions eed_options(const nlohmann::json& c, bool origin) {
  EedOptions o;
  if (c.contains("options")) {
    const auto& j = c["options"];
    o.alpha = j["alpha"];
    o.rho = j["rho"];
    o.deletion = j["deletion"];
    o.insertion = j["insertion"];
  }
  o.origin_column = origin;
  return o;
}

}  // namespace

TEST_CASE("cosine and clip") {
  const VectorXd a = VectorXd::Unit(3, 0);
  VectorXd b(3);
  b << 0.5, std::sqrt(3.0) / 2, 0;
  CHECK(cosine(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(clip_score(a, b) == doctest::Approx(50.0).epsilon(1e-13));
  CHECK(clip_score(a, b, ClipVariant::weighted) == doctest::Approx(125.0).epsilon(1e-13));
  CHECK(clip_score(a, -b) == 0.0);
  CHECK(clip_score_img(b, b) == doctest::Approx(100.0).epsilon(1e-13));
  CHECK_THROWS_AS(cosine(a, VectorXd::Zero(3)), ZeroVector);
  CHECK_THROWS_AS(cosine(a, VectorXd::Ones(2)), DimensionMismatch);
}

TEST_CASE("EED agrees with the reference implementation") {
  const auto data = support::load_json(support::data("eed.json"));
  for (const char* group : {"default", "weighted"}) {
    for (const auto& c : data[group]) {
      const auto hyp = c["hyp"].get<std::string>(), ref = c["ref"].get<std::string>();
      CAPTURE(hyp);
      CAPTURE(ref);
      CHECK(std::abs(eed(hyp, ref, eed_options(c, true)) - c["reference"].get<double>()) < 1e-12);
      CHECK(std::abs(eed(hyp, ref, eed_options(c, false)) - c["origin_excluded"].get<double>()) < 1e-12);
    }
  }
}

TEST_CASE("EED properties") {
  std::mt19937_64 rng(12);
  const std::string alphabet = "ab \\{}()-;";
  for (int trial = 0; trial < 200; ++trial) {
    std::string h, r;
    for (std::size_t i = 0, n = rng() % 30; i < n; ++i) h.push_back(alphabet[rng() % alphabet.size()]);
    for (std::size_t i = 0, n = rng() % 30; i < n; ++i) r.push_back(alphabet[rng() % alphabet.size()]);
    const double v = eed(h, r);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(eed(h, h) == 0.0);
  }
  CHECK_THROWS_AS(eed_corpus({}, {}), EmptyCorpus);
  CHECK_THROWS_AS(eed_corpus({"a"}, {"a", "b"}), MissingAlignment);
  CHECK(eed_corpus({"abc", "x"}, {"abc", "y"}) == doctest::Approx(eed("x", "y") / 2).epsilon(1e-15));
}

TEST_CASE("BLEU goldens") {
  const auto data = support::load_json(support::data("bleu.json"));
  REQUIRE(data.size() == 20);
  for (const auto& c : data) {
    const auto cands = c["candidates"].get<std::vector<Tokens>>();
    const auto refs = c["references"].get<std::vector<Tokens>>();
    CHECK(std::abs(crystal_bleu(cands, refs, {.ignore_top_k = 0}) - c["bleu"].get<double>()) < 1e-9);
    CHECK(std::abs(oracle::corpus_bleu(cands, refs) - c["bleu"].get<double>()) < 1e-9);
    CHECK(std::abs(crystal_bleu(cands, refs, {.ignore_top_k = 5}) - c["crystal_k5"].get<double>()) < 1e-9);
    CHECK(std::abs(crystal_bleu(cands, refs, {.ignore_top_k = 20}) - c["crystal_k20"].get<double>()) < 1e-9);
  }
}

TEST_CASE("BLEU edge cases") {
  const std::vector<Tokens> one = {{"a", "b", "c", "d", "e"}};
  CHECK(crystal_bleu(one, one, {.ignore_top_k = 0}) == 1.0);
  CHECK(crystal_bleu({{"x", "y", "z", "w"}}, one, {.ignore_top_k = 0}) == 0.0);
  CHECK_THROWS_AS(crystal_bleu({}, {}), EmptyCorpus);
  CHECK_THROWS_AS(crystal_bleu(one, {}), MissingAlignment);

  const auto shared = trivially_shared_ngrams({{"a", "a", "b"}}, 2);
  // "a" occurs twice; ties at count 1 break on the key text
  CHECK(shared.size() == 2);
  CHECK(shared.count("a") == 1);
  CHECK(trivially_shared_ngrams({{"a"}}, 0).empty());
}

TEST_CASE("KID goldens") {
  const auto data = support::load_json(support::data("kid.json"));
  for (const auto& c : data) {
    const MatrixXd gen = to_matrix(c["gen"]), ref = to_matrix(c["ref"]);
    const double expect = c["kid"];
    // subset covering the whole sample: the estimate does not depend on the draw
    for (std::uint64_t seed : {0, 1, 2}) {
      const double got = kid(gen, ref, {.subset_size = 1000, .subsets = 3, .seed = seed});
      CHECK(std::abs(got - expect) < 1e-9 * std::max(1.0, std::abs(expect)));
    }
  }
  CHECK_THROWS_AS(kid(MatrixXd::Ones(1, 2), MatrixXd::Ones(3, 2)), TooFewSamples);
  CHECK_THROWS_AS(kid(MatrixXd::Ones(3, 2), MatrixXd::Ones(3, 3)), DimensionMismatch);
  CHECK_THROWS_AS(kid(MatrixXd::Ones(3, 2), MatrixXd::Ones(3, 2), {.subsets = 0}), InvalidArgument);
}

TEST_CASE("KID is unbiased and separates shifted Gaussians") {
  std::mt19937_64 rng(2024);
  // one draw at this size has a spread near 0.02, so check the mean of many draws
  double sum = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const MatrixXd a = gen::gaussian(rng, 200, 8, 0.0), b = gen::gaussian(rng, 200, 8, 0.0);
    sum += kid(a, b, {.subsets = 1, .seed = static_cast<std::uint64_t>(rep)});
  }
  CHECK(std::abs(sum / 50) < 0.012);
  const MatrixXd a = gen::gaussian(rng, 200, 8, 0.0), c = gen::gaussian(rng, 200, 8, 2.0);
  CHECK(kid(a, c, {.subsets = 10}) > 0.1);
  CHECK(kid(a, c, {.subsets = 10, .seed = 4}) == kid(a, c, {.subsets = 10, .seed = 4}));
}

TEST_CASE("metric identities over the fixture records") {
  const auto records = records::read_records(support::fixture("records50.jsonl"));
  REQUIRE(records.size() == 50);
  MockEmbedder mock(0, 64);
  std::vector<Tokens> codes;
  MatrixXd feats(50, 64);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    CHECK(eed(r.code, r.code) == 0.0);
    codes.push_back(analysis::tokenize(r.code));
    const VectorXd e = mock.embed_text(r.caption);
    CHECK(std::abs(clip_score(e, mock.embed_text(r.caption)) - 100.0) < 1e-9);
    feats.row(static_cast<Eigen::Index>(k)) = e.transpose();
  }
  CHECK(std::abs(crystal_bleu(codes, codes, {.ignore_top_k = 0}) - 1.0) < 1e-12);
  CHECK(std::abs(kid(feats, feats)) <= 1e-9);
}

TEST_CASE("metric report") {
  std::map<std::string, ReferenceItem> refs;
  refs["r1"] = {"r1", "\\draw (0,0) -- (1,1);", "a line", std::nullopt};
  refs["r2"] = {"r2", "\\node {x};", "a node", std::nullopt};
  SystemPredictions sys{"s", {{"r1", "\\draw (0,0) -- (1,1);", 1.0, 0.0, std::nullopt},
                              {"r2", "\\node {y};", 2.0, 1.0, std::nullopt}}};

  const auto report = metric_report({sys}, refs, nullptr);
  REQUIRE(report.rows.size() == 1);
  const auto& cells = report.rows[0].cells;
  CHECK(cells.at("csr").value == 1.5);
  CHECK(cells.at("cer").value == 0.5);
  CHECK(*cells.at("eed").value == doctest::Approx((0.0 + eed("\\node {y};", "\\node {x};")) / 2).epsilon(1e-15));
  for (const char* m : {"kid", "clip", "clip_img"}) {
    CHECK_FALSE(cells.at(m).value);
    CHECK(cells.at(m).note == "no embedder");
  }
  CHECK(report.embedder_model.empty());

  SystemPredictions stray{"t", {{"nope", "x", std::nullopt, std::nullopt, std::nullopt}}};
  CHECK_THROWS_AS(metric_report({stray}, refs, nullptr), MissingAlignment);

  ReportOptions only_eed;
  only_eed.metrics = {"eed"};
  CHECK(metric_report({sys}, refs, nullptr, only_eed).rows[0].cells.size() == 1);
}

TEST_CASE("metric report with mock images") {
  support::TempDir tmp;
  MockEmbedder mock(0, 32);
  std::map<std::string, ReferenceItem> refs;
  SystemPredictions sys{"s", {}};
  for (int k = 0; k < 3; ++k) {
    const std::string id = "r" + std::to_string(k), caption = "caption " + std::to_string(k);
    const auto ref_img = tmp / (id + "-ref.png"), gen_img = tmp / (id + "-gen.png");
    for (const auto& p : {ref_img, gen_img}) {
      std::ofstream(p) << "png";
      std::ofstream(p.string() + ".seed") << caption;
    }
    refs[id] = {id, "x", caption, ref_img};
    sys.items.push_back({id, "x", std::nullopt, std::nullopt, gen_img});
  }
  const auto report = metric_report({sys}, refs, &mock);
  const auto& cells = report.rows[0].cells;
  CHECK(*cells.at("clip").value == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(*cells.at("clip_img").value == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(std::abs(*cells.at("kid").value) <= 1e-9);
  CHECK(cells.at("cer").note == "no repair accounting in predictions");
  CHECK(report.embedder_model == mock.model_id());
}
