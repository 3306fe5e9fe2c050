#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <sstream>

#include "tikzlab/config.hpp"
#include "tikzlab/error.hpp"
#include "tikzlab/records.hpp"

using namespace tikzlab;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& name) -> std::optional<std::string> {
    const auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup kNoEnv = env_of({});

}  // namespace

TEST_CASE("config defaults") {
  const auto c = resolve_config(std::nullopt, {}, kNoEnv);
  CHECK(c.max_attempts == 10);
  CHECK(c.dpi == 300);
  CHECK(c.crystalbleu_k == 500);
  CHECK(c.repair_schedule == "just_before");
  CHECK(c.embedder_addr.empty());
  const auto j = to_json(c);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == config_keys());
}

TEST_CASE("config precedence: flag over env over file over default") {
  support::TempDir tmp;
  std::ofstream(tmp / "c.conf") << "# comment\nseed = 5\ndpi = 150\nmax_attempts = 3\ncache_dir = \"/tmp/x y\"\n";
  const auto env = env_of({{"TIKZLAB_SEED", "6"}, {"TIKZLAB_DPI", "200"}});
  const auto c = resolve_config(tmp / "c.conf", {{"seed", "7"}}, env);
  CHECK(c.seed == 7);
  CHECK(c.dpi == 200);
  CHECK(c.max_attempts == 3);
  CHECK(c.cache_dir == "/tmp/x y");
  CHECK(c.timeout_s == 60.0);
}

TEST_CASE("config errors") {
  Config c;
  CHECK_THROWS_AS(set_config_value(c, "nope", "1"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "seed", "-1"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "seed", "12x"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "max_attempts", "0"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "timeout_s", "-3"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "dpi", "0"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "kid_subset_size", "1"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "clipscore_variant", "other"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "repair_schedule", "other"), ConfigInvalid);
  CHECK_THROWS_AS(set_config_value(c, "keep_scratch", "maybe"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config_text("just words\n"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config_text(" = 3\n"), ConfigInvalid);
  CHECK_THROWS_AS(resolve_config("/definitely/not/here.conf", {}, kNoEnv), ConfigInvalid);
  CHECK_THROWS_AS(resolve_config(std::nullopt, {}, env_of({{"TIKZLAB_DPI", "big"}})), ConfigInvalid);

  set_config_value(c, "keep_scratch", "yes");
  CHECK(c.keep_scratch);
  set_config_value(c, "repair_schedule", "formula");
  CHECK(c.repair_schedule == "formula");
}

TEST_CASE("record JSON has exactly the documented fields") {
  corpus::TikzRecord r;
  r.id = "abc";
  r.caption = "A circle.";
  r.code = "\\draw (0,0) circle (1);";
  r.origin = corpus::Origin::stackexchange;
  r.license = "CC BY-SA 4.0";
  const auto j = records::to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"id", "caption", "code", "origin", "license", "augmented", "created"});
  CHECK(j["origin"] == "stackexchange");
  CHECK(j["created"].is_null());
  CHECK(j["augmented"] == false);
}

TEST_CASE("JSONL round trip") {
  const auto recs = records::read_records(support::fixture("records50.jsonl"));
  REQUIRE(recs.size() == 50);
  support::TempDir tmp;
  auto edited = recs;
  edited[0].created = "2020-01-01T00:00:00";
  edited[1].augmented = true;
  edited[2].caption = "ünïcödé \"quoted\"\nnew line";
  records::write_records(tmp / "out" / "r.jsonl", edited);
  const auto back = records::read_records(tmp / "out" / "r.jsonl");
  REQUIRE(back.size() == edited.size());
  for (std::size_t k = 0; k < back.size(); ++k) CHECK(records::to_json(back[k]) == records::to_json(edited[k]));
  // rewriting what was read gives the same bytes
  records::write_records(tmp / "again.jsonl", back);
  CHECK(support::slurp(tmp / "again.jsonl") == support::slurp(tmp / "out" / "r.jsonl"));
  const auto text = support::slurp(tmp / "again.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 50);
}

TEST_CASE("invalid records") {
  CHECK_THROWS_AS(records::record_from_json(nlohmann::json{{"caption", "x"}}), InvalidRecord);
  CHECK_THROWS_AS(records::record_from_json(nlohmann::json{{"id", 3}, {"code", "x"}}), InvalidRecord);
  CHECK_THROWS_AS(records::record_from_json(nlohmann::json{{"id", "a"}, {"code", "x"}, {"origin", "moon"}}),
                  InvalidRecord);
  CHECK_THROWS_AS(records::record_from_json(nlohmann::json::array()), InvalidRecord);
  std::istringstream bad("{\"id\": \"a\", \"code\": \"x\"}\n\n{oops\n");
  try {
    records::read_jsonl(bad);
    FAIL("expected InvalidRecord");
  } catch (const InvalidRecord& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(records::read_jsonl(std::filesystem::path("/no/such/file.jsonl")), InvalidRecord);
}
