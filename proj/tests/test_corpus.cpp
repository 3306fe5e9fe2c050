#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "tikzlab/compiler.hpp"
#include "tikzlab/corpus.hpp"
#include "tikzlab/error.hpp"
#include "tikzlab/text.hpp"

using namespace tikzlab;
using namespace tikzlab::corpus;

namespace {

TexProject in_memory(std::map<std::string, std::string> files, std::string root = "main.tex") {
  TexProject p;
  p.root_file = std::move(root);
  p.files = std::move(files);
  return p;
}

const RuleSet& shipped_rules() {
  static const RuleSet rules = load_rules(support::rules_file());
  return rules;
}

std::vector<TikzRecord> extract_all(ExtractionStats& stats) {
  std::vector<TikzRecord> all;
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(support::fixture("projects"))) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    auto recs = extract_records(load_project(d, Origin::arxiv), shipped_rules(), "arXiv", stats);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return all;
}

// Answers from a fixed table of document -> success instead of running TeX.
class TableCompiler : public DocumentCompiler {
 public:
  CompileReport compile(std::string_view document) override {
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls;
    CompileReport r;
    r.success = document.find("\\undefined") == std::string_view::npos;
    r.produced_image = r.success;
    return r;
  }
  std::size_t calls = 0;

 private:
  std::mutex mutex_;
};

}  // namespace

TEST_CASE("origin names round trip") {
  for (auto o : {Origin::arxiv, Origin::stackexchange, Origin::curated, Origin::artificial}) {
    CHECK(origin_from_string(to_string(o)) == o);
  }
  CHECK_THROWS(origin_from_string("github"));
}

TEST_CASE("include expansion") {
  SUBCASE("no directives is the identity") {
    const auto p = in_memory({{"main.tex", "plain \\textbf{text}\n"}});
    CHECK(expand_includes(p).text == "plain \\textbf{text}\n");
  }
  SUBCASE("a space separates content from what follows") {
    const auto p = in_memory({{"main.tex", "A \\input{b} C"}, {"b.tex", "B"}});
    CHECK(expand_includes(p).text == "A B C");
    const auto glued = in_memory({{"main.tex", "A \\input{b}C"}, {"b.tex", "B"}});
    CHECK(expand_includes(glued).text == "A B C");
  }
  SUBCASE("recursive and \\include forms, with and without extension") {
    const auto p = in_memory({{"main.tex", "[\\include{x/one}]"}, {"x/one.tex", "1\\input{x/two.tex}"}, {"x/two.tex", "2"}});
    CHECK(expand_includes(p).text == "[12  ]");
  }
  SUBCASE("unresolved directives stay and are reported") {
    const auto p = in_memory({{"main.tex", "a \\input{nowhere} b"}});
    const auto e = expand_includes(p);
    CHECK(e.text == "a \\input{nowhere} b");
    REQUIRE(e.unresolved.size() == 1);
    CHECK(e.unresolved[0] == "nowhere");
  }
  SUBCASE("commented directives are not expanded") {
    const auto p = in_memory({{"main.tex", "% \\input{b}\nx"}, {"b.tex", "B"}});
    CHECK(expand_includes(p).text == "% \\input{b}\nx");
  }
  SUBCASE("cycles are detected") {
    const auto p = in_memory({{"main.tex", "\\input{b}"}, {"b.tex", "\\input{main}"}});
    CHECK_THROWS_AS(expand_includes(p), CycleDetected);
  }
  SUBCASE("self include") {
    const auto p = in_memory({{"main.tex", "x\\input{main}"}});
    CHECK_THROWS_AS(expand_includes(p), CycleDetected);
  }
}

TEST_CASE("include expansion loses no content") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, std::string> files;
    const int n = 1 + static_cast<int>(rng() % 5);
    std::size_t directive_chars = 0;
    for (int k = n - 1; k >= 0; --k) {
      std::string body = "f" + std::to_string(k) + " text " + std::string(rng() % 20, 'x');
      if (k + 1 < n && rng() % 2) {
        const std::string d = "\\input{f" + std::to_string(k + 1) + "}";
        if (k == 0) directive_chars += d.size();
        body += d;
      }
      if (rng() % 3 == 0) {
        const std::string d = "\\input{absent" + std::to_string(k) + "}";
        body += d;
      }
      files["f" + std::to_string(k) + ".tex"] = body;
    }
    const auto p = in_memory(files, "f0.tex");
    CHECK(expand_includes(p).text.size() + directive_chars >= files["f0.tex"].size());
  }
}

TEST_CASE("tikzpicture extraction") {
  CHECK(extract_tikz_environments("no pictures here").snippets.empty());

  const std::string two = "a\\begin{tikzpicture}X\\end{tikzpicture} b \\begin{tikzpicture}Y\\end{tikzpicture}";
  const auto e = extract_tikz_environments(two);
  REQUIRE(e.snippets.size() == 2);
  CHECK(e.snippets[0].text == "\\begin{tikzpicture}X\\end{tikzpicture}");
  CHECK(e.snippets[0].end <= e.snippets[1].begin);
  for (const auto& s : e.snippets) CHECK(two.substr(s.begin, s.end - s.begin) == s.text);

  const std::string nested =
      "\\begin{tikzpicture}\\node{\\begin{tikzpicture}\\draw(0,0);\\end{tikzpicture}};\\end{tikzpicture}";
  const auto n = extract_tikz_environments(nested);
  REQUIRE(n.snippets.size() == 1);
  CHECK(n.snippets[0].text == nested);

  const auto commented = extract_tikz_environments("% \\begin{tikzpicture}\n\\begin{tikzpicture}Z\\end{tikzpicture}");
  REQUIRE(commented.snippets.size() == 1);
  CHECK(commented.snippets[0].text == "\\begin{tikzpicture}Z\\end{tikzpicture}");

  const auto open = extract_tikz_environments("\\begin{tikzpicture} never closed");
  CHECK(open.snippets.empty());
  CHECK(open.unbalanced == 1);
}

TEST_CASE("macro definitions") {
  const std::string tex =
      "\\newcommand{\\foo}{\\bar x}\n"
      "\\def\\bar{B}\n"
      "\\newcommand\\baz[2][d]{#1#2}\n"
      "\\renewcommand{\\foo}{\\bar y}\n"
      "\\providecommand{\\qux}{Q}\n"
      "\\newenvironment{boxed}{\\begin{center}}{\\end{center}}\n"
      "\\edef\\skip{no}\n"
      "\\let\\alias\\relax\n";
  const auto t = parse_macro_definitions(tex);
  std::vector<std::string> names;
  for (const auto& d : t.defs) names.push_back(d.name);
  CHECK(names == std::vector<std::string>{"\\bar", "\\baz", "\\foo", "\\qux", "boxed"});
  CHECK(t.redefinitions == 1);
  CHECK(t.unsupported == 2);
  const auto foo = std::find_if(t.defs.begin(), t.defs.end(), [](const MacroDef& d) { return d.name == "\\foo"; });
  CHECK(foo->body.find("\\bar y") != std::string::npos);
  CHECK(foo->source == "\\renewcommand{\\foo}{\\bar y}");
}

TEST_CASE("used macros are closed transitively in definition order") {
  const auto defs = parse_macro_definitions(
                        "\\def\\bar{B}\n\\newcommand{\\foo}{\\bar}\n\\newcommand{\\unused}{U}\n"
                        "\\newcommand{\\foobar}{FB}\n\\newenvironment{wrap}{[}{]}\n")
                        .defs;
  auto names = [](const std::vector<MacroDef>& v) {
    std::vector<std::string> out;
    for (const auto& d : v) out.push_back(d.name);
    return out;
  };
  CHECK(collect_used_macros("\\draw (0,0);", defs).empty());
  CHECK(names(collect_used_macros("\\node {\\foo};", defs)) == std::vector<std::string>{"\\bar", "\\foo"});
  // \foobar must not pull in \foo by prefix
  CHECK(names(collect_used_macros("\\foobar", defs)) == std::vector<std::string>{"\\foobar"});
  CHECK(names(collect_used_macros("\\begin{wrap}x\\end{wrap}", defs)) == std::vector<std::string>{"wrap"});
}

TEST_CASE("preamble rules") {
  const auto& rules = shipped_rules();
  CHECK(rules.version == "1");
  CHECK(retain_preamble("\\usepackage{tikz}", rules) == "\\usepackage{tikz}");
  CHECK(retain_preamble("\\usetikzlibrary{calc}", rules) == "\\usetikzlibrary{calc}");
  CHECK(retain_preamble("\\title{A}\n\\author{B}\n\\usepackage{tikz}", rules) == "\\usepackage{tikz}");
  CHECK(retain_preamble("\\usepackage[margin=1in]{geometry}\n\\usepackage{hyperref}", rules).empty());
  // a brace left open continues the logical line
  CHECK(retain_preamble("\\tikzset{every node/.style={\n  draw}}\n\\date{x}", rules) ==
        "\\tikzset{every node/.style={\n  draw}}");
  CHECK(preamble_of("\\documentclass[a4paper]{article}\n\\usepackage{tikz}\n\\begin{document}\nx\\end{document}")
            .find("\\usepackage{tikz}") != std::string::npos);
  CHECK(preamble_of("no document environment").empty());

  const auto custom = parse_rules("# version: 7\nDENY ^\\\\usepackage\\{bad\\}\nALLOW ^\\\\usepackage\n");
  CHECK(custom.version == "7");
  CHECK(custom.allows("\\usepackage{good}"));
  CHECK_FALSE(custom.allows("\\usepackage{bad}"));
  CHECK_FALSE(custom.allows("\\title{default deny}"));
  CHECK_THROWS_AS(parse_rules("ALLOW ([unclosed"), RuleFileError);
  CHECK_THROWS_AS(parse_rules("MAYBE x"), RuleFileError);
}

TEST_CASE("document assembly") {
  const std::string snippet = "\\begin{tikzpicture}\\draw (0,0) -- (1,1);\\end{tikzpicture}";
  CHECK(assemble_document(snippet, {}, "\\usepackage{tikz}\n\n") ==
        "\\documentclass[tikz]{standalone}\n\\usepackage{tikz}\n\\begin{document}\n" + snippet + "\n\\end{document}");

  const auto defs = parse_macro_definitions("\\def\\a{1}\n\\def\\b{2}\n").defs;
  const auto doc = assemble_document("\\begin{tikzpicture}\\a\\b\\end{tikzpicture}",
                                     collect_used_macros("\\a\\b", defs), "");
  const auto pa = doc.find("\\def\\a"), pb = doc.find("\\def\\b"), pd = doc.find("\\begin{document}");
  CHECK(pa < pb);
  CHECK(pb < pd);
  CHECK(doc == assemble_document("\\begin{tikzpicture}\\a\\b\\end{tikzpicture}", collect_used_macros("\\a\\b", defs), ""));
}

TEST_CASE("unused macro definitions never change the assembled document") {
  std::mt19937 rng(5);
  const std::string base =
      "\\documentclass{article}\n\\usepackage{tikz}\n\\newcommand{\\used}{red}\n%s\\begin{document}\n"
      "\\begin{figure}\\begin{tikzpicture}\\draw[\\used] (0,0) circle (1);\\end{tikzpicture}"
      "\\caption{c}\\end{figure}\n\\end{document}\n";
  auto with = [&](const std::string& extra) {
    std::string doc = base;
    doc.replace(doc.find("%s"), 2, extra);
    ExtractionStats stats;
    auto recs = extract_records(in_memory({{"main.tex", doc}}), shipped_rules(), "x", stats);
    REQUIRE(recs.size() == 1);
    return recs[0].code;
  };
  const auto reference = with("");
  for (int k = 0; k < 25; ++k) {
    std::string extra;
    for (int m = 0; m < 1 + static_cast<int>(rng() % 3); ++m) {
      const std::string name = "unusedmacro" + std::to_string(rng() % 1000) + std::string(1, static_cast<char>('a' + m));
      switch (rng() % 3) {
        case 0: extra += "\\newcommand{\\" + name + "}{x}\n"; break;
        case 1: extra += "\\def\\" + name + "{y}\n"; break;
        default: extra += "\\newenvironment{" + name + "}{a}{b}\n"; break;
      }
    }
    CHECK(with(extra) == reference);
  }
}

TEST_CASE("record ids are content hashes") {
  CHECK(record_id("abc") == text::sha256_hex("abc"));
  CHECK(record_id("abc") == record_id(std::string("abc")));
  CHECK(record_id("abc") != record_id("abd"));
}

TEST_CASE("fixture projects give the hand-derived record set") {
  ExtractionStats stats;
  auto all = deduplicate(extract_all(stats), &stats.duplicates);

  const auto index = support::load_json(support::fixture("expected_records/index.json"));
  std::map<std::string, std::string> expected;
  for (const auto& e : index) {
    expected[support::slurp(support::fixture("expected_records") / e.at("file").get<std::string>())] =
        e.at("caption").get<std::string>();
  }
  // p10's undefined-shape picture is still extracted; only compilation drops it.
  // p09's uncaptioned inline picture is extracted too; the extract command drops it.
  CHECK(all.size() == expected.size() + 2);
  std::size_t matched = 0;
  for (const auto& r : all) {
    auto it = expected.find(r.code);
    if (it == expected.end()) {
      CHECK((r.code.find("\\undefinedshape") != std::string::npos || r.caption.empty()));
      continue;
    }
    ++matched;
    CHECK(r.caption == it->second);
    CHECK(r.origin == Origin::arxiv);
    CHECK(r.license == "arXiv");
  }
  CHECK(matched == expected.size());
  CHECK(stats.projects == 10);
  CHECK(stats.duplicates == 1);
  CHECK(stats.rejected_encoding == 1);
  CHECK(stats.unresolved_includes == 1);

  all.erase(std::remove_if(all.begin(), all.end(), [](const TikzRecord& r) { return r.caption.empty(); }), all.end());
  TableCompiler compiler;
  const auto filtered = filter_compilable(all, compiler, 3);
  CHECK(filtered.kept.size() == expected.size());
  CHECK(filtered.rejected == 1);
  // kept records keep their input order
  for (std::size_t k = 1; k < filtered.kept.size(); ++k) {
    const auto pos = [&](const TikzRecord& r) {
      return std::find_if(all.begin(), all.end(), [&](const TikzRecord& a) { return a.id == r.id; }) - all.begin();
    };
    CHECK(pos(filtered.kept[k - 1]) < pos(filtered.kept[k]));
  }
}

TEST_CASE("every emitted record round-trips through extraction") {
  ExtractionStats stats;
  for (const auto& r : extract_all(stats)) {
    const auto e = extract_tikz_environments(r.code);
    REQUIRE(e.snippets.size() == 1);
    CHECK(text::starts_with(r.code, "\\documentclass"));
    CHECK(r.code.size() >= 14);
    CHECK(r.code.substr(r.code.size() - 14) == "\\end{document}");
    CHECK(r.id == record_id(r.code));
  }
  // The snippet inside each record is verbatim source text of its project.
  for (const auto& dir : {"p02", "p03", "p06", "p08"}) {
    const auto project = load_project(support::fixture("projects") / dir, Origin::arxiv);
    const auto flat = expand_includes(project).text;
    ExtractionStats s;
    for (const auto& r : extract_records(project, shipped_rules(), "", s)) {
      CHECK(flat.find(extract_tikz_environments(r.code).snippets[0].text) != std::string::npos);
    }
  }
}

TEST_CASE("compilability filtering") {
  TableCompiler compiler;
  CHECK(filter_compilable({}, compiler).kept.empty());
  CHECK(compiler.calls == 0);

  std::vector<TikzRecord> recs(3);
  recs[0].code = "ok one";
  recs[1].code = "ok two";
  recs[2].code = "ok three";
  auto r = filter_compilable(recs, compiler);
  CHECK(r.kept.size() == 3);
  CHECK(r.rejected == 0);

  recs[1].code = "\\undefinedthing";
  r = filter_compilable(recs, compiler, 2);
  CHECK(r.kept.size() == 2);
  CHECK(r.rejected == 1);
  // idempotent
  const auto again = filter_compilable(r.kept, compiler, 2);
  CHECK(again.kept.size() == r.kept.size());
  CHECK(again.rejected == 0);
}

TEST_CASE("missing engine surfaces as CompilerUnavailable or EngineMissing") {
  TexCompiler compiler({"no-such-engine-xyz", 5.0, false}, std::filesystem::temp_directory_path() / "tikzlab-noengine");
  std::vector<TikzRecord> recs(1);
  recs[0].code = "x";
  CHECK_THROWS_AS(filter_compilable(recs, compiler), Error);
}

TEST_CASE("stack exchange dump ingestion") {
  std::ifstream dump(support::fixture("stackexchange/Posts.xml"), std::ios::binary);
  SeIngestStats stats;
  const auto candidates = ingest_stackexchange(dump, stats);
  CHECK(stats.rows == 10);
  CHECK(stats.malformed == 1);
  CHECK(stats.questions == 1);
  CHECK(stats.answers_kept == 2);
  REQUIRE(candidates.size() == 1);
  const auto& q = candidates[0];
  CHECK(q.question_id == 10);
  CHECK(q.title == "How to draw a labelled triangle?");
  REQUIRE(q.answers.size() == 2);
  CHECK(q.answers[0].id == 11);
  CHECK(q.answers[1].id == 13);
  CHECK(q.answers[1].tikz_code.size() == 1);

  ExtractionStats es;
  const auto recs = stackexchange_records(candidates, shipped_rules(), es);
  REQUIRE(recs.size() == 2);
  for (const auto& r : recs) {
    CHECK(r.origin == Origin::stackexchange);
    CHECK(r.caption.empty());
    CHECK(extract_tikz_environments(r.code).snippets.size() == 1);
  }
  CHECK(recs[0].created == std::optional<std::string>("2012-03-01T11:00:00.000"));
  CHECK(recs[0].code.find("\\usepackage{tikz}") != std::string::npos);
  CHECK(recs[1].code.find("\\usetikzlibrary{arrows.meta}") != std::string::npos);
  CHECK(recs[1].code.find("\\begin{tikzpicture}[>=Stealth]") != std::string::npos);

  std::istringstream low_score(
      "<posts><row Id=\"1\" PostTypeId=\"1\" Tags=\"&lt;tikz-pgf&gt;\" />"
      "<row Id=\"2\" PostTypeId=\"2\" ParentId=\"1\" Score=\"0\" Body=\"&lt;pre&gt;&lt;code&gt;\\begin{tikzpicture}"
      "\\end{tikzpicture}&lt;/code&gt;&lt;/pre&gt;\" />"
      "<row Id=\"3\" PostTypeId=\"2\" ParentId=\"1\" Score=\"1\" Body=\"&lt;pre&gt;&lt;code&gt;\\begin{tikzpicture}"
      "\\end{tikzpicture}&lt;/code&gt;&lt;/pre&gt;\" /></posts>");
  SeIngestStats s2;
  const auto c2 = ingest_stackexchange(low_score, s2);
  REQUIRE(c2.size() == 1);
  REQUIRE(c2[0].answers.size() == 1);
  CHECK(c2[0].answers[0].id == 3);
}

TEST_CASE("project loading") {
  const auto p = load_project(support::fixture("projects/p08"), Origin::curated);
  CHECK(p.root_file == "main.tex");
  CHECK(p.files.count("sections/a.tex") == 1);
  CHECK(p.origin == Origin::curated);
  const auto latin = load_project(support::fixture("projects/p10"), Origin::arxiv);
  CHECK(latin.replacement_chars == 1);
  CHECK_THROWS_AS(load_project(support::fixture("stackexchange"), Origin::arxiv), MalformedProject);
}
