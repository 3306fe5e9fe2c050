// tikzlab command-line front end.
#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "tikzlab/analysis.hpp"
#include "tikzlab/augment.hpp"
#include "tikzlab/bws.hpp"
#include "tikzlab/compiler.hpp"
#include "tikzlab/config.hpp"
#include "tikzlab/corpus.hpp"
#include "tikzlab/embedder.hpp"
#include "tikzlab/error.hpp"
#include "tikzlab/metrics.hpp"
#include "tikzlab/records.hpp"
#include "tikzlab/repair.hpp"
#include "tikzlab/text.hpp"

#ifndef TIKZLAB_DATA_DIR
#define TIKZLAB_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace tikzlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitFatal = 2;

struct Globals {
  std::optional<std::string> config_file;
  std::map<std::string, std::string> flags;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

struct Run {
  Config config;
  unsigned jobs = 1;
  std::string command;
  Json inputs = Json::array();

  void add_input(const fs::path& p) {
    inputs.push_back({{"path", p.string()}, {"sha256", hash_path(p)}});
  }

  static std::string hash_path(const fs::path& p) {
    if (fs::is_directory(p)) {
      std::vector<std::pair<std::string, std::string>> entries;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), p).generic_string(), text::sha256_hex(text::read_file(e.path())));
      }
      std::sort(entries.begin(), entries.end());
      std::string joined;
      for (const auto& [rel, h] : entries) joined += rel + "\t" + h + "\n";
      return text::sha256_hex(joined);
    }
    if (!fs::exists(p)) throw ConfigInvalid("input not found: " + p.string());
    return text::sha256_hex(text::read_file(p));
  }

  // Provenance block for single-JSON reports; carries no timestamp.
  Json metadata() const {
    Json m;
    m["tool"] = "tikzlab";
    m["version"] = TIKZLAB_VERSION;
    m["command"] = command;
    m["config"] = to_json(config);
    m["inputs"] = inputs;
    return m;
  }

  void write_report(const fs::path& out, Json body) const {
    Json doc;
    doc["metadata"] = metadata();
    for (auto& [k, v] : body.items()) doc[k] = v;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    text::write_file(out, doc.dump(2) + "\n");
  }

  // JSONL outputs keep provenance in "<out>.meta.json" so the records stay plain.
  void write_jsonl(const fs::path& out, const std::vector<Json>& rows, Json stats = Json::object()) const {
    records::write_jsonl_file(out, rows);
    Json meta = metadata();
    meta["records"] = rows.size();
    meta["output_sha256"] = text::sha256_hex(text::read_file(out));
    if (!stats.empty()) meta["stats"] = std::move(stats);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    meta["timestamp"] = stamp;
    auto meta_path = out;
    meta_path += ".meta.json";
    text::write_file(meta_path, meta.dump(2) + "\n");
  }
};

Run make_run(const Globals& g, const std::string& command) {
  Run run;
  std::optional<fs::path> file;
  if (g.config_file) {
    file = *g.config_file;
  } else if (auto env = process_env("TIKZLAB_CONFIG")) {
    file = *env;
  }
  run.config = resolve_config(file, g.flags);
  run.jobs = std::max(1u, g.jobs);
  run.command = command;
  return run;
}

metrics::ClipVariant clip_variant(const Config& c) {
  return c.clipscore_variant == "weighted" ? metrics::ClipVariant::weighted : metrics::ClipVariant::cosine100;
}

std::unique_ptr<Embedder> open_configured_embedder(const Config& c) {
  if (c.embedder_addr.empty()) return nullptr;
  auto e = open_embedder(c.embedder_addr);
  if (!c.cache_dir.empty()) return std::make_unique<CachedEmbedder>(std::move(e), c.cache_dir);
  return e;
}

CompileOptions compile_options(const Config& c) {
  CompileOptions o;
  o.engine_cmd = c.engine_cmd;
  o.timeout_s = c.timeout_s;
  o.keep_scratch = c.keep_scratch;
  return o;
}

fs::path scratch_root() {
  if (auto env = process_env("TIKZLAB_SCRATCH")) return *env;
  return fs::temp_directory_path() / "tikzlab-scratch";
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&] {
    for (;;) {
      const auto k = next.fetch_add(1);
      if (k >= n) return;
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
        next = n;
        return;
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(jobs, n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string system_name_for(const fs::path& file, const std::vector<nlohmann::json>& rows) {
  if (!rows.empty() && rows.front().contains("system") && rows.front()["system"].is_string()) {
    return rows.front()["system"].get<std::string>();
  }
  return file.stem().string();
}

// extract ---------------------------------------------------------------------

struct ExtractArgs {
  std::vector<std::string> projects;
  std::optional<std::string> stackexchange;
  std::string origin = "arxiv";
  std::string rules;
  std::string license = "arXiv";
  std::string out;
  bool no_compile = false;
  bool keep_uncaptioned = false;
};

int cmd_extract(const Globals& g, const ExtractArgs& a) {
  auto run = make_run(g, "extract");
  const fs::path rules_path = a.rules.empty() ? fs::path(process_env("TIKZLAB_RULES").value_or(
                                                    std::string(TIKZLAB_DATA_DIR) + "/preamble_rules.txt"))
                                              : fs::path(a.rules);
  run.add_input(rules_path);
  const auto rules = corpus::load_rules(rules_path);
  const auto origin = corpus::origin_from_string(a.origin);

  corpus::ExtractionStats stats;
  std::vector<corpus::TikzRecord> all;
  std::size_t failed_projects = 0, uncaptioned = 0;
  for (const auto& root : a.projects) {
    run.add_input(root);
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      try {
        auto recs = corpus::extract_records(corpus::load_project(dir, origin), rules, a.license, stats);
        for (auto& r : recs) {
          if (r.caption.empty() && origin == corpus::Origin::arxiv && !a.keep_uncaptioned) {
            ++uncaptioned;
            continue;
          }
          all.push_back(std::move(r));
        }
      } catch (const Error& e) {
        ++failed_projects;
        std::cerr << "warning: " << dir.string() << ": " << e.what() << "\n";
      }
    }
  }
  corpus::SeIngestStats se_stats;
  if (a.stackexchange) {
    run.add_input(*a.stackexchange);
    std::ifstream in(*a.stackexchange, std::ios::binary);
    if (!in) throw ConfigInvalid("cannot open " + *a.stackexchange);
    const auto candidates = corpus::ingest_stackexchange(in, se_stats);
    for (auto& r : corpus::stackexchange_records(candidates, rules, stats)) all.push_back(std::move(r));
  }

  all = corpus::deduplicate(std::move(all), &stats.duplicates);
  std::size_t rejected = 0;
  if (!a.no_compile) {
    TexCompiler compiler(compile_options(run.config), scratch_root());
    auto result = corpus::filter_compilable(all, compiler, run.jobs);
    rejected = result.rejected;
    all = std::move(result.kept);
  }

  std::vector<Json> rows;
  for (const auto& r : all) rows.push_back(records::to_json(r));
  Json s;
  s["projects"] = stats.projects;
  s["failed_projects"] = failed_projects;
  s["snippets"] = stats.snippets;
  s["unbalanced"] = stats.unbalanced;
  s["unresolved_includes"] = stats.unresolved_includes;
  s["rejected_encoding"] = stats.rejected_encoding;
  s["rejected_multiple_pictures"] = stats.rejected_multiple_pictures;
  s["dropped_uncaptioned"] = uncaptioned;
  s["duplicates"] = stats.duplicates;
  s["rejected_compile"] = rejected;
  s["compile_checked"] = !a.no_compile;
  s["macro_redefinitions"] = stats.macro_redefinitions;
  s["unsupported_macro_forms"] = stats.unsupported_macro_forms;
  s["rules_version"] = rules.version;
  s["stackexchange_rows"] = se_stats.rows;
  s["stackexchange_malformed"] = se_stats.malformed;
  run.write_jsonl(a.out, rows, s);
  std::cerr << "extracted " << rows.size() << " records (" << rejected << " failed to compile, "
            << stats.duplicates << " duplicates)\n";
  return failed_projects > 0 ? kExitPartial : kExitOk;
}

// compile ---------------------------------------------------------------------

Json diagnostics_json(const CompileReport& r) {
  Json arr = Json::array();
  for (const auto& d : r.diagnostics) {
    Json j;
    j["severity"] = d.severity == Severity::error ? "error" : "warning";
    j["message"] = d.message;
    j["line"] = d.line ? Json(*d.line) : Json(nullptr);
    arr.push_back(j);
  }
  return arr;
}

struct CompileArgs {
  std::string in;
  std::string out_dir;
  bool rasterize = false;
};

int cmd_compile(const Globals& g, const CompileArgs& a) {
  auto run = make_run(g, "compile");
  run.add_input(a.in);
  std::vector<std::pair<std::string, std::string>> docs;  // id, code
  const fs::path in(a.in);
  if (in.extension() == ".jsonl") {
    for (const auto& j : records::read_jsonl(in)) {
      if (!j.contains("id") || !j.contains("code")) throw InvalidRecord("compile input rows need id and code");
      docs.emplace_back(j["id"].get<std::string>(), j["code"].get<std::string>());
    }
  } else {
    docs.emplace_back(in.stem().string(), text::read_file(in));
  }
  const fs::path out_dir(a.out_dir);
  fs::create_directories(out_dir);
  const auto options = compile_options(run.config);

  std::vector<Json> rows(docs.size());
  std::atomic<std::size_t> failures{0};
  parallel_for(docs.size(), run.jobs, [&](std::size_t k) {
    const auto& [id, code] = docs[k];
    const fs::path work = out_dir / ".work" / id;
    fs::remove_all(work);
    const auto report = compile(code, work, options);
    Json row;
    row["id"] = id;
    row["success"] = report.success;
    row["produced_image"] = report.produced_image;
    row["timed_out"] = report.timed_out;
    row["errors"] = error_count(report);
    row["diagnostics"] = diagnostics_json(report);
    row["engine"] = report.engine;
    if (a.rasterize && report.produced_image && report.pdf_path) {
      try {
        const auto pages = rasterize(*report.pdf_path, run.config.dpi, run.config.raster_cmd, true, work / "png");
        fs::copy_file(pages.front(), out_dir / (id + ".png"), fs::copy_options::overwrite_existing);
        row["image"] = (out_dir / (id + ".png")).string();
      } catch (const CorruptPdf& e) {
        row["raster_error"] = e.what();
      }
    }
    if (!report.produced_image) ++failures;
    if (!run.config.keep_scratch) fs::remove_all(work);
    rows[k] = std::move(row);
  });
  if (!run.config.keep_scratch) fs::remove_all(out_dir / ".work");
  run.write_jsonl(out_dir / "reports.jsonl", rows);
  std::cerr << docs.size() - failures << "/" << docs.size() << " documents produced an image\n";
  return failures > 0 ? kExitPartial : kExitOk;
}

// generate --------------------------------------------------------------------

struct GenerateArgs {
  std::string captions;
  std::string sampler_cmd;
  std::string out;
  std::string system = "model";
};

Json outcome_json(const repair::RepairOutcome& o) {
  Json attempts = Json::array();
  for (const auto& a : o.attempts) {
    Json j;
    j["error_line"] = a.error_line ? Json(*a.error_line) : Json(nullptr);
    j["truncate_at"] = a.truncate_at ? Json(*a.truncate_at) : Json(nullptr);
    j["regenerated_lines"] = a.regenerated_lines;
    j["total_lines"] = a.total_lines;
    j["errors"] = a.errors;
    j["produced_image"] = a.produced_image;
    attempts.push_back(j);
  }
  return attempts;
}

int cmd_generate(const Globals& g, const GenerateArgs& a) {
  auto run = make_run(g, "generate");
  run.add_input(a.captions);
  struct Item {
    std::string id, caption;
  };
  std::vector<Item> items;
  std::size_t k = 0;
  for (const auto& j : records::read_jsonl(fs::path(a.captions))) {
    if (!j.contains("caption") || !j["caption"].is_string()) throw InvalidRecord("caption rows need a caption string");
    items.push_back({j.contains("id") ? j["id"].get<std::string>() : "c" + std::to_string(k), j["caption"]});
    ++k;
  }

  repair::RepairOptions options;
  options.max_attempts = run.config.max_attempts;
  options.schedule = run.config.repair_schedule == "formula" ? repair::Schedule::formula : repair::Schedule::just_before;
  TexCompiler compiler(compile_options(run.config), scratch_root());

  std::vector<Json> rows(items.size());
  std::vector<std::optional<repair::RepairOutcome>> outcomes(items.size());
  std::atomic<std::size_t> failed{0};
  const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(run.jobs, items.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    try {
      repair::SubprocessSampler sampler(a.sampler_cmd);
      for (;;) {
        const auto i = next.fetch_add(1);
        if (i >= items.size()) return;
        Json row;
        row["id"] = items[i].id;
        row["system"] = a.system;
        row["caption"] = items[i].caption;
        repair::RepairOutcome outcome;
        try {
          outcome = repair::generate_with_repair(items[i].caption, sampler, compiler, options, items[i].id);
        } catch (const repair::SamplerFailure& e) {
          outcome = e.partial();
          row["error"] = e.what();
          ++failed;
        }
        row["code"] = outcome.code;
        row["success"] = outcome.success;
        row["sampled_units"] = outcome.sampled_units;
        row["final_errors"] = outcome.final_errors;
        row["attempts"] = outcome_json(outcome);
        if (!outcome.success) ++failed;
        outcomes[i] = std::move(outcome);
        rows[i] = std::move(row);
      }
    } catch (...) {
      std::lock_guard lock(fatal_mutex);
      if (!fatal) fatal = std::current_exception();
      next = items.size();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  std::vector<repair::RepairOutcome> done;
  for (auto& o : outcomes) {
    if (o && !o->attempts.empty()) done.push_back(*o);
  }
  Json stats;
  stats["captions"] = items.size();
  stats["successes"] = std::count_if(done.begin(), done.end(), [](const auto& o) { return o.success; });
  if (!done.empty()) {
    stats["csr"] = repair::csr(done);
    stats["cer"] = repair::cer(done);
  }
  run.write_jsonl(a.out, rows, stats);
  std::cerr << "generated " << items.size() << " documents";
  if (!done.empty()) std::cerr << ", csr " << repair::csr(done) << ", cer " << repair::cer(done);
  std::cerr << "\n";
  return failed > 0 ? kExitPartial : kExitOk;
}

// augment ---------------------------------------------------------------------

struct AugmentArgs {
  std::string in;
  std::string images;
  std::string out;
  std::optional<std::string> candidates;
  std::size_t count = augment::kCandidateCount;
};

int cmd_augment(const Globals& g, const AugmentArgs& a) {
  auto run = make_run(g, "augment");
  run.add_input(a.in);
  run.add_input(a.images);
  if (run.config.embedder_addr.empty()) throw ConfigInvalid("augment needs --embedder");
  auto embedder = open_configured_embedder(run.config);

  std::map<std::string, std::vector<std::string>> candidates;
  if (a.candidates) {
    run.add_input(*a.candidates);
    for (const auto& j : records::read_jsonl(fs::path(*a.candidates))) {
      candidates[j.at("id").get<std::string>()] = j.at("candidates").get<std::vector<std::string>>();
    }
  }
  auto recs = records::read_records(a.in);
  augment::AugmentStats stats;
  std::size_t errors = 0;
  for (auto& r : recs) {
    const fs::path image = fs::path(a.images) / (r.id + ".png");
    try {
      std::vector<std::string> c;
      if (auto it = candidates.find(r.id); it != candidates.end()) c = it->second;
      augment::augment_record(r, image, std::move(c), *embedder, stats, a.count);
    } catch (const EmbedderUnavailable& e) {
      ++errors;
      std::cerr << "warning: " << r.id << ": " << e.what() << "\n";
    }
  }
  std::vector<Json> rows;
  for (const auto& r : recs) rows.push_back(records::to_json(r));
  Json s;
  s["augmented"] = stats.augmented;
  s["already_augmented"] = stats.already_augmented;
  s["long_enough"] = stats.long_enough;
  s["missing_image"] = stats.missing_image;
  s["no_candidates"] = stats.no_candidates;
  s["embedder_errors"] = errors;
  s["embedder_model"] = embedder->model_id();
  run.write_jsonl(a.out, rows, s);
  std::cerr << "augmented " << stats.augmented << " of " << recs.size() << " records\n";
  return errors > 0 || stats.missing_image > 0 ? kExitPartial : kExitOk;
}

// evaluate --------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> pred;
  std::string ref;
  std::vector<std::string> pred_images;
  std::optional<std::string> ref_images;
  std::vector<std::string> systems;
  std::string metrics = "cer,csr,eed,kid,clip_img,clip,crystalbleu";
  std::string out;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  auto run = make_run(g, "evaluate");
  if (!a.pred_images.empty() && a.pred_images.size() != a.pred.size()) {
    throw ConfigInvalid("--pred-images must be given once per --pred");
  }
  if (!a.systems.empty() && a.systems.size() != a.pred.size()) throw ConfigInvalid("--system must be given once per --pred");

  metrics::ReportOptions options;
  options.metrics.clear();
  std::stringstream list(a.metrics);
  for (std::string m; std::getline(list, m, ',');) {
    m = std::string(text::trim(m));
    if (m.empty()) continue;
    if (std::find(metrics::kColumns.begin(), metrics::kColumns.end(), m) == metrics::kColumns.end()) {
      throw ConfigInvalid("unknown metric: " + m);
    }
    options.metrics.insert(m);
  }
  if (options.metrics.empty()) throw ConfigInvalid("--metrics selects nothing");
  options.kid = {run.config.kid_subset_size, run.config.kid_subsets, run.config.seed};
  options.bleu.ignore_top_k = run.config.crystalbleu_k;
  options.eed = {run.config.eed_alpha, run.config.eed_rho, run.config.eed_deletion, run.config.eed_insertion};
  options.clip_variant = clip_variant(run.config);

  run.add_input(a.ref);
  std::map<std::string, metrics::ReferenceItem> refs;
  for (const auto& j : records::read_jsonl(fs::path(a.ref))) {
    const auto r = records::record_from_json(j);
    metrics::ReferenceItem item{r.id, r.code, r.caption, std::nullopt};
    if (a.ref_images) {
      const auto p = fs::path(*a.ref_images) / (r.id + ".png");
      if (fs::exists(p)) item.image = p;
    }
    refs[r.id] = std::move(item);
  }
  if (a.ref_images) run.add_input(*a.ref_images);

  std::vector<metrics::SystemPredictions> systems;
  for (std::size_t s = 0; s < a.pred.size(); ++s) {
    run.add_input(a.pred[s]);
    const auto rows = records::read_jsonl(fs::path(a.pred[s]));
    metrics::SystemPredictions sys;
    sys.name = a.systems.empty() ? system_name_for(a.pred[s], rows) : a.systems[s];
    for (const auto& j : rows) {
      metrics::PredictionItem item;
      try {
        item.id = j.at("id").get<std::string>();
        item.code = j.at("code").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw InvalidRecord(a.pred[s] + ": prediction rows need id and code");
      }
      if (j.contains("sampled_units") && j["sampled_units"].is_number()) item.sampled_units = j["sampled_units"].get<double>();
      if (j.contains("final_errors") && j["final_errors"].is_number()) item.final_errors = j["final_errors"].get<double>();
      if (!a.pred_images.empty()) {
        const auto p = fs::path(a.pred_images[s]) / (item.id + ".png");
        if (fs::exists(p)) item.image = p;
      }
      sys.items.push_back(std::move(item));
    }
    if (!a.pred_images.empty()) run.add_input(a.pred_images[s]);
    systems.push_back(std::move(sys));
  }

  std::unique_ptr<Embedder> embedder;
  std::string embedder_error;
  const bool wants_embeddings = options.metrics.count("kid") || options.metrics.count("clip") || options.metrics.count("clip_img");
  if (wants_embeddings) {
    try {
      embedder = open_configured_embedder(run.config);
    } catch (const EmbedderUnavailable& e) {
      embedder_error = e.what();
      std::cerr << "warning: " << e.what() << "; embedding columns omitted\n";
    }
  }
  const auto report = metrics::metric_report(systems, refs, embedder.get(), options);

  Json rows = Json::array();
  bool missing = false;
  for (const auto& row : report.rows) {
    Json r;
    r["system"] = row.system;
    for (const auto& col : metrics::kColumns) {
      auto it = row.cells.find(col);
      if (it == row.cells.end()) continue;
      Json cell;
      cell["value"] = it->second.value ? Json(*it->second.value) : Json(nullptr);
      cell["n"] = it->second.n;
      if (!it->second.note.empty()) {
        cell["missing"] = it->second.note;
        missing = true;
      }
      r[col] = cell;
    }
    rows.push_back(r);
  }
  Json body;
  Json info;
  info["embedder_model"] = report.embedder_model.empty() ? Json(nullptr) : Json(report.embedder_model);
  if (!embedder_error.empty()) info["embedder_error"] = embedder_error;
  info["dpi"] = run.config.dpi;
  info["seed"] = run.config.seed;
  info["kid"] = {{"subset_size", options.kid.subset_size}, {"subsets", options.kid.subsets}, {"degree", 3}};
  info["crystalbleu_k"] = options.bleu.ignore_top_k;
  info["eed"] = {{"alpha", options.eed.alpha}, {"rho", options.eed.rho}, {"deletion", options.eed.deletion},
                 {"insertion", options.eed.insertion}};
  info["clipscore_variant"] = run.config.clipscore_variant;
  body["metrics"] = info;
  body["systems"] = rows;
  run.write_report(a.out, body);
  // Degraded mode (no embedder configured) is a normal run; a failing embedder is partial.
  const bool degraded = !embedder_error.empty() || (embedder && missing && wants_embeddings);
  return degraded ? kExitPartial : kExitOk;
}

// analyze ---------------------------------------------------------------------

struct AnalyzeArgs {
  std::string train;
  std::vector<std::string> pred;
  std::size_t n_max = 10;
  std::size_t n_min = 1;
  bool lowercase = false;
  std::string out;
};

std::vector<std::string> codes_of(const std::vector<nlohmann::json>& rows, const std::string& file) {
  std::vector<std::string> out;
  for (const auto& j : rows) {
    if (!j.contains("code") || !j["code"].is_string()) throw InvalidRecord(file + ": rows need a code string");
    out.push_back(j["code"].get<std::string>());
  }
  return out;
}

int cmd_novelty(const Globals& g, const AnalyzeArgs& a) {
  auto run = make_run(g, "analyze novelty");
  run.add_input(a.train);
  run.add_input(a.pred.front());
  if (a.n_min < 1 || a.n_max < a.n_min) throw ConfigInvalid("bad n range");
  const analysis::TokenizeOptions tok{a.lowercase};
  std::vector<analysis::Tokens> train, gen;
  for (const auto& c : codes_of(records::read_jsonl(fs::path(a.train)), a.train)) train.push_back(analysis::code_tokens(c, tok));
  for (const auto& c : codes_of(records::read_jsonl(fs::path(a.pred.front())), a.pred.front())) gen.push_back(analysis::code_tokens(c, tok));

  Json curve = Json::array();
  std::vector<Json> per_n(a.n_max - a.n_min + 1);
  parallel_for(per_n.size(), run.jobs, [&](std::size_t k) {
    const std::size_t n = a.n_min + k;
    analysis::NGramIndex index(n);
    for (const auto& t : train) index.add(t);
    try {
      per_n[k] = Json::array({n, analysis::ngram_novelty(gen, index)});
    } catch (const NoNGrams&) {
      per_n[k] = Json::array({n, nullptr});
    }
  });
  for (auto& p : per_n) curve.push_back(std::move(p));
  Json body;
  body["analysis"] = "novelty";
  body["lowercase"] = a.lowercase;
  body["curve"] = curve;
  run.write_report(a.out, body);
  return kExitOk;
}

int cmd_copying(const Globals& g, const AnalyzeArgs& a) {
  auto run = make_run(g, "analyze copying");
  run.add_input(a.pred.front());
  if (a.n_min < 1 || a.n_max < a.n_min) throw ConfigInvalid("bad n range");
  const analysis::TokenizeOptions tok{a.lowercase};
  std::vector<analysis::Tokens> captions, codes;
  for (const auto& j : records::read_jsonl(fs::path(a.pred.front()))) {
    if (!j.contains("caption") || !j.contains("code")) throw InvalidRecord(a.pred.front() + ": rows need caption and code");
    captions.push_back(analysis::tokenize(j["caption"].get<std::string>(), tok));
    codes.push_back(analysis::code_tokens(j["code"].get<std::string>(), tok));
  }
  Json curve = Json::array();
  for (std::size_t n = a.n_min; n <= a.n_max; ++n) {
    try {
      curve.push_back(Json::array({n, analysis::caption_copying_corpus(captions, codes, n)}));
    } catch (const NoNGrams&) {
      curve.push_back(Json::array({n, nullptr}));
    }
  }
  Json body;
  body["analysis"] = "copying";
  body["lowercase"] = a.lowercase;
  body["curve"] = curve;
  run.write_report(a.out, body);
  return kExitOk;
}

int cmd_complexity(const Globals& g, const AnalyzeArgs& a) {
  auto run = make_run(g, "analyze complexity");
  std::vector<analysis::SystemDocument> docs;
  for (const auto& file : a.pred) {
    run.add_input(file);
    const auto rows = records::read_jsonl(fs::path(file));
    const auto fallback = fs::path(file).stem().string();
    for (const auto& j : rows) {
      const std::string sys = j.contains("system") && j["system"].is_string() ? j["system"].get<std::string>() : fallback;
      docs.push_back({sys, j.at("code").get<std::string>()});
    }
  }
  Json means;
  for (const auto& [sys, mean] : analysis::complexity_stats(docs)) means[sys] = mean;
  Json body;
  body["analysis"] = "complexity";
  body["mean_tokens"] = means;
  run.write_report(a.out, body);
  return kExitOk;
}

// bws ---------------------------------------------------------------------------

struct BwsArgs {
  std::string annotations;
  std::string out;
  std::size_t repeats = 100;
  bool normalize = false;
};

std::vector<bws::AnnotationRecord> load_annotations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("cannot open " + path);
  return bws::read_annotations_csv(in);
}

int cmd_bws_score(const Globals& g, const BwsArgs& a) {
  auto run = make_run(g, "bws score");
  run.add_input(a.annotations);
  const auto scores = bws::bws_scores(load_annotations(a.annotations));
  Json s;
  for (const auto& [item, v] : scores) s[item] = v;
  Json body;
  body["scores"] = s;
  if (a.normalize) {
    Json n;
    for (const auto& [item, v] : bws::min_max_normalize(scores)) n[item] = v;
    body["normalized"] = n;
  }
  run.write_report(a.out, body);
  return kExitOk;
}

int cmd_bws_shr(const Globals& g, const BwsArgs& a) {
  auto run = make_run(g, "bws shr");
  run.add_input(a.annotations);
  const auto r = bws::split_half_reliability(load_annotations(a.annotations), run.config.seed, a.repeats);
  Json body;
  body["rho"] = r.rho;
  body["repeats"] = r.repeats;
  body["resamples"] = r.resamples;
  body["seed"] = r.seed;
  if (a.out.empty()) {
    std::cout << body.dump(2) << "\n";
  } else {
    run.write_report(a.out, body);
  }
  return kExitOk;
}

void add_config_flag(CLI::App& app, Globals& g, const std::string& flag, const std::string& key,
                     const std::string& help) {
  app.add_option_function<std::string>(
         flag, [&g, key](const std::string& v) { g.flags[key] = v; }, help + " (config key " + key + ")")
      ->type_name("VALUE");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tikzlab: corpus extraction, compile-repair generation and evaluation for TikZ drawings"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  Globals g;
  bool version = false, version_json = false;
  app.add_flag("--version", version, "Print the toolkit version and exit");
  app.add_flag("--json", version_json, "With --version: print machine-readable JSON");
  app.add_option("--config", g.config_file, "key = value config file (also TIKZLAB_CONFIG)");
  app.add_option("--jobs,-j", g.jobs, "Worker threads for parallel stages")->capture_default_str();
  add_config_flag(app, g, "--engine-cmd", "engine_cmd", "TeX engine command");
  add_config_flag(app, g, "--raster-cmd", "raster_cmd", "PDF to PNG converter command");
  add_config_flag(app, g, "--embedder", "embedder_addr", "Embedder address: mock[:SEED[:DIM]], HOST:PORT, tcp://HOST:PORT, stdio:CMD");
  add_config_flag(app, g, "--seed", "seed", "Seed for every random choice");
  add_config_flag(app, g, "--max-attempts", "max_attempts", "Samples per caption, the first included");
  add_config_flag(app, g, "--timeout", "timeout_s", "Seconds before a compile is killed");
  add_config_flag(app, g, "--dpi", "dpi", "Rasterization resolution");
  add_config_flag(app, g, "--kid-subset-size", "kid_subset_size", "KID subset size");
  add_config_flag(app, g, "--kid-subsets", "kid_subsets", "Number of KID subsets");
  add_config_flag(app, g, "--crystalbleu-k", "crystalbleu_k", "Trivially shared n-grams ignored by CrystalBLEU");
  add_config_flag(app, g, "--clipscore-variant", "clipscore_variant", "cosine100 or weighted");
  add_config_flag(app, g, "--eed-alpha", "eed_alpha", "EED jump cost");
  add_config_flag(app, g, "--eed-rho", "eed_rho", "EED coverage weight");
  add_config_flag(app, g, "--eed-deletion", "eed_deletion", "EED deletion cost");
  add_config_flag(app, g, "--eed-insertion", "eed_insertion", "EED insertion cost");
  add_config_flag(app, g, "--repair-schedule", "repair_schedule", "just_before or formula");
  add_config_flag(app, g, "--keep-scratch", "keep_scratch", "Keep compile directories (true/false)");
  add_config_flag(app, g, "--cache-dir", "cache_dir", "Embedding cache directory");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Extract standalone TikZ records from TeX projects");
  extract->add_option("--projects", ex.projects, "Directory whose subdirectories are TeX projects")->check(CLI::ExistingDirectory);
  extract->add_option("--stackexchange", ex.stackexchange, "Stack Exchange Posts.xml dump")->check(CLI::ExistingFile);
  extract->add_option("--origin", ex.origin, "arxiv, curated or artificial")->capture_default_str();
  extract->add_option("--rules", ex.rules, "Preamble rule file (default: shipped rules)");
  extract->add_option("--license", ex.license, "License tag for project records")->capture_default_str();
  extract->add_option("--out", ex.out, "Output JSONL")->required();
  extract->add_flag("--no-compile", ex.no_compile, "Skip the compilability filter");
  extract->add_flag("--keep-uncaptioned", ex.keep_uncaptioned, "Keep arXiv drawings without a caption");

  CompileArgs co;
  auto* compile_cmd = app.add_subcommand("compile", "Compile a .tex file or a JSONL of records");
  compile_cmd->add_option("--in", co.in, "Input .tex or .jsonl")->required()->check(CLI::ExistingFile);
  compile_cmd->add_option("--out-dir", co.out_dir, "Directory for reports.jsonl and images")->required();
  compile_cmd->add_flag("--rasterize", co.rasterize, "Write <id>.png of the first page");

  GenerateArgs ge;
  auto* generate = app.add_subcommand("generate", "Generate code for captions with compile-driven repair");
  generate->add_option("--captions", ge.captions, "JSONL with id and caption")->required()->check(CLI::ExistingFile);
  generate->add_option("--sampler-cmd", ge.sampler_cmd, "Sampler subprocess command")->required();
  generate->add_option("--system", ge.system, "System name recorded in each row")->capture_default_str();
  generate->add_option("--out", ge.out, "Output JSONL")->required();

  AugmentArgs au;
  auto* augment_cmd = app.add_subcommand("augment", "Extend short captions with the best-ranked candidate description");
  augment_cmd->add_option("--in", au.in, "Record JSONL")->required()->check(CLI::ExistingFile);
  augment_cmd->add_option("--images", au.images, "Directory of <id>.png renderings")->required()->check(CLI::ExistingDirectory);
  augment_cmd->add_option("--candidates", au.candidates, "JSONL with id and candidates (default: ask the embedder)")->check(CLI::ExistingFile);
  augment_cmd->add_option("--count", au.count, "Candidates considered per record")->capture_default_str();
  augment_cmd->add_option("--out", au.out, "Output JSONL")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against references");
  evaluate->add_option("--pred", ev.pred, "Prediction JSONL; repeat for several systems")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ref", ev.ref, "Reference record JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--pred-images", ev.pred_images, "Directory of <id>.png per --pred")->check(CLI::ExistingDirectory);
  evaluate->add_option("--ref-images", ev.ref_images, "Directory of reference <id>.png")->check(CLI::ExistingDirectory);
  evaluate->add_option("--system", ev.systems, "System name per --pred");
  evaluate->add_option("--metrics", ev.metrics, "Comma-separated columns")->capture_default_str();
  evaluate->add_option("--out", ev.out, "Report JSON")->required();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Memorization and complexity analyses");
  analyze->require_subcommand(1);
  auto* novelty = analyze->add_subcommand("novelty", "Code n-gram novelty against a training corpus");
  novelty->add_option("--train", an.train, "Training JSONL")->required()->check(CLI::ExistingFile);
  novelty->add_option("--pred", an.pred, "Generated JSONL")->required()->check(CLI::ExistingFile)->expected(1);
  novelty->add_option("--n-max", an.n_max, "Largest n")->capture_default_str();
  novelty->add_option("--n-min", an.n_min, "Smallest n")->capture_default_str();
  novelty->add_flag("--lowercase", an.lowercase, "Fold ASCII case before matching");
  novelty->add_option("--out", an.out, "Output JSON")->required();
  auto* copying = analyze->add_subcommand("copying", "Caption n-grams copied into generated code");
  copying->add_option("--pred", an.pred, "Generated JSONL with caption and code")->required()->check(CLI::ExistingFile)->expected(1);
  copying->add_option("--n-max", an.n_max, "Largest n")->capture_default_str();
  copying->add_option("--n-min", an.n_min, "Smallest n")->capture_default_str();
  copying->add_flag("--lowercase", an.lowercase, "Fold ASCII case before matching");
  copying->add_option("--out", an.out, "Output JSON")->required();
  auto* complexity = analyze->add_subcommand("complexity", "Mean comment-stripped token count per system");
  complexity->add_option("--pred", an.pred, "JSONL files; rows may carry a system field")->required()->check(CLI::ExistingFile);
  complexity->add_option("--out", an.out, "Output JSON")->required();

  BwsArgs bw;
  auto* bws_cmd = app.add_subcommand("bws", "Best-worst scaling");
  bws_cmd->require_subcommand(1);
  auto* score = bws_cmd->add_subcommand("score", "Per-item best-worst scores");
  score->add_option("--annotations", bw.annotations, "Annotation CSV")->required()->check(CLI::ExistingFile);
  score->add_flag("--normalize", bw.normalize, "Also emit min-max normalized scores");
  score->add_option("--out", bw.out, "Output JSON")->required();
  auto* shr = bws_cmd->add_subcommand("shr", "Split-half reliability");
  shr->add_option("--annotations", bw.annotations, "Annotation CSV")->required()->check(CLI::ExistingFile);
  shr->add_option("--repeats", bw.repeats, "Random splits averaged")->capture_default_str();
  shr->add_option("--out", bw.out, "Output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const bool unknown = dynamic_cast<const CLI::ExtrasError*>(&e) != nullptr;
    std::cerr << (unknown ? "UnknownSubcommand: " : "ConfigInvalid: ") << e.what() << "\n\n" << app.help();
    return kExitFatal;
  }

  if (version) {
    if (version_json) {
      std::cout << Json{{"name", "tikzlab"}, {"version", TIKZLAB_VERSION}}.dump() << "\n";
    } else {
      std::cout << "tikzlab " << TIKZLAB_VERSION << "\n";
    }
    return kExitOk;
  }

  try {
    if (*extract) {
      if (ex.projects.empty() && !ex.stackexchange) throw ConfigInvalid("extract needs --projects or --stackexchange");
      return cmd_extract(g, ex);
    }
    if (*compile_cmd) return cmd_compile(g, co);
    if (*generate) return cmd_generate(g, ge);
    if (*augment_cmd) return cmd_augment(g, au);
    if (*evaluate) return cmd_evaluate(g, ev);
    if (*novelty) return cmd_novelty(g, an);
    if (*copying) return cmd_copying(g, an);
    if (*complexity) return cmd_complexity(g, an);
    if (*score) return cmd_bws_score(g, bw);
    if (*shr) return cmd_bws_shr(g, bw);
    throw UnknownSubcommand("expected one of extract, compile, generate, augment, evaluate, analyze, bws");
  } catch (const ConfigInvalid& e) {
    std::cerr << "ConfigInvalid: " << e.what() << "\n\n" << app.help();
    return kExitFatal;
  } catch (const UnknownSubcommand& e) {
    std::cerr << "UnknownSubcommand: " << e.what() << "\n\n" << app.help();
    return kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
}
