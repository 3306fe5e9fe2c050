#include "tikzlab/records.hpp"

#include <fstream>
#include <sstream>

#include "tikzlab/error.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab::records {

namespace fs = std::filesystem;

Json to_json(const corpus::TikzRecord& r) {
  Json j;
  j["id"] = r.id;
  j["caption"] = r.caption;
  j["code"] = r.code;
  j["origin"] = std::string(corpus::to_string(r.origin));
  j["license"] = r.license;
  j["augmented"] = r.augmented;
  j["created"] = r.created ? Json(*r.created) : Json(nullptr);
  return j;
}

corpus::TikzRecord record_from_json(const nlohmann::json& j) {
  corpus::TikzRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.caption = j.value("caption", std::string());
    r.code = j.at("code").get<std::string>();
    r.origin = corpus::origin_from_string(j.value("origin", std::string("arxiv")));
    r.license = j.value("license", std::string());
    r.augmented = j.value("augmented", false);
    if (j.contains("created") && !j["created"].is_null()) r.created = j["created"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidRecord(std::string("bad record: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidRecord(std::string("bad record: ") + e.what());
  }
  return r;
}

void write_jsonl(std::ostream& out, const std::vector<Json>& rows) {
  for (const auto& row : rows) out << row.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

std::vector<nlohmann::json> read_jsonl(std::istream& in) {
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidRecord("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidRecord("cannot open " + path.string());
  try {
    return read_jsonl(in);
  } catch (const InvalidRecord& e) {
    throw InvalidRecord(path.string() + ": " + e.what());
  }
}

std::vector<corpus::TikzRecord> read_records(const fs::path& path) {
  std::vector<corpus::TikzRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(record_from_json(j));
  return out;
}

void write_jsonl_file(const fs::path& path, const std::vector<Json>& rows) {
  std::ostringstream buffer;
  write_jsonl(buffer, rows);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  text::write_file(tmp, buffer.str());
  fs::rename(tmp, path);
}

void write_records(const fs::path& path, const std::vector<corpus::TikzRecord>& records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl_file(path, rows);
}

}  // namespace tikzlab::records
