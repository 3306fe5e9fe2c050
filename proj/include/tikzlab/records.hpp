#pragma once

#include <json.hpp>

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "tikzlab/corpus.hpp"

namespace tikzlab::records {

using Json = nlohmann::ordered_json;

/// Exactly the fields id, caption, code, origin, license, augmented, created.
Json to_json(const corpus::TikzRecord& record);

/// Throws InvalidRecord for missing or mistyped fields.
corpus::TikzRecord record_from_json(const nlohmann::json& j);

/// One compact JSON value per line, LF terminated.
void write_jsonl(std::ostream& out, const std::vector<Json>& rows);

/// Parses every non-blank line. Throws InvalidRecord naming the bad line.
std::vector<nlohmann::json> read_jsonl(std::istream& in);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

std::vector<corpus::TikzRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<corpus::TikzRecord>& records);

/// Writes `rows` to `path` atomically (temp file + rename).
void write_jsonl_file(const std::filesystem::path& path, const std::vector<Json>& rows);

}  // namespace tikzlab::records
