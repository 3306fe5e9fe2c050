// Scripted sampler for the newline-delimited JSON sampler protocol.
//
//   mock_sampler TRANSCRIPT.jsonl
//
// Each transcript line is {"caption": ..., "responses": [doc0, doc1, ...]}. The n-th
// request for a caption is answered with responses[n] (the last one repeats). When a
// response starts with the request prefix, only the remainder is sent back, so
// transcripts can hold whole documents.
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: mock_sampler TRANSCRIPT.jsonl\n";
    return 2;
  }
  std::map<std::string, std::vector<std::string>> script;
  std::ifstream in(argv[1]);
  if (!in) {
    std::cerr << "mock_sampler: cannot open " << argv[1] << "\n";
    return 2;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    auto& responses = script[j.at("caption").get<std::string>()];
    for (const auto& r : j.at("responses")) responses.push_back(r.get<std::string>());
  }

  std::map<std::string, std::size_t> served;
  while (std::getline(std::cin, line)) {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      std::cout << nlohmann::json{{"id", nullptr}, {"error", "invalid JSON"}}.dump() << std::endl;
      continue;
    }
    const std::string id = req.value("id", "");
    const std::string caption = req.value("caption", "");
    const std::string prefix = req.value("prefix", "");
    auto it = script.find(caption);
    if (it == script.end() || it->second.empty()) {
      std::cout << nlohmann::json{{"id", id}, {"error", "caption not in transcript"}}.dump() << std::endl;
      continue;
    }
    const auto& responses = it->second;
    const std::size_t k = std::min(served[caption]++, responses.size() - 1);
    std::string text = responses[k];
    if (!prefix.empty() && text.compare(0, prefix.size(), prefix) == 0) text.erase(0, prefix.size());
    std::cout << nlohmann::json{{"id", id}, {"continuation", text}}.dump() << std::endl;
  }
  return 0;
}
