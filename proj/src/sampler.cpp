#include <json.hpp>

#include "tikzlab/repair.hpp"
#include "tikzlab/subprocess.hpp"

namespace tikzlab::repair {

SubprocessSampler::SubprocessSampler(const std::string& command, std::chrono::duration<double> timeout)
    : timeout_(timeout) {
  auto argv = proc::split_command(command);
  if (argv.empty()) throw InvalidArgument("empty sampler command");
  const auto exe = proc::find_executable(argv[0]);
  if (!exe) throw ProtocolError("sampler command not found: " + argv[0]);
  argv[0] = exe->string();
  process_ = std::make_unique<proc::LineProcess>(argv);
}

SubprocessSampler::~SubprocessSampler() = default;

std::string SubprocessSampler::sample(const SamplerRequest& request) {
  const nlohmann::json req = {
      {"id", request.id}, {"caption", request.caption}, {"prefix", request.prefix}, {"max_new", request.max_new}};
  process_->write_line(req.dump());
  const auto line = process_->read_line(timeout_);
  if (!line) throw ProtocolError("sampler closed its output or timed out on request " + request.id);
  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(*line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("sampler sent invalid JSON: ") + e.what());
  }
  if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_string() || resp["id"] != request.id) {
    throw ProtocolError("sampler response id does not match request " + request.id);
  }
  if (resp.contains("error")) throw ProtocolError("sampler error: " + resp["error"].dump());
  if (!resp.contains("continuation") || !resp["continuation"].is_string()) {
    throw ProtocolError("sampler response lacks a continuation string");
  }
  return resp["continuation"].get<std::string>();
}

}  // namespace tikzlab::repair
