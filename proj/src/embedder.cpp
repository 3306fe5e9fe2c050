#include "tikzlab/embedder.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "tikzlab/error.hpp"
#include "tikzlab/subprocess.hpp"
#include "tikzlab/text.hpp"

namespace tikzlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> Embedder::caption_image(const fs::path&) {
  throw EmbedderUnavailable("captioner not available for model " + model_id());
}

// Mock ------------------------------------------------------------------------

MockEmbedder::MockEmbedder(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
  if (dim == 0) throw InvalidArgument("mock embedder dimension must be positive");
}

std::string MockEmbedder::model_id() const {
  return "mock:" + std::to_string(seed_) + ":" + std::to_string(dim_);
}

Eigen::VectorXd MockEmbedder::vector_for_key(std::string_view key, std::uint64_t seed, std::size_t dim) {
  std::string material = std::to_string(seed);
  material.push_back('\x1f');
  material.append(key);
  std::uint64_t state = text::fnv1a64(material);

  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < dim; ++k) {
    // splitmix64
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    v[static_cast<Eigen::Index>(k)] = 2.0 * u - 1.0;
  }
  // Sequential sum so other implementations can match bit for bit.
  double sq = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) sq += v[k] * v[k];
  const double norm = std::sqrt(sq);
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] /= norm;
  return v;
}

std::string MockEmbedder::image_key(const fs::path& image) {
  if (!fs::exists(image)) throw EmbedderUnavailable("no such image: " + image.string());
  fs::path seed_file = image;
  seed_file += ".seed";
  if (fs::exists(seed_file)) return text::read_file(seed_file);
  return "image:" + text::sha256_hex(text::read_file(image));
}

Eigen::VectorXd MockEmbedder::embed_text(const std::string& t) { return vector_for_key(t, seed_, dim_); }

Eigen::VectorXd MockEmbedder::embed_image(const fs::path& image) {
  return vector_for_key(image_key(image), seed_, dim_);
}

// Sidecar transports ----------------------------------------------------------

struct SidecarEmbedder::Transport {
  virtual ~Transport() = default;
  virtual void write_line(const std::string& line) = 0;
  virtual std::optional<std::string> read_line(std::chrono::duration<double> timeout) = 0;
};

namespace {

class TcpTransport : public SidecarEmbedder::Transport {
 public:
  TcpTransport(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
      throw EmbedderUnavailable("cannot resolve embedder host " + host);
    }
    for (auto* ai = res; ai; ai = ai->ai_next) {
      fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw EmbedderUnavailable("cannot connect to embedder at " + host + ":" + service);
  }
  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void write_line(const std::string& line) override {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const auto n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw EmbedderUnavailable("embedder connection closed while sending");
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> read_line(std::chrono::duration<double> timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) continue;
      char chunk[65536];
      const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  std::string buffer_;
};

class StdioTransport : public SidecarEmbedder::Transport {
 public:
  explicit StdioTransport(const std::string& command) {
    auto argv = proc::split_command(command);
    if (argv.empty()) throw ConfigInvalid("empty embedder command");
    const auto exe = proc::find_executable(argv[0]);
    if (!exe) throw EmbedderUnavailable("embedder command not found: " + argv[0]);
    argv[0] = exe->string();
    process_ = std::make_unique<proc::LineProcess>(argv);
  }
  void write_line(const std::string& line) override { process_->write_line(line); }
  std::optional<std::string> read_line(std::chrono::duration<double> timeout) override {
    return process_->read_line(timeout);
  }

 private:
  std::unique_ptr<proc::LineProcess> process_;
};

}  // namespace

SidecarEmbedder::SidecarEmbedder(std::unique_ptr<Transport> transport, std::chrono::duration<double> timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  const auto line = transport_->read_line(timeout_);
  if (!line) throw EmbedderUnavailable("embedder sent no hello message");
  try {
    const auto hello = json::parse(*line).at("hello");
    dim_ = hello.at("dim").get<std::size_t>();
    model_id_ = hello.at("model_id").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad hello message: ") + e.what());
  }
  if (dim_ == 0 || model_id_.empty()) throw ProtocolError("hello message announces an empty model");
}

SidecarEmbedder::~SidecarEmbedder() = default;

std::unique_ptr<SidecarEmbedder> SidecarEmbedder::connect_tcp(const std::string& host, int port,
                                                              std::chrono::duration<double> timeout) {
  return std::make_unique<SidecarEmbedder>(std::make_unique<TcpTransport>(host, port), timeout);
}

std::unique_ptr<SidecarEmbedder> SidecarEmbedder::spawn(const std::string& command,
                                                        std::chrono::duration<double> timeout) {
  return std::make_unique<SidecarEmbedder>(std::make_unique<StdioTransport>(command), timeout);
}

std::string SidecarEmbedder::request(const std::string& kind, const std::string& field, const std::string& payload) {
  const std::string id = std::to_string(next_id_++);
  transport_->write_line(json{{"id", id}, {"kind", kind}, {field, payload}}.dump());
  auto line = transport_->read_line(timeout_);
  if (!line) throw EmbedderUnavailable("embedder did not answer request " + id);
  return *line;
}

namespace {

json parse_response(const std::string& line, const std::string& id) {
  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("embedder sent invalid JSON: ") + e.what());
  }
  if (!resp.is_object() || !resp.contains("id") || resp["id"] != id) {
    throw ProtocolError("embedder response id does not match request " + id);
  }
  if (resp.contains("error")) throw EmbedderUnavailable("embedder error: " + resp["error"].dump());
  return resp;
}

}  // namespace

Eigen::VectorXd SidecarEmbedder::embedding_from(const std::string& line, const std::string& id) {
  const auto resp = parse_response(line, id);
  if (!resp.contains("embedding") || !resp["embedding"].is_array()) throw ProtocolError("response lacks an embedding");
  const auto& arr = resp["embedding"];
  if (arr.size() != dim_) throw ProtocolError("embedding dimension changed within a session");
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < dim_; ++k) {
    if (!arr[k].is_number()) throw ProtocolError("embedding holds a non-number");
    v[static_cast<Eigen::Index>(k)] = arr[k].get<double>();
  }
  if (!v.allFinite()) throw ProtocolError("embedding holds a non-finite value");
  return v;
}

Eigen::VectorXd SidecarEmbedder::embed_text(const std::string& t) {
  const std::string id = std::to_string(next_id_);
  return embedding_from(request("embed_text", "text", t), id);
}

Eigen::VectorXd SidecarEmbedder::embed_image(const fs::path& image) {
  const std::string id = std::to_string(next_id_);
  return embedding_from(request("embed_image", "image_path", fs::absolute(image).string()), id);
}

std::vector<std::string> SidecarEmbedder::caption_image(const fs::path& image) {
  const std::string id = std::to_string(next_id_);
  const auto resp = parse_response(request("caption_image", "image_path", fs::absolute(image).string()), id);
  try {
    return resp.at("candidates").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad candidate list: ") + e.what());
  }
}

// Cache -------------------------------------------------------------------------

CachedEmbedder::CachedEmbedder(std::unique_ptr<Embedder> inner, fs::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

template <typename Compute>
Eigen::VectorXd CachedEmbedder::lookup(const std::string& key, Compute compute) {
  const auto path = dir_ / (text::sha256_hex(inner_->model_id() + "\x1f" + key) + ".f64");
  const auto dim = static_cast<Eigen::Index>(inner_->dim());
  if (fs::exists(path) && fs::file_size(path) == static_cast<std::uintmax_t>(dim) * sizeof(double)) {
    Eigen::VectorXd v(dim);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (in) {
      ++hits_;
      return v;
    }
  }
  ++misses_;
  Eigen::VectorXd v = compute();
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  fs::rename(tmp, path);
  return v;
}

Eigen::VectorXd CachedEmbedder::embed_text(const std::string& t) {
  return lookup("text\x1f" + text::sha256_hex(t), [&] { return inner_->embed_text(t); });
}

Eigen::VectorXd CachedEmbedder::embed_image(const fs::path& image) {
  if (!fs::exists(image)) throw EmbedderUnavailable("no such image: " + image.string());
  std::string key = "image\x1f" + text::sha256_hex(text::read_file(image));
  fs::path seed_file = image;
  seed_file += ".seed";
  if (fs::exists(seed_file)) key += "\x1f" + text::sha256_hex(text::read_file(seed_file));
  return lookup(key, [&] { return inner_->embed_image(image); });
}

std::vector<std::string> CachedEmbedder::caption_image(const fs::path& image) { return inner_->caption_image(image); }

// Addresses ---------------------------------------------------------------------

std::unique_ptr<Embedder> open_embedder(const std::string& address, std::chrono::duration<double> timeout) {
  auto parse_uint = [&](const std::string& s) -> unsigned long long {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigInvalid("bad number in embedder address: " + address);
  };

  if (address == "mock" || text::starts_with(address, "mock:")) {
    std::uint64_t seed = 0;
    std::size_t dim = 512;
    if (address.size() > 5) {
      const auto rest = address.substr(5);
      const auto colon = rest.find(':');
      seed = parse_uint(rest.substr(0, colon));
      if (colon != std::string::npos) dim = parse_uint(rest.substr(colon + 1));
    }
    return std::make_unique<MockEmbedder>(seed, dim);
  }
  if (text::starts_with(address, "stdio:")) return SidecarEmbedder::spawn(address.substr(6), timeout);

  std::string hostport = text::starts_with(address, "tcp://") ? address.substr(6) : address;
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ConfigInvalid("unrecognised embedder address: " + address);
  const auto port = parse_uint(hostport.substr(colon + 1));
  if (port == 0 || port > 65535) throw ConfigInvalid("embedder port out of range: " + address);
  return SidecarEmbedder::connect_tcp(hostport.substr(0, colon), static_cast<int>(port), timeout);
}

}  // namespace tikzlab
