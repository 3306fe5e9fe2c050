#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace tikzlab {

enum class EmbeddingSource { text, image, mock };

struct EmbeddingVector {
  Eigen::VectorXd values;
  EmbeddingSource source = EmbeddingSource::text;
  Eigen::Index dim() const { return values.size(); }
};

/// Joint text/image feature extractor. Calls are serialized by the caller.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Eigen::VectorXd embed_text(const std::string& text) = 0;
  virtual Eigen::VectorXd embed_image(const std::filesystem::path& image) = 0;
  /// Candidate descriptions of an image. The default throws EmbedderUnavailable.
  virtual std::vector<std::string> caption_image(const std::filesystem::path& image);
  virtual std::size_t dim() const = 0;
  virtual std::string model_id() const = 0;
};

/// Deterministic hash-derived unit vectors. Text is keyed by itself; an image is
/// keyed by the contents of "<image>.seed" when that file exists, else by
/// "image:" + sha256(file bytes). A text and an image with the same key embed identically.
class MockEmbedder : public Embedder {
 public:
  explicit MockEmbedder(std::uint64_t seed = 0, std::size_t dim = 512);

  Eigen::VectorXd embed_text(const std::string& text) override;
  Eigen::VectorXd embed_image(const std::filesystem::path& image) override;
  std::size_t dim() const override { return dim_; }
  std::string model_id() const override;

  static Eigen::VectorXd vector_for_key(std::string_view key, std::uint64_t seed, std::size_t dim);
  static std::string image_key(const std::filesystem::path& image);

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Client for an embedding sidecar speaking newline-delimited JSON, either over
/// TCP or over the stdin/stdout of a child process. Throws EmbedderUnavailable on
/// connection failure and ProtocolError on malformed traffic.
class SidecarEmbedder : public Embedder {
 public:
  struct Transport;
  SidecarEmbedder(std::unique_ptr<Transport> transport, std::chrono::duration<double> timeout);
  ~SidecarEmbedder() override;

  static std::unique_ptr<SidecarEmbedder> connect_tcp(const std::string& host, int port,
                                                      std::chrono::duration<double> timeout);
  static std::unique_ptr<SidecarEmbedder> spawn(const std::string& command, std::chrono::duration<double> timeout);

  Eigen::VectorXd embed_text(const std::string& text) override;
  Eigen::VectorXd embed_image(const std::filesystem::path& image) override;
  std::vector<std::string> caption_image(const std::filesystem::path& image) override;
  std::size_t dim() const override { return dim_; }
  std::string model_id() const override { return model_id_; }

 private:
  std::string request(const std::string& kind, const std::string& field, const std::string& payload);
  Eigen::VectorXd embedding_from(const std::string& response_line, const std::string& id);

  std::unique_ptr<Transport> transport_;
  std::chrono::duration<double> timeout_;
  std::size_t dim_ = 0;
  std::string model_id_;
  std::uint64_t next_id_ = 0;
};

/// Persists embeddings under `dir`, keyed by model id, kind and content hash.
class CachedEmbedder : public Embedder {
 public:
  CachedEmbedder(std::unique_ptr<Embedder> inner, std::filesystem::path dir);

  Eigen::VectorXd embed_text(const std::string& text) override;
  Eigen::VectorXd embed_image(const std::filesystem::path& image) override;
  std::vector<std::string> caption_image(const std::filesystem::path& image) override;
  std::size_t dim() const override { return inner_->dim(); }
  std::string model_id() const override { return inner_->model_id(); }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  template <typename Compute>
  Eigen::VectorXd lookup(const std::string& key, Compute compute);

  std::unique_ptr<Embedder> inner_;
  std::filesystem::path dir_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Opens "mock[:SEED[:DIM]]", "HOST:PORT", "tcp://HOST:PORT" or "stdio:COMMAND".
/// Throws ConfigInvalid for an unparsable address.
std::unique_ptr<Embedder> open_embedder(const std::string& address,
                                        std::chrono::duration<double> timeout = std::chrono::seconds(120));

}  // namespace tikzlab
