#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tikzlab/error.hpp"

namespace tikzlab::softprompt {

template <typename Scalar = double>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar = double>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Affine map from a d_vit embedding into the d_llama word-embedding space.
template <typename Scalar = double>
class ProjectionLayer {
 public:
  ProjectionLayer(Matrix<Scalar> weights, Vector<Scalar> bias) : weights_(std::move(weights)), bias_(std::move(bias)) {
    if (bias_.size() != weights_.cols()) throw DimensionMismatch("bias length must equal d_llama");
    if (!weights_.allFinite() || !bias_.allFinite()) throw InvalidArgument("projection entries must be finite");
  }
  explicit ProjectionLayer(Matrix<Scalar> weights)
      : ProjectionLayer(weights, Vector<Scalar>::Zero(weights.cols())) {}

  Eigen::Index in_dim() const { return weights_.rows(); }
  Eigen::Index out_dim() const { return weights_.cols(); }
  const Matrix<Scalar>& weights() const { return weights_; }
  const Vector<Scalar>& bias() const { return bias_; }

 private:
  Matrix<Scalar> weights_;  // d_vit x d_llama
  Vector<Scalar> bias_;
};

enum class RowTag { soft_prefix, token };

template <typename Scalar = double>
struct PromptSequence {
  Matrix<Scalar> rows;  // one embedding per row
  std::vector<RowTag> tags;
};

template <typename Scalar>
Vector<Scalar> project(const ProjectionLayer<Scalar>& layer, const Vector<Scalar>& embedding) {
  if (embedding.size() != layer.in_dim()) {
    throw DimensionMismatch("embedding has length " + std::to_string(embedding.size()) + ", layer expects " +
                            std::to_string(layer.in_dim()));
  }
  return layer.weights().transpose() * embedding + layer.bias();
}

template <typename Scalar>
PromptSequence<Scalar> prepend(const Vector<Scalar>& projected, const Matrix<Scalar>& token_embeddings) {
  if (token_embeddings.rows() > 0 && token_embeddings.cols() != projected.size()) {
    throw DimensionMismatch("token embeddings and projected vector differ in width");
  }
  PromptSequence<Scalar> out;
  out.rows.resize(token_embeddings.rows() + 1, projected.size());
  out.rows.row(0) = projected.transpose();
  if (token_embeddings.rows() > 0) out.rows.bottomRows(token_embeddings.rows()) = token_embeddings;
  out.tags.assign(static_cast<std::size_t>(out.rows.rows()), RowTag::token);
  out.tags[0] = RowTag::soft_prefix;
  return out;
}

template <typename Scalar>
struct ProjectionGradient {
  Matrix<Scalar> d_weights;
  Vector<Scalar> d_bias;
  Vector<Scalar> d_embedding;
};

/// Gradients of <upstream, project(layer, embedding)>.
template <typename Scalar>
ProjectionGradient<Scalar> project_gradient(const ProjectionLayer<Scalar>& layer, const Vector<Scalar>& embedding,
                                            const Vector<Scalar>& upstream) {
  if (embedding.size() != layer.in_dim() || upstream.size() != layer.out_dim()) {
    throw DimensionMismatch("gradient operands do not match the layer shape");
  }
  return {embedding * upstream.transpose(), upstream, layer.weights() * upstream};
}

}  // namespace tikzlab::softprompt
