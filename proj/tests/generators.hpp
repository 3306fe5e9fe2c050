#pragma once
// Random inputs shared by the unit tests and the acceptance binary.

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tikzlab/bws.hpp"

namespace gen {

// Tuples of four distinct items with uniformly random best and worst picks.
// Each item appears in about `per_item` tuples.
inline std::vector<tikzlab::bws::AnnotationRecord> random_annotations(std::size_t items, std::size_t per_item,
                                                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<tikzlab::bws::AnnotationRecord> out;
  std::vector<std::size_t> order(items);
  std::size_t tuple = 0;
  for (std::size_t round = 0; round < per_item; ++round) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k + 4 <= items; k += 4) {
      tikzlab::bws::AnnotationRecord r;
      r.tuple_id = "t" + std::to_string(tuple++);
      for (std::size_t j = 0; j < 4; ++j) r.items[j] = "item" + std::to_string(order[k + j]);
      const auto b = rng() % 4;
      auto w = rng() % 3;
      if (w >= b) ++w;
      r.best = r.items[b];
      r.worst = r.items[w];
      r.annotator = "a" + std::to_string(rng() % 7);
      out.push_back(r);
    }
  }
  return out;
}

inline Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double shift) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = normal(rng) + shift;
  return m;
}

}  // namespace gen
