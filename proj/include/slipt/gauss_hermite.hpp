#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "slipt/error.hpp"

namespace slipt {

/// Gauss-Hermite rule for the standard normal weight: for Z ~ N(0, 1),
/// E[f(Z)] ~= sum_i weights[i] * f(nodes[i]). Weights sum to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
// polynomials: zero diagonal, off-diagonal sqrt(k).
inline GaussHermiteRule build_gauss_hermite(std::size_t n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd sub(static_cast<Eigen::Index>(n > 1 ? n - 1 : 0));
  for (Eigen::Index k = 0; k < sub.size(); ++k) {
    sub[k] = std::sqrt(static_cast<double>(k + 1));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (eig.info() != Eigen::Success) {
    throw ConfigError("Gauss-Hermite eigen decomposition failed");
  }
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    rule.nodes[i] = eig.eigenvalues()[ii];
    const double v = eig.eigenvectors()(0, ii);
    rule.weights[i] = v * v;
    total += rule.weights[i];
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

}  // namespace detail

/// Cached rule with `n` nodes. Thread-safe; the returned reference stays valid
/// for the lifetime of the program.
inline const GaussHermiteRule& gauss_hermite(std::size_t n) {
  if (n == 0) throw ConfigError("Gauss-Hermite rule needs at least one node");
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<const GaussHermiteRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<const GaussHermiteRule>(detail::build_gauss_hermite(n));
  }
  return *slot;
}

}  // namespace slipt
