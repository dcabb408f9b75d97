#pragma once

// Lawson-Hanson active-set solver for min ||A x - y||_2 subject to x >= 0.

#include <Eigen/Dense>

#include <vector>

namespace resid::detail {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_sq = 0.0;
  bool converged = true;
};

inline NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, int max_iter = 0) {
  const Eigen::Index n = a.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 10);
  const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) * std::max(1.0, y.cwiseAbs().maxCoeff());

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  NnlsResult out;

  // Least squares restricted to the passive columns; other entries are 0.
  auto solve_passive = [&]() {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    const Eigen::VectorXd zsub = sub.colPivHouseholderQr().solve(y);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = zsub[static_cast<Eigen::Index>(k)];
    return z;
  };

  int outer = 0;
  for (;;) {
    const Eigen::VectorXd w = a.transpose() * (y - a * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    if (++outer > max_iter) {
      out.converged = false;
      break;
    }
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner <= max_iter; ++inner) {
      Eigen::VectorXd z = solve_passive();
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) feasible = false;
      }
      if (feasible) {
        x = z;
        break;
      }
      // Step from x toward z until the first passive coordinate hits zero.
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          const double denom = x[j] - z[j];
          if (denom > 0.0) alpha = std::min(alpha, x[j] / denom);
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
    // The newly added column may have been dropped again immediately when
    // the problem is degenerate; stop instead of cycling.
    if (!passive[static_cast<std::size_t>(best)]) break;
  }
  out.x = x.cwiseMax(0.0);
  out.residual_sq = (y - a * out.x).squaredNorm();
  return out;
}

}  // namespace resid::detail
