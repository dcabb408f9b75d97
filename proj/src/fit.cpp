#include "resid/decay.hpp"
#include "resid/dist.hpp"
#include "resid/error.hpp"

#include "nnls.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace resid {

void FitConfig::validate() const {
  if (max_iterations < 1) throw ParameterError("max_iterations must be >= 1");
  if (!(loss_tolerance > 0.0)) throw ParameterError("loss_tolerance must be > 0");
  if (num_restarts < 1) throw ParameterError("num_restarts must be >= 1");
  if (!(parameter_bound > 0.0) || !std::isfinite(parameter_bound)) {
    throw ParameterError("parameter_bound must be positive and finite");
  }
}

namespace {

// A curve is linear in its non-negative coefficients (z, b * a_half,
// b * a_1..b * a_K) once (q, g) are fixed, so the fit projects out that
// block with non-negative least squares and searches only over (q, g).
// (q, g) live in log coordinates, which keeps them non-negative.
constexpr double kMinParam = 1e-12;
constexpr int kScreenedStarts = 32;

class Projector {
 public:
  Projector(CurveKind kind, std::size_t degree, const std::vector<double>& sizes,
            const std::vector<double>& targets, double bound)
      : kind_(kind),
        degree_(kind == CurveKind::fractional_polynomial ? degree : 0),
        sizes_(sizes),
        targets_(Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()))),
        bound_(bound),
        v_lo_(std::log(kMinParam)),
        v_hi_(std::log(bound)) {}

  Eigen::Index rows() const { return targets_.size(); }

  Eigen::Vector2d clamp(Eigen::Vector2d v) const { return v.cwiseMax(v_lo_).cwiseMin(v_hi_); }

  Eigen::MatrixXd design(double q, double g) const {
    const auto cols = static_cast<Eigen::Index>(kind_ == CurveKind::fractional_polynomial ? degree_ + 2 : 2);
    Eigen::MatrixXd m(rows(), cols);
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double y = q * (sizes_[static_cast<std::size_t>(i)] - g);
      m(i, 0) = 1.0;
      switch (kind_) {
        case CurveKind::fractional_polynomial: {
          const double x = std::max(1.0, y);
          m(i, 1) = 1.0 / std::sqrt(x);
          double inv = 1.0;
          for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(degree_); ++k) {
            inv /= x;
            m(i, 2 + k) = inv;
          }
          break;
        }
        case CurveKind::exponential:
          m(i, 1) = std::exp(-std::max(0.0, y));
          break;
        case CurveKind::logistic:
          m(i, 1) = 1.0 / (1.0 + std::exp(std::max(0.0, y)));
          break;
      }
    }
    return m;
  }

  struct Projection {
    Eigen::VectorXd coef;
    Eigen::VectorXd residual;
    double sum_sq = std::numeric_limits<double>::infinity();
  };

  // Best non-negative coefficients for log-coordinates v = (log q, log g).
  // A projection whose amplitude exceeds the parameter bound is infeasible.
  Projection project(const Eigen::Vector2d& v) const {
    const double q = std::exp(v[0]);
    const double g = std::exp(v[1]);
    const Eigen::MatrixXd m = design(q, g);
    auto sol = detail::nnls(m, targets_);
    Projection p;
    p.coef = std::move(sol.x);
    if (p.coef[0] > bound_ || p.coef.tail(p.coef.size() - 1).sum() > bound_ || !p.coef.allFinite()) return p;
    p.residual = targets_ - m * p.coef;
    p.sum_sq = p.residual.squaredNorm();
    return p;
  }

  DecayCurve assemble(const Eigen::Vector2d& v, const Eigen::VectorXd& coef) const {
    DecayCurve c;
    c.kind = kind_;
    c.q = std::exp(v[0]);
    c.g = std::exp(v[1]);
    c.z = coef[0];
    const double amplitude = coef.tail(coef.size() - 1).sum();
    if (kind_ == CurveKind::fractional_polynomial) c.a.assign(degree_, 0.0);
    if (amplitude <= 0.0) {
      c.b = 0.0;
      return c;
    }
    if (kind_ == CurveKind::fractional_polynomial) {
      // b carries the amplitude; the shape weights a sum to 1.
      c.b = amplitude;
      c.a_half = coef[1] / amplitude;
      for (std::size_t k = 0; k < degree_; ++k) c.a[k] = coef[static_cast<Eigen::Index>(k) + 2] / amplitude;
    } else {
      c.b = coef[1];
    }
    return c;
  }

 private:
  CurveKind kind_;
  std::size_t degree_;
  const std::vector<double>& sizes_;
  Eigen::VectorXd targets_;
  double bound_;
  double v_lo_;
  double v_hi_;
};

double sum_squares(const DecayCurve& c, const std::vector<double>& sizes,
                   const std::vector<double>& targets) {
  double sq = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double r = targets[i] - c.eval(sizes[i]);
    sq += r * r;
  }
  return sq;
}

double rmse_of(double sum_sq, std::size_t n) {
  return std::sqrt(sum_sq / static_cast<double>(n));
}

// When every observed size sits on the curve's initial plateau the data
// carries no evidence of decay; fold the plateau height into z so the
// asymptote is the observed level. Eval at the observed sizes is unchanged.
void fold_observed_plateau(DecayCurve& c, const std::vector<double>& sizes) {
  const double knee = c.kind == CurveKind::fractional_polynomial ? 1.0 : 0.0;
  for (double s : sizes) {
    if (c.q * (s - c.g) > knee) return;
  }
  c.z = c.eval(sizes.front());
  c.b = 0.0;
}

// Levenberg-Marquardt on the projected residual over v = (log q, log g),
// with a central finite-difference Jacobian.
Eigen::Vector2d search_knee(const Projector& proj, Eigen::Vector2d v, std::size_t n_points,
                            const FitConfig& config) {
  v = proj.clamp(v);
  auto current = proj.project(v);
  if (!std::isfinite(current.sum_sq)) return v;
  double lambda = 1e-2;
  const double h = 1e-6;
  Eigen::MatrixXd jac(proj.rows(), 2);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    bool jac_ok = true;
    for (Eigen::Index j = 0; j < 2 && jac_ok; ++j) {
      Eigen::Vector2d hi = v;
      Eigen::Vector2d lo = v;
      hi[j] += h;
      lo[j] -= h;
      const auto ph = proj.project(hi);
      const auto pl = proj.project(lo);
      if (!std::isfinite(ph.sum_sq) || !std::isfinite(pl.sum_sq)) {
        jac_ok = false;
        break;
      }
      // d residual / d v; the model's derivative is its negative.
      jac.col(j) = -(ph.residual - pl.residual) / (2.0 * h);
    }
    if (!jac_ok) break;
    const Eigen::Matrix2d jtj = jac.transpose() * jac;
    const Eigen::Vector2d jtr = jac.transpose() * current.residual;
    if (jtr.cwiseAbs().maxCoeff() < 1e-15) break;

    bool accepted = false;
    double improvement = 0.0;
    while (lambda < 1e10) {
      Eigen::Matrix2d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector2d step = damped.ldlt().solve(jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::Vector2d trial = proj.clamp(v + step);
      auto next = proj.project(trial);
      if (next.sum_sq < current.sum_sq) {
        improvement = rmse_of(current.sum_sq, n_points) - rmse_of(next.sum_sq, n_points);
        v = trial;
        current = std::move(next);
        lambda = std::max(lambda / 3.0, 1e-9);
        accepted = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted || improvement < config.loss_tolerance) break;
  }
  return v;
}

Eigen::Vector2d initial_knee(const std::vector<double>& sizes, Rng& rng) {
  const double log_q = std::log(0.01) + (std::log(10.0) - std::log(0.01)) * uniform01(rng);
  const double top = sizes.back();
  const double g = top > 0.0 ? top * uniform01(rng)
                             : std::exp(std::log(0.01) + (std::log(10.0) - std::log(0.01)) * uniform01(rng));
  return {log_q, std::log(std::max(g, kMinParam))};
}

}  // namespace

FitResult fit_curve(const EntropyProfile& profile, const ModelFamilySpec& family, CurveKind kind,
                    std::size_t degree, const FitConfig& config) {
  family.validate();
  config.validate();
  profile.validate(family);
  if (kind == CurveKind::fractional_polynomial && degree < 1) {
    throw ParameterError("fractional polynomial degree K must be >= 1");
  }

  const Projector proj(kind, degree, family.sizes, profile.entropies, config.parameter_bound);
  Rng rng(derive_seed(config.rng_seed, profile.context_id, profile.position));

  // The best constant is always feasible and seeds the comparison.
  double mean = 0.0;
  for (double e : profile.entropies) mean += e;
  mean /= static_cast<double>(profile.entropies.size());
  FitResult result{flat_curve(mean, kind, degree), 0.0, {}};
  result.loss = rmse_of(sum_squares(result.curve, family.sizes, profile.entropies), family.size());

  result.restart_losses.reserve(static_cast<std::size_t>(config.num_restarts));
  for (int r = 0; r < config.num_restarts; ++r) {
    // Screen a batch of random knees and start the local search from the best.
    Eigen::Vector2d start = initial_knee(family.sizes, rng);
    double start_sq = proj.project(start).sum_sq;
    for (int c = 1; c < kScreenedStarts; ++c) {
      const Eigen::Vector2d cand = initial_knee(family.sizes, rng);
      const double sq = proj.project(cand).sum_sq;
      if (sq < start_sq) {
        start = cand;
        start_sq = sq;
      }
    }
    const Eigen::Vector2d v = search_knee(proj, start, family.size(), config);
    const auto projection = proj.project(v);
    double loss = std::numeric_limits<double>::infinity();
    if (std::isfinite(projection.sum_sq)) {
      DecayCurve curve = proj.assemble(v, projection.coef);
      fold_observed_plateau(curve, family.sizes);
      loss = rmse_of(sum_squares(curve, family.sizes, profile.entropies), family.size());
      if (loss < result.loss) {
        result.loss = loss;
        result.curve = std::move(curve);
      }
    }
    result.restart_losses.push_back(loss);
  }
  return result;
}

}  // namespace resid
