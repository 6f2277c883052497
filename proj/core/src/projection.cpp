#include "advtok/projection.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "advtok/errors.hpp"

namespace advtok {

namespace {

Vector clip_unit_box(const Vector& v) {
  return v.cwiseMax(0.0).cwiseMin(1.0);
}

double clipped_sum(const Vector& v, double shift) {
  double total = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    const double x = v[i] - shift;
    total += x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
  }
  return total;
}

void require_finite(const Vector& v, const char* who) {
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": input must be finite");
  }
}

/// Bisects shift in [lo, hi] until |clipped_sum(point, shift) - target| is
/// within tolerance. The residual is continuous and non-increasing in shift.
double bisect_shift(const Vector& point, double target, double lo, double hi,
                    const BisectionParams& params, const char* who) {
  for (int iter = 0; iter < params.max_iters; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double residual = clipped_sum(point, mid) - target;
    if (std::abs(residual) <= params.tolerance) return mid;
    if (residual > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw NumericalError(std::string(who) + ": bisection did not reach tolerance " +
                       std::to_string(params.tolerance) + " in " +
                       std::to_string(params.max_iters) + " iterations");
}

}  // namespace

Vector project_c1(const Vector& point, int budget, const BisectionParams& params) {
  if (point.size() < 1) throw std::invalid_argument("project_c1: empty input");
  if (budget < 1) throw std::invalid_argument("project_c1: budget must be >= 1");
  require_finite(point, "project_c1");

  Vector clipped = clip_unit_box(point);
  if (clipped.sum() <= static_cast<double>(budget)) return clipped;

  // Budget active: residual at 0 exceeds k, at max_i z_i it is 0 <= k.
  const double mu = bisect_shift(point, static_cast<double>(budget), 0.0,
                                 point.maxCoeff(), params, "project_c1");
  return clip_unit_box(point.array() - mu);
}

Vector project_c2(const Vector& point, const BisectionParams& params) {
  if (point.size() < 1) throw std::invalid_argument("project_c2: empty input");
  require_finite(point, "project_c2");

  const bool in_box = (point.array() >= 0.0).all() && (point.array() <= 1.0).all();
  if (in_box && std::abs(point.sum() - 1.0) <= params.tolerance) {
    return point;
  }

  const double lo = point.minCoeff() - 1.0;  // residual m - 1 >= 0
  const double hi = point.maxCoeff();        // residual -1
  const double nu = bisect_shift(point, 1.0, lo, hi, params, "project_c2");
  return clip_unit_box(point.array() - nu);
}

namespace {

constexpr int kOracleMaxDim = 12;
constexpr double kKktSlack = 1e-12;

enum CoordState : int { kAtLower = 0, kAtUpper = 1, kInterior = 2 };

/// Enumerates all lower/upper/interior patterns for the KKT system of
///   min ||x - p||^2  s.t.  1'x = target, 0 <= x <= 1,
/// keeping the feasible stationary point closest to p.
bool best_equality_projection(const Vector& p, double target, bool require_positive_mult,
                              Vector* best, double* best_dist) {
  const int n = static_cast<int>(p.size());
  std::vector<int> pattern(static_cast<std::size_t>(n), kAtLower);
  const std::size_t total = [n] {
    std::size_t t = 1;
    for (int i = 0; i < n; ++i) t *= 3;
    return t;
  }();

  bool found = false;
  Vector candidate(n);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    int interior_count = 0;
    int upper_count = 0;
    double interior_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const int s = static_cast<int>(rest % 3);
      rest /= 3;
      pattern[static_cast<std::size_t>(i)] = s;
      if (s == kInterior) {
        ++interior_count;
        interior_sum += p[i];
      } else if (s == kAtUpper) {
        ++upper_count;
      }
    }

    double mult;
    if (interior_count > 0) {
      mult = (interior_sum + static_cast<double>(upper_count) - target) /
             static_cast<double>(interior_count);
    } else {
      if (std::abs(static_cast<double>(upper_count) - target) > kKktSlack) continue;
      // Multiplier only bounded by the inequality conditions below; take the
      // loosest feasible value.
      double mult_lo = -std::numeric_limits<double>::infinity();
      double mult_hi = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (pattern[static_cast<std::size_t>(i)] == kAtLower) {
          mult_lo = std::max(mult_lo, p[i]);
        } else {
          mult_hi = std::min(mult_hi, p[i] - 1.0);
        }
      }
      if (require_positive_mult) mult_lo = std::max(mult_lo, 0.0);
      if (mult_lo > mult_hi + kKktSlack) continue;
      mult = std::min(std::max(0.5 * (mult_lo + mult_hi), mult_lo), mult_hi);
    }
    if (require_positive_mult && !(mult > -kKktSlack)) continue;

    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      switch (pattern[static_cast<std::size_t>(i)]) {
        case kAtLower:
          candidate[i] = 0.0;
          ok = p[i] - mult <= kKktSlack;
          break;
        case kAtUpper:
          candidate[i] = 1.0;
          ok = p[i] - mult >= 1.0 - kKktSlack;
          break;
        default:
          candidate[i] = p[i] - mult;
          ok = candidate[i] >= -kKktSlack && candidate[i] <= 1.0 + kKktSlack;
          break;
      }
    }
    if (!ok) continue;

    const double dist = (candidate - p).squaredNorm();
    if (!found || dist < *best_dist) {
      found = true;
      *best_dist = dist;
      *best = clip_unit_box(candidate);
    }
  }
  return found;
}

void check_oracle_dim(const Vector& p, const char* who) {
  if (p.size() < 1) throw std::invalid_argument(std::string(who) + ": empty input");
  if (p.size() > kOracleMaxDim) {
    throw std::invalid_argument(std::string(who) + ": dimension " +
                                std::to_string(p.size()) + " exceeds oracle limit " +
                                std::to_string(kOracleMaxDim));
  }
  require_finite(p, who);
}

}  // namespace

Vector project_oracle_c1(const Vector& point, int budget) {
  check_oracle_dim(point, "project_oracle_c1");
  if (budget < 1) throw std::invalid_argument("project_oracle_c1: budget must be >= 1");

  // Inactive budget: plain box clipping is the exact projection.
  Vector clipped = clip_unit_box(point);
  if (clipped.sum() <= static_cast<double>(budget) + kKktSlack) return clipped;

  Vector best;
  double best_dist = 0.0;
  if (!best_equality_projection(point, static_cast<double>(budget),
                                /*require_positive_mult=*/true, &best, &best_dist)) {
    throw NumericalError("project_oracle_c1: no feasible KKT pattern found");
  }
  return best;
}

Vector project_oracle_c2(const Vector& point) {
  check_oracle_dim(point, "project_oracle_c2");

  Vector best;
  double best_dist = 0.0;
  if (!best_equality_projection(point, 1.0, /*require_positive_mult=*/false, &best,
                                &best_dist)) {
    throw NumericalError("project_oracle_c2: no feasible KKT pattern found");
  }
  return best;
}

}  // namespace advtok
