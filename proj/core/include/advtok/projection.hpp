#pragma once

#include "advtok/types.hpp"

namespace advtok {

/// Controls the bisection root-finding inside the projections. tolerance is
/// on the constraint residual, not on the multiplier.
struct BisectionParams {
  double tolerance = 1e-10;
  int max_iters = 100;
};

/// Euclidean projection onto C1 = { z in [0,1]^L : 1'z <= k }.
///
/// Clips to the box first; if the clipped point already satisfies the budget
/// (ties included) it is returned as-is. Otherwise shifts by a multiplier mu
/// found by bisection on the monotone residual 1'P_[0,1](z - mu*1) - k, with
/// mu bracketed in [0, max_i z_i].
Vector project_c1(const Vector& point, int budget,
                  const BisectionParams& params = {});

/// Euclidean projection onto C2 = { u in [0,1]^m : 1'u = 1 }, via bisection
/// for the multiplier in 1'P_[0,1](u - nu*1) = 1, bracketed in
/// [min_i u_i - 1, max_i u_i].
Vector project_c2(const Vector& point, const BisectionParams& params = {});

/// Exact projections computed by enumerating KKT active-set patterns (each
/// coordinate at-lower-bound, at-upper-bound, or interior). Test oracle;
/// rejects dimensions above 12.
Vector project_oracle_c1(const Vector& point, int budget);
Vector project_oracle_c2(const Vector& point);

}  // namespace advtok
