#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace predframe {

/// Axis-aligned box [lower, upper].
struct Box {
  Eigen::VectorXd lower, upper;

  Eigen::VectorXd project(Eigen::VectorXd x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
  /// True if some coordinate sits on a face of the box.
  bool on_boundary(const Eigen::VectorXd& x, double tol = 1e-9) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x[i] <= lower[i] + tol || x[i] >= upper[i] - tol) return true;
    }
    return false;
  }
};

struct SimplexResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead minimization with every trial point projected onto `box`.
///
/// Stops when both the spread of objective values and the sup-norm size of the
/// simplex fall below their tolerances.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                                 const Box& box, int max_iters, double ftol, double xtol) {
  const Eigen::Index n = start.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1));
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  SimplexResult res;

  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };

  pts[0] = box.project(start);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd p = pts[0];
    p[i] += step[i];
    if (p[i] > box.upper[i]) p[i] = pts[0][i] - step[i];
    pts[static_cast<std::size_t>(i + 1)] = box.project(p);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    double size = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      size = std::max(size, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
    }
    if (std::abs(vals[worst] - vals[best]) <= ftol * (1.0 + std::abs(vals[best])) && size <= xtol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = box.project(centroid + (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = box.project(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = outside ? box.project(centroid + 0.5 * (xr - centroid))
                                       : box.project(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    // Shrink towards the best vertex.
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = box.project(pts[best] + 0.5 * (pts[i] - pts[best]));
      vals[i] = eval(pts[i]);
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.f = *it;
  return res;
}

}  // namespace predframe
