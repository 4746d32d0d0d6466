#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "hzdrom/embedding.hpp"
#include "hzdrom/hlip.hpp"
#include "hzdrom/hybrid.hpp"

namespace hzdrom {

/// Newton or fitting procedure failed to converge.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ReturnMap = std::function<FomState(const FomState&)>;

/// Local 9-dimensional chart of the impact section {guard = clearance}.
/// The q coordinate with the steepest guard gradient at the anchor is
/// eliminated and recovered by a scalar Newton solve.
class SectionChart {
 public:
  SectionChart(const RobotModel& model, const FomState& anchor, double clearance = 0.0);

  Eigen::Matrix<double, 9, 1> to_chart(const FomState& x) const;
  FomState from_chart(const Eigen::Matrix<double, 9, 1>& xi) const;
  int eliminated() const { return eliminated_; }

 private:
  const RobotModel* model_;
  FomState anchor_;
  double clearance_;
  int eliminated_;
};

struct FixedPointOptions {
  double tol = 1e-8;
  double fd_step = 1e-6;
  int max_iterations = 50;
};

struct OrbitReport {
  FomState x_star;
  double period = 0.0;
  double residual = 0.0;
  int iterations = 0;
  /// Section eigenvalue magnitudes, descending.
  std::vector<double> eigen_magnitudes;
  bool stable = false;
};

/// Damped Newton on pi(P(c(xi))) - xi. The reported residual is the full
/// |P(x*) - x*| re-evaluated at the solution. Throws AnalysisError when the
/// tolerance is not reached.
OrbitReport find_fixed_point(const ReturnMap& poincare_map, const RobotModel& model, const FomState& guess,
                             const FixedPointOptions& opts = {});

/// Central-difference Jacobian of P on the section chart at x.
Eigen::Matrix<double, 9, 9> poincare_jacobian(const ReturnMap& poincare_map, const RobotModel& model,
                                              const FomState& x, double fd_step = 1e-6);
/// Eigenvalue magnitudes of that Jacobian, descending.
std::vector<double> linearize_poincare(const ReturnMap& poincare_map, const RobotModel& model, const FomState& x,
                                       double fd_step = 1e-6);

struct Disturbance {
  std::vector<Vec2> d;
  std::vector<double> norms;
  double sup = 0.0;
};

/// d_k = z_{k+1} - Xi(Q_cl(Xi^{-1}(z_k))) over consecutive pre-impact z.
Disturbance hzd_disturbance(const std::vector<Vec2>& z_minus, const XiMap& xi, const StepPolicy& policy);
std::vector<Vec2> pre_impact_z(const RobotModel& model, const WalkTrace& walk);

struct IssReport {
  double m = 1.0;
  double alpha = 0.0;
  double gamma = 0.0;
  std::vector<double> errors;
  std::vector<double> d_norms;
  double d_sup = 0.0;
  bool contracting = false;
  bool bound_holds = false;

  double bound(int k) const;
};

/// Empirical |z_k - z*| <= M alpha^k |z_0 - z*| + gamma. Needs >= 6 samples.
IssReport fit_eiss(const std::vector<double>& errors, const std::vector<double>& d_norms = {});
IssReport fit_eiss(const std::vector<Vec2>& z, const Vec2& z_star, const std::vector<double>& d_norms = {});

struct OrbitDistance {
  double max = 0.0;
  double mean = 0.0;
};

/// Distance from each sample to the reference polyline.
OrbitDistance orbit_distance(const std::vector<Vec2>& samples, const std::vector<Vec2>& reference);
double diameter(const std::vector<Vec2>& points);

/// Largest max-distance between consecutive curves among the last `count`
/// pairs, relative to the diameter of the final curve.
double cycle_closure(const std::vector<std::vector<Vec2>>& curves, int count);

/// Exponential rate of |h(t)| from a log-linear least-squares fit over the
/// samples above floor. NaN with fewer than 3 such samples.
double decay_rate(const std::vector<double>& t, const std::vector<double>& h, double floor = 1e-9);

/// Spearman rank correlation (average ranks for ties).
double rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace hzdrom
