#include "hzdrom/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace hzdrom {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

SectionChart::SectionChart(const RobotModel& model, const FomState& anchor, double clearance)
    : model_(&model), anchor_(anchor), clearance_(clearance) {
  const Eigen::Matrix<double, 1, 5> grad = swing_foot_jacobian(model, anchor.q).row(1);
  grad.cwiseAbs().maxCoeff(&eliminated_);
}

Vec9 SectionChart::to_chart(const FomState& x) const {
  const Vec10 full = x.stacked();
  Vec9 xi;
  for (int i = 0, k = 0; i < 10; ++i)
    if (i != eliminated_) xi(k++) = full(i);
  return xi;
}

FomState SectionChart::from_chart(const Vec9& xi) const {
  Vec10 full;
  for (int i = 0, k = 0; i < 10; ++i) full(i) = i == eliminated_ ? anchor_.q(eliminated_) : xi(k++);
  FomState x = FomState::from_stacked(full);
  for (int it = 0; it < 50; ++it) {
    const double g = fk(*model_, x.q).swing_foot(1) - clearance_;
    if (std::abs(g) < 1e-15) break;
    const double slope = swing_foot_jacobian(*model_, x.q)(1, eliminated_);
    if (slope == 0.0) throw AnalysisError("section chart is singular");
    x.q(eliminated_) -= g / slope;
  }
  return x;
}

namespace {

Vec9 section_residual(const ReturnMap& map, const SectionChart& chart, const Vec9& xi) {
  return chart.to_chart(map(chart.from_chart(xi))) - xi;
}

Mat9 chart_jacobian(const ReturnMap& map, const SectionChart& chart, const Vec9& xi, double h) {
  Mat9 j;
  for (int i = 0; i < 9; ++i) {
    Vec9 plus = xi;
    Vec9 minus = xi;
    plus(i) += h;
    minus(i) -= h;
    j.col(i) = (chart.to_chart(map(chart.from_chart(plus))) - chart.to_chart(map(chart.from_chart(minus)))) /
               (2.0 * h);
  }
  return j;
}

std::vector<double> magnitudes(const Mat9& j) {
  const Eigen::EigenSolver<Mat9> es(j, false);
  std::vector<double> out;
  for (int i = 0; i < 9; ++i) out.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(out.rbegin(), out.rend());
  return out;
}

}  // namespace

Mat9 poincare_jacobian(const ReturnMap& map, const RobotModel& model, const FomState& x, double fd_step) {
  const SectionChart chart(model, x);
  return chart_jacobian(map, chart, chart.to_chart(x), fd_step);
}

std::vector<double> linearize_poincare(const ReturnMap& map, const RobotModel& model, const FomState& x,
                                       double fd_step) {
  return magnitudes(poincare_jacobian(map, model, x, fd_step));
}

OrbitReport find_fixed_point(const ReturnMap& map, const RobotModel& model, const FomState& guess,
                             const FixedPointOptions& opts) {
  const SectionChart chart(model, guess);
  Vec9 xi = chart.to_chart(guess);
  Vec9 f = section_residual(map, chart, xi);
  OrbitReport report;
  int it = 0;
  while (f.norm() >= opts.tol) {
    if (it >= opts.max_iterations) throw AnalysisError("fixed-point Newton did not converge");
    ++it;
    const Mat9 j = chart_jacobian(map, chart, xi, opts.fd_step) - Mat9::Identity();
    const Vec9 step = -j.fullPivLu().solve(f);
    double scale = 1.0;
    bool accepted = false;
    for (int k = 0; k < 12; ++k, scale *= 0.5) {
      const Vec9 trial = xi + scale * step;
      Vec9 f_trial;
      try {
        f_trial = section_residual(map, chart, trial);
      } catch (const SimulationError&) {
        continue;
      }
      if (f_trial.norm() < f.norm()) {
        xi = trial;
        f = f_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) throw AnalysisError("fixed-point line search stalled at residual " + std::to_string(f.norm()));
  }
  report.x_star = chart.from_chart(xi);
  report.iterations = it;
  report.residual = (map(report.x_star).stacked() - report.x_star.stacked()).norm();
  report.eigen_magnitudes = magnitudes(chart_jacobian(map, SectionChart(model, report.x_star),
                                                      SectionChart(model, report.x_star).to_chart(report.x_star),
                                                      opts.fd_step));
  report.stable = report.eigen_magnitudes.front() < 1.0;
  return report;
}

Disturbance hzd_disturbance(const std::vector<Vec2>& z_minus, const XiMap& xi, const StepPolicy& policy) {
  Disturbance out;
  const S2SMatrices ab = s2s_matrices(xi.params());
  for (size_t k = 0; k + 1 < z_minus.size(); ++k) {
    const Vec2 r = xi.inverse(z_minus[k]);
    const Vec2 r_next = ab.a * r + ab.b * policy.step_length(r);
    const Vec2 d = z_minus[k + 1] - xi.forward(r_next);
    out.d.push_back(d);
    out.norms.push_back(d.norm());
    out.sup = std::max(out.sup, d.norm());
  }
  return out;
}

std::vector<Vec2> pre_impact_z(const RobotModel& model, const WalkTrace& walk) {
  std::vector<Vec2> out;
  for (const auto& x : walk.pre_impact_states()) out.push_back(phi_z(model, x));
  return out;
}

double IssReport::bound(int k) const {
  if (errors.empty()) return gamma;
  return m * std::pow(alpha, k) * errors.front() + gamma;
}

IssReport fit_eiss(const std::vector<double>& errors, const std::vector<double>& d_norms) {
  const int n = static_cast<int>(errors.size());
  if (n < 6) throw std::invalid_argument("fit_eiss needs at least 6 samples");
  IssReport rep;
  rep.errors = errors;
  rep.d_norms = d_norms;
  for (double d : d_norms) rep.d_sup = std::max(rep.d_sup, d);

  const int tail = std::max(1, (n + 3) / 4);
  rep.gamma = *std::max_element(errors.end() - tail, errors.end());

  // Fit the transient well above the offset; fall back to every point above it.
  auto collect = [&](double floor) {
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < n; ++k)
      if (errors[k] - rep.gamma > 0.0 && errors[k] >= floor) pts.emplace_back(k, std::log(errors[k] - rep.gamma));
    return pts;
  };
  auto pts = collect(10.0 * rep.gamma);
  if (pts.size() < 2) pts = collect(0.0);
  if (pts.size() < 2) {
    // No transient above the offset, e.g. errors rising into it. Fit the rate
    // at which the errors settle onto their limit instead, ignoring points
    // within ten times the tail spread.
    const auto [lo, hi] = std::minmax_element(errors.end() - tail, errors.end());
    const double noise = 10.0 * (*hi - *lo);
    pts.clear();
    for (int k = 0; k < n; ++k) {
      const double dev = std::abs(errors[k] - rep.gamma);
      if (dev > noise && dev > 0.0) pts.emplace_back(k, std::log(dev));
    }
  }

  const double e0 = errors.front();
  if (pts.size() >= 2 && e0 > 0.0) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double np = static_cast<double>(pts.size());
    const double slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);
    const double icept = (sy - slope * sx) / np;
    rep.alpha = std::exp(slope);
    rep.m = std::exp(icept) / e0;
  } else {
    rep.alpha = 0.0;
    rep.m = 1.0;
  }
  rep.contracting = rep.alpha < 1.0;

  // Enlarge M until the bound dominates every sample.
  if (e0 > 0.0) {
    for (int k = 0; k < n; ++k) {
      const double excess = errors[k] - rep.gamma;
      if (excess <= 0.0) continue;
      const double scale = std::pow(rep.alpha, k) * e0;
      if (scale > 0.0) rep.m = std::max(rep.m, excess / scale * (1.0 + 1e-12));
    }
  }
  rep.bound_holds = true;
  for (int k = 0; k < n; ++k)
    if (errors[k] > rep.bound(k) * (1.0 + 1e-12) + 1e-15) rep.bound_holds = false;
  return rep;
}

IssReport fit_eiss(const std::vector<Vec2>& z, const Vec2& z_star, const std::vector<double>& d_norms) {
  std::vector<double> errors;
  for (const auto& v : z) errors.push_back((v - z_star).norm());
  return fit_eiss(errors, d_norms);
}

namespace {

double point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace

OrbitDistance orbit_distance(const std::vector<Vec2>& samples, const std::vector<Vec2>& reference) {
  if (reference.empty()) throw std::invalid_argument("reference orbit is empty");
  OrbitDistance out;
  if (samples.empty()) return out;
  double sum = 0.0;
  for (const auto& p : samples) {
    double best = (p - reference.front()).norm();
    for (size_t i = 0; i + 1 < reference.size(); ++i) best = std::min(best, point_segment(p, reference[i], reference[i + 1]));
    out.max = std::max(out.max, best);
    sum += best;
  }
  out.mean = sum / samples.size();
  return out;
}

double diameter(const std::vector<Vec2>& points) {
  double d = 0.0;
  for (size_t i = 0; i < points.size(); ++i)
    for (size_t j = i + 1; j < points.size(); ++j) d = std::max(d, (points[i] - points[j]).norm());
  return d;
}

double cycle_closure(const std::vector<std::vector<Vec2>>& curves, int count) {
  if (count < 1 || static_cast<int>(curves.size()) < count + 1) {
    throw std::invalid_argument("cycle_closure needs count + 1 curves");
  }
  const double dia = diameter(curves.back());
  if (!(dia > 0.0)) throw std::invalid_argument("degenerate orbit");
  double worst = 0.0;
  for (size_t k = curves.size() - count; k < curves.size(); ++k) {
    worst = std::max(worst, orbit_distance(curves[k], curves[k - 1]).max);
    worst = std::max(worst, orbit_distance(curves[k - 1], curves[k]).max);
  }
  return worst / dia;
}

double decay_rate(const std::vector<double>& t, const std::vector<double>& h, double floor) {
  if (t.size() != h.size()) throw std::invalid_argument("decay_rate needs paired samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (!(h[i] > floor)) continue;
    const double y = std::log(h[i]);
    sx += t[i];
    sy += y;
    sxx += t[i] * t[i];
    sxy += t[i] * y;
    ++n;
  }
  const double den = n * sxx - sx * sx;
  if (n < 3 || den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return -(n * sxy - sx * sy) / den;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("rank_correlation needs paired samples");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace hzdrom
