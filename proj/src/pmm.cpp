#include "mtp/pmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/LU>

#include "mtp/errors.hpp"

namespace mtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct OrderedCandidate {
  AxisSolution sol;
  double v1 = 0.0;
};

// Every admissible two-phase profile for the ordering a1 -> a2 (both
// roots of the switching velocity).
void orderingCandidates(double ps, double vs, double pe, double ve, double a1, double a2,
                        std::vector<OrderedCandidate>& out) {
  const double dp = pe - ps;
  const double denom = a2 - a1;
  const double num = 2.0 * a1 * a2 * dp + a2 * vs * vs - a1 * ve * ve;
  double v1_sq = num / denom;
  const double scale = 1.0 + vs * vs + ve * ve + std::abs(a1 * dp) + std::abs(a2 * dp);
  if (v1_sq < -1e-12 * scale) return;
  v1_sq = std::max(v1_sq, 0.0);
  const double root = std::sqrt(v1_sq);
  for (double v1 : {root, -root}) {
    double t1 = (v1 - vs) / a1;
    double t2 = (ve - v1) / a2;
    const double tol = 1e-9 * (1.0 + std::abs(t1) + std::abs(t2));
    if (t1 < -tol || t2 < -tol) continue;
    t1 = std::max(t1, 0.0);
    t2 = std::max(t2, 0.0);
    out.push_back(OrderedCandidate{AxisSolution{a1, a2, t1, t1 + t2}, v1});
    if (root == 0.0) break;
  }
}

// Fastest admissible profile for the ordering a1 -> a2.
std::optional<OrderedCandidate> solveOrdering(double ps, double vs, double pe, double ve,
                                              double a1, double a2) {
  std::vector<OrderedCandidate> cands;
  orderingCandidates(ps, vs, pe, ve, a1, a2, cands);
  std::optional<OrderedCandidate> best;
  for (const auto& c : cands)
    if (!best || c.sol.T < best->sol.T) best = c;
  return best;
}

struct AxisDetail {
  AxisSolution sol;
  double v1 = 0.0;
  int ordering = 0;  // 0: +a_plus first, 1: -a_minus first
};

bool isNullMotion(double ps, double vs, double pe, double ve) {
  return ps == pe && vs == ve;
}

// Phase accelerations are signed; ordering 0 applies `first` then `second`,
// ordering 1 the reverse.
std::optional<AxisDetail> solveAxisDetail(double ps, double vs, double pe, double ve,
                                          double first, double second) {
  if (first == second) return std::nullopt;
  const auto c0 = solveOrdering(ps, vs, pe, ve, first, second);
  const auto c1 = solveOrdering(ps, vs, pe, ve, second, first);
  if (!c0 && !c1) return std::nullopt;
  if (c0 && (!c1 || c0->sol.T <= c1->sol.T)) return AxisDetail{c0->sol, c0->v1, 0};
  return AxisDetail{c1->sol, c1->v1, 1};
}

}  // namespace

std::array<double, 3> AxisSolution::sample(double ps, double vs, double t) const {
  t = std::clamp(t, 0.0, T);
  if (t <= t1 && (t < t1 || t1 >= T)) {
    return {ps + vs * t + 0.5 * a1 * t * t, vs + a1 * t, a1};
  }
  const double p1 = ps + vs * t1 + 0.5 * a1 * t1 * t1;
  const double v1 = vs + a1 * t1;
  const double tau = t - t1;
  return {p1 + v1 * tau + 0.5 * a2 * tau * tau, v1 + a2 * tau, a2};
}

std::optional<AxisSolution> solveAxis(double ps, double vs, double pe, double ve,
                                      double a_plus, double a_minus) {
  if (!(a_plus > 0.0) || !(a_minus > 0.0))
    throw std::invalid_argument("axis accelerations must be positive");
  if (isNullMotion(ps, vs, pe, ve)) return AxisSolution{a_plus, -a_minus, 0.0, 0.0};
  const auto d = solveAxisDetail(ps, vs, pe, ve, a_plus, -a_minus);
  if (!d) return std::nullopt;
  return d->sol;
}

std::optional<AxisSolution> stretchAxis(const AxisSolution& sol, const AxisBoundary& bnd,
                                        double t_target) {
  if (t_target < sol.T - 1e-9 * std::max(1.0, sol.T))
    throw std::invalid_argument("stretch target below the axis minimum time");
  if (t_target <= sol.T) return sol;

  const double T = t_target;
  const double dv = bnd.ve - bnd.vs;
  const double P = bnd.pe - bnd.ps - bnd.vs * T;
  const double scale_p = 1.0 + std::abs(bnd.pe - bnd.ps) + std::abs(bnd.vs * T);
  const double scale_v = 1.0 + std::abs(bnd.ve) + std::abs(bnd.vs);
  if (std::abs(dv) <= 1e-12 * scale_v && std::abs(P) <= 1e-12 * scale_p)
    return AxisSolution{0.0, 0.0, T, T};

  std::optional<AxisSolution> best;
  double best_k = kInf;
  const std::array<std::pair<double, double>, 2> orders{
    {{sol.a1, sol.a2}, {sol.a2, sol.a1}}};
  for (const auto& [A1, A2] : orders) {
    if (A1 == A2) continue;
    const double qa = 0.5 * dv * (A2 - A1);
    const double qb = (A1 - A2) * (dv * T - P);
    const double qc = 0.5 * dv * A2 * T * T - P * A2 * T;
    std::vector<double> roots;
    if (std::abs(qa) <= 1e-14 * (std::abs(qb) / std::max(T, 1e-12) + std::abs(qc) / (T * T) + 1e-300)) {
      if (qb != 0.0) roots.push_back(-qc / qb);
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= -1e-12 * (qb * qb + std::abs(4.0 * qa * qc))) {
        const double sq = std::sqrt(std::max(disc, 0.0));
        // numerically stable pair
        const double q = -0.5 * (qb + std::copysign(sq, qb));
        if (q != 0.0) roots.push_back(qc / q);
        roots.push_back(q / qa);
      }
    }
    for (double t1 : roots) {
      const double tol = 1e-9 * T;
      if (!(t1 >= -tol && t1 <= T + tol)) continue;
      t1 = std::clamp(t1, 0.0, T);
      const double t2 = T - t1;
      const double vel_den = A1 * t1 + A2 * t2;
      const double pos_den = 0.5 * A1 * t1 * t1 + A1 * t1 * t2 + 0.5 * A2 * t2 * t2;
      double k;
      if (std::abs(vel_den) > std::abs(pos_den) / std::max(T, 1e-12) * 1e-6 &&
          std::abs(vel_den) > 1e-12) {
        k = dv / vel_den;
      } else if (std::abs(pos_den) > 1e-12) {
        k = P / pos_den;
      } else {
        continue;
      }
      if (!(k >= -1e-12 && k <= 1.0 + 1e-9)) continue;
      k = std::clamp(k, 0.0, 1.0);
      const AxisSolution cand{k * A1, k * A2, t1, T};
      const auto end = cand.sample(bnd.ps, bnd.vs, T);
      if (std::abs(end[0] - bnd.pe) > 1e-7 * scale_p || std::abs(end[1] - bnd.ve) > 1e-7 * scale_v)
        continue;
      if (k < best_k) {
        best_k = k;
        best = cand;
      }
    }
  }
  return best;
}

std::optional<AxisSolution> solveAxisWithThrust(const AxisBoundary& bnd, double thrust,
                                                double g) {
  const double s = std::abs(thrust);
  const double up = s + g;     // thrust along +axis
  const double down = -s + g;  // thrust along -axis
  // Holding still requires the thrust to be able to cancel gravity.
  if (isNullMotion(bnd.ps, bnd.vs, bnd.pe, bnd.ve)) {
    if (s < std::abs(g)) return std::nullopt;
    return AxisSolution{up, down, 0.0, 0.0};
  }
  // When gravity dominates, both phases accelerate the same way; such
  // profiles are still admissible whenever they meet the boundary.
  const auto d = solveAxisDetail(bnd.ps, bnd.vs, bnd.pe, bnd.ve, up, down);
  if (!d) return std::nullopt;
  return d->sol;
}

namespace {

double axisTimeFiniteDiff(const AxisBoundary& bnd, double s, double g) {
  const double h = 1e-6 * std::max(1.0, s);
  const auto up = solveAxisWithThrust(bnd, s + h, g);
  const auto dn = solveAxisWithThrust(bnd, s - h, g);
  if (up && dn) return (up->T - dn->T) / (2.0 * h);
  const auto mid = solveAxisWithThrust(bnd, s, g);
  if (up && mid) return (up->T - mid->T) / h;
  return 0.0;
}

}  // namespace

double axisTimeGradient(const AxisBoundary& bnd, double thrust, double g) {
  const double s = std::abs(thrust);
  if (isNullMotion(bnd.ps, bnd.vs, bnd.pe, bnd.ve)) return 0.0;
  const auto d = solveAxisDetail(bnd.ps, bnd.vs, bnd.pe, bnd.ve, s + g, -s + g);
  if (!d) return 0.0;
  const double a1 = d->sol.a1;
  const double a2 = d->sol.a2;
  const double v1 = d->v1;
  if (std::abs(v1) < 1e-9 || std::abs(a1) < 1e-9 || std::abs(a2) < 1e-9 || d->sol.t1 <= 0.0 ||
      d->sol.t1 >= d->sol.T)
    return axisTimeFiniteDiff(bnd, s, g);
  const double dp = bnd.pe - bnd.ps;
  const double den = a2 - a1;
  const double num = 2.0 * a1 * a2 * dp + a2 * bnd.vs * bnd.vs - a1 * bnd.ve * bnd.ve;
  const double dq_da1 = (2.0 * a2 * dp - bnd.ve * bnd.ve) / den + num / (den * den);
  const double dq_da2 = (2.0 * a1 * dp + bnd.vs * bnd.vs) / den - num / (den * den);
  const double dv1_da1 = dq_da1 / (2.0 * v1);
  const double dv1_da2 = dq_da2 / (2.0 * v1);
  const double inv = 1.0 / a1 - 1.0 / a2;
  const double dT_da1 = -(v1 - bnd.vs) / (a1 * a1) + inv * dv1_da1;
  const double dT_da2 = -(bnd.ve - v1) / (a2 * a2) + inv * dv1_da2;
  // ordering 0: a1 = s + g, a2 = -s + g; ordering 1: a1 = -s + g, a2 = s + g
  const double s1 = d->ordering == 0 ? 1.0 : -1.0;
  const double s2 = -s1;
  return s1 * dT_da1 + s2 * dT_da2;
}

namespace {

AxisBoundary axisBoundary(const PmState& a, const PmState& b, int i) {
  return AxisBoundary{a.p[i], a.v[i], b.p[i], b.v[i]};
}

// Total times of every admissible full-acceleration profile of one axis.
// Stretching can only resume at one of these after an unreachable band.
std::vector<double> axisBranchTimes(const AxisBoundary& bnd, double thrust, double g) {
  std::vector<OrderedCandidate> cands;
  const double s = std::abs(thrust);
  if (s == 0.0) return {};
  orderingCandidates(bnd.ps, bnd.vs, bnd.pe, bnd.ve, s + g, -s + g, cands);
  orderingCandidates(bnd.ps, bnd.vs, bnd.pe, bnd.ve, -s + g, s + g, cands);
  std::vector<double> out;
  for (const auto& c : cands) out.push_back(c.sol.T);
  std::sort(out.begin(), out.end());
  return out;
}

struct CostEval {
  double T = kInf;       // synchronized time
  double T_axes = kInf;  // max of the per-axis minimum times
  int slowest = -1;
  std::array<AxisSolution, 3> axes;    // per-axis minimum-time profiles
  std::array<AxisSolution, 3> synced;  // profiles stretched to T
};

// A stretched profile must stay producible: both phase accelerations
// inside [g - |thrust|, g + |thrust|].
bool withinThrustRange(const AxisSolution& sol, double thrust, double g) {
  const double s = std::abs(thrust);
  const double tol = 1e-9 * (1.0 + s + std::abs(g));
  auto inside = [&](double a) { return a >= g - s - tol && a <= g + s + tol; };
  return inside(sol.a1) && (sol.t1 >= sol.T || inside(sol.a2));
}

constexpr int kMaxSyncAttempts = 16;
constexpr int kFanDirections = 12;
constexpr int kFanHalvings = 6;
constexpr double kFanTrigger = 1e-3;  // relative to a_max

CostEval evaluate(const PmState& start, const PmState& end, const Vec3& a_t, const Vec3& g) {
  CostEval ev;
  std::array<AxisBoundary, 3> bnd;
  double worst = -1.0;
  for (int i = 0; i < 3; ++i) {
    bnd[i] = axisBoundary(start, end, i);
    const auto sol = solveAxisWithThrust(bnd[i], a_t[i], g[i]);
    if (!sol) return CostEval{};
    ev.axes[i] = *sol;
    if (sol->T > worst) {  // ties keep the lowest axis index
      worst = sol->T;
      ev.slowest = i;
    }
  }
  ev.T_axes = worst;

  // Raise the common time until every axis can be stretched onto it.
  double T = worst;
  for (int attempt = 0; attempt < kMaxSyncAttempts; ++attempt) {
    bool all = true;
    double next = kInf;
    for (int i = 0; i < 3; ++i) {
      const auto st = stretchAxis(ev.axes[i], bnd[i], T);
      if (st && withinThrustRange(*st, a_t[i], g[i])) {
        ev.synced[i] = *st;
        continue;
      }
      all = false;
      for (double tb : axisBranchTimes(bnd[i], a_t[i], g[i]))
        if (tb > T) {
          next = std::min(next, tb);
          break;
        }
    }
    if (all) {
      ev.T = T;
      return ev;
    }
    if (!std::isfinite(next)) return CostEval{};
    T = std::max(next * (1.0 + 1e-10), T * (1.0 + 1e-12) + 1e-12);
  }
  return CostEval{};
}

// Smallest-norm point of the convex hull of up to three vectors.
Vec3 minNormCombination(const std::vector<Vec3>& v) {
  if (v.size() == 1) return v[0];
  Vec3 best = v[0];
  auto consider = [&best](const Vec3& c) {
    if (c.squaredNorm() < best.squaredNorm()) best = c;
  };
  for (const auto& x : v) consider(x);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const Vec3 d = v[i] - v[j];
      const double dd = d.squaredNorm();
      if (dd <= 0.0) continue;
      const double lam = std::clamp(-v[j].dot(d) / dd, 0.0, 1.0);
      consider(lam * v[i] + (1.0 - lam) * v[j]);
    }
  if (v.size() == 3) {
    // interior: minimise |v2 + l0 (v0 - v2) + l1 (v1 - v2)|
    const Vec3 e0 = v[0] - v[2], e1 = v[1] - v[2];
    Eigen::Matrix2d A;
    A << e0.dot(e0), e0.dot(e1), e1.dot(e0), e1.dot(e1);
    const Eigen::Vector2d b(-e0.dot(v[2]), -e1.dot(v[2]));
    if (std::abs(A.determinant()) > 1e-14 * (A.norm() * A.norm() + 1e-300)) {
      const Eigen::Vector2d l = A.inverse() * b;
      if (l[0] >= 0.0 && l[1] >= 0.0 && l[0] + l[1] <= 1.0) consider(v[2] + l[0] * e0 + l[1] * e1);
    }
  }
  return best;
}

Vec3 tangentPart(const Vec3& grad, const Vec3& a) {
  return grad - (grad.dot(a) / a.squaredNorm()) * a;
}

Vec3 axisGradient(const PmState& start, const PmState& end, const Vec3& a, const Vec3& g,
                  int i) {
  Vec3 grad = Vec3::Zero();
  const double sign = a[i] < 0.0 ? -1.0 : 1.0;
  grad[i] = sign * axisTimeGradient(axisBoundary(start, end, i), a[i], g[i]);
  return grad;
}

// Central differences of the synchronized cost along the sphere tangent.
Vec3 numericTangentGradient(const PmState& start, const PmState& end, const Vec3& a,
                            const Vec3& g, double a_max) {
  const Vec3 n = a.normalized();
  Vec3 e0 = n.unitOrthogonal();
  Vec3 e1 = n.cross(e0);
  const double h = 1e-6 * a_max;
  Vec3 grad = Vec3::Zero();
  for (const Vec3& e : {e0, e1}) {
    const double fp = evaluate(start, end, a_max * (a + h * e).normalized(), g).T;
    const double fm = evaluate(start, end, a_max * (a - h * e).normalized(), g).T;
    if (std::isfinite(fp) && std::isfinite(fm)) grad += (fp - fm) / (2.0 * h) * e;
  }
  return grad;
}

}  // namespace

double primitiveCost(const PmState& start, const PmState& end, const Vec3& a_t,
                     const Vec3& g) {
  return evaluate(start, end, a_t, g).T;
}

namespace {

PmmPrimitive descend(const PmState& start, const PmState& end, double a_max, const Vec3& g,
                     const GdParams& gd, Vec3 a, CostEval cur) {
  PmmPrimitive prim;
  prim.start = start;
  prim.end = end;
  prim.cost_trace.push_back(cur.T);
  double step = 0.5 * a_max;
  int it = 0;
  for (; it < gd.max_iters; ++it) {
    if (cur.T <= 0.0) {
      prim.converged = true;
      break;
    }
    // Descent candidates, tried in order until one decreases the cost:
    // steepest descent over the nearly-active axes, the slowest axis alone,
    // and a numeric tangent gradient when synchronization raised the time.
    std::vector<Vec3> grads;
    const bool raised = cur.T > cur.T_axes;
    if (raised) grads.push_back(numericTangentGradient(start, end, a, g, a_max));
    std::vector<Vec3> active;
    for (int i = 0; i < 3; ++i)
      if (cur.axes[i].T >= cur.T_axes * (1.0 - 1e-3))
        active.push_back(tangentPart(axisGradient(start, end, a, g, i), a));
    if (active.size() > 1) grads.push_back(minNormCombination(active));
    grads.push_back(tangentPart(axisGradient(start, end, a, g, cur.slowest), a));

    struct Move {
      Vec3 a;
      CostEval eval;
      double h;
    };
    // Backtracking along one tangent direction; first strict decrease wins.
    auto lineSearch = [&](const Vec3& descent, double h0,
                          int halvings) -> std::optional<Move> {
      double h = h0;
      for (int k = 0; k <= halvings; ++k) {
        const Vec3 trial_a = a_max * (a + h * descent).normalized();
        CostEval trial = evaluate(start, end, trial_a, g);
        if (trial.T < cur.T) return Move{trial_a, std::move(trial), h};
        h *= gd.beta;
      }
      return std::nullopt;
    };

    const double h0 = std::min(0.5 * a_max, 2.0 * step);
    std::optional<Move> move;
    for (const Vec3& grad : grads) {
      const double gn = grad.norm();
      if (!(gn > 0.0) || !std::isfinite(gn)) continue;
      move = lineSearch(-grad / gn, h0, gd.max_halvings);
      if (move) break;
    }
    if (gd.fan_probe && (!move || (move->a - a).norm() < kFanTrigger * a_max)) {
      // The time can be bounded by an axis that cannot be stretched past
      // an unreachable band; the gradient then points into that wall.
      // Probe a fan of tangent directions and keep the best decrease.
      const Vec3 n = a.normalized();
      const Vec3 e0 = n.unitOrthogonal();
      const Vec3 e1 = n.cross(e0);
      const double h_fan = std::min(0.5 * a_max, std::max(h0, kFanTrigger * a_max));
      for (int d = 0; d < kFanDirections; ++d) {
        const double phi = 2.0 * M_PI * d / kFanDirections;
        auto trial = lineSearch(std::cos(phi) * e0 + std::sin(phi) * e1, h_fan, kFanHalvings);
        if (trial && (!move || trial->eval.T < move->eval.T)) move = std::move(trial);
      }
    }
    if (!move) {
      prim.converged = true;
      break;
    }
    const Vec3 cand_a = move->a;
    CostEval cand = std::move(move->eval);
    const double h = move->h;
    const double moved = (cand_a - a).norm();
    a = cand_a;
    cur = cand;
    step = h;
    prim.cost_trace.push_back(cur.T);
    if (moved < gd.step_tol * a_max) {
      prim.converged = true;
      ++it;
      break;
    }
  }
  prim.iterations = it;
  prim.a_t = a;
  prim.T = cur.T;
  prim.axes = cur.synced;
  return prim;
}

// Deterministic near-uniform directions (Fibonacci lattice).
const std::vector<Vec3>& coarseDirections() {
  static const std::vector<Vec3> dirs = [] {
    constexpr int n = 96;
    std::vector<Vec3> out;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
    }
    return out;
  }();
  return dirs;
}

}  // namespace

PmmPrimitive solvePrimitive(const PmState& start, const PmState& end, double a_max,
                            const Vec3& g, const GdParams& gd) {
  if (!(a_max > g.norm())) throw std::invalid_argument("a_max must exceed |g|");

  // Primary start: along the displacement with gravity compensation,
  // straight up when degenerate.
  const Vec3 dir = (end.p - start.p) - g;
  const Vec3 a0 = dir.norm() > 1e-12 ? Vec3(a_max * dir.normalized()) : Vec3(a_max * Vec3::UnitZ());
  const CostEval c0 = evaluate(start, end, a0, g);

  // Secondary start: best direction of a coarse sphere scan. The cost is
  // not convex on the sphere, so a single descent can stop in a poor basin.
  Vec3 a1 = a0;
  CostEval c1 = c0;
  for (const auto& d : coarseDirections()) {
    if (!gd.coarse_start && std::isfinite(c0.T)) break;
    const CostEval c = evaluate(start, end, a_max * d, g);
    if (c.T < c1.T) {
      c1 = c;
      a1 = a_max * d;
    }
  }
  if (!std::isfinite(c1.T))
    throw PlanningError(PlanningErrorCode::kInfeasiblePrimitive,
                        "no feasible thrust direction for point-mass primitive");

  std::optional<PmmPrimitive> best;
  if (std::isfinite(c0.T)) best = descend(start, end, a_max, g, gd, a0, c0);
  if (!best || c1.T < best->T) {
    PmmPrimitive alt = descend(start, end, a_max, g, gd, a1, c1);
    if (!best || alt.T < best->T) best = std::move(alt);
  }
  // Axes without motion only need to hold against gravity; hand the rest
  // of their share to the moving axes.
  Vec3 cleaned = best->a_t;
  for (int i = 0; i < 3; ++i)
    if (isNullMotion(start.p[i], start.v[i], end.p[i], end.v[i]) &&
        std::abs(cleaned[i]) >= std::abs(g[i]))
      cleaned[i] = std::copysign(std::abs(g[i]), cleaned[i]);
  if (cleaned != best->a_t && cleaned.norm() > 0.0) {
    cleaned = a_max * cleaned.normalized();
    CostEval c = evaluate(start, end, cleaned, g);
    if (c.T <= best->T) {
      best->a_t = cleaned;
      best->T = c.T;
      best->axes = c.synced;
      if (c.T < best->cost_trace.back()) best->cost_trace.push_back(c.T);
    }
  }
  return *best;
}

PmSample samplePrimitive(const PmmPrimitive& prim, double t) {
  const double tol = 1e-9 * std::max(1.0, prim.T);
  if (t < -tol || t > prim.T + tol) throw std::out_of_range("primitive sample time out of range");
  PmSample s;
  for (int i = 0; i < 3; ++i) {
    const auto r = prim.axes[i].sample(prim.start.p[i], prim.start.v[i], t);
    s.p[i] = r[0];
    s.v[i] = r[1];
    s.a[i] = r[2];
  }
  return s;
}

std::vector<double> primitiveSwitchTimes(const PmmPrimitive& prim) {
  std::vector<double> out;
  for (const auto& ax : prim.axes)
    if (ax.t1 > 0.0 && ax.t1 < prim.T && ax.a1 != ax.a2) out.push_back(ax.t1);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace mtp
