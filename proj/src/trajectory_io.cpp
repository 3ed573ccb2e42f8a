#include "mtp/trajectory_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mtp {

namespace {

constexpr const char* kHeader = "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,f1,f2,f3,f4";

QuadState integrate(QuadState x, const MotorCommand& f, double duration, double max_step,
                    const QuadParams& params) {
  if (duration <= 0.0) return x;
  const int n = std::max(1, static_cast<int>(std::ceil(duration / max_step - 1e-9)));
  const double h = duration / n;
  for (int i = 0; i < n; ++i) x = rk4Step(x, f, h, params);
  return x;
}

}  // namespace

std::vector<TrajectorySample> resampleTrajectory(const QuadTrajectory& traj, double dt_out,
                                                 const QuadParams& params) {
  if (!(dt_out > 0.0)) throw std::invalid_argument("output step must be positive");
  const auto& s = traj.samples;
  std::vector<TrajectorySample> rows;
  if (s.empty()) return rows;
  constexpr double kSame = 1e-9;  // s, times closer than this coincide
  long k = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double t0 = s[i].t, t1 = s[i + 1].t;
    const bool switches = i == 0 || s[i].f != s[i - 1].f;
    if (s[i].node || switches || std::abs(k * dt_out - t0) < kSame) rows.push_back(s[i]);
    while (k * dt_out < t0 + kSame) ++k;
    for (; k * dt_out < t1 - kSame; ++k) {
      const double t = k * dt_out;
      TrajectorySample row;
      row.t = t;
      row.x = integrate(s[i].x, s[i].f, t - t0, t1 - t0, params);
      row.f = s[i].f;
      rows.push_back(row);
    }
  }
  rows.push_back(s.back());
  return rows;
}

void writeTrajectoryCsv(std::ostream& out, const std::vector<TrajectorySample>& rows) {
  out << kHeader << '\n';
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.9g", v == 0.0 ? 0.0 : v);  // no "-0"
    out << buf << sep;
  };
  for (const auto& r : rows) {
    put(r.t, ',');
    for (int i = 0; i < 3; ++i) put(r.x.p[i], ',');
    put(r.x.q.w(), ',');
    put(r.x.q.x(), ',');
    put(r.x.q.y(), ',');
    put(r.x.q.z(), ',');
    for (int i = 0; i < 3; ++i) put(r.x.v[i], ',');
    for (int i = 0; i < 3; ++i) put(r.x.w[i], ',');
    for (int i = 0; i < 4; ++i) put(r.f[i], i == 3 ? '\n' : ',');
  }
}

void saveTrajectoryCsv(const std::string& path, const std::vector<TrajectorySample>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  writeTrajectoryCsv(out, rows);
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<TrajectorySample> readTrajectoryCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TrajectoryFormatError("empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw TrajectoryFormatError("unexpected trajectory header: " + line);
  std::vector<TrajectorySample> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::array<double, 18> v{};
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      if (n >= v.size()) throw TrajectoryFormatError("too many columns on line " + std::to_string(lineno));
      try {
        std::size_t used = 0;
        v[n] = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw TrajectoryFormatError("bad number on line " + std::to_string(lineno));
      }
      ++n;
    }
    if (n != v.size()) throw TrajectoryFormatError("expected 18 columns on line " + std::to_string(lineno));
    TrajectorySample r;
    r.t = v[0];
    r.x.p = Vec3(v[1], v[2], v[3]);
    r.x.q = Quat(v[4], v[5], v[6], v[7]);
    r.x.v = Vec3(v[8], v[9], v[10]);
    r.x.w = Vec3(v[11], v[12], v[13]);
    r.f = MotorCommand(v[14], v[15], v[16], v[17]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<TrajectorySample> loadTrajectoryCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return readTrajectoryCsv(in);
}

void VerifyReport::fail(std::string what) {
  ok = false;
  if (violations.size() < 20) violations.push_back(std::move(what));
  ++violation_count;
}

VerifyReport verifyTrajectory(const std::vector<TrajectorySample>& rows, const EsdfGrid& esdf,
                              const GoalSequence& goals, const QuadParams& params,
                              const VerifyParams& verify) {
  VerifyReport rep;
  rep.rows = rows.size();
  if (rows.empty()) {
    rep.fail("trajectory has no rows");
    return rep;
  }
  char buf[256];
  rep.min_clearance = std::numeric_limits<double>::infinity();
  std::size_t next_goal = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i > 0 && !(r.t > rows[i - 1].t)) {
      std::snprintf(buf, sizeof(buf), "row %zu: time %.9g not increasing", i, r.t);
      rep.fail(buf);
    }
    if (std::abs(r.x.q.norm() - 1.0) > 1e-6) {
      std::snprintf(buf, sizeof(buf), "row %zu: quaternion norm %.9g", i, r.x.q.norm());
      rep.fail(buf);
    }
    for (int m = 0; m < 4; ++m)
      if (!(r.f[m] >= params.f_min && r.f[m] <= params.f_max)) {
        std::snprintf(buf, sizeof(buf), "row %zu: motor %d thrust %.9g outside [%g, %g]", i,
                      m + 1, r.f[m], params.f_min, params.f_max);
        rep.fail(buf);
      }
    for (int j = 0; j < 3; ++j)
      if (!(std::abs(r.x.w[j]) <= params.w_max)) {
        std::snprintf(buf, sizeof(buf), "row %zu: body rate %d = %.9g exceeds %g", i, j,
                      r.x.w[j], params.w_max);
        rep.fail(buf);
      }
    const double d = esdf.distanceAt(r.x.p).value_or(-1.0);
    rep.min_clearance = std::min(rep.min_clearance, d);
    if (!esdf.isPositionFree(r.x.p, verify.d_c)) {
      std::snprintf(buf, sizeof(buf), "row %zu: position (%.4f, %.4f, %.4f) clearance %.4f < %g",
                    i, r.x.p.x(), r.x.p.y(), r.x.p.z(), d, verify.d_c);
      rep.fail(buf);
    }
    while (next_goal < goals.size() &&
           (r.x.p - goals.positions[next_goal]).norm() <= verify.r_tol)
      ++next_goal;
    if (i + 1 < rows.size()) {
      const auto& nx = rows[i + 1];
      const QuadState pred =
        integrate(r.x, r.f, nx.t - r.t, verify.dt_int * (1.0 + 1e-9), params);
      const double ep = (pred.p - nx.x.p).norm();
      const double ev = (pred.v - nx.x.v).norm();
      const double eq = attitudeDistance(pred.q, nx.x.q);
      const double ew = (pred.w - nx.x.w).norm();
      rep.max_dynamics_error = std::max(rep.max_dynamics_error, ep);
      if (ep > verify.position_tol || ev > verify.velocity_tol || eq > verify.attitude_tol ||
          ew > verify.rate_tol) {
        std::snprintf(buf, sizeof(buf),
                      "rows %zu-%zu: dynamics mismatch |dp| %.3g |dv| %.3g angle %.3g |dw| %.3g",
                      i, i + 1, ep, ev, eq, ew);
        rep.fail(buf);
      }
    }
  }
  rep.goals_reached = next_goal;
  if (next_goal < goals.size()) {
    std::snprintf(buf, sizeof(buf), "goals reached in order: %zu of %zu", next_goal,
                  goals.size());
    rep.fail(buf);
  }
  return rep;
}

}  // namespace mtp
