#include "cell/kinematics.hpp"

#include "cell/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace cell::kinematics {
namespace {

using Transform = Eigen::Isometry3d;

Transform dh_transform(const DhRow& row, double theta_rad) {
  Transform t = Transform::Identity();
  t.rotate(Eigen::AngleAxisd(row.alpha_rad, Eigen::Vector3d::UnitX()));
  t.translate(Eigen::Vector3d(row.a_mm, 0.0, 0.0));
  t.rotate(Eigen::AngleAxisd(theta_rad + row.theta_offset_rad, Eigen::Vector3d::UnitZ()));
  t.translate(Eigen::Vector3d(0.0, 0.0, row.d_mm));
  return t;
}

// frames[i] is the base-frame pose of joint frame i+1; frames[6] is the TCP.
std::array<Transform, 7> chain(const ArmModel& model, const JointVector& q) {
  std::array<Transform, 7> frames;
  Transform t = Transform::Identity();
  for (std::size_t i = 0; i < 6; ++i) {
    t = t * dh_transform(model.dh[i], q[i] * kDegToRad);
    frames[i] = t;
  }
  frames[6] = t * Eigen::Translation3d(0.0, 0.0, model.tool_mm);
  return frames;
}

// World-frame rotation vector taking `from` onto `to`.
Eigen::Vector3d rotation_error(const Eigen::Quaterniond& from, const Eigen::Quaterniond& to) {
  Eigen::Quaterniond rel = to * from.conjugate();
  if (rel.w() < 0) rel.coeffs() *= -1.0;
  const double s = rel.vec().norm();
  if (s < 1e-15) return 2.0 * rel.vec();
  const double angle = 2.0 * std::atan2(s, rel.w());
  return rel.vec() * (angle / s);
}

// Bring each angle into its limit window by whole turns when possible.
void wrap_into_limits(const ArmModel& model, JointVector& q) {
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& lim = model.limits[i];
    while (q[i] > lim.max_deg && q[i] - 360.0 >= lim.min_deg) q[i] -= 360.0;
    while (q[i] < lim.min_deg && q[i] + 360.0 <= lim.max_deg) q[i] += 360.0;
  }
}

}  // namespace

double ArmModel::max_reach_mm() const {
  double reach = std::abs(tool_mm);
  for (const auto& row : dh) reach += std::hypot(row.a_mm, row.d_mm);
  return reach;
}

bool ArmModel::within_limits(const JointVector& q) const {
  for (std::size_t i = 0; i < 6; ++i) {
    if (!(q[i] >= limits[i].min_deg && q[i] <= limits[i].max_deg)) return false;
  }
  return true;
}

void ArmModel::validate() const {
  for (std::size_t i = 0; i < 6; ++i) {
    if (!(limits[i].min_deg < limits[i].max_deg)) {
      throw ConfigError("joint " + std::to_string(i + 1) + " limit min must be below max");
    }
  }
  if (!(max_reach_mm() > 0.0)) throw ConfigError("arm model has zero reach");
}

ArmModel ArmModel::default_model() {
  ArmModel m;
  m.id = "desk6r";
  constexpr double r = kDegToRad;
  m.dh = {{
      {0.0, 0.0, 265.0, 0.0},
      {0.0, -90.0 * r, 0.0, -90.0 * r},
      {444.0, 0.0, 0.0, 0.0},
      {110.0, -90.0 * r, 470.0, 0.0},
      {0.0, 90.0 * r, 0.0, 0.0},
      {0.0, -90.0 * r, 0.0, 0.0},
  }};
  m.limits = {{{-180.0, 180.0}, {-100.0, 130.0}, {-180.0, 70.0}, {-270.0, 270.0}, {-130.0, 130.0}, {-270.0, 270.0}}};
  m.tool_mm = 101.0;
  return m;
}

ArmModel ArmModel::parse(std::istream& in) {
  ArmModel m;
  m.tool_mm = 0.0;
  std::size_t rows = 0, lims = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto fail = [&](const std::string& what) {
      return ConfigError("arm model line " + std::to_string(lineno) + ": " + what);
    };
    if (key == "id") {
      if (!(ls >> m.id)) throw fail("id needs a value");
    } else if (key == "dh") {
      if (rows == 6) throw fail("more than six dh rows");
      double a, alpha, d, off;
      if (!(ls >> a >> alpha >> d >> off)) throw fail("dh needs a alpha_deg d offset_deg");
      m.dh[rows++] = {a, alpha * kDegToRad, d, off * kDegToRad};
    } else if (key == "limit") {
      if (lims == 6) throw fail("more than six limits");
      double lo, hi;
      if (!(ls >> lo >> hi)) throw fail("limit needs min_deg max_deg");
      m.limits[lims++] = {lo, hi};
    } else if (key == "tool") {
      if (!(ls >> m.tool_mm)) throw fail("tool needs d_mm");
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (rows != 6 || lims != 6) throw ConfigError("arm model needs six dh rows and six limits");
  m.validate();
  return m;
}

ArmModel ArmModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open arm model '" + path + "'");
  return parse(in);
}

RobotPose fk(const ArmModel& model, const JointVector& q) {
  const Transform tcp = chain(model, q)[6];
  RobotPose p;
  p.position_mm = tcp.translation();
  p.orientation = Eigen::Quaterniond(tcp.rotation());
  p.orientation.normalize();
  return p;
}

Jacobian jacobian(const ArmModel& model, const JointVector& q) {
  const auto frames = chain(model, q);
  const Eigen::Vector3d tip = frames[6].translation();
  Jacobian j;
  for (std::size_t i = 0; i < 6; ++i) {
    const Eigen::Vector3d z = frames[i].linear().col(2);
    const Eigen::Vector3d o = frames[i].translation();
    j.block<3, 1>(0, static_cast<Eigen::Index>(i)) = z.cross(tip - o);
    j.block<3, 1>(3, static_cast<Eigen::Index>(i)) = z;
  }
  return j;
}

double jacobian_determinant(const ArmModel& model, const JointVector& q) {
  return jacobian(model, q).partialPivLu().determinant();
}

double manipulability(const ArmModel& model, const JointVector& q) {
  return std::abs(jacobian_determinant(model, q));
}

std::string to_string(IkStatus s) {
  switch (s) {
    case IkStatus::Ok: return "ok";
    case IkStatus::Unreachable: return "unreachable";
    case IkStatus::NoConvergence: return "no convergence";
    case IkStatus::JointLimit: return "joint limit";
  }
  return "unknown";
}

IkResult ik(const ArmModel& model, const RobotPose& target, const JointVector& seed, const IkOptions& opts) {
  IkResult res;
  res.q = seed;
  if (!target.finite() || target.position_mm.norm() > model.max_reach_mm()) {
    res.status = IkStatus::Unreachable;
    return res;
  }
  const Eigen::Quaterniond goal = target.orientation.normalized();
  // Iterate past the acceptance tolerance so the returned q reproduces the
  // target far more tightly than 0.1 mm.
  constexpr double kTightPos = 1e-9;
  constexpr double kTightRot = 1e-11;
  constexpr double kMaxStepRad = 0.5;
  const double lambda2 = opts.damping * opts.damping;

  Eigen::Matrix<double, 6, 1> err;
  for (int it = 0;; ++it) {
    const RobotPose cur = fk(model, res.q);
    err.head<3>() = target.position_mm - cur.position_mm;
    err.tail<3>() = rotation_error(cur.orientation, goal);
    res.position_error_mm = err.head<3>().norm();
    res.orientation_error_deg = err.tail<3>().norm() * kRadToDeg;
    res.iterations = it;
    if ((res.position_error_mm < kTightPos && err.tail<3>().norm() < kTightRot) || it == opts.max_iterations) break;

    const Jacobian j = jacobian(model, res.q);
    const Jacobian jjt = j * j.transpose() + lambda2 * Jacobian::Identity();
    Eigen::Matrix<double, 6, 1> dq = j.transpose() * jjt.partialPivLu().solve(err);
    const double largest = dq.cwiseAbs().maxCoeff();
    if (largest > kMaxStepRad) dq *= kMaxStepRad / largest;
    for (std::size_t i = 0; i < 6; ++i) res.q[i] += dq[static_cast<Eigen::Index>(i)] * kRadToDeg;
  }

  if (res.position_error_mm >= opts.position_tol_mm || res.orientation_error_deg >= opts.orientation_tol_deg) {
    res.status = IkStatus::NoConvergence;
    return res;
  }
  wrap_into_limits(model, res.q);
  res.status = model.within_limits(res.q) ? IkStatus::Ok : IkStatus::JointLimit;
  return res;
}

}  // namespace cell::kinematics
