#include "drc/model/robot_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace drc::model {

RobotModel::RobotModel(std::vector<Body> bodies, std::vector<Foot> feet, Vector3d gravity,
                       VectorXd nominal_posture)
    : bodies_(std::move(bodies)),
      feet_(std::move(feet)),
      gravity_(std::move(gravity)),
      nominal_posture_(std::move(nominal_posture)) {
  validate();
  floating_ = bodies_.front().joint == JointType::Floating;
  int next = floating_ ? 6 : 0;
  dof_index_.assign(bodies_.size(), -1);
  for (size_t i = 0; i < bodies_.size(); ++i) {
    total_mass_ += bodies_[i].mass;
    if (i == 0) {
      dof_index_[0] = floating_ ? 0 : -1;
      continue;
    }
    dof_index_[i] = next++;
    joint_body_.push_back(static_cast<int>(i));
  }
  num_joints_ = static_cast<int>(joint_body_.size());
  if (nominal_posture_.size() == 0) {
    nominal_posture_ = VectorXd::Zero(num_joints_);
  } else if (nominal_posture_.size() != num_joints_) {
    throw InvariantError("posture: expected " + std::to_string(num_joints_) + " entries, got " +
                         std::to_string(nominal_posture_.size()));
  }
}

int RobotModel::dof_count(int i) const {
  switch (body(i).joint) {
    case JointType::Floating: return 6;
    case JointType::Fixed: return 0;
    case JointType::Revolute: return 1;
  }
  return 0;
}

VectorXd RobotModel::torque_limits() const {
  VectorXd lim(num_joints_);
  for (int j = 0; j < num_joints_; ++j) lim[j] = body(joint_body(j)).torque_limit;
  return lim;
}

int RobotModel::find_body(std::string_view name) const {
  for (size_t i = 0; i < bodies_.size(); ++i)
    if (bodies_[i].name == name) return static_cast<int>(i);
  return -1;
}

int RobotModel::find_foot(std::string_view name) const {
  for (size_t i = 0; i < feet_.size(); ++i)
    if (feet_[i].name == name) return static_cast<int>(i);
  return -1;
}

RobotModel RobotModel::with_payload(int index, double mass, const Vector3d& offset,
                                    const Matrix3d& inertia) const {
  std::vector<Body> bodies = bodies_;
  Body& b = bodies.at(static_cast<size_t>(index));
  const double m = b.mass + mass;
  const Vector3d c = (b.mass * b.com + mass * offset) / m;
  // Parallel-axis shift of both parts to the combined center of mass.
  auto shift = [](double mi, const Vector3d& r) {
    return mi * (r.squaredNorm() * Matrix3d::Identity() - r * r.transpose());
  };
  b.inertia = b.inertia + shift(b.mass, b.com - c) + inertia + shift(mass, offset - c);
  b.mass = m;
  b.com = c;
  return RobotModel(std::move(bodies), feet_, gravity_, nominal_posture_);
}

void RobotModel::validate() const {
  if (bodies_.empty()) throw InvariantError("bodies: model has no bodies");
  const Body& root = bodies_.front();
  if (root.parent != -1) throw InvariantError("parent: first body must be the root");
  if (root.joint == JointType::Revolute)
    throw InvariantError("joint: root joint must be floating or fixed");
  for (size_t i = 0; i < bodies_.size(); ++i) {
    const Body& b = bodies_[i];
    const std::string where = " (body '" + b.name + "')";
    if (i > 0) {
      if (b.parent < 0 || b.parent >= static_cast<int>(i))
        throw InvariantError("parent: must reference an earlier body" + where);
      if (b.joint != JointType::Revolute)
        throw InvariantError("joint: exactly one floating-base or fixed joint, at the root" +
                             where);
      if (std::abs(b.axis.norm() - 1.0) > 1e-9)
        throw InvariantError("axis: must be a unit vector" + where);
      if (!(b.lower <= b.upper)) throw InvariantError("limits: lower > upper" + where);
      if (!(b.torque_limit > 0.0)) throw InvariantError("torque_limit must be positive" + where);
    }
    if (!(b.mass > 0.0) || !std::isfinite(b.mass))
      throw InvariantError("mass must be positive" + where);
    if (!b.inertia.isApprox(b.inertia.transpose(), 1e-12))
      throw InvariantError("inertia must be symmetric" + where);
    Eigen::SelfAdjointEigenSolver<Matrix3d> eig(b.inertia);
    if (eig.eigenvalues().minCoeff() <= 0.0)
      throw InvariantError("inertia must be positive definite" + where);
  }
  for (const Foot& f : feet_) {
    if (f.body < 0 || f.body >= static_cast<int>(bodies_.size()))
      throw InvariantError("foot: '" + f.name + "' references a missing body");
  }
  if (!gravity_.allFinite()) throw InvariantError("gravity: must be finite");
}

namespace {

struct LineReader {
  std::istringstream stream;
  int line = 0;

  // Next non-empty line with comments stripped, split into tokens.
  bool next(std::vector<std::string>& tokens) {
    std::string raw;
    while (std::getline(stream, raw)) {
      ++line;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      std::istringstream ls(raw);
      tokens.clear();
      for (std::string tok; ls >> tok;) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }
};

double to_double(const std::string& s, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + s + "'");
  }
}

Vector3d to_vec3(const std::vector<std::string>& t, int line) {
  if (t.size() != 4) throw ParseError(line, "'" + t[0] + "' expects 3 numbers");
  return {to_double(t[1], line), to_double(t[2], line), to_double(t[3], line)};
}

}  // namespace

RobotModel parse_model(std::string_view text) {
  LineReader in{std::istringstream(std::string(text))};
  std::vector<std::string> t;
  if (!in.next(t) || t.size() != 2 || t[0] != "legged-drc-model")
    throw ParseError(in.line, "missing header 'legged-drc-model v1'");
  if (t[1] != "v1") throw ParseError(in.line, "unsupported model version '" + t[1] + "'");

  std::vector<Body> bodies;
  std::vector<Foot> feet;
  Vector3d gravity(0.0, 0.0, -9.81);
  VectorXd posture;
  struct PendingFoot {
    std::string name, body;
    Vector3d offset;
    int line;
  };
  std::vector<PendingFoot> pending_feet;

  auto body_index = [&](const std::string& name, int line) {
    for (size_t i = 0; i < bodies.size(); ++i)
      if (bodies[i].name == name) return static_cast<int>(i);
    throw ParseError(line, "unknown body '" + name + "'");
  };

  while (in.next(t)) {
    const std::string& key = t[0];
    if (key == "gravity") {
      gravity = to_vec3(t, in.line);
    } else if (key == "posture") {
      posture.resize(static_cast<Eigen::Index>(t.size() - 1));
      for (size_t i = 1; i < t.size(); ++i) posture[static_cast<Eigen::Index>(i - 1)] = to_double(t[i], in.line);
    } else if (key == "foot") {
      if (t.size() != 6) throw ParseError(in.line, "foot expects: name body x y z");
      pending_feet.push_back({t[1], t[2],
                              Vector3d(to_double(t[3], in.line), to_double(t[4], in.line),
                                       to_double(t[5], in.line)),
                              in.line});
    } else if (key == "body") {
      if (t.size() != 2) throw ParseError(in.line, "body expects a name");
      Body b;
      b.name = t[1];
      bool has_joint = false;
      bool closed = false;
      while (in.next(t)) {
        const std::string& k = t[0];
        if (k == "end") {
          closed = true;
          break;
        } else if (k == "parent") {
          if (t.size() != 2) throw ParseError(in.line, "parent expects a body name or 'none'");
          b.parent = t[1] == "none" ? -1 : body_index(t[1], in.line);
        } else if (k == "joint") {
          if (t.size() != 2) throw ParseError(in.line, "joint expects a type");
          if (t[1] == "floating") b.joint = JointType::Floating;
          else if (t[1] == "fixed") b.joint = JointType::Fixed;
          else if (t[1] == "revolute") b.joint = JointType::Revolute;
          else throw ParseError(in.line, "unknown joint type '" + t[1] + "'");
          has_joint = true;
        } else if (k == "origin") {
          b.origin = to_vec3(t, in.line);
        } else if (k == "axis") {
          b.axis = to_vec3(t, in.line);
        } else if (k == "limits") {
          if (t.size() != 3) throw ParseError(in.line, "limits expects: lower upper");
          b.lower = to_double(t[1], in.line);
          b.upper = to_double(t[2], in.line);
        } else if (k == "torque_limit") {
          if (t.size() != 2) throw ParseError(in.line, "torque_limit expects a number");
          b.torque_limit = to_double(t[1], in.line);
        } else if (k == "mass") {
          if (t.size() != 2) throw ParseError(in.line, "mass expects a number");
          b.mass = to_double(t[1], in.line);
        } else if (k == "com") {
          b.com = to_vec3(t, in.line);
        } else if (k == "inertia") {
          if (t.size() != 4 && t.size() != 7)
            throw ParseError(in.line, "inertia expects: ixx iyy izz [ixy ixz iyz]");
          Matrix3d I = Matrix3d::Zero();
          I(0, 0) = to_double(t[1], in.line);
          I(1, 1) = to_double(t[2], in.line);
          I(2, 2) = to_double(t[3], in.line);
          if (t.size() == 7) {
            I(0, 1) = I(1, 0) = to_double(t[4], in.line);
            I(0, 2) = I(2, 0) = to_double(t[5], in.line);
            I(1, 2) = I(2, 1) = to_double(t[6], in.line);
          }
          b.inertia = I;
        } else {
          throw ParseError(in.line, "unknown body field '" + k + "'");
        }
      }
      if (!closed) throw ParseError(in.line, "body '" + b.name + "' is missing 'end'");
      if (!has_joint) b.joint = bodies.empty() ? JointType::Floating : JointType::Revolute;
      bodies.push_back(std::move(b));
    } else {
      throw ParseError(in.line, "unknown directive '" + key + "'");
    }
  }
  for (const auto& pf : pending_feet)
    feet.push_back({pf.name, body_index(pf.body, pf.line), pf.offset});
  return RobotModel(std::move(bodies), std::move(feet), gravity, posture);
}

RobotModel load_model(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw Error("cannot open model file '" + path + "'");
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_model(buffer.str());
}

}  // namespace drc::model
