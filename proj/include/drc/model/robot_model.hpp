#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "drc/common.hpp"

namespace drc::model {

enum class JointType { Floating, Fixed, Revolute };

/// One rigid link together with the joint that attaches it to its parent.
struct Body {
  std::string name;
  int parent = -1;
  JointType joint = JointType::Revolute;
  /// Joint frame origin expressed in the parent body frame [m].
  Vector3d origin = Vector3d::Zero();
  /// Unit rotation axis in the body frame (revolute only).
  Vector3d axis = Vector3d::UnitZ();
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double torque_limit = std::numeric_limits<double>::infinity();
  double mass = 0.0;
  /// Center of mass in the body frame [m].
  Vector3d com = Vector3d::Zero();
  /// Rotational inertia about the center of mass, body frame [kg m^2].
  Matrix3d inertia = Matrix3d::Identity();
};

/// Point contact rigidly attached to a body.
struct Foot {
  std::string name;
  int body = 0;
  Vector3d offset = Vector3d::Zero();
};

/// Per-foot stance flag, indexed like RobotModel::feet().
using StanceFlags = std::vector<bool>;

/// Kinematic tree with a single root. The root is either a floating base
/// (six generalized coordinates: world position and ZYX Euler angles) or
/// welded to the world. Every other body hangs on one revolute joint.
///
/// Bodies are stored in topological order (parent index < child index) and
/// the model is immutable once constructed.
class RobotModel {
 public:
  RobotModel(std::vector<Body> bodies, std::vector<Foot> feet,
             Vector3d gravity = Vector3d(0.0, 0.0, -9.81),
             VectorXd nominal_posture = VectorXd());

  const std::vector<Body>& bodies() const { return bodies_; }
  const std::vector<Foot>& feet() const { return feet_; }
  const Body& body(int i) const { return bodies_[static_cast<size_t>(i)]; }
  int num_bodies() const { return static_cast<int>(bodies_.size()); }
  int num_feet() const { return static_cast<int>(feet_.size()); }

  bool floating() const { return floating_; }
  /// Number of generalized coordinates owned by the base (6 or 0).
  int base_dofs() const { return floating_ ? 6 : 0; }
  /// Number of actuated joints n.
  int num_joints() const { return num_joints_; }
  /// Dimension of q and qd.
  int nv() const { return base_dofs() + num_joints_; }

  /// Index of the first generalized coordinate of body i (-1 for a fixed root).
  int dof_index(int i) const { return dof_index_[static_cast<size_t>(i)]; }
  /// Number of generalized coordinates of body i's joint.
  int dof_count(int i) const;
  /// Body index driven by actuated joint j (0 <= j < n).
  int joint_body(int j) const { return joint_body_[static_cast<size_t>(j)]; }

  const Vector3d& gravity() const { return gravity_; }
  double total_mass() const { return total_mass_; }

  VectorXd torque_limits() const;
  /// Nominal joint posture (n entries); zero when the description has none.
  const VectorXd& nominal_posture() const { return nominal_posture_; }

  int find_body(std::string_view name) const;
  int find_foot(std::string_view name) const;

  /// Copy of the model with extra mass added to one body, keeping the
  /// body's own inertia and treating the extra mass as a point at `offset`
  /// (body frame) plus an optional rotational inertia about that point.
  RobotModel with_payload(int body, double mass, const Vector3d& offset,
                          const Matrix3d& inertia = Matrix3d::Zero()) const;

 private:
  void validate() const;

  std::vector<Body> bodies_;
  std::vector<Foot> feet_;
  Vector3d gravity_;
  VectorXd nominal_posture_;
  bool floating_ = false;
  int num_joints_ = 0;
  double total_mass_ = 0.0;
  std::vector<int> dof_index_;
  std::vector<int> joint_body_;
};

/// Parse a `legged-drc-model v1` description.
RobotModel parse_model(std::string_view text);
RobotModel load_model(const std::string& path);

}  // namespace drc::model
