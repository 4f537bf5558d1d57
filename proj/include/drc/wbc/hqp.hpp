#pragma once

#include <string>
#include <vector>

#include "drc/common.hpp"

namespace drc::wbc {

/// Linear task over the decision vector z: A_eq z = b_eq and A_in z <= b_in,
/// both minimized in the least-squares sense at their level and then held at
/// the achieved values by every lower level.
struct Task {
  std::string label;
  int priority = 1;
  MatrixXd A_eq;
  VectorXd b_eq;
  MatrixXd A_in;
  VectorXd b_in;
};

/// Prioritized stack; priorities must be contiguous from 1.
struct TaskSet {
  int dim = 0;
  std::vector<Task> tasks;

  int levels() const;
  void validate() const;
  /// Stacked rows of one priority level.
  Task level(int priority) const;
};

struct HierarchySettings {
  int max_activations = 50;  // per level
  bool min_norm = true;      // final tie-break: smallest |z| among optimal points
  double feasibility_tolerance = 1e-9;
};

struct HierarchyResult {
  VectorXd z;
  std::vector<double> residuals;  // |A_eq z - b_eq| per level
  int activations = 0;
};

/// Lexicographic cascade: each level minimizes its equality residual plus its
/// inequality violation over the optimal set of all higher levels (equalities
/// through their nullspace, inequalities as constraints), one active-set
/// iteration per level. Any violation left at priority 1 is an error.
HierarchyResult solve_hierarchy(const TaskSet& tasks, const HierarchySettings& settings = {});

/// min 0.5 |M y - r|^2 subject to G y <= h, starting from a feasible y0.
/// M may be rank deficient; returns one minimizer. Exposed for testing.
struct LsiResult {
  VectorXd y;
  int activations = 0;
};
LsiResult solve_lsi(const MatrixXd& M, const VectorXd& r, const MatrixXd& G, const VectorXd& h,
                    const VectorXd& y0, int max_activations, double tolerance = 1e-9);

/// Orthonormal basis of the nullspace of A (columns); identity when A has no rows.
MatrixXd nullspace(const MatrixXd& A, int cols);

}  // namespace drc::wbc
