#pragma once

#include <vector>

#include <Eigen/Dense>

namespace uscal::poly {

/// Exponent vector of a monomial over the unknowns, e.g. {1, 2, 0} = a b^2.
using Exponents = std::vector<int>;

inline constexpr double kImagTolerance = 1e-6;
inline constexpr double kHomTolerance = 1e-8;
inline constexpr double kConsistencyTolerance = 1e-4;
inline constexpr double kPivotTolerance = 1e-10;
inline constexpr double kMaxConditionC = 1e12;

/// Orthonormal basis of the right nullspace of a linear constraint system.
/// Each column of `vectors` is one flattened basis matrix.
struct NullspaceBasis {
  Eigen::MatrixXd vectors;  // p x k
  Eigen::VectorXd singular_values;

  int size() const { return static_cast<int>(vectors.cols()); }
  int dimension() const { return static_cast<int>(vectors.rows()); }
  Eigen::VectorXd element(int i) const { return vectors.col(i); }
  /// Combination sum_i coeffs(i) * element(i).
  Eigen::VectorXd combine(const Eigen::VectorXd& coeffs) const { return vectors * coeffs; }
};

/// Polynomial system, one equation per row of `coeffs`, one column per
/// monomial.
struct QuadraticSystem {
  Eigen::MatrixXd coeffs;
  std::vector<Exponents> monomials;

  int num_equations() const { return static_cast<int>(coeffs.rows()); }
  int num_vars() const { return monomials.empty() ? 0 : static_cast<int>(monomials.front().size()); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
};

/// The [C B] template of a reduced system together with diagnostics of the
/// expansion that produced it.
struct ReducedTemplate {
  Eigen::MatrixXd c;
  Eigen::MatrixXd b;
  int expanded_rows = 0;
  int expanded_cols = 0;
  int expanded_rank = 0;
};

/// Multiplication-by-w matrix on the quotient basis: m * m_B(v) = w(v) m_B(v).
struct ActionMatrix {
  Eigen::MatrixXd m;
  std::vector<Exponents> basis_monomials;
  Exponents action_monomial;
};

double evaluate_monomial(const Exponents& e, const Eigen::VectorXd& x);

/// Numerical rank with singular values compared against tol * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m, double tol);

/// The k right singular vectors of smallest singular value. Throws
/// kRankDeficient when sigma_{p-k} / sigma_1 < kPivotTolerance.
NullspaceBasis nullspace(const Eigen::MatrixXd& constraints, int k);

/// Ten quadratic equations (five column and five row orthogonality
/// constraints on the scaled rotation block) in the degree-2 monomials of the
/// six basis coefficients. Basis elements are 13-vectors in the layout of
/// calib3d::vec_from_hom.
QuadraticSystem quadratic_constraints_3d(const NullspaceBasis& basis);

/// Two equations c1.c1 - c2.c2 = 0 and c1.c2 = 0 over the three basis
/// coefficients. Basis elements are 10-vectors in the layout of
/// calib2d::vec_from_reduced.
QuadraticSystem quadratic_constraints_2d(const NullspaceBasis& basis);

/// Dehomogenizes the last unknown to 1 and multiplies every equation by each
/// of the first four unknowns, appending the originals: 50 rows over the 55
/// monomials of degree <= 3 (e^3 never occurs). Columns are graded-lex with
/// the 13 template monomials m_C, m_B last.
QuadraticSystem expand_3d(const QuadraticSystem& sys);

/// Eliminates the leading 42 monomials of an expanded system and returns the
/// 5 x 13 template split into C (m_C) and B (m_B).
ReducedTemplate reduce_3d(const QuadraticSystem& expanded);

ReducedTemplate expand_and_reduce_3d(const QuadraticSystem& sys);

/// m_C = [b^3, ab^2, be, bd, bc] and m_B = [b^2, ab, e, d, c, b, a, 1] over
/// (a, b, c, d, e).
const std::vector<Exponents>& template_c_monomials_3d();
const std::vector<Exponents>& template_b_monomials_3d();

/// Builds the 8 x 8 action matrix for w = b. Throws kSingularC when cond(C)
/// exceeds kMaxConditionC.
ActionMatrix action_matrix(const Eigen::MatrixXd& c, const Eigen::MatrixXd& b);

/// Real solutions read off the eigenvectors of the action matrix, one vector
/// of unknowns per solution (ordered as the degree-1 basis monomials' vars).
/// Throws kNoRealSolutions when every eigenpair is rejected.
std::vector<Eigen::VectorXd> extract_solutions(const ActionMatrix& action);

/// Intersects the two conics of a 2D system with the last unknown fixed to 1.
/// Returns (a, b, 1) triples certified against both equations. Throws
/// kNoRealSolutions.
std::vector<Eigen::Vector3d> solve_two_conics(const QuadraticSystem& sys);

/// Gauss-Newton polish of a dehomogenized root (last unknown fixed to 1);
/// steps are kept only while the residual decreases.
Eigen::VectorXd polish_root(const QuadraticSystem& sys, Eigen::VectorXd x, int iterations = 5);

}  // namespace uscal::poly
