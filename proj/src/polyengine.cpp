#include "uscal/polyengine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>

#include <Eigen/Eigenvalues>

#include "uscal/error.hpp"

namespace uscal::poly {

namespace {

// Flattened positions inside a basis element. The 3D layout is the row-major
// [S | t] block followed by the homogeneous entry; the reduced 2D layout is the
// row-major [c1 c2 t] block followed by the homogeneous entry.
std::array<int, 3> column_3d(int i) { return {i, 4 + i, 8 + i}; }
std::array<int, 3> row_3d(int i) { return {4 * i, 4 * i + 1, 4 * i + 2}; }
std::array<int, 3> column_2d(int i) { return {i, 3 + i, 6 + i}; }

using Polynomial = std::map<Exponents, double>;

// Quadratic form u . v expressed over the degree-2 monomials of the basis
// coefficients (x_k x_l with k <= l, lex order).
Eigen::RowVectorXd bilinear_row(const NullspaceBasis& basis, const std::array<int, 3>& u,
                                const std::array<int, 3>& v) {
  const int k = basis.size();
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k * (k + 1) / 2);
  int col = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j, ++col) {
      double g = 0.0;
      for (int r = 0; r < 3; ++r) {
        g += basis.vectors(u[r], i) * basis.vectors(v[r], j);
        if (i != j) g += basis.vectors(u[r], j) * basis.vectors(v[r], i);
      }
      row(col) = g;
    }
  }
  return row;
}

std::vector<Exponents> degree_two_monomials(int nvars) {
  std::vector<Exponents> out;
  for (int i = 0; i < nvars; ++i) {
    for (int j = i; j < nvars; ++j) {
      Exponents e(nvars, 0);
      e[i] += 1;
      e[j] += 1;
      out.push_back(e);
    }
  }
  return out;
}

Exponents make_exponents(std::initializer_list<int> e) { return Exponents(e); }

// Graded-lex "greater" comparison: higher degree first, then lexicographic
// with the first unknown most significant.
bool graded_lex_greater(const Exponents& x, const Exponents& y) {
  int dx = 0;
  int dy = 0;
  for (int v : x) dx += v;
  for (int v : y) dy += v;
  if (dx != dy) return dx > dy;
  return x > y;
}

std::vector<Polynomial> dehomogenize(const QuadraticSystem& sys) {
  std::vector<Polynomial> out(sys.num_equations());
  for (int r = 0; r < sys.num_equations(); ++r) {
    for (std::size_t c = 0; c < sys.monomials.size(); ++c) {
      const double v = sys.coeffs(r, static_cast<Eigen::Index>(c));
      if (v == 0.0) continue;
      Exponents e(sys.monomials[c].begin(), sys.monomials[c].end() - 1);
      out[r][e] += v;
    }
  }
  return out;
}

Polynomial multiply_by_var(const Polynomial& p, int var) {
  Polynomial out;
  for (const auto& [e, v] : p) {
    Exponents m = e;
    m[var] += 1;
    out[m] += v;
  }
  return out;
}

QuadraticSystem assemble(const std::vector<Polynomial>& rows, std::vector<Exponents> columns) {
  std::map<Exponents, int> index;
  for (std::size_t i = 0; i < columns.size(); ++i) index[columns[i]] = static_cast<int>(i);
  QuadraticSystem out;
  out.coeffs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                     static_cast<Eigen::Index>(columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [e, v] : rows[r]) {
      out.coeffs(static_cast<Eigen::Index>(r), index.at(e)) += v;
    }
  }
  out.monomials = std::move(columns);
  return out;
}

// Column order: every monomial in `all` not in `tail`, graded-lex descending,
// followed by `tail` verbatim.
std::vector<Exponents> order_columns(std::vector<Exponents> all, const std::vector<Exponents>& tail) {
  std::erase_if(all, [&](const Exponents& e) {
    return std::find(tail.begin(), tail.end(), e) != tail.end();
  });
  std::sort(all.begin(), all.end(), graded_lex_greater);
  all.insert(all.end(), tail.begin(), tail.end());
  return all;
}

// Eliminates the first `n_leading` columns and returns `n_reduced` rows
// spanning the remaining equations on the trailing columns.
Eigen::MatrixXd eliminate_leading(const Eigen::MatrixXd& m, int n_leading, int n_reduced,
                                  int* total_rank) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index n_tail = m.cols() - n_leading;
  const double scale = m.norm();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m.leftCols(n_leading));
  qr.setThreshold(kPivotTolerance);
  const Eigen::Index r1 = qr.rank();
  // A rank-deficient leading block leaves the [leading | C] elimination block
  // singular: the template has no valid Schur complement C.
  if (r1 < n_leading) {
    throw Error(ErrorCode::kSingularC, "leading monomial block has rank " + std::to_string(r1) +
                                           " < " + std::to_string(n_leading));
  }
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd remainder = (q.transpose() * m.rightCols(n_tail)).bottomRows(rows - r1);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(remainder, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  int r2 = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > kPivotTolerance * scale) ++r2;
  }
  if (total_rank != nullptr) *total_rank = static_cast<int>(r1) + r2;
  // Rank loss among the surviving rows shows up as a singular C downstream,
  // since the rows are weighted by their singular values.
  if (rows - r1 < n_reduced) {
    throw Error(ErrorCode::kEliminationFailure,
                "only " + std::to_string(rows - r1) + " rows survive elimination");
  }
  Eigen::MatrixXd reduced(n_reduced, n_tail);
  for (int i = 0; i < n_reduced; ++i) reduced.row(i) = sv(i) * svd.matrixV().col(i).transpose();
  return reduced;
}

// Row i of the action matrix expresses w * basis[i]: either a reduced
// equation (target in m_C) or a unit shift (target in m_B).
struct ActionTarget {
  bool in_c;
  int index;
};

ActionMatrix build_action(const Eigen::MatrixXd& c, const Eigen::MatrixXd& b,
                          const std::vector<ActionTarget>& targets,
                          std::vector<Exponents> basis, Exponents w) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                              : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxConditionC)) {
    throw Error(ErrorCode::kSingularC, "template block C is singular (cond " +
                                           std::to_string(cond) + ")");
  }
  const Eigen::MatrixXd elim = -c.fullPivLu().solve(b);
  const int n = static_cast<int>(basis.size());
  ActionMatrix out;
  out.m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (targets[i].in_c) {
      out.m.row(i) = elim.row(targets[i].index);
    } else {
      out.m(i, targets[i].index) = 1.0;
    }
  }
  out.basis_monomials = std::move(basis);
  out.action_monomial = std::move(w);
  return out;
}

// Two-conic template in (a, b): m_C = [ab^2, b^2], m_B = [ab, b, a, 1].
const std::vector<Exponents>& conic_c_monomials() {
  static const std::vector<Exponents> m{{1, 2}, {0, 2}};
  return m;
}
const std::vector<Exponents>& conic_b_monomials() {
  static const std::vector<Exponents> m{{1, 1}, {0, 1}, {1, 0}, {0, 0}};
  return m;
}

ActionMatrix conic_action_matrix(const QuadraticSystem& sys) {
  std::vector<Polynomial> base = dehomogenize(sys);
  std::vector<Polynomial> rows = base;
  for (const auto& p : base) {
    rows.push_back(multiply_by_var(p, 0));
    rows.push_back(multiply_by_var(p, 1));
  }
  std::vector<Exponents> all;
  for (int d = 0; d <= 3; ++d) {
    for (int i = d; i >= 0; --i) all.push_back({i, d - i});
  }
  std::vector<Exponents> tail = conic_c_monomials();
  tail.insert(tail.end(), conic_b_monomials().begin(), conic_b_monomials().end());
  const QuadraticSystem expanded = assemble(rows, order_columns(all, tail));
  const Eigen::MatrixXd reduced = eliminate_leading(expanded.coeffs, 4, 2, nullptr);
  // b * [ab, b, a, 1] = [ab^2, b^2, ab, b]
  const std::vector<ActionTarget> targets{{true, 0}, {true, 1}, {false, 0}, {false, 1}};
  return build_action(reduced.leftCols(2), reduced.rightCols(4), targets, conic_b_monomials(),
                      {0, 1});
}

// Each conic as a symmetric form Q, rewritten as T^T Q T in the variables x'
// with x = T x'.
QuadraticSystem transform_conics(const QuadraticSystem& sys, const Eigen::Matrix3d& t) {
  QuadraticSystem out;
  out.monomials = degree_two_monomials(3);
  out.coeffs.resize(sys.num_equations(), static_cast<Eigen::Index>(out.monomials.size()));
  for (int r = 0; r < sys.num_equations(); ++r) {
    Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
    for (std::size_t m = 0; m < sys.monomials.size(); ++m) {
      const Exponents& e = sys.monomials[m];
      const double c = sys.coeffs(r, static_cast<Eigen::Index>(m));
      if (e.size() != 3 || e[0] + e[1] + e[2] != 2) {
        throw Error(ErrorCode::kInvariantViolation, "conics must be quadratic forms in three unknowns");
      }
      int idx[2], k = 0;
      for (int v = 0; v < 3; ++v) {
        for (int p = 0; p < e[v]; ++p) idx[k++] = v;
      }
      q(idx[0], idx[1]) += 0.5 * c;
      q(idx[1], idx[0]) += 0.5 * c;
    }
    const Eigen::Matrix3d qt = t.transpose() * q * t;
    for (std::size_t m = 0; m < out.monomials.size(); ++m) {
      const Exponents& e = out.monomials[m];
      int idx[2], k = 0;
      for (int v = 0; v < 3; ++v) {
        for (int p = 0; p < e[v]; ++p) idx[k++] = v;
      }
      out.coeffs(r, static_cast<Eigen::Index>(m)) = idx[0] == idx[1] ? qt(idx[0], idx[0]) : 2.0 * qt(idx[0], idx[1]);
    }
  }
  return out;
}

// Resultant route: eliminate a between the two conics and solve the quartic
// in b through its companion matrix.
std::vector<Eigen::Vector3d> conics_by_resultant(const QuadraticSystem& sys) {
  // Each dehomogenized conic as p2 a^2 + p1(b) a + p0(b).
  struct Conic {
    double a2 = 0, ab = 0, a1 = 0, b2 = 0, b1 = 0, c = 0;
  };
  std::array<Conic, 2> q;
  const std::vector<Polynomial> polys = dehomogenize(sys);
  for (int i = 0; i < 2; ++i) {
    for (const auto& [e, v] : polys[i]) {
      if (e == Exponents{2, 0}) q[i].a2 += v;
      else if (e == Exponents{1, 1}) q[i].ab += v;
      else if (e == Exponents{1, 0}) q[i].a1 += v;
      else if (e == Exponents{0, 2}) q[i].b2 += v;
      else if (e == Exponents{0, 1}) q[i].b1 += v;
      else q[i].c += v;
    }
  }
  using Poly = Eigen::VectorXd;  // ascending coefficients in b
  auto mul = [](const Poly& x, const Poly& y) {
    Poly r = Poly::Zero(x.size() + y.size() - 1);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      for (Eigen::Index j = 0; j < y.size(); ++j) r(i + j) += x(i) * y(j);
    return r;
  };
  auto sub = [](Poly x, const Poly& y) {
    if (x.size() < y.size()) x.conservativeResizeLike(Poly::Zero(y.size()));
    x.head(y.size()) -= y;
    return x;
  };
  auto pad = [](Poly x, Eigen::Index n) {
    if (x.size() < n) x.conservativeResizeLike(Poly::Zero(n));
    return x;
  };
  const Poly p2 = Poly::Constant(1, q[0].a2);
  const Poly p1 = (Poly(2) << q[0].a1, q[0].ab).finished();
  const Poly p0 = (Poly(3) << q[0].c, q[0].b1, q[0].b2).finished();
  const Poly r2 = Poly::Constant(1, q[1].a2);
  const Poly r1 = (Poly(2) << q[1].a1, q[1].ab).finished();
  const Poly r0 = (Poly(3) << q[1].c, q[1].b1, q[1].b2).finished();
  // Sylvester resultant of two quadratics in a.
  const Poly u = sub(mul(p2, r0), mul(r2, p0));
  const Poly v = sub(mul(p2, r1), mul(r2, p1));
  const Poly w = sub(mul(p1, r0), mul(r1, p0));
  const Poly res = pad(sub(mul(u, u), mul(v, w)), 5);

  int deg = 4;
  const double lead_scale = res.cwiseAbs().maxCoeff();
  while (deg > 0 && std::abs(res(deg)) <= 1e-12 * lead_scale) --deg;
  std::vector<double> roots;
  if (deg >= 1) {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -res(i) / res(deg);
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (Eigen::Index i = 0; i < deg; ++i) {
      const std::complex<double> z = es.eigenvalues()(i);
      if (std::abs(z.imag()) < kImagTolerance * (1.0 + std::abs(z.real()))) roots.push_back(z.real());
    }
  }
  std::vector<Eigen::Vector3d> out;
  for (double b : roots) {
    // Common root in a of both quadratics.
    const double ca2 = q[0].a2, ca1 = q[0].ab * b + q[0].a1, ca0 = q[0].b2 * b * b + q[0].b1 * b + q[0].c;
    const double da2 = q[1].a2, da1 = q[1].ab * b + q[1].a1, da0 = q[1].b2 * b * b + q[1].b1 * b + q[1].c;
    std::vector<double> cand;
    const double lin = ca1 * da2 - da1 * ca2;
    if (std::abs(lin) > 1e-12 * (std::abs(ca1 * da2) + std::abs(da1 * ca2) + 1e-300)) {
      cand.push_back(-(ca0 * da2 - da0 * ca2) / lin);
    } else {
      for (const auto& [x2, x1, x0] : {std::tuple{ca2, ca1, ca0}, std::tuple{da2, da1, da0}}) {
        if (std::abs(x2) > 1e-14) {
          const double disc = x1 * x1 - 4 * x2 * x0;
          if (disc >= 0) {
            cand.push_back((-x1 + std::sqrt(disc)) / (2 * x2));
            cand.push_back((-x1 - std::sqrt(disc)) / (2 * x2));
          }
          break;
        } else if (std::abs(x1) > 1e-14) {
          cand.push_back(-x0 / x1);
          break;
        }
      }
    }
    for (double a : cand) out.emplace_back(a, b, 1.0);
  }
  return out;
}

}  // namespace

double evaluate_monomial(const Exponents& e, const Eigen::VectorXd& x) {
  double v = 1.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (int p = 0; p < e[i]; ++p) v *= x(static_cast<Eigen::Index>(i));
  }
  return v;
}

Eigen::VectorXd QuadraticSystem::evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd m(static_cast<Eigen::Index>(monomials.size()));
  for (std::size_t i = 0; i < monomials.size(); ++i) {
    m(static_cast<Eigen::Index>(i)) = evaluate_monomial(monomials[i], x);
  }
  return coeffs * m;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol * sv(0)) ++rank;
  }
  return rank;
}

NullspaceBasis nullspace(const Eigen::MatrixXd& constraints, int k) {
  const Eigen::Index p = constraints.cols();
  if (k <= 0 || k > p) {
    throw Error(ErrorCode::kInvariantViolation, "invalid nullity");
  }
  // Pad with zero rows so that the full right singular basis is available.
  Eigen::MatrixXd a = constraints;
  if (a.rows() < p) {
    a.conservativeResize(p, Eigen::NoChange);
    a.bottomRows(p - constraints.rows()).setZero();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const Eigen::Index rank_needed = p - k;
  if (rank_needed > 0 && !(sv(rank_needed - 1) >= kPivotTolerance * sv(0))) {
    throw Error(ErrorCode::kRankDeficient, "constraint system has rank below " +
                                               std::to_string(rank_needed));
  }
  NullspaceBasis out;
  out.vectors = svd.matrixV().rightCols(k);
  out.singular_values = sv;
  return out;
}

QuadraticSystem quadratic_constraints_3d(const NullspaceBasis& basis) {
  if (basis.size() != 6 || basis.dimension() != 13) {
    throw Error(ErrorCode::kInvariantViolation, "3D constraints need six 13-dim basis elements");
  }
  QuadraticSystem sys;
  sys.monomials = degree_two_monomials(6);
  sys.coeffs.resize(10, static_cast<Eigen::Index>(sys.monomials.size()));
  int r = 0;
  for (auto part : {column_3d, row_3d}) {
    const auto v1 = part(0), v2 = part(1), v3 = part(2);
    sys.coeffs.row(r++) = bilinear_row(basis, v1, v1) - bilinear_row(basis, v2, v2);
    sys.coeffs.row(r++) = bilinear_row(basis, v1, v1) - bilinear_row(basis, v3, v3);
    sys.coeffs.row(r++) = bilinear_row(basis, v1, v2);
    sys.coeffs.row(r++) = bilinear_row(basis, v1, v3);
    sys.coeffs.row(r++) = bilinear_row(basis, v2, v3);
  }
  return sys;
}

QuadraticSystem quadratic_constraints_2d(const NullspaceBasis& basis) {
  if (basis.size() != 3 || basis.dimension() != 10) {
    throw Error(ErrorCode::kInvariantViolation, "2D constraints need three 10-dim basis elements");
  }
  QuadraticSystem sys;
  sys.monomials = degree_two_monomials(3);
  sys.coeffs.resize(2, static_cast<Eigen::Index>(sys.monomials.size()));
  const auto c1 = column_2d(0), c2 = column_2d(1);
  sys.coeffs.row(0) = bilinear_row(basis, c1, c1) - bilinear_row(basis, c2, c2);
  sys.coeffs.row(1) = bilinear_row(basis, c1, c2);
  return sys;
}

const std::vector<Exponents>& template_c_monomials_3d() {
  static const std::vector<Exponents> m{
      make_exponents({0, 3, 0, 0, 0}), make_exponents({1, 2, 0, 0, 0}),
      make_exponents({0, 1, 0, 0, 1}), make_exponents({0, 1, 0, 1, 0}),
      make_exponents({0, 1, 1, 0, 0})};
  return m;
}

const std::vector<Exponents>& template_b_monomials_3d() {
  static const std::vector<Exponents> m{
      make_exponents({0, 2, 0, 0, 0}), make_exponents({1, 1, 0, 0, 0}),
      make_exponents({0, 0, 0, 0, 1}), make_exponents({0, 0, 0, 1, 0}),
      make_exponents({0, 0, 1, 0, 0}), make_exponents({0, 1, 0, 0, 0}),
      make_exponents({1, 0, 0, 0, 0}), make_exponents({0, 0, 0, 0, 0})};
  return m;
}

QuadraticSystem expand_3d(const QuadraticSystem& sys) {
  if (sys.num_vars() != 6 || sys.num_equations() != 10) {
    throw Error(ErrorCode::kInvariantViolation, "expected the 10-equation system in 6 unknowns");
  }
  const std::vector<Polynomial> base = dehomogenize(sys);
  std::vector<Polynomial> rows = base;
  for (const auto& p : base) {
    for (int var = 0; var < 4; ++var) rows.push_back(multiply_by_var(p, var));
  }
  std::vector<Exponents> all;
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; a + b <= 3; ++b)
      for (int c = 0; a + b + c <= 3; ++c)
        for (int d = 0; a + b + c + d <= 3; ++d)
          for (int e = 0; a + b + c + d + e <= 3; ++e) {
            if (e == 3) continue;
            all.push_back({a, b, c, d, e});
          }
  std::vector<Exponents> tail = template_c_monomials_3d();
  tail.insert(tail.end(), template_b_monomials_3d().begin(), template_b_monomials_3d().end());
  return assemble(rows, order_columns(std::move(all), tail));
}

ReducedTemplate reduce_3d(const QuadraticSystem& expanded) {
  constexpr int kTail = 13;
  const int n_leading = static_cast<int>(expanded.coeffs.cols()) - kTail;
  ReducedTemplate out;
  out.expanded_rows = static_cast<int>(expanded.coeffs.rows());
  out.expanded_cols = static_cast<int>(expanded.coeffs.cols());
  const Eigen::MatrixXd reduced = eliminate_leading(expanded.coeffs, n_leading, 5, &out.expanded_rank);
  out.c = reduced.leftCols(5);
  out.b = reduced.rightCols(8);
  return out;
}

ReducedTemplate expand_and_reduce_3d(const QuadraticSystem& sys) { return reduce_3d(expand_3d(sys)); }

ActionMatrix action_matrix(const Eigen::MatrixXd& c, const Eigen::MatrixXd& b) {
  if (c.rows() != 5 || c.cols() != 5 || b.rows() != 5 || b.cols() != 8) {
    throw Error(ErrorCode::kInvariantViolation, "expected C 5x5 and B 5x8");
  }
  // b * [b^2, ab, e, d, c, b, a, 1] = [b^3, ab^2, be, bd, bc, b^2, ab, b]
  const std::vector<ActionTarget> targets{{true, 0},  {true, 1},  {true, 2},  {true, 3},
                                          {true, 4},  {false, 0}, {false, 1}, {false, 5}};
  return build_action(c, b, targets, template_b_monomials_3d(), make_exponents({0, 1, 0, 0, 0}));
}

std::vector<Eigen::VectorXd> extract_solutions(const ActionMatrix& action) {
  const auto& basis = action.basis_monomials;
  const int n = static_cast<int>(basis.size());
  const int nvars = static_cast<int>(basis.front().size());
  int one = -1;
  std::vector<int> var_index(nvars, -1);
  for (int i = 0; i < n; ++i) {
    int deg = 0;
    for (int v : basis[i]) deg += v;
    if (deg == 0) one = i;
    if (deg == 1) {
      for (int v = 0; v < nvars; ++v) {
        if (basis[i][v] == 1) var_index[v] = i;
      }
    }
  }

  Eigen::EigenSolver<Eigen::MatrixXd> es(action.m, true);
  const Eigen::VectorXcd& values = es.eigenvalues();
  const Eigen::MatrixXcd& vectors = es.eigenvectors();
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < n; ++k) {
    const std::complex<double> lambda = values(k);
    if (std::abs(lambda.imag()) >= kImagTolerance * (1.0 + std::abs(lambda.real()))) continue;
    const Eigen::VectorXcd vc = vectors.col(k);
    if (!(std::abs(vc(one)) >= kHomTolerance * vc.norm())) continue;
    const Eigen::VectorXd mb = (vc / vc(one)).real();

    Eigen::VectorXd x(nvars);
    bool ok = true;
    for (int var = 0; var < nvars; ++var) {
      if (var_index[var] < 0) {
        ok = false;
        break;
      }
      x(var) = mb(var_index[var]);
    }
    if (!ok || !x.allFinite()) continue;
    // Higher-degree basis entries must match the product of the unknowns.
    for (int i = 0; i < n && ok; ++i) {
      int deg = 0;
      for (int v : basis[i]) deg += v;
      if (deg < 2) continue;
      const double expect = evaluate_monomial(basis[i], x);
      if (std::abs(mb(i) - expect) > kConsistencyTolerance * (1.0 + std::abs(expect))) ok = false;
    }
    if (ok) out.push_back(x);
  }
  if (out.empty()) {
    throw Error(ErrorCode::kNoRealSolutions, "action matrix has no real consistent eigenvectors");
  }
  return out;
}

Eigen::VectorXd polish_root(const QuadraticSystem& sys, Eigen::VectorXd x, int iterations) {
  const int nvars = sys.num_vars();
  const int free = nvars - 1;
  Eigen::VectorXd f = sys.evaluate(x);
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(sys.num_equations(), free);
    for (std::size_t m = 0; m < sys.monomials.size(); ++m) {
      const Exponents& e = sys.monomials[m];
      for (int v = 0; v < free; ++v) {
        if (e[v] == 0) continue;
        Exponents d = e;
        d[v] -= 1;
        jac.col(v) += sys.coeffs.col(static_cast<Eigen::Index>(m)) * (e[v] * evaluate_monomial(d, x));
      }
    }
    const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-f);
    Eigen::VectorXd trial = x;
    trial.head(free) += step;
    const Eigen::VectorXd ft = sys.evaluate(trial);
    if (!(ft.norm() < f.norm())) break;
    x = trial;
    f = ft;
  }
  return x;
}

std::vector<Eigen::Vector3d> solve_two_conics(const QuadraticSystem& sys) {
  if (sys.num_vars() != 3 || sys.num_equations() != 2) {
    throw Error(ErrorCode::kInvariantViolation, "expected two conics in three unknowns");
  }
  // Solve in (a, b) rotated by a fixed generic angle: the action variable is b,
  // and symmetric inputs often place distinct roots at equal b.
  const double angle = 0.6180339887498949;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t.topLeftCorner<2, 2>() << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const QuadraticSystem turned = transform_conics(sys, t);

  std::vector<Eigen::Vector3d> raw;
  try {
    for (const Eigen::VectorXd& ab : extract_solutions(conic_action_matrix(turned))) {
      raw.emplace_back(ab(0), ab(1), 1.0);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingularC && e.code() != ErrorCode::kEliminationFailure &&
        e.code() != ErrorCode::kNoRealSolutions) {
      throw;
    }
    raw = conics_by_resultant(turned);
  }
  for (Eigen::Vector3d& x : raw) x = t * x;

  const double coeff_norm = sys.coeffs.norm();
  std::vector<Eigen::Vector3d> out;
  for (const Eigen::Vector3d& cand : raw) {
    const Eigen::Vector3d x = polish_root(sys, cand);
    // Relative certificate: residual against the magnitude of the terms.
    const double mag = coeff_norm * std::max(1.0, x.squaredNorm());
    if (!(sys.evaluate(x).norm() <= 1e-6 * mag)) continue;
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Eigen::Vector3d& y) {
      return (x - y).norm() <= 1e-6 * (1.0 + x.norm());
    });
    if (!duplicate) out.push_back(x);
  }
  if (out.empty()) {
    throw Error(ErrorCode::kNoRealSolutions, "the two conics have no real intersection");
  }
  return out;
}

}  // namespace uscal::poly
