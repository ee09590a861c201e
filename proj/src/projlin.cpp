#include "flexcert/projlin.hpp"

#include <sstream>
#include <utility>

namespace flexcert {

Vec operator+(const Vec& x, const Vec& y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return out;
}

Vec operator-(const Vec& x, const Vec& y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

Vec operator*(const TowerScalar& s, const Vec& x) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  return out;
}

TowerScalar dot(const Vec& x, const Vec& y) {
  TowerScalar out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i].is_zero() && !y[i].is_zero()) out += x[i] * y[i];
  }
  return out;
}

bool is_zero(const Vec& x) {
  for (const auto& c : x) {
    if (!c.is_zero()) return false;
  }
  return true;
}

Vec unit_vector(std::size_t size, std::size_t index) {
  Vec out(size);
  out[index] = TowerScalar(1L);
  return out;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = TowerScalar(1L);
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vec>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix Matrix::from_columns(const std::vector<Vec>& columns) {
  Matrix m(columns.empty() ? 0 : columns.front().size(), columns.size());
  for (std::size_t j = 0; j < m.cols(); ++j) m.set_column(j, columns[j]);
  return m;
}

Vec Matrix::row(std::size_t i) const {
  return Vec(data_.begin() + static_cast<long>(i * cols_),
             data_.begin() + static_cast<long>((i + 1) * cols_));
}

Vec Matrix::column(std::size_t j) const {
  Vec out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void Matrix::set_column(std::size_t j, const Vec& v) {
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
}

Matrix Matrix::transpose() const {
  Matrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  }
  return out;
}

bool Matrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      if ((*this)(i, j) != (*this)(j, i)) return false;
    }
  }
  return true;
}

Matrix operator*(const Matrix& x, const Matrix& y) {
  Matrix out(x.rows_, y.cols_);
  for (std::size_t i = 0; i < x.rows_; ++i) {
    for (std::size_t k = 0; k < x.cols_; ++k) {
      const TowerScalar& xik = x(i, k);
      if (xik.is_zero()) continue;
      for (std::size_t j = 0; j < y.cols_; ++j) {
        if (!y(k, j).is_zero()) out(i, j) += xik * y(k, j);
      }
    }
  }
  return out;
}

Vec operator*(const Matrix& m, const Vec& v) {
  Vec out(m.rows_);
  for (std::size_t i = 0; i < m.rows_; ++i) {
    TowerScalar acc;
    for (std::size_t j = 0; j < m.cols_; ++j) {
      if (!m(i, j).is_zero() && !v[j].is_zero()) acc += m(i, j) * v[j];
    }
    out[i] = std::move(acc);
  }
  return out;
}

bool operator==(const Matrix& x, const Matrix& y) {
  return x.rows_ == y.rows_ && x.cols_ == y.cols_ && x.data_ == y.data_;
}

Echelon row_reduce(Matrix m) {
  Echelon out;
  std::size_t row = 0;
  for (std::size_t col = 0; col < m.cols() && row < m.rows(); ++col) {
    std::size_t pivot = row;
    while (pivot < m.rows() && m(pivot, col).is_zero()) ++pivot;
    if (pivot == m.rows()) continue;
    if (pivot != row) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        std::swap(m(row, j), m(pivot, j));
      }
    }
    TowerScalar inv = m(row, col).inverse();
    for (std::size_t j = col; j < m.cols(); ++j) m(row, j) *= inv;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == row || m(i, col).is_zero()) continue;
      TowerScalar factor = m(i, col);
      for (std::size_t j = col; j < m.cols(); ++j) {
        if (!m(row, j).is_zero()) m(i, j) -= factor * m(row, j);
      }
    }
    out.pivots.push_back(col);
    ++row;
  }
  out.reduced = std::move(m);
  return out;
}

std::size_t matrix_rank(const Matrix& m) { return row_reduce(m).pivots.size(); }

std::vector<Vec> kernel(const Matrix& m) {
  Echelon e = row_reduce(m);
  std::vector<bool> is_pivot(m.cols(), false);
  for (auto p : e.pivots) is_pivot[p] = true;
  std::vector<Vec> basis;
  for (std::size_t free = 0; free < m.cols(); ++free) {
    if (is_pivot[free]) continue;
    Vec v(m.cols());
    v[free] = TowerScalar(1L);
    for (std::size_t r = 0; r < e.pivots.size(); ++r) {
      v[e.pivots[r]] = -e.reduced(r, free);
    }
    basis.push_back(std::move(v));
  }
  return basis;
}

Matrix inverse(const Matrix& m) {
  if (m.rows() != m.cols()) {
    fail(ErrorCode::precondition, "inverse of a non-square matrix");
  }
  const std::size_t n = m.rows();
  Matrix aug(n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = m(i, j);
    aug(i, n + i) = TowerScalar(1L);
  }
  Echelon e = row_reduce(std::move(aug));
  if (e.pivots.size() < n || e.pivots[n - 1] != n - 1) {
    fail(ErrorCode::division_by_zero, "matrix is singular");
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = e.reduced(i, n + j);
  }
  return out;
}

long Rng::symmetric(long bound) {
  const auto span = static_cast<std::uint64_t>(2 * bound + 1);
  return static_cast<long>(engine_() % span) - bound;
}

ProjPoint::ProjPoint(Vec coords) : coords_(std::move(coords)) {
  if (is_zero(coords_)) {
    fail(ErrorCode::precondition, "projective point with all coordinates 0");
  }
}

ProjPoint ProjPoint::from_rationals(const std::vector<long>& coords) {
  Vec v;
  for (long c : coords) v.emplace_back(c);
  return ProjPoint(std::move(v));
}

ProjPoint ProjPoint::normalized() const {
  for (const auto& c : coords_) {
    if (!c.is_zero()) {
      if (c.is_one()) return *this;
      return ProjPoint(c.inverse() * coords_);
    }
  }
  return *this;
}

namespace {

void rational_leaves(const TowerScalar& x, mpz_class& den_lcm, mpz_class& num_gcd) {
  if (x.is_rational()) {
    const mpq_class& q = x.rational();
    mpz_lcm(den_lcm.get_mpz_t(), den_lcm.get_mpz_t(), q.get_den_mpz_t());
    mpz_gcd(num_gcd.get_mpz_t(), num_gcd.get_mpz_t(), q.get_num_mpz_t());
    return;
  }
  rational_leaves(x.a(), den_lcm, num_gcd);
  rational_leaves(x.b(), den_lcm, num_gcd);
}

}  // namespace

ProjPoint ProjPoint::tidy() const {
  mpz_class den = 1;
  mpz_class num = 0;
  for (const auto& c : coords_) rational_leaves(c, den, num);
  if (num == 0) return *this;
  const TowerScalar scale(mpq_class(den, num));
  if (scale.is_one()) return *this;
  return ProjPoint(scale * coords_);
}

bool operator==(const ProjPoint& x, const ProjPoint& y) {
  if (x.size() != y.size()) return false;
  // x ~ y iff x_i y_j = x_j y_i, anchored at the first nonzero of x.
  std::size_t anchor = 0;
  while (x.coords_[anchor].is_zero()) ++anchor;
  if (y.coords_[anchor].is_zero()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == anchor) continue;
    if (x.coords_[i] * y.coords_[anchor] != y.coords_[i] * x.coords_[anchor]) {
      return false;
    }
  }
  return true;
}

std::string ProjPoint::to_string() const {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (i) out << " : ";
    out << coords_[i].to_string();
  }
  out << ")";
  return out.str();
}

CoordChange::CoordChange(Matrix matrix)
    : matrix_(std::move(matrix)), inverse_(flexcert::inverse(matrix_)) {}

CoordChange::CoordChange(Matrix matrix, Matrix inverse)
    : matrix_(std::move(matrix)), inverse_(std::move(inverse)) {
  if (!(matrix_ * inverse_ == Matrix::identity(matrix_.rows()))) {
    fail(ErrorCode::precondition, "coordinate change inverse is wrong");
  }
}

CoordChange CoordChange::identity(std::size_t n) {
  return CoordChange(Matrix::identity(n), Matrix::identity(n));
}

CoordChange CoordChange::compose(const CoordChange& inner) const {
  CoordChange out;
  out.matrix_ = matrix_ * inner.matrix_;
  out.inverse_ = inner.inverse_ * inverse_;
  return out;
}

QuadForm::QuadForm(Matrix matrix) : matrix_(std::move(matrix)) {
  if (!matrix_.is_symmetric()) {
    fail(ErrorCode::precondition, "quadratic form matrix is not symmetric");
  }
}

TowerScalar QuadForm::bilinear(const Vec& u, const Vec& v) const {
  return dot(u, matrix_ * v);
}

QuadForm QuadForm::in_coordinates(const CoordChange& change) const {
  const Matrix& m = change.matrix();
  return QuadForm(m.transpose() * matrix_ * m);
}

LinearSubspace::LinearSubspace(std::size_t ambient, std::vector<Vec> span)
    : ambient_(ambient) {
  if (span.empty()) return;
  // Keep an independent subset, in the given order.
  std::vector<Vec> kept;
  for (auto& v : span) {
    kept.push_back(v);
    if (matrix_rank(Matrix::from_rows(kept)) < kept.size()) kept.pop_back();
  }
  basis_ = std::move(kept);
}

LinearSubspace LinearSubspace::whole(std::size_t ambient) {
  std::vector<Vec> basis;
  for (std::size_t i = 0; i < ambient; ++i) {
    basis.push_back(unit_vector(ambient, i));
  }
  LinearSubspace out;
  out.ambient_ = ambient;
  out.basis_ = std::move(basis);
  return out;
}

LinearSubspace LinearSubspace::from_equations(
    std::size_t ambient, const std::vector<Vec>& equations) {
  if (equations.empty()) return whole(ambient);
  LinearSubspace out;
  out.ambient_ = ambient;
  out.basis_ = kernel(Matrix::from_rows(equations));
  return out;
}

std::vector<Vec> LinearSubspace::equations() const {
  if (basis_.empty()) return whole(ambient_).basis();
  return kernel(Matrix::from_rows(basis_));
}

bool LinearSubspace::contains(const Vec& v) const {
  for (const auto& eq : equations()) {
    if (!dot(eq, v).is_zero()) return false;
  }
  return true;
}

bool LinearSubspace::contains(const LinearSubspace& other) const {
  const auto eqs = equations();
  for (const auto& v : other.basis()) {
    for (const auto& eq : eqs) {
      if (!dot(eq, v).is_zero()) return false;
    }
  }
  return true;
}

std::size_t rank(const QuadForm& q) { return matrix_rank(q.matrix()); }

LinearSubspace radical(const QuadForm& q) {
  return LinearSubspace(q.size(), kernel(q.matrix()));
}

bool is_smooth_point(const QuadForm& q, const ProjPoint& p) {
  return q(p.coords()).is_zero() && !is_zero(q.polar(p.coords()));
}

LinearSubspace tangent_space(const QuadForm& q, const ProjPoint& p) {
  if (!q(p.coords()).is_zero()) {
    fail(ErrorCode::point_not_on_quadric,
         "point " + p.to_string() + " is not on the quadric");
  }
  Vec polar = q.polar(p.coords());
  if (is_zero(polar)) {
    fail(ErrorCode::singular_point,
         "point " + p.to_string() + " is a singular point of the quadric");
  }
  return LinearSubspace::from_equations(q.size(), {polar});
}

Diagonalization congruent_diagonalize(const QuadForm& q) {
  const std::size_t n = q.size();
  Matrix a = q.matrix();
  Matrix m = Matrix::identity(n);

  // Simultaneous row/column operation: column j += s * column k.
  auto add_multiple = [&](std::size_t j, std::size_t k, const TowerScalar& s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!a(i, k).is_zero()) a(i, j) += s * a(i, k);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!a(k, i).is_zero()) a(j, i) += s * a(k, i);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!m(i, k).is_zero()) m(i, j) += s * m(i, k);
    }
  };
  auto swap_indices = [&](std::size_t j, std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) std::swap(a(i, j), a(i, k));
    for (std::size_t i = 0; i < n; ++i) std::swap(a(j, i), a(k, i));
    for (std::size_t i = 0; i < n; ++i) std::swap(m(i, j), m(i, k));
  };

  for (std::size_t k = 0; k < n; ++k) {
    if (a(k, k).is_zero()) {
      std::size_t j = k + 1;
      while (j < n && a(j, j).is_zero()) ++j;
      if (j < n) {
        swap_indices(j, k);
      } else {
        j = k + 1;
        while (j < n && a(k, j).is_zero()) ++j;
        if (j == n) continue;  // row k is already zero
        // a_kk becomes 2 a_kj since a_jj = 0.
        add_multiple(k, j, TowerScalar(1L));
      }
    }
    const TowerScalar inv = a(k, k).inverse();
    for (std::size_t j = k + 1; j < n; ++j) {
      if (a(k, j).is_zero()) continue;
      add_multiple(j, k, -(a(k, j) * inv));
    }
  }
  Vec diagonal(n);
  for (std::size_t i = 0; i < n; ++i) diagonal[i] = a(i, i);
  return {CoordChange(std::move(m)), std::move(diagonal)};
}

namespace {

Vec random_in(const LinearSubspace& s, Rng& rng, long bound) {
  Vec v(s.ambient());
  for (const auto& b : s.basis()) {
    long c = rng.symmetric(bound);
    if (c != 0) v = v + TowerScalar(c) * b;
  }
  return v;
}

}  // namespace

ProjPoint point_on_quadric(const QuadForm& q, const LinearSubspace& subspace,
                           Rng& rng, Tower& tower,
                           const PointSearchOptions& options) {
  auto acceptable = [&](const Vec& v) {
    if (is_zero(v) || !subspace.contains(v)) return false;
    ProjPoint p(v);
    return !options.accept || options.accept(p);
  };

  for (int attempt = 0; attempt < options.retry_limit; ++attempt) {
    const long bound = options.coefficient_bound + attempt;
    const bool may_adjoin = attempt >= options.rational_attempts;
    if (subspace.dim() == 0) break;
    Vec a = subspace.dim() == 1 ? subspace.basis().front()
                                : random_in(subspace, rng, bound);
    if (is_zero(a)) continue;
    const TowerScalar fa = q(a);
    if (fa.is_zero() && acceptable(a)) return ProjPoint(a).normalized();
    if (subspace.dim() == 1) continue;

    Vec b = random_in(subspace, rng, bound);
    if (matrix_rank(Matrix::from_rows({a, b})) < 2) continue;
    const TowerScalar fb = q(b);
    const TowerScalar fab = q.bilinear(a, b);
    if (fb.is_zero() && acceptable(b)) return ProjPoint(b).normalized();

    // f(s a + b) = s^2 f(a) + 2 s beta(a, b) + f(b).
    if (fa.is_zero()) {
      if (fab.is_zero()) {
        // Only a is on the quadric along this line, or the whole line is.
        if (fb.is_zero()) {
          Vec c = a + b;
          if (acceptable(c)) return ProjPoint(c).normalized();
        }
        continue;
      }
      Vec c = (-fb / (TowerScalar(2L) * fab)) * a + b;
      if (acceptable(c)) return ProjPoint(c).normalized();
      continue;
    }
    const TowerScalar disc = fab * fab - fa * fb;
    Tower candidate_tower = tower;
    TowerScalar root;
    if (auto existing = existing_sqrt(tower, disc)) {
      root = *existing;
    } else if (may_adjoin) {
      SqrtResult r = try_sqrt(tower, disc);
      root = r.root;
      candidate_tower = r.tower;
    } else {
      continue;
    }
    const TowerScalar inv = fa.inverse();
    for (int sign : {1, -1}) {
      TowerScalar s = (-fab + (sign > 0 ? root : -root)) * inv;
      Vec c = s * a + b;
      if (acceptable(c)) {
        tower = candidate_tower;
        return ProjPoint(c).normalized();
      }
    }
  }
  fail(ErrorCode::retry_limit, "no acceptable point on the quadric after " +
                                   std::to_string(options.retry_limit) +
                                   " attempts");
}

}  // namespace flexcert
