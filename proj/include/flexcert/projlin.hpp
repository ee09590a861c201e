#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flexcert/field_tower.hpp"

namespace flexcert {

using Vec = std::vector<TowerScalar>;

Vec operator+(const Vec& x, const Vec& y);
Vec operator-(const Vec& x, const Vec& y);
Vec operator*(const TowerScalar& s, const Vec& x);
TowerScalar dot(const Vec& x, const Vec& y);
bool is_zero(const Vec& x);
Vec unit_vector(std::size_t size, std::size_t index);

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vec>& rows);
  static Matrix from_columns(const std::vector<Vec>& columns);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  TowerScalar& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  const TowerScalar& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  const std::vector<TowerScalar>& data() const { return data_; }

  Vec row(std::size_t i) const;
  Vec column(std::size_t j) const;
  void set_column(std::size_t j, const Vec& v);

  Matrix transpose() const;
  bool is_symmetric() const;

  friend Matrix operator*(const Matrix& x, const Matrix& y);
  friend Vec operator*(const Matrix& m, const Vec& v);
  friend bool operator==(const Matrix& x, const Matrix& y);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<TowerScalar> data_;
};

/// Reduced row echelon form and pivot columns.
struct Echelon {
  Matrix reduced;
  std::vector<std::size_t> pivots;
};
Echelon row_reduce(Matrix m);

std::size_t matrix_rank(const Matrix& m);
/// Basis of {v : m v = 0}, one vector per free column, in column order.
std::vector<Vec> kernel(const Matrix& m);
/// Throws division_by_zero for singular input.
Matrix inverse(const Matrix& m);

/// Small seeded generator. Draws are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform integer in [-bound, bound].
  long symmetric(long bound);
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

class ProjPoint {
 public:
  ProjPoint() = default;
  explicit ProjPoint(Vec coords);

  static ProjPoint from_rationals(const std::vector<long>& coords);

  std::size_t size() const { return coords_.size(); }
  const Vec& coords() const { return coords_; }
  const TowerScalar& operator[](std::size_t i) const { return coords_[i]; }

  /// Representative whose first nonzero coordinate is 1.
  ProjPoint normalized() const;
  /// Rational multiple with coprime integer leaves; never inverts a radical.
  ProjPoint tidy() const;

  friend bool operator==(const ProjPoint& x, const ProjPoint& y);
  friend bool operator!=(const ProjPoint& x, const ProjPoint& y) {
    return !(x == y);
  }

  std::string to_string() const;

 private:
  Vec coords_;
};

/// Invertible change of coordinates: old = matrix * new.
class CoordChange {
 public:
  CoordChange() = default;
  explicit CoordChange(Matrix matrix);
  CoordChange(Matrix matrix, Matrix inverse);

  static CoordChange identity(std::size_t n);

  const Matrix& matrix() const { return matrix_; }
  const Matrix& inverse() const { return inverse_; }
  std::size_t size() const { return matrix_.rows(); }

  Vec to_old(const Vec& new_coords) const { return matrix_ * new_coords; }
  Vec to_new(const Vec& old_coords) const { return inverse_ * old_coords; }

  /// The change that applies `this` after `inner`: old = this * inner * new.
  CoordChange compose(const CoordChange& inner) const;

 private:
  Matrix matrix_;
  Matrix inverse_;
};

/// Quadratic form f(x) = x^T A x with A symmetric; the bilinear form is
/// beta(u, v) = u^T A v, so a cross term x0*x1 is stored as A01 = A10 = 1/2.
class QuadForm {
 public:
  QuadForm() = default;
  explicit QuadForm(Matrix matrix);

  std::size_t size() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }

  TowerScalar operator()(const Vec& x) const { return bilinear(x, x); }
  TowerScalar bilinear(const Vec& u, const Vec& v) const;
  /// The linear form beta(p, .), as a coefficient vector.
  Vec polar(const Vec& p) const { return matrix_ * p; }

  /// Form expressed in the new coordinates of `change`: M^T A M.
  QuadForm in_coordinates(const CoordChange& change) const;

  friend bool operator==(const QuadForm& x, const QuadForm& y) {
    return x.matrix_ == y.matrix_;
  }

 private:
  Matrix matrix_;
};

/// A linear subspace of K^{n+1} (projectively, of P^n), kept as a basis of
/// spanning vectors; the defining equations are derived on demand.
class LinearSubspace {
 public:
  LinearSubspace() = default;
  LinearSubspace(std::size_t ambient, std::vector<Vec> span);

  static LinearSubspace whole(std::size_t ambient);
  static LinearSubspace from_equations(std::size_t ambient,
                                       const std::vector<Vec>& equations);

  std::size_t ambient() const { return ambient_; }
  /// Vector-space dimension.
  std::size_t dim() const { return basis_.size(); }
  /// Projective dimension, -1 for the empty subspace.
  long projective_dim() const { return static_cast<long>(dim()) - 1; }
  const std::vector<Vec>& basis() const { return basis_; }
  std::vector<Vec> equations() const;
  bool contains(const Vec& v) const;
  bool contains(const LinearSubspace& other) const;

 private:
  std::size_t ambient_ = 0;
  std::vector<Vec> basis_;
};

std::size_t rank(const QuadForm& q);
LinearSubspace radical(const QuadForm& q);
/// The hyperplane beta(p, x) = 0 of a smooth point p of V(f).
LinearSubspace tangent_space(const QuadForm& q, const ProjPoint& p);
bool is_smooth_point(const QuadForm& q, const ProjPoint& p);

struct Diagonalization {
  CoordChange change;
  Vec diagonal;
};
/// M with M^T A M diagonal, by symmetric elimination. Never extends the tower.
Diagonalization congruent_diagonalize(const QuadForm& q);

struct PointSearchOptions {
  int retry_limit = 64;
  /// Attempts that only accept roots already in the tower before falling
  /// back to adjoining a square root.
  int rational_attempts = 16;
  long coefficient_bound = 10;
  std::function<bool(const ProjPoint&)> accept;
};

/// A point of V(f) inside `subspace`, found by intersecting random lines of
/// the subspace with the quadric. At most one square root is adjoined to
/// `tower`, and only for the returned point.
ProjPoint point_on_quadric(const QuadForm& q, const LinearSubspace& subspace,
                           Rng& rng, Tower& tower,
                           const PointSearchOptions& options = {});

}  // namespace flexcert
