#pragma once

// Exact arithmetic in Q(sqrt d_1)(sqrt d_2)...(sqrt d_k).
//
// A tower is a chain of immutable TowerLevel nodes, each adjoining one square
// root to the field below it. Towers grow copy-on-write: adjoining a radicand
// produces a new Tower sharing every lower level with the old one, so scalars
// built against the old tower remain valid in the new one.
//
// A TowerScalar lives at the lowest level that can hold it. A non-rational
// scalar at level L is a + b*g_L with a, b below L and b != 0; whenever an
// operation produces b == 0 the result is demoted to a. This makes equality
// a structural comparison.

#include <gmpxx.h>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flexcert/error.hpp"

namespace flexcert {

struct TowerLevel;

class TowerScalar {
 public:
  TowerScalar() = default;
  TowerScalar(long value) : rational_(value) {}  // NOLINT
  TowerScalar(mpq_class value) : rational_(std::move(value)) {  // NOLINT
    rational_.canonicalize();
  }

  /// Builds a + b*g_level and demotes it when b == 0.
  static TowerScalar from_parts(std::shared_ptr<const TowerLevel> level,
                                TowerScalar a, TowerScalar b);

  /// The generator sqrt(d) of the given level.
  static TowerScalar generator(std::shared_ptr<const TowerLevel> level);

  static TowerScalar parse_rational(const std::string& text);

  bool is_rational() const { return level_ == nullptr; }
  bool is_zero() const { return is_rational() && sgn(rational_) == 0; }
  bool is_one() const { return is_rational() && rational_ == 1; }
  const mpq_class& rational() const;

  /// Number of generators needed to express this value (0 for rationals).
  std::size_t depth() const;
  const std::shared_ptr<const TowerLevel>& level() const { return level_; }
  const TowerScalar& a() const;
  const TowerScalar& b() const;

  /// Coefficients of this value relative to `level`, which must be at or
  /// above the value's own level.
  std::pair<TowerScalar, TowerScalar> split_at(
      const std::shared_ptr<const TowerLevel>& level) const;

  TowerScalar inverse() const;

  TowerScalar operator-() const;
  friend TowerScalar operator+(const TowerScalar& x, const TowerScalar& y);
  friend TowerScalar operator-(const TowerScalar& x, const TowerScalar& y);
  friend TowerScalar operator*(const TowerScalar& x, const TowerScalar& y);
  friend TowerScalar operator/(const TowerScalar& x, const TowerScalar& y);
  TowerScalar& operator+=(const TowerScalar& y) { return *this = *this + y; }
  TowerScalar& operator-=(const TowerScalar& y) { return *this = *this - y; }
  TowerScalar& operator*=(const TowerScalar& y) { return *this = *this * y; }
  TowerScalar& operator/=(const TowerScalar& y) { return *this = *this / y; }

  friend bool operator==(const TowerScalar& x, const TowerScalar& y);
  friend bool operator!=(const TowerScalar& x, const TowerScalar& y) {
    return !(x == y);
  }

  /// Human-readable form such as "1/2 + (3)*r0"; not the interchange format.
  std::string to_string() const;

 private:
  struct Parts;

  mpq_class rational_;
  std::shared_ptr<const TowerLevel> level_;
  std::shared_ptr<const Parts> parts_;
};

struct TowerLevel {
  std::shared_ptr<const TowerLevel> parent;
  TowerScalar radicand;
  std::size_t depth = 0;  // 1 for the first adjoined root
};

/// The deepest of the two levels; throws incompatible_towers when neither
/// is an ancestor of the other.
std::shared_ptr<const TowerLevel> join_levels(
    const std::shared_ptr<const TowerLevel>& x,
    const std::shared_ptr<const TowerLevel>& y);

bool is_ancestor_or_self(const std::shared_ptr<const TowerLevel>& ancestor,
                         const std::shared_ptr<const TowerLevel>& level);

/// A square root of `x` inside the field generated by `level`, if one exists.
std::optional<TowerScalar> sqrt_in(
    const TowerScalar& x, const std::shared_ptr<const TowerLevel>& level);

class Tower {
 public:
  static constexpr std::size_t default_height_limit = 16;

  Tower() = default;
  explicit Tower(std::size_t height_limit) : limit_(height_limit) {}

  std::size_t height() const { return top_ ? top_->depth : 0; }
  std::size_t height_limit() const { return limit_; }
  const std::shared_ptr<const TowerLevel>& top() const { return top_; }

  /// Levels in adjunction order, index 0 is the first adjoined root.
  std::vector<std::shared_ptr<const TowerLevel>> levels() const;
  std::vector<TowerScalar> radicands() const;

  /// New tower with sqrt(radicand) adjoined on top. The caller is
  /// responsible for the radicand not being a square already.
  Tower adjoin(const TowerScalar& radicand) const;

  /// Whether `x` can be used with this tower (its level is in the chain).
  bool contains(const TowerScalar& x) const;

  /// Tower that is `other` if it extends this one, else throws.
  Tower joined(const Tower& other) const;

  friend bool operator==(const Tower& x, const Tower& y) {
    return x.top_ == y.top_;
  }

 private:
  std::shared_ptr<const TowerLevel> top_;
  std::size_t limit_ = default_height_limit;
};

struct SqrtResult {
  TowerScalar root;
  Tower tower;
  bool adjoined = false;
};

/// Square root of `x`, adjoining it to the tower when it is not already a
/// square there. sqrt(0) is 0.
SqrtResult try_sqrt(const Tower& tower, const TowerScalar& x);

/// Rebuilds `x` in canonical form. Values produced by this library are always
/// canonical already, so this is the identity on them.
TowerScalar canonicalize(const TowerScalar& x);

/// Square root of `x` if it already exists in `tower`.
std::optional<TowerScalar> existing_sqrt(const Tower& tower,
                                         const TowerScalar& x);

}  // namespace flexcert
