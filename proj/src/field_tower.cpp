#include "flexcert/field_tower.hpp"

#include <sstream>

namespace flexcert {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::division_by_zero: return "division-by-zero";
    case ErrorCode::incompatible_towers: return "incompatible-towers";
    case ErrorCode::tower_limit: return "tower-limit";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::point_not_on_quadric: return "point-not-on-quadric";
    case ErrorCode::singular_point: return "singular-point";
    case ErrorCode::rank_too_low: return "rank-too-low";
    case ErrorCode::retry_limit: return "retry-limit-exceeded";
    case ErrorCode::out_of_domain: return "out-of-domain";
    case ErrorCode::hyperplane_witness_missing:
      return "hyperplane-witness-missing";
    case ErrorCode::endpoint_on_quadric: return "endpoint-on-quadric";
    case ErrorCode::singular_endpoint: return "singular-endpoint";
    case ErrorCode::line_not_in_x: return "line-not-in-X";
    case ErrorCode::pencil_not_smooth: return "pencil-not-smooth";
    case ErrorCode::duplicate_lambda: return "duplicate-lambda";
    case ErrorCode::parse: return "parse-error";
  }
  return "unknown";
}

struct TowerScalar::Parts {
  TowerScalar a;
  TowerScalar b;
};

namespace {

const TowerScalar& zero_scalar() {
  static const TowerScalar zero;
  return zero;
}

// Level of `level` at the given depth along its parent chain.
const TowerLevel* ancestor_at(const TowerLevel* level, std::size_t depth) {
  while (level != nullptr && level->depth > depth) level = level->parent.get();
  return level;
}

}  // namespace

bool is_ancestor_or_self(const std::shared_ptr<const TowerLevel>& ancestor,
                         const std::shared_ptr<const TowerLevel>& level) {
  if (!ancestor) return true;
  if (!level) return false;
  if (ancestor->depth > level->depth) return false;
  return ancestor_at(level.get(), ancestor->depth) == ancestor.get();
}

std::shared_ptr<const TowerLevel> join_levels(
    const std::shared_ptr<const TowerLevel>& x,
    const std::shared_ptr<const TowerLevel>& y) {
  if (x == y) return x;
  const std::size_t dx = x ? x->depth : 0;
  const std::size_t dy = y ? y->depth : 0;
  if (dx >= dy) {
    if (is_ancestor_or_self(y, x)) return x;
  } else if (is_ancestor_or_self(x, y)) {
    return y;
  }
  fail(ErrorCode::incompatible_towers,
       "scalars belong to different square-root towers");
}

TowerScalar TowerScalar::from_parts(std::shared_ptr<const TowerLevel> level,
                                    TowerScalar a, TowerScalar b) {
  if (b.is_zero() || !level) return a;
  TowerScalar out;
  out.level_ = std::move(level);
  out.parts_ = std::make_shared<const Parts>(Parts{std::move(a), std::move(b)});
  return out;
}

TowerScalar TowerScalar::generator(std::shared_ptr<const TowerLevel> level) {
  return from_parts(std::move(level), TowerScalar(0L), TowerScalar(1L));
}

TowerScalar TowerScalar::parse_rational(const std::string& text) {
  mpq_class q;
  if (text.empty() || q.set_str(text, 10) != 0) {
    fail(ErrorCode::parse, "not a rational number: '" + text + "'");
  }
  if (q.get_den() == 0) fail(ErrorCode::parse, "zero denominator: " + text);
  return TowerScalar(q);
}

const mpq_class& TowerScalar::rational() const {
  if (!is_rational()) {
    fail(ErrorCode::precondition, "scalar is not rational");
  }
  return rational_;
}

std::size_t TowerScalar::depth() const { return level_ ? level_->depth : 0; }

const TowerScalar& TowerScalar::a() const {
  return parts_ ? parts_->a : *this;
}

const TowerScalar& TowerScalar::b() const {
  return parts_ ? parts_->b : zero_scalar();
}

std::pair<TowerScalar, TowerScalar> TowerScalar::split_at(
    const std::shared_ptr<const TowerLevel>& level) const {
  if (level_ == level && parts_) return {parts_->a, parts_->b};
  return {*this, TowerScalar()};
}

TowerScalar TowerScalar::operator-() const {
  if (is_rational()) return TowerScalar(mpq_class(-rational_));
  return from_parts(level_, -parts_->a, -parts_->b);
}

TowerScalar operator+(const TowerScalar& x, const TowerScalar& y) {
  if (x.is_rational() && y.is_rational()) {
    return TowerScalar(mpq_class(x.rational_ + y.rational_));
  }
  if (x.is_zero()) return y;
  if (y.is_zero()) return x;
  auto level = join_levels(x.level_, y.level_);
  auto [xa, xb] = x.split_at(level);
  auto [ya, yb] = y.split_at(level);
  return TowerScalar::from_parts(level, xa + ya, xb + yb);
}

TowerScalar operator-(const TowerScalar& x, const TowerScalar& y) {
  return x + (-y);
}

TowerScalar operator*(const TowerScalar& x, const TowerScalar& y) {
  if (x.is_rational() && y.is_rational()) {
    return TowerScalar(mpq_class(x.rational_ * y.rational_));
  }
  if (x.is_zero() || y.is_zero()) return TowerScalar();
  if (x.is_one()) return y;
  if (y.is_one()) return x;
  auto level = join_levels(x.level_, y.level_);
  if (x.level_ != level) {
    return TowerScalar::from_parts(level, x * y.parts_->a, x * y.parts_->b);
  }
  if (y.level_ != level) {
    return TowerScalar::from_parts(level, x.parts_->a * y, x.parts_->b * y);
  }
  const TowerScalar& a1 = x.parts_->a;
  const TowerScalar& b1 = x.parts_->b;
  const TowerScalar& a2 = y.parts_->a;
  const TowerScalar& b2 = y.parts_->b;
  // Karatsuba on the two coefficients; g^2 = d.
  TowerScalar aa = a1 * a2;
  TowerScalar bb = b1 * b2;
  TowerScalar cross = (a1 + b1) * (a2 + b2) - aa - bb;
  return TowerScalar::from_parts(level, aa + level->radicand * bb, cross);
}

TowerScalar TowerScalar::inverse() const {
  if (is_zero()) fail(ErrorCode::division_by_zero, "division by zero");
  if (is_rational()) return TowerScalar(mpq_class(1 / rational_));
  const TowerScalar& a = parts_->a;
  const TowerScalar& b = parts_->b;
  TowerScalar norm = a * a - level_->radicand * (b * b);
  TowerScalar inv = norm.inverse();
  return from_parts(level_, a * inv, -(b * inv));
}

TowerScalar operator/(const TowerScalar& x, const TowerScalar& y) {
  if (y.is_zero()) fail(ErrorCode::division_by_zero, "division by zero");
  if (x.is_rational() && y.is_rational()) {
    return TowerScalar(mpq_class(x.rational_ / y.rational_));
  }
  if (x.is_zero()) return TowerScalar();
  return x * y.inverse();
}

bool operator==(const TowerScalar& x, const TowerScalar& y) {
  if (x.is_rational() && y.is_rational()) return x.rational_ == y.rational_;
  if (x.level_ != y.level_) {
    // Different levels: canonical forms differ unless the towers disagree.
    join_levels(x.level_, y.level_);
    return false;
  }
  return x.parts_->a == y.parts_->a && x.parts_->b == y.parts_->b;
}

TowerScalar canonicalize(const TowerScalar& x) {
  if (x.is_rational()) return TowerScalar(x.rational());
  return TowerScalar::from_parts(x.level(), canonicalize(x.a()),
                                 canonicalize(x.b()));
}

std::string TowerScalar::to_string() const {
  if (is_rational()) return rational_.get_str();
  std::ostringstream out;
  out << "(" << parts_->a.to_string() << ") + (" << parts_->b.to_string()
      << ")*r" << (level_->depth - 1);
  return out.str();
}

namespace {

std::optional<mpq_class> rational_sqrt(const mpq_class& q) {
  if (sgn(q) < 0) return std::nullopt;
  const mpz_class& num = q.get_num();
  const mpz_class& den = q.get_den();
  if (!mpz_perfect_square_p(num.get_mpz_t()) ||
      !mpz_perfect_square_p(den.get_mpz_t())) {
    return std::nullopt;
  }
  mpz_class rn = sqrt(num);
  mpz_class rd = sqrt(den);
  return mpq_class(rn, rd);
}

}  // namespace

std::optional<TowerScalar> sqrt_in(
    const TowerScalar& x, const std::shared_ptr<const TowerLevel>& level) {
  if (x.is_zero()) return TowerScalar();
  if (!level) {
    if (!x.is_rational()) return std::nullopt;
    auto r = rational_sqrt(x.rational());
    if (!r) return std::nullopt;
    return TowerScalar(*r);
  }
  const auto& parent = level->parent;
  if (x.level() != level) {
    // x lies below this level: (u + v g)^2 = x forces uv = 0.
    if (auto r = sqrt_in(x, parent)) return r;
    if (auto r = sqrt_in(x / level->radicand, parent)) {
      return TowerScalar::from_parts(level, TowerScalar(), *r);
    }
    return std::nullopt;
  }
  // (u + v g)^2 = a + b g  <=>  u^2 + d v^2 = a, 2uv = b.
  const TowerScalar& a = x.a();
  const TowerScalar& b = x.b();
  auto n = sqrt_in(a * a - level->radicand * (b * b), parent);
  if (!n) return std::nullopt;
  const TowerScalar half(mpq_class(1, 2));
  for (int sign : {1, -1}) {
    TowerScalar u2 = (sign > 0 ? a + *n : a - *n) * half;
    if (u2.is_zero()) continue;
    if (auto u = sqrt_in(u2, parent)) {
      TowerScalar v = b / (TowerScalar(2L) * *u);
      return TowerScalar::from_parts(level, *u, v);
    }
  }
  return std::nullopt;
}

std::vector<std::shared_ptr<const TowerLevel>> Tower::levels() const {
  std::vector<std::shared_ptr<const TowerLevel>> out(height());
  for (auto level = top_; level; level = level->parent) {
    out[level->depth - 1] = level;
  }
  return out;
}

std::vector<TowerScalar> Tower::radicands() const {
  std::vector<TowerScalar> out;
  for (const auto& level : levels()) out.push_back(level->radicand);
  return out;
}

Tower Tower::adjoin(const TowerScalar& radicand) const {
  if (radicand.is_zero()) {
    fail(ErrorCode::precondition, "cannot adjoin the square root of zero");
  }
  if (!contains(radicand)) {
    fail(ErrorCode::incompatible_towers, "radicand is not in this tower");
  }
  if (height() >= limit_) {
    fail(ErrorCode::tower_limit, "tower height limit " +
                                     std::to_string(limit_) + " reached");
  }
  auto level = std::make_shared<TowerLevel>();
  level->parent = top_;
  level->radicand = radicand;
  level->depth = height() + 1;
  Tower out(limit_);
  out.top_ = std::move(level);
  return out;
}

bool Tower::contains(const TowerScalar& x) const {
  return is_ancestor_or_self(x.level(), top_);
}

Tower Tower::joined(const Tower& other) const {
  auto top = join_levels(top_, other.top_);
  Tower out(std::max(limit_, other.limit_));
  out.top_ = std::move(top);
  return out;
}

std::optional<TowerScalar> existing_sqrt(const Tower& tower,
                                         const TowerScalar& x) {
  if (!tower.contains(x)) {
    fail(ErrorCode::incompatible_towers, "scalar is not in this tower");
  }
  return sqrt_in(x, tower.top());
}

SqrtResult try_sqrt(const Tower& tower, const TowerScalar& x) {
  if (auto root = existing_sqrt(tower, x)) return {*root, tower, false};
  Tower extended = tower.adjoin(x);
  return {TowerScalar::generator(extended.top()), extended, true};
}

}  // namespace flexcert
