#include "flexcert/ci2q.hpp"

#include <algorithm>
#include <tuple>
#include <utility>

namespace flexcert {

namespace {

using Poly = std::vector<TowerScalar>;  // lowest degree first

void trim(Poly& p) {
  while (!p.empty() && p.back().is_zero()) p.pop_back();
}

Poly derivative(const Poly& p) {
  Poly out;
  for (std::size_t k = 1; k < p.size(); ++k) {
    out.push_back(TowerScalar(static_cast<long>(k)) * p[k]);
  }
  trim(out);
  return out;
}

Poly remainder(Poly a, const Poly& b) {
  const TowerScalar lead = b.back().inverse();
  while (a.size() >= b.size() && !a.empty()) {
    const TowerScalar k = a.back() * lead;
    const std::size_t shift = a.size() - b.size();
    for (std::size_t i = 0; i < b.size(); ++i) a[shift + i] -= k * b[i];
    a.pop_back();
    trim(a);
  }
  return a;
}

Poly poly_gcd(Poly a, Poly b) {
  trim(a);
  trim(b);
  while (!b.empty()) {
    Poly r = remainder(a, b);
    a = std::move(b);
    b = std::move(r);
  }
  return a;
}

TowerScalar determinant(Matrix m) {
  const std::size_t n = m.rows();
  TowerScalar det(1L);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && m(p, c).is_zero()) ++p;
    if (p == n) return TowerScalar();
    if (p != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(p, j), m(c, j));
      det = -det;
    }
    det *= m(c, c);
    const TowerScalar inv = m(c, c).inverse();
    for (std::size_t i = c + 1; i < n; ++i) {
      if (m(i, c).is_zero()) continue;
      const TowerScalar k = m(i, c) * inv;
      for (std::size_t j = c; j < n; ++j) m(i, j) -= k * m(c, j);
    }
  }
  return det;
}

// Coefficients of the polynomial through (x_k, y_k), by divided differences.
Poly interpolate(const std::vector<TowerScalar>& xs, std::vector<TowerScalar> ys) {
  const std::size_t n = xs.size();
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = n - 1; i >= level; --i) {
      ys[i] = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - level]);
      if (i == level) break;
    }
  }
  Poly out{ys[n - 1]};
  for (std::size_t k = n - 1; k-- > 0;) {
    // out = out * (t - x_k) + ys[k]
    Poly next(out.size() + 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
      next[i + 1] += out[i];
      next[i] -= xs[k] * out[i];
    }
    next[0] += ys[k];
    out = std::move(next);
  }
  trim(out);
  return out;
}

Matrix add_scaled(const Matrix& b, const TowerScalar& t, const Matrix& c) {
  Matrix out = b;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += t * c(i, j);
  }
  return out;
}

Vec flatten(const Matrix& m) { return m.data(); }

bool on_both(const Pencil& pencil, const Vec& x) {
  return pencil.beta(x).is_zero() && pencil.gamma(x).is_zero();
}

// Points s z + w (and z itself when it is a root at infinity) of the line
// through z, w on V(n).
std::vector<Vec> quadratic_points(const QuadForm& n, const Vec& z, const Vec& w,
                                  Tower& trial, bool may_adjoin) {
  // n(s z + w) = a s^2 + 2 b s + c.
  const TowerScalar a = n(z);
  const TowerScalar b = n.bilinear(z, w);
  const TowerScalar c = n(w);
  std::vector<Vec> out;
  if (a.is_zero()) {
    out.push_back(z);
    if (!b.is_zero()) {
      out.push_back((-c) * z + (TowerScalar(2L) * b) * w);
    } else if (c.is_zero()) {
      out.push_back(z + w);
    }
    return out;
  }
  const TowerScalar disc = b * b - a * c;
  TowerScalar root;
  if (auto r = existing_sqrt(trial, disc)) {
    root = *r;
  } else if (may_adjoin) {
    SqrtResult s = try_sqrt(trial, disc);
    trial = s.tower;
    root = s.root;
  } else {
    return out;
  }
  out.push_back((-b + root) * z + a * w);
  if (!root.is_zero()) out.push_back((-b - root) * z + a * w);
  return out;
}

std::optional<mpz_class> small_integer(const mpz_class& x) {
  if (mpz_sizeinbase(x.get_mpz_t(), 2) > 40) return std::nullopt;
  return x;
}

std::vector<mpz_class> divisors(const mpz_class& x) {
  std::vector<mpz_class> out;
  mpz_class a = abs(x);
  for (mpz_class d = 1; d * d <= a; ++d) {
    if (a % d == 0) {
      out.push_back(d);
      if (d * d != a) out.push_back(a / d);
    }
  }
  return out;
}

TowerScalar evaluate(const Poly& p, const TowerScalar& t) {
  TowerScalar out;
  for (std::size_t k = p.size(); k-- > 0;) out = out * t + p[k];
  return out;
}

// Rational roots of a polynomial with rational coefficients, by the rational
// root test; empty if the coefficients are not rational or too large.
std::vector<TowerScalar> rational_roots(Poly p) {
  trim(p);
  std::vector<TowerScalar> roots;
  if (p.size() < 2) return roots;
  for (const auto& c : p) {
    if (!c.is_rational()) return roots;
  }
  while (p.size() > 1 && p.front().is_zero()) {
    roots.emplace_back(0L);
    p.erase(p.begin());
  }
  if (p.size() < 2) return roots;
  mpz_class lcm = 1;
  for (const auto& c : p) {
    mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), c.rational().get_den_mpz_t());
  }
  auto constant = small_integer(mpz_class(p.front().rational() * lcm));
  auto leading = small_integer(mpz_class(p.back().rational() * lcm));
  if (!constant || !leading) return roots;
  for (const auto& num : divisors(*constant)) {
    for (const auto& den : divisors(*leading)) {
      for (int sign : {1, -1}) {
        TowerScalar t(mpq_class(sign * num, den));
        if (!evaluate(p, t).is_zero()) continue;
        if (std::find(roots.begin(), roots.end(), t) == roots.end()) {
          roots.push_back(t);
        }
      }
    }
  }
  return roots;
}

// det(b + t c) as a polynomial in t.
Poly pencil_determinant(const Matrix& b, const Matrix& c) {
  std::vector<TowerScalar> xs;
  std::vector<TowerScalar> ys;
  for (std::size_t k = 0; k <= b.rows(); ++k) {
    TowerScalar t(static_cast<long>(k));
    xs.push_back(t);
    ys.push_back(determinant(add_scaled(b, t, c)));
  }
  return interpolate(xs, ys);
}

Vec random_vec(Rng& rng, std::size_t k, long bound) {
  Vec v(k);
  for (auto& x : v) x = TowerScalar(rng.symmetric(bound));
  return v;
}

// Lines (as spanning pairs) contained in V(m) for a singular plane conic m.
std::vector<std::pair<Vec, Vec>> conic_lines(const QuadForm& m, Rng& rng,
                                             Tower& trial, bool may_adjoin) {
  std::vector<std::pair<Vec, Vec>> out;
  std::vector<Vec> ker = kernel(m.matrix());
  if (ker.size() == 2) {
    out.emplace_back(ker[0], ker[1]);
  } else if (ker.size() == 1) {
    const Vec& vertex = ker[0];
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vec a = random_vec(rng, 3, 5);
      Vec d = random_vec(rng, 3, 5);
      if (matrix_rank(Matrix::from_rows({vertex, a, d})) < 3) continue;
      for (auto& r : quadratic_points(m, a, d, trial, may_adjoin)) {
        out.emplace_back(vertex, r);
      }
      break;
    }
  }
  return out;
}

// Common zeros of two plane conics via a singular member of their pencil.
std::vector<Vec> plane_points(const QuadForm& b, const QuadForm& c, Rng& rng,
                              Tower& trial, bool may_adjoin) {
  std::vector<std::pair<QuadForm, const QuadForm*>> members;
  if (determinant(c.matrix()).is_zero()) members.emplace_back(c, &b);
  for (const auto& t : rational_roots(pencil_determinant(b.matrix(), c.matrix()))) {
    members.emplace_back(QuadForm(add_scaled(b.matrix(), t, c.matrix())), &c);
  }
  std::vector<Vec> out;
  for (const auto& [m, other] : members) {
    for (const auto& [z, w] : conic_lines(m, rng, trial, may_adjoin)) {
      for (auto& x : quadratic_points(*other, z, w, trial, may_adjoin)) {
        if (!is_zero(x)) out.push_back(std::move(x));
      }
    }
    if (!out.empty()) break;
  }
  return out;
}

// Two vectors spanning a line of V(b), from a hyperbolic frame of b. With
// x1*y1 + x2*y2 + ... available, z fixes y1 and w solves for x1 and y2, so the
// line needs no new square root.
std::optional<std::pair<Vec, Vec>> isotropic_line(const QuadForm& b,
                                                  const HyperbolicFrame& frame,
                                                  Rng& rng, long bound) {
  const std::size_t k = b.size();
  const Matrix hyp = hyperbolic_target(k, frame.pairs, frame.has_z);
  const QuadForm h(hyp);
  Vec z = random_vec(rng, k, bound);
  z[1] = TowerScalar();
  if (z[0].is_zero()) z[0] = TowerScalar(1L);
  z[1] = -h(z) / z[0];
  Vec w;
  if (frame.pairs >= 2) {
    w = random_vec(rng, k, bound);
    w[0] = TowerScalar();
    w[3] = TowerScalar();
    // b(w) = c1 + w0*w1 + w2*w3, 2 b(z, w) = 2 c0 + z1*w0 + z2*w3.
    const TowerScalar c1 = h(w);
    const TowerScalar c0 = TowerScalar(2L) * h.bilinear(z, w);
    const TowerScalar det = w[1] * z[2] - w[2] * z[1];
    if (det.is_zero()) return std::nullopt;
    w[0] = (-c1 * z[2] + w[2] * c0) / det;
    w[3] = (-w[1] * c0 + c1 * z[1]) / det;
  } else if (frame.rank() < k) {
    w = unit_vector(k, k - 1);
  } else {
    return std::nullopt;
  }
  const Matrix& m = frame.change.matrix();
  return std::make_pair(m * z, m * w);
}

// Common zeros of b and c on K^k, k >= 4: a line of V(b) met with V(c).
std::vector<Vec> line_points(const QuadForm& b, const QuadForm& c,
                             const std::optional<HyperbolicFrame>& frame,
                             Rng& rng, Tower& trial, bool may_adjoin,
                             int attempt) {
  const std::size_t k = b.size();
  Vec z;
  Vec w;
  std::optional<std::pair<Vec, Vec>> line;
  if (frame && frame->pairs >= 1) {
    line = isotropic_line(b, *frame, rng, 3 + attempt / 4);
  }
  if (line) {
    std::tie(z, w) = *line;
  } else {
    PointSearchOptions inner;
    inner.retry_limit = 8;
    inner.rational_attempts = may_adjoin ? 2 : inner.retry_limit;
    inner.coefficient_bound = 5 + attempt / 4;
    ProjPoint zp = point_on_quadric(b, LinearSubspace::whole(k), rng, trial, inner);
    LinearSubspace tangent =
        LinearSubspace::from_equations(k, {b.polar(zp.coords())});
    PointSearchOptions second = inner;
    second.accept = [&zp](const ProjPoint& x) { return x != zp; };
    z = zp.coords();
    w = point_on_quadric(b, tangent, rng, trial, second).coords();
  }
  std::vector<Vec> out;
  for (auto& x : quadratic_points(c, z, w, trial, may_adjoin)) {
    if (!is_zero(x)) out.push_back(std::move(x));
  }
  return out;
}

Matrix restrict_to(const Matrix& a, const std::vector<Vec>& basis) {
  const std::size_t k = basis.size();
  Matrix out(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec ai = a * basis[i];
    for (std::size_t j = 0; j < k; ++j) out(i, j) = dot(ai, basis[j]);
  }
  return out;
}

Vec combine(const std::vector<Vec>& basis, const Vec& coeffs) {
  Vec out(basis.front().size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (!coeffs[i].is_zero()) out = out + coeffs[i] * basis[i];
  }
  return out;
}

// A common zero of beta and gamma in span(basis).
ProjPoint search_pair(const Pencil& pencil, const std::vector<Vec>& basis,
                      Rng& rng, Tower& tower, const XSearchOptions& options,
                      const std::function<bool(const ProjPoint&)>& accept) {
  const std::size_t k = basis.size();
  const QuadForm b(restrict_to(pencil.beta.matrix(), basis));
  const QuadForm c(restrict_to(pencil.gamma.matrix(), basis));
  Tower base = tower;
  std::optional<HyperbolicFrame> frame;
  if (k >= 4) frame = hyperbolic_normalize(b, base);
  for (int attempt = 0; attempt < options.retry_limit && k >= 3; ++attempt) {
    const bool may_adjoin = attempt >= options.rational_attempts;
    Tower trial = base;
    std::vector<Vec> found;
    try {
      found = k == 3 ? plane_points(b, c, rng, trial, may_adjoin)
                     : line_points(b, c, frame, rng, trial, may_adjoin, attempt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::retry_limit) throw;
      continue;
    }
    if (!found.empty()) {
      std::rotate(found.begin(), found.begin() + rng.next() % found.size(),
                  found.end());
    }
    for (const auto& x : found) {
      Vec v = combine(basis, x);
      if (is_zero(v) || !on_both(pencil, v)) continue;
      ProjPoint point(std::move(v));
      if (accept && !accept(point)) continue;
      tower = trial;
      return point.tidy();
    }
  }
  fail(ErrorCode::retry_limit, "no point of X found after " +
                                   std::to_string(options.retry_limit) +
                                   " attempts");
}

Vec complement_vector(const LineChart& chart, const ProjPoint& u) {
  const Matrix& m = chart.adapted.matrix();
  Vec out(chart.pencil.ambient());
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k].is_zero()) continue;
    out = out + u[k] * m.column(k);
  }
  return out;
}

VerifyReport invalid(std::string message) {
  VerifyReport r;
  r.valid = false;
  r.message = std::move(message);
  return r;
}

// Vectors orthogonal for both forms, when det(B + tC) splits over Q.
std::vector<Vec> split_basis(const Pencil& pencil) {
  const Matrix& b = pencil.beta.matrix();
  const Matrix& c = pencil.gamma.matrix();
  const std::size_t n = pencil.ambient();
  Poly p = pencil_determinant(b, c);
  trim(p);
  if (p.empty() || n + 1 - p.size() > 1) return {};
  std::vector<Vec> out;
  for (const auto& t : rational_roots(p)) {
    std::vector<Vec> ker = kernel(add_scaled(b, t, c));
    if (ker.size() != 1) return {};
    out.push_back(ker.front());
  }
  if (p.size() == n) {
    std::vector<Vec> ker = kernel(c);
    if (ker.size() != 1) return {};
    out.push_back(ker.front());
  }
  if (out.size() != n) return {};
  return out;
}

// Three random split directions, or the whole space.
LinearSubspace auxiliary_subspace(const Pencil& pencil,
                                  const std::vector<Vec>& split, Rng& rng) {
  if (split.size() < 6) return LinearSubspace::whole(pencil.ambient());
  std::vector<Vec> pool = split;
  std::vector<Vec> chosen;
  while (chosen.size() < 3) {
    const std::size_t i = rng.next() % pool.size();
    chosen.push_back(pool[i]);
    pool.erase(pool.begin() + static_cast<long>(i));
  }
  return LinearSubspace(pencil.ambient(), chosen);
}

}  // namespace

Pencil::Pencil(QuadForm b, QuadForm c) : beta(std::move(b)), gamma(std::move(c)) {
  if (beta.size() != gamma.size() || beta.size() < 4) {
    fail(ErrorCode::precondition,
         "pencil forms must have the same size, at least 4");
  }
}

bool Pencil::contains(const Vec& x) const { return on_both(*this, x); }

bool Pencil::is_smooth_point(const Vec& x) const {
  return matrix_rank(Matrix::from_rows({beta.polar(x), gamma.polar(x)})) == 2;
}

SmoothnessReport pencil_smoothness(const Pencil& pencil) {
  SmoothnessReport report;
  const Matrix& b = pencil.beta.matrix();
  const Matrix& c = pencil.gamma.matrix();
  if (matrix_rank(Matrix::from_rows({flatten(b), flatten(c)})) < 2) {
    report.reason = "forms are proportional";
    return report;
  }
  const std::size_t n = pencil.ambient();
  std::vector<TowerScalar> xs;
  std::vector<TowerScalar> ys;
  for (std::size_t k = 0; k <= n; ++k) {
    TowerScalar t(static_cast<long>(k));
    xs.push_back(t);
    ys.push_back(determinant(add_scaled(b, t, c)));
  }
  Poly p = interpolate(xs, ys);
  report.discriminant = p;
  if (p.empty()) {
    report.reason = "det(sB + tC) vanishes identically";
    return report;
  }
  report.infinity_multiplicity = n - (p.size() - 1);
  if (report.infinity_multiplicity > 1) {
    report.reason = "det(sB + tC) has a repeated root at s = 0";
    return report;
  }
  if (poly_gcd(p, derivative(p)).size() > 1) {
    report.reason = "det(sB + tC) has a repeated root";
    return report;
  }
  report.smooth = true;
  report.reason = "det(sB + tC) is squarefree of degree " + std::to_string(n);
  return report;
}

bool span_in_X(const Pencil& pencil, const std::vector<ProjPoint>& points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i; j < points.size(); ++j) {
      const Vec& u = points[i].coords();
      const Vec& v = points[j].coords();
      if (!pencil.beta.bilinear(u, v).is_zero() ||
          !pencil.gamma.bilinear(u, v).is_zero()) {
        return false;
      }
    }
  }
  return true;
}

ProjPoint point_on_X(const Pencil& pencil, const LinearSubspace& subspace,
                     Rng& rng, Tower& tower, const XSearchOptions& options,
                     const std::function<bool(const ProjPoint&)>& accept) {
  return search_pair(pencil, subspace.basis(), rng, tower, options, accept);
}

Line find_line_through(const Pencil& pencil, const ProjPoint& p, Rng& rng,
                       Tower& tower, const XSearchOptions& options) {
  if (p.size() != pencil.ambient() || !pencil.contains(p.coords())) {
    fail(ErrorCode::precondition, "point " + p.to_string() + " is not on X");
  }
  if (!pencil.is_smooth_point(p.coords())) {
    fail(ErrorCode::singular_point, "X is singular at " + p.to_string());
  }
  // Lines through p are the common zeros of beta, gamma on T_pX / p.
  LinearSubspace tangent = LinearSubspace::from_equations(
      pencil.ambient(),
      {pencil.beta.polar(p.coords()), pencil.gamma.polar(p.coords())});
  std::vector<Vec> chosen{p.coords()};
  std::vector<Vec> complement;
  for (const auto& v : tangent.basis()) {
    chosen.push_back(v);
    if (matrix_rank(Matrix::from_rows(chosen)) < chosen.size()) {
      chosen.pop_back();
    } else {
      complement.push_back(v);
    }
  }
  ProjPoint x = search_pair(pencil, complement, rng, tower, options, {});
  Line line{p.tidy(), x};
  if (!span_in_X(pencil, {line.v1, line.v2})) {
    fail(ErrorCode::line_not_in_x, "found line is not contained in X");
  }
  return line;
}

Line search_line(const Pencil& pencil, Rng& rng, Tower& tower,
                 const XSearchOptions& options) {
  const LinearSubspace aux =
      auxiliary_subspace(pencil, split_basis(pencil), rng);
  Tower trial = tower;
  ProjPoint a = point_on_X(pencil, aux, rng, trial, options);
  Line line = find_line_through(pencil, a, rng, trial, options);
  tower = trial;
  return line;
}

Matrix LineChart::projection() const {
  const Matrix& inv = adapted.inverse();
  const std::size_t rows = pencil.ambient() - 2;
  Matrix out(rows, inv.cols());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < inv.cols(); ++j) out(i, j) = inv(i, j);
  }
  return out;
}

ProjPoint LineChart::forward(const ProjPoint& x) const {
  Vec u = projection() * x.coords();
  if (is_zero(u)) {
    fail(ErrorCode::out_of_domain, "point " + x.to_string() + " lies on the line");
  }
  return ProjPoint(std::move(u)).tidy();
}

std::optional<ProjPoint> LineChart::inverse(const ProjPoint& u) const {
  const Vec U = complement_vector(*this, u);
  const Vec& v1 = line.v1.coords();
  const Vec& v2 = line.v2.coords();
  const TowerScalar two(2L);
  const Vec r1{two * pencil.beta.bilinear(v1, U), two * pencil.beta.bilinear(v2, U),
               pencil.beta(U)};
  const Vec r2{two * pencil.gamma.bilinear(v1, U),
               two * pencil.gamma.bilinear(v2, U), pencil.gamma(U)};
  const TowerScalar s = r1[1] * r2[2] - r1[2] * r2[1];
  const TowerScalar t = r1[2] * r2[0] - r1[0] * r2[2];
  const TowerScalar w = r1[0] * r2[1] - r1[1] * r2[0];
  if (w.is_zero()) return std::nullopt;
  return ProjPoint(s * v1 + t * v2 + w * U).tidy();
}

bool LineChart::in_domain(const ProjPoint& x) const {
  if (x.size() != pencil.ambient() || !pencil.contains(x.coords())) return false;
  Vec u = projection() * x.coords();
  return !is_zero(u) && !image(u).is_zero();
}

LineChart chart_from_line(const Pencil& pencil, const Line& line) {
  const std::size_t n = pencil.ambient();
  if (line.v1.size() != n || line.v2.size() != n) {
    fail(ErrorCode::precondition, "line points have the wrong size");
  }
  if (matrix_rank(Matrix::from_rows({line.v1.coords(), line.v2.coords()})) != 2) {
    fail(ErrorCode::precondition, "line points coincide");
  }
  if (!span_in_X(pencil, {line.v1, line.v2})) {
    fail(ErrorCode::line_not_in_x, "the line is not contained in X");
  }
  std::vector<Vec> chosen{line.v1.coords(), line.v2.coords()};
  std::vector<Vec> columns;
  for (std::size_t i = 0; i < n && chosen.size() < n; ++i) {
    chosen.push_back(unit_vector(n, i));
    if (matrix_rank(Matrix::from_rows(chosen)) < chosen.size()) {
      chosen.pop_back();
    } else {
      columns.push_back(chosen.back());
    }
  }
  const std::size_t m = columns.size();
  Matrix wt = Matrix::from_rows(columns);  // W^T
  const Vec b1 = wt * pencil.beta.polar(line.v1.coords());
  const Vec b2 = wt * pencil.beta.polar(line.v2.coords());
  const Vec g1 = wt * pencil.gamma.polar(line.v1.coords());
  const Vec g2 = wt * pencil.gamma.polar(line.v2.coords());
  const TowerScalar half(mpq_class(1, 2));
  Matrix q(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      q(i, j) = half * (b1[i] * g2[j] + g2[i] * b1[j] - b2[i] * g1[j] -
                        g1[i] * b2[j]);
    }
  }
  columns.push_back(line.v1.coords());
  columns.push_back(line.v2.coords());
  return LineChart{pencil, line, CoordChange(Matrix::from_columns(columns)),
                   QuadForm(std::move(q))};
}

QuadForm dl_quadric(const LineChart& chart) {
  const Matrix p = chart.projection();
  return QuadForm(p.transpose() * chart.image.matrix() * p);
}

namespace {

CiSegment make_segment(const LineChart& chart, const ProjPoint& from,
                       const ProjPoint& to, Tower& tower) {
  CiSegment seg{chart.line, from.tidy(), to.tidy(), {}};
  seg.inner = connect_complement(chart.image, chart.forward(from),
                                 chart.forward(to), tower);
  return seg;
}

}  // namespace

CiPath connect_on_X(const Pencil& pencil, const ProjPoint& p,
                    const ProjPoint& q, const std::vector<Line>& lines,
                    Rng& rng, Tower& tower, const ConnectXOptions& options) {
  SmoothnessReport smooth = pencil_smoothness(pencil);
  if (!smooth.smooth) fail(ErrorCode::pencil_not_smooth, smooth.reason);
  for (const auto* x : {&p, &q}) {
    if (x->size() != pencil.ambient() || !pencil.contains(x->coords())) {
      fail(ErrorCode::point_not_on_quadric,
           "endpoint " + x->to_string() + " is not on X");
    }
  }
  CiPath path;
  path.pencil = pencil;
  path.p = p.tidy();
  path.q = q.tidy();
  if (p == q) {
    path.tower = tower;
    return path;
  }

  struct Candidate {
    LineChart chart;
    Tower tower;
  };
  std::optional<Candidate> for_p;
  std::optional<Candidate> for_q;
  auto consider = [&](const LineChart& chart, const Tower& trial) {
    const bool hp = chart.in_domain(p);
    const bool hq = chart.in_domain(q);
    if (hp && !for_p) for_p = Candidate{chart, trial};
    if (hq && !for_q) for_q = Candidate{chart, trial};
    return hp && hq;
  };
  auto finish = [&](std::vector<CiSegment> segments) {
    for (auto& s : segments) s.inner.tower = tower;
    path.segments = std::move(segments);
    path.tower = tower;
    return path;
  };

  for (const auto& line : lines) {
    LineChart chart = chart_from_line(pencil, line);
    if (consider(chart, tower)) return finish({make_segment(chart, p, q, tower)});
  }
  XSearchOptions search;
  search.retry_limit = 16;
  search.rational_attempts = 2;
  for (int attempt = 0; attempt < options.retry_limit; ++attempt) {
    Tower trial = tower;
    try {
      Line line = search_line(pencil, rng, trial, search);
      LineChart chart = chart_from_line(pencil, line);
      if (consider(chart, trial)) {
        tower = trial;
        return finish({make_segment(chart, p, q, tower)});
      }
      if (for_p && for_q) break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::retry_limit) throw;
    }
  }
  if (for_p && for_q) {
    // Two charts joined at a point z of X outside both D_l.
    Tower joined = for_p->tower.joined(for_q->tower);
    const std::size_t m = pencil.ambient() - 2;
    for (int attempt = 0; attempt < options.retry_limit; ++attempt) {
      Vec u(m);
      for (auto& x : u) x = TowerScalar(rng.symmetric(5 + attempt));
      if (is_zero(u)) continue;
      auto z = for_p->chart.inverse(ProjPoint(u));
      if (!z || !for_p->chart.in_domain(*z) || !for_q->chart.in_domain(*z)) {
        continue;
      }
      tower = joined;
      std::vector<CiSegment> segs;
      segs.push_back(make_segment(for_p->chart, p, *z, tower));
      segs.push_back(make_segment(for_q->chart, *z, q, tower));
      return finish(std::move(segs));
    }
  }
  fail(ErrorCode::retry_limit, "no line chart contains both endpoints after " +
                                   std::to_string(options.retry_limit) +
                                   " attempts");
}

namespace {

VerifyReport verify_ci_steps(const CiPath& path) {
  const Pencil& pencil = path.pencil;
  SmoothnessReport smooth = pencil_smoothness(pencil);
  if (!smooth.smooth) return invalid("pencil is not smooth: " + smooth.reason);
  for (const auto& level : path.tower.levels()) {
    if (sqrt_in(level->radicand, level->parent)) {
      return invalid("tower radicand " + level->radicand.to_string() +
                     " is already a square");
    }
  }
  for (const auto* x : {&path.p, &path.q}) {
    if (x->size() != pencil.ambient() || !pencil.contains(x->coords())) {
      return invalid("endpoint is not on X");
    }
  }
  auto in_tower = [&path](const Vec& v) {
    return std::all_of(v.begin(), v.end(), [&path](const TowerScalar& x) {
      return path.tower.contains(x);
    });
  };
  bool declared = in_tower(path.p.coords()) && in_tower(path.q.coords());
  for (const auto& seg : path.segments) {
    declared = declared && in_tower(seg.line.v1.coords()) &&
               in_tower(seg.line.v2.coords()) && in_tower(seg.from.coords()) &&
               in_tower(seg.to.coords());
    for (const auto& s : seg.inner.steps) {
      declared = declared && in_tower(s.entry.coords()) && in_tower(s.target) &&
                 in_tower(s.exit.coords()) && in_tower(s.frame.data());
    }
  }
  if (!declared) return invalid("scalar outside the declared tower");
  if (path.segments.empty()) {
    if (path.p != path.q) return invalid("empty path between distinct points");
  } else {
    if (path.segments.front().from != path.p) return invalid("chain break at segment 1");
    for (std::size_t k = 1; k < path.segments.size(); ++k) {
      if (path.segments[k].from != path.segments[k - 1].to) {
        return invalid("chain break at segment " + std::to_string(k + 1));
      }
    }
    if (path.segments.back().to != path.q) {
      return invalid("chain break at segment " +
                     std::to_string(path.segments.size()));
    }
  }

  std::size_t total = 0;
  for (std::size_t k = 0; k < path.segments.size(); ++k) {
    const CiSegment& seg = path.segments[k];
    const std::string at = " at segment " + std::to_string(k + 1);
    if (!span_in_X(pencil, {seg.line.v1, seg.line.v2})) {
      return invalid("line not in X" + at);
    }
    LineChart chart = chart_from_line(pencil, seg.line);
    const std::size_t r = rank(chart.image);
    if (r < 3 || r > 4) return invalid("image quadric has rank " + std::to_string(r) + at);
    if (!(seg.inner.form == chart.image) || seg.inner.problem != Problem::complement) {
      return invalid("inner form is not the image quadric" + at);
    }
    if (!chart.in_domain(seg.from) || !chart.in_domain(seg.to)) {
      return invalid("segment endpoint lies in D_l" + at);
    }
    if (chart.forward(seg.from) != seg.inner.p || chart.forward(seg.to) != seg.inner.q) {
      return invalid("projected endpoints differ from the inner path" + at);
    }
    MovePath inner = seg.inner;
    inner.tower = path.tower;
    VerifyReport rep = verify_path(inner);
    if (!rep.valid) return invalid(rep.message + at);
    std::vector<ProjPoint> visited{inner.p};
    for (const auto& s : inner.steps) visited.push_back(s.exit);
    for (std::size_t j = 0; j < visited.size(); ++j) {
      auto x = chart.inverse(visited[j]);
      if (!x || !chart.in_domain(*x) || chart.forward(*x) != visited[j]) {
        return invalid("lift failure at point " + std::to_string(j) + at);
      }
    }
    if (*chart.inverse(inner.p) != seg.from || *chart.inverse(inner.q) != seg.to) {
      return invalid("lifted endpoints differ from the segment" + at);
    }
    total += inner.steps.size();
  }
  VerifyReport ok;
  ok.valid = true;
  ok.step_count = total;
  ok.radicands = path.tower.radicands();
  ok.message = "valid: " + std::to_string(path.segments.size()) +
               " segments, " + std::to_string(total) + " steps";
  return ok;
}

}  // namespace

VerifyReport verify_ci_path(const CiPath& path) {
  try {
    return verify_ci_steps(path);
  } catch (const Error& e) {
    return invalid(std::string("malformed path: ") + e.what());
  }
}

DegreeAudit inner_degree_audit(const Chart& inner) {
  DegreeAudit audit;
  if (is_zero(inner.excluded_hyperplane()) ||
      is_zero(inner.form().matrix().data())) {
    audit.message = "inner chart has a trivial boundary component";
    return audit;
  }
  audit.degrees = {1, 2};
  audit.total = 3;
  audit.ok = true;
  audit.message = "hyperplane + quadric";
  return audit;
}

DegreeAudit polar_degree_audit(const LineChart& chart, const Chart& inner) {
  DegreeAudit audit;
  if (inner.ambient() != chart.image.size() || !(inner.form() == chart.image)) {
    audit.message = "inner chart is not a chart of the image quadric complement";
    return audit;
  }
  const Matrix p = chart.projection();
  const Vec h = inner.excluded_hyperplane();
  Vec pulled(chart.pencil.ambient());
  for (std::size_t j = 0; j < pulled.size(); ++j) pulled[j] = dot(h, p.column(j));
  const QuadForm dl(p.transpose() * chart.image.matrix() * p);
  const Vec& v1 = chart.line.v1.coords();
  const Vec& v2 = chart.line.v2.coords();
  if (is_zero(pulled)) {
    audit.message = "pulled-back hyperplane vanishes identically";
    return audit;
  }
  if (!dot(pulled, v1).is_zero() || !dot(pulled, v2).is_zero() ||
      !dl(v1).is_zero() || !dl(v2).is_zero() || !dl.bilinear(v1, v2).is_zero()) {
    audit.message = "pullback does not vanish on the line";
    return audit;
  }
  if (matrix_rank(Matrix::from_rows({flatten(dl.matrix()),
                                     flatten(chart.pencil.beta.matrix()),
                                     flatten(chart.pencil.gamma.matrix())})) < 3) {
    audit.message = "D_l quadric lies in the pencil";
    return audit;
  }
  audit.degrees = {1, 2};
  audit.total = 3;
  audit.ok = true;
  audit.message = "hyperplane section + D_l, total 3H";
  return audit;
}

Pencil eacx_build(const std::vector<TowerScalar>& lambdas) {
  const std::size_t n = lambdas.size();
  if (n < 6) fail(ErrorCode::precondition, "need at least 6 values");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (lambdas[i] == lambdas[j]) {
        fail(ErrorCode::duplicate_lambda,
             "value " + lambdas[i].to_string() + " repeats");
      }
    }
  }
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) c(i, i) = lambdas[i];
  return Pencil(QuadForm(Matrix::identity(n)), QuadForm(std::move(c)));
}

json pencil_to_json(const Pencil& pencil, const Tower& tower) {
  return json{{"n", pencil.n()},
              {"dim", pencil.ambient() - 1},
              {"tower", tower_to_json(tower)},
              {"beta", matrix_to_json(pencil.beta.matrix())},
              {"gamma", matrix_to_json(pencil.gamma.matrix())}};
}

Pencil pencil_from_json(const json& j, Tower& tower) {
  if (!j.is_object() || !j.contains("beta") || !j.contains("gamma")) {
    fail(ErrorCode::parse, "pencil needs 'beta' and 'gamma'");
  }
  if (j.contains("tower")) tower = tower_from_json(j.at("tower"), tower.height_limit());
  Matrix b = matrix_from_json(j.at("beta"), tower);
  Matrix c = matrix_from_json(j.at("gamma"), tower);
  if (b.rows() != b.cols() || !b.is_symmetric() || c.rows() != c.cols() ||
      !c.is_symmetric()) {
    fail(ErrorCode::parse, "pencil matrices must be square and symmetric");
  }
  if (j.contains("dim") && j.at("dim").get<std::size_t>() + 1 != b.rows()) {
    fail(ErrorCode::parse, "pencil dimension does not match the matrices");
  }
  if (j.contains("n") && j.at("n").get<std::size_t>() + 3 != b.rows()) {
    fail(ErrorCode::parse, "pencil n does not match the matrices");
  }
  return Pencil(QuadForm(std::move(b)), QuadForm(std::move(c)));
}

json line_to_json(const Line& line) {
  return json{{"v1", vec_to_json(line.v1.coords())},
              {"v2", vec_to_json(line.v2.coords())}};
}

Line line_from_json(const json& j, const Tower& tower) {
  if (!j.is_object() || !j.contains("v1") || !j.contains("v2")) {
    fail(ErrorCode::parse, "line needs 'v1' and 'v2'");
  }
  return Line{ProjPoint(vec_from_json(j.at("v1"), tower)),
              ProjPoint(vec_from_json(j.at("v2"), tower))};
}

json ci_certificate_json(const CiPath& path) {
  json segments = json::array();
  for (const auto& s : path.segments) {
    segments.push_back(json{{"line", line_to_json(s.line)},
                            {"from", vec_to_json(s.from.coords())},
                            {"to", vec_to_json(s.to.coords())},
                            {"path", path_to_json(s.inner)}});
  }
  json doc{{"version", certificate_version},
           {"kind", "ci"},
           {"seed", path.seed},
           {"tower", tower_to_json(path.tower)},
           {"pencil", {{"beta", matrix_to_json(path.pencil.beta.matrix())},
                       {"gamma", matrix_to_json(path.pencil.gamma.matrix())}}},
           {"endpoints", {{"p", vec_to_json(path.p.coords())},
                          {"q", vec_to_json(path.q.coords())}}},
           {"segments", std::move(segments)}};
  seal(doc);
  return doc;
}

VerifyReport verify_ci_certificate(const json& doc, const Pencil& pencil,
                                   const Tower& pencil_tower) {
  CiPath path;
  try {
    if (!doc.is_object() || doc.value("version", 0) != certificate_version ||
        doc.value("kind", "") != "ci") {
      return invalid("not a version 1 ci certificate");
    }
    Tower tower = tower_from_json(doc.at("tower"));
    const auto levels = tower.levels();
    const auto base = pencil_tower.levels();
    if (base.size() > levels.size()) {
      return invalid("certificate tower does not extend the pencil tower");
    }
    for (std::size_t k = 0; k < base.size(); ++k) {
      if (scalar_to_json(base[k]->radicand) != scalar_to_json(levels[k]->radicand)) {
        return invalid("certificate tower does not extend the pencil tower");
      }
    }
    doc.at("pencil");
    path.pencil = Pencil(
        QuadForm(matrix_from_json(matrix_to_json(pencil.beta.matrix()), tower)),
        QuadForm(matrix_from_json(matrix_to_json(pencil.gamma.matrix()), tower)));
    path.tower = tower;
    path.seed = doc.at("seed").get<std::uint64_t>();
    path.p = ProjPoint(vec_from_json(doc.at("endpoints").at("p"), tower));
    path.q = ProjPoint(vec_from_json(doc.at("endpoints").at("q"), tower));
    for (const auto& s : doc.at("segments")) {
      CiSegment seg;
      seg.line = line_from_json(s.at("line"), tower);
      seg.from = ProjPoint(vec_from_json(s.at("from"), tower));
      seg.to = ProjPoint(vec_from_json(s.at("to"), tower));
      seg.inner = path_from_json(s.at("path"), tower);
      path.segments.push_back(std::move(seg));
    }
  } catch (const Error& e) {
    return invalid(std::string("malformed certificate: ") + e.what());
  } catch (const json::exception& e) {
    return invalid(std::string("malformed certificate: ") + e.what());
  }
  VerifyReport report = verify_ci_path(path);
  if (!report.valid) return report;
  const json& pj = doc.at("pencil");
  if (pj.at("beta") != matrix_to_json(pencil.beta.matrix()) ||
      pj.at("gamma") != matrix_to_json(pencil.gamma.matrix())) {
    return invalid("certificate pencil differs from the supplied pencil");
  }
  if (!digest_matches(doc)) return invalid("digest mismatch");
  return report;
}

}  // namespace flexcert
