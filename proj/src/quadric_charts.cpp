#include "flexcert/quadric_charts.hpp"

#include <algorithm>
#include <utility>

namespace flexcert {

namespace {

const TowerScalar& half() {
  static const TowerScalar value(mpq_class(1, 2));
  return value;
}

Matrix block_diagonal(const Matrix& top, std::size_t extra) {
  const std::size_t n = top.rows() + extra;
  Matrix out(n, n);
  for (std::size_t i = 0; i < top.rows(); ++i) {
    for (std::size_t j = 0; j < top.cols(); ++j) out(i, j) = top(i, j);
  }
  for (std::size_t i = top.rows(); i < n; ++i) out(i, i) = TowerScalar(1L);
  return out;
}

QuadForm principal_block(const Matrix& m, std::size_t from, std::size_t to) {
  Matrix out(to - from, to - from);
  for (std::size_t i = from; i < to; ++i) {
    for (std::size_t j = from; j < to; ++j) out(i - from, j - from) = m(i, j);
  }
  return QuadForm(std::move(out));
}

}  // namespace

CtsqFrame ctsq_normalize(const QuadForm& q, const ProjPoint& x) {
  const std::size_t r = rank(q);
  if (r < 3) {
    fail(ErrorCode::rank_too_low,
         "quadric has rank " + std::to_string(r) + ", need at least 3");
  }
  const Vec& xv = x.coords();
  if (!q(xv).is_zero()) {
    fail(ErrorCode::point_not_on_quadric,
         "point " + x.to_string() + " is not on the quadric");
  }
  const Vec polar = q.polar(xv);
  if (is_zero(polar)) {
    fail(ErrorCode::singular_point,
         "point " + x.to_string() + " is a singular point of the quadric");
  }
  const std::size_t n = q.size();
  std::size_t j = 0;
  while (polar[j].is_zero()) ++j;
  // beta(x, b0) = 1/2 and f(b0) = 0.
  Vec b0 = (TowerScalar(2L) * polar[j]).inverse() * unit_vector(n, j);
  b0 = b0 - q(b0) * xv;
  std::vector<Vec> columns{b0, xv};
  for (auto& w : kernel(Matrix::from_rows({polar, q.polar(b0)}))) {
    columns.push_back(std::move(w));
  }
  CoordChange change(Matrix::from_columns(columns));
  QuadForm framed = q.in_coordinates(change);
  return {std::move(change), principal_block(framed.matrix(), 2, n)};
}

Matrix hyperbolic_target(std::size_t n, std::size_t pairs, bool has_z) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < pairs; ++i) {
    m(2 * i, 2 * i + 1) = half();
    m(2 * i + 1, 2 * i) = half();
  }
  if (has_z) m(2 * pairs, 2 * pairs) = TowerScalar(1L);
  return m;
}

HyperbolicFrame hyperbolic_normalize(const QuadForm& q, Tower& tower) {
  const std::size_t n = q.size();
  const std::size_t r = rank(q);
  if (r == 0) fail(ErrorCode::rank_too_low, "the zero form has no frame");
  const std::size_t pairs = r / 2;
  const bool has_z = r % 2 == 1;
  if (q.matrix() == hyperbolic_target(n, pairs, has_z)) {
    return {CoordChange::identity(n), pairs, has_z};
  }

  Diagonalization diag = congruent_diagonalize(q);
  const Matrix& m = diag.change.matrix();
  std::vector<std::size_t> nonzero;
  std::vector<std::size_t> zero;
  for (std::size_t i = 0; i < n; ++i) {
    (diag.diagonal[i].is_zero() ? zero : nonzero).push_back(i);
  }

  std::vector<Vec> columns;
  std::optional<std::size_t> leftover;
  if (has_z) {
    // Prefer a square diagonal entry so that z needs no new root.
    leftover = nonzero.front();
    for (auto i : nonzero) {
      if (existing_sqrt(tower, diag.diagonal[i])) {
        leftover = i;
        break;
      }
    }
    nonzero.erase(std::find(nonzero.begin(), nonzero.end(), *leftover));
  }

  // a z^2 + b w^2 = a (z - rho w)(z + rho w) with rho^2 = -b/a, so the
  // columns below satisfy f(cx) = f(cy) = 0 and beta(cx, cy) = 1/2.
  while (!nonzero.empty()) {
    const std::size_t i = nonzero.front();
    nonzero.erase(nonzero.begin());
    const TowerScalar& a = diag.diagonal[i];
    auto partner = nonzero.begin();
    for (auto it = nonzero.begin(); it != nonzero.end(); ++it) {
      if (existing_sqrt(tower, -diag.diagonal[*it] / a)) {
        partner = it;
        break;
      }
    }
    const std::size_t j = *partner;
    nonzero.erase(partner);
    SqrtResult rho = try_sqrt(tower, -diag.diagonal[j] / a);
    tower = rho.tower;
    const Vec u = m.column(i);
    const Vec v = m.column(j);
    const TowerScalar inv2a = (TowerScalar(2L) * a).inverse();
    const TowerScalar inv2rho = (TowerScalar(2L) * rho.root).inverse();
    columns.push_back(inv2a * u - (inv2a / rho.root) * v);
    columns.push_back(half() * u + inv2rho * v);
  }
  if (leftover) {
    SqrtResult s = try_sqrt(tower, diag.diagonal[*leftover]);
    tower = s.tower;
    columns.push_back(s.root.inverse() * m.column(*leftover));
  }
  for (auto i : zero) columns.push_back(m.column(i));
  return {CoordChange(Matrix::from_columns(columns)), pairs, has_z};
}

ConeDecomposition cone_decompose(const QuadForm& q) {
  const std::size_t n = q.size();
  LinearSubspace vertex = radical(q);
  std::vector<Vec> chosen = vertex.basis();
  std::vector<Vec> complement;
  for (std::size_t i = 0; i < n && chosen.size() < n; ++i) {
    chosen.push_back(unit_vector(n, i));
    if (matrix_rank(Matrix::from_rows(chosen)) < chosen.size()) {
      chosen.pop_back();
    } else {
      complement.push_back(chosen.back());
    }
  }
  std::vector<Vec> columns = complement;
  for (const auto& v : vertex.basis()) columns.push_back(v);
  CoordChange split(Matrix::from_columns(columns));
  const std::size_t r = complement.size();
  QuadForm framed = q.in_coordinates(split);
  return {principal_block(framed.matrix(), 0, r), std::move(vertex),
          std::move(split), r};
}

const char* chart_kind_name(ChartKind kind) {
  switch (kind) {
    case ChartKind::quadric: return "quadric";
    case ChartKind::complement: return "complement";
    case ChartKind::standard_u: return "U";
    case ChartKind::standard_v: return "V";
    case ChartKind::standard_w: return "W";
  }
  return "?";
}

std::optional<ChartKind> chart_kind_from_name(const std::string& name) {
  for (auto kind : {ChartKind::quadric, ChartKind::complement,
                    ChartKind::standard_u, ChartKind::standard_v,
                    ChartKind::standard_w}) {
    if (name == chart_kind_name(kind)) return kind;
  }
  return std::nullopt;
}

Chart::Chart(const QuadForm& form, CoordChange frame, Descriptor descriptor)
    : form_(form), frame_(std::move(frame)), descriptor_(std::move(descriptor)) {
  const std::size_t n = form_.size();
  const std::size_t a = descriptor_.distinguished;
  const std::size_t b = descriptor_.partner;
  if (frame_.size() != n || a >= n || b >= n || a == b || n < 2) {
    fail(ErrorCode::precondition, "chart frame has the wrong size");
  }
  framed_ = form_.in_coordinates(frame_);
  const Matrix& g = framed_.matrix();
  bool shape = g(a, a).is_zero() && g(b, b).is_zero() && g(a, b) == half();
  for (std::size_t k = 0; k < n && shape; ++k) {
    if (k == a || k == b) continue;
    shape = g(a, k).is_zero() && g(b, k).is_zero();
  }
  if (!shape) {
    fail(ErrorCode::precondition,
         "chart frame does not put the form into x_a x_b + sigma shape");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (k != a && k != b) transverse_.push_back(k);
  }
}

TowerScalar Chart::sigma(const Vec& transverse) const {
  const Matrix& g = framed_.matrix();
  TowerScalar out;
  for (std::size_t i = 0; i < transverse.size(); ++i) {
    if (transverse[i].is_zero()) continue;
    TowerScalar row;
    for (std::size_t j = 0; j < transverse.size(); ++j) {
      const TowerScalar& gij = g(transverse_[i], transverse_[j]);
      if (!gij.is_zero() && !transverse[j].is_zero()) {
        row += gij * transverse[j];
      }
    }
    out += transverse[i] * row;
  }
  return out;
}

Vec Chart::excluded_hyperplane() const {
  return frame_.inverse().row(descriptor_.distinguished);
}

bool Chart::in_domain(const ProjPoint& p) const {
  if (p.size() != ambient()) return false;
  const TowerScalar xa = dot(excluded_hyperplane(), p.coords());
  if (xa.is_zero()) return false;
  return form_(p.coords()).is_zero() == on_quadric();
}

FiberCoords Chart::forward(const ProjPoint& p) const {
  if (!in_domain(p)) {
    fail(ErrorCode::out_of_domain, std::string("point ") + p.to_string() +
                                       " is outside the " +
                                       chart_kind_name(kind()) + " chart");
  }
  Vec x = frame_.to_new(p.coords());
  const TowerScalar scale = x[descriptor_.distinguished].inverse();
  FiberCoords out;
  out.transverse.reserve(transverse_.size());
  for (auto k : transverse_) out.transverse.push_back(scale * x[k]);
  out.t = scale * x[descriptor_.partner] + sigma(out.transverse);
  return out;
}

ProjPoint Chart::backward(const FiberCoords& coords) const {
  if (coords.transverse.size() != transverse_.size()) {
    fail(ErrorCode::precondition, "wrong number of fiber coordinates");
  }
  if (coords.t.is_zero() != on_quadric()) {
    fail(ErrorCode::out_of_domain, on_quadric()
                                       ? "quadric charts have fiber t = 0"
                                       : "fiber parameter t must be nonzero");
  }
  Vec y(ambient());
  y[descriptor_.distinguished] = TowerScalar(1L);
  y[descriptor_.partner] = coords.t - sigma(coords.transverse);
  for (std::size_t i = 0; i < transverse_.size(); ++i) {
    y[transverse_[i]] = coords.transverse[i];
  }
  return ProjPoint(frame_.to_old(y));
}

ProjPoint fiber_move(const Chart& chart, const ProjPoint& p,
                     const Vec& target) {
  FiberCoords coords = chart.forward(p);
  coords.transverse = target;
  return chart.backward(coords);
}

Chart quadric_chart(const QuadForm& q, const ProjPoint& y) {
  CtsqFrame frame = ctsq_normalize(q, y);
  return Chart(q, std::move(frame.change),
               {ChartKind::quadric, 0, -1, 0, 1, y.normalized()});
}

Chart complement_cylinder(const QuadForm& q, const ProjPoint& x) {
  CtsqFrame frame = ctsq_normalize(q, x);
  return Chart(q, std::move(frame.change),
               {ChartKind::complement, 0, -1, 0, 1, x.normalized()});
}

Vec standard_w_point(const HyperbolicFrame& frame) {
  Vec q(frame.change.size());
  const std::size_t zi = 2 * frame.pairs;
  q[zi - 2] = TowerScalar(-1L);
  q[zi - 1] = TowerScalar(1L);
  q[zi] = TowerScalar(1L);
  return q;
}

std::vector<Chart> standard_cylinders(const QuadForm& q,
                                      const HyperbolicFrame& frame,
                                      const std::optional<Vec>& w_override) {
  const Matrix& m = frame.change.matrix();
  std::vector<Chart> charts;
  auto point = [&](std::size_t k) { return ProjPoint(m.column(k)).normalized(); };
  for (std::size_t i = 0; i < frame.pairs; ++i) {
    charts.emplace_back(q, frame.change,
                        Chart::Descriptor{ChartKind::standard_u, i, -1, 2 * i,
                                          2 * i + 1, point(2 * i + 1)});
  }
  if (!frame.has_z) return charts;
  for (std::size_t i = 0; i < frame.pairs; ++i) {
    charts.emplace_back(q, frame.change,
                        Chart::Descriptor{ChartKind::standard_v, i, -1,
                                          2 * i + 1, 2 * i, point(2 * i)});
  }
  if (frame.pairs > 0) {
    // W = Y \ T_q X, built in hyperbolic coordinates and pulled back.
    const Vec wq = w_override.value_or(standard_w_point(frame));
    QuadForm target(hyperbolic_target(q.size(), frame.pairs, frame.has_z));
    CtsqFrame inner = ctsq_normalize(target, ProjPoint(wq));
    CoordChange change = frame.change.compose(inner.change);
    ProjPoint base(frame.change.to_old(wq));
    charts.emplace_back(q, std::move(change),
                        Chart::Descriptor{ChartKind::standard_w, 0, -1, 0, 1,
                                          base.normalized()});
  }
  return charts;
}

Chart cone_lift(const Chart& base, const Vec& hyperplane,
                const ConeDecomposition& cone, const QuadForm& ambient_form) {
  if (cone.vertex_dim() < 0 && cone.split.matrix() == Matrix::identity(
                                   cone.split.size())) {
    return base;
  }
  const Vec witness = base.excluded_hyperplane();
  if (hyperplane.size() != witness.size() ||
      matrix_rank(Matrix::from_rows({hyperplane, witness})) != 1) {
    fail(ErrorCode::hyperplane_witness_missing,
         "the base chart does not exclude the given hyperplane");
  }
  const std::size_t extra = cone.split.size() - base.ambient();
  const CoordChange& inner = base.frame();
  CoordChange lifted(block_diagonal(inner.matrix(), extra),
                     block_diagonal(inner.inverse(), extra));
  CoordChange change = cone.split.compose(lifted);
  Chart::Descriptor d = base.descriptor();
  d.vertex_dim = cone.vertex_dim();
  d.base_point = ProjPoint(change.matrix().column(d.partner)).normalized();
  return Chart(ambient_form, std::move(change), std::move(d));
}

long max_linear_subspace_dim(long n, long r) {
  if (r < 1 || r > n + 1) {
    fail(ErrorCode::precondition, "rank out of range");
  }
  return n - (r + 1) / 2;
}

}  // namespace flexcert
