#include <functional>

#include "doctest.h"
#include "flexcert/quadric_charts.hpp"
#include "test_support.hpp"

using namespace flexcert;
using flexcert::testing::congruent_to_diagonal;
using flexcert::testing::form_from_rows;
using flexcert::testing::q;
using flexcert::testing::random_form;

namespace {

QuadForm conic_x0x1_z2() {
  return form_from_rows(
      {{q(0), q(1, 2), q(0)}, {q(1, 2), q(0), q(0)}, {q(0), q(0), q(1)}});
}

QuadForm hyperbolic(std::size_t pairs, bool has_z) {
  const std::size_t n = 2 * pairs + (has_z ? 1 : 0);
  return QuadForm(hyperbolic_target(n, pairs, has_z));
}

// x1^2 - x3 x5 on (x1, x3, x4, x5).
QuadForm cone_fixture() {
  return form_from_rows({{q(1), q(0), q(0), q(0)},
                         {q(0), q(0), q(0), q(-1, 2)},
                         {q(0), q(0), q(0), q(0)},
                         {q(0), q(-1, 2), q(0), q(0)}});
}

bool has_ctsq_shape(const Matrix& g) {
  if (!g(0, 0).is_zero() || !g(1, 1).is_zero() || g(0, 1) != q(1, 2)) {
    return false;
  }
  for (std::size_t j = 2; j < g.rows(); ++j) {
    if (!g(0, j).is_zero() || !g(1, j).is_zero()) return false;
  }
  return true;
}

Chart find_chart(const std::vector<Chart>& charts, ChartKind kind,
                 std::size_t index) {
  for (const auto& c : charts) {
    if (c.kind() == kind && c.descriptor().index == index) return c;
  }
  FAIL("missing chart");
  return charts.front();
}

ProjPoint random_point(Rng& rng, std::size_t n, long bound = 6) {
  for (;;) {
    Vec v(n);
    for (auto& x : v) x = TowerScalar(rng.symmetric(bound));
    if (!is_zero(v)) return ProjPoint(v);
  }
}

// Isotropic subspaces of the hyperbolic form over F_3, by exhaustive search.
int max_isotropic_dim_f3(std::size_t pairs, bool has_z) {
  const std::size_t n = 2 * pairs + (has_z ? 1 : 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= 3;
  auto digits = [&](std::size_t code) {
    std::vector<int> v(n);
    for (std::size_t i = 0; i < n; ++i, code /= 3) v[i] = static_cast<int>(code % 3);
    return v;
  };
  auto bil = [&](const std::vector<int>& u, const std::vector<int>& v) {
    // 2 beta(u, v) = sum (u_x v_y + u_y v_x) + 2 u_z v_z; 2 is a unit mod 3.
    int s = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
      s += u[2 * i] * v[2 * i + 1] + u[2 * i + 1] * v[2 * i];
    }
    if (has_z) s += 2 * u[n - 1] * v[n - 1];
    return ((s % 3) + 3) % 3;
  };
  std::vector<std::vector<int>> iso;
  for (std::size_t code = 1; code < total; ++code) {
    auto v = digits(code);
    if (bil(v, v) == 0) iso.push_back(v);
  }
  auto rank_f3 = [&](std::vector<std::vector<int>> rows) {
    std::size_t r = 0;
    for (std::size_t c = 0; c < n && r < rows.size(); ++c) {
      std::size_t p = r;
      while (p < rows.size() && rows[p][c] % 3 == 0) ++p;
      if (p == rows.size()) continue;
      std::swap(rows[p], rows[r]);
      const int inv = rows[r][c] % 3 == 1 ? 1 : 2;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == r) continue;
        const int k = rows[i][c] * inv % 3;
        for (std::size_t j = 0; j < n; ++j) {
          rows[i][j] = ((rows[i][j] - k * rows[r][j]) % 3 + 3) % 3;
        }
      }
      ++r;
    }
    return r;
  };
  int best = 0;
  std::vector<std::vector<int>> chosen;
  std::function<void(std::size_t)> dfs = [&](std::size_t from) {
    best = std::max(best, static_cast<int>(chosen.size()));
    for (std::size_t k = from; k < iso.size(); ++k) {
      bool ok = true;
      for (const auto& c : chosen) ok = ok && bil(c, iso[k]) == 0;
      if (!ok) continue;
      chosen.push_back(iso[k]);
      if (rank_f3(chosen) == chosen.size()) dfs(k + 1);
      chosen.pop_back();
      if (best == static_cast<int>(n) / 2) return;
    }
  };
  dfs(0);
  return best;
}

}  // namespace

TEST_CASE("ctsq_normalize examples") {
  QuadForm f = conic_x0x1_z2();
  CtsqFrame frame = ctsq_normalize(f, ProjPoint::from_rationals({0, 1, 0}));
  CHECK(frame.change.matrix() == Matrix::identity(3));
  CHECK(frame.residual.matrix()(0, 0) == q(1));

  QuadForm g = form_from_rows(
      {{q(1), q(0), q(0)}, {q(0), q(1), q(0)}, {q(0), q(0), q(-2)}});
  CtsqFrame gf = ctsq_normalize(g, ProjPoint::from_rationals({1, 1, 1}));
  CHECK(has_ctsq_shape(g.in_coordinates(gf.change).matrix()));
  CHECK(rank(gf.residual) == 1);
  CHECK(ProjPoint(gf.change.to_new(Vec{q(1), q(1), q(1)})) ==
        ProjPoint::from_rationals({0, 1, 0}));

  QuadForm x0x1 = form_from_rows({{q(0), q(1, 2), q(0), q(0)},
                                  {q(1, 2), q(0), q(0), q(0)},
                                  {q(0), q(0), q(0), q(0)},
                                  {q(0), q(0), q(0), q(0)}});
  try {
    (void)ctsq_normalize(x0x1, ProjPoint::from_rationals({0, 1, 0, 0}));
    FAIL("expected rank too low");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::rank_too_low);
  }
}

TEST_CASE("ctsq shape on random forms") {
  Rng rng(31);
  int done = 0;
  for (int trial = 0; trial < 60 && done < 30; ++trial) {
    const std::size_t n = 3 + trial % 5;
    QuadForm f = random_form(rng, n, 4);
    if (rank(f) < 3) continue;
    Tower t;
    PointSearchOptions opts;
    opts.accept = [&](const ProjPoint& p) { return is_smooth_point(f, p); };
    ProjPoint x = point_on_quadric(f, LinearSubspace::whole(n), rng, t, opts);
    CtsqFrame frame = ctsq_normalize(f, x);
    Matrix g = f.in_coordinates(frame.change).matrix();
    CHECK(has_ctsq_shape(g));
    CHECK(rank(frame.residual) == rank(f) - 2);
    CHECK(ProjPoint(frame.change.to_new(x.coords())) ==
          ProjPoint(unit_vector(n, 1)));
    // Tangent hyperplane is x0 = 0 in the new coordinates.
    auto eqs = tangent_space(f, x).equations();
    REQUIRE(eqs.size() == 1);
    Vec pulled(n);
    const Matrix& m = frame.change.matrix();
    for (std::size_t j = 0; j < n; ++j) pulled[j] = dot(eqs[0], m.column(j));
    CHECK(ProjPoint(pulled) == ProjPoint(unit_vector(n, 0)));
    ++done;
  }
  CHECK(done >= 20);
}

TEST_CASE("hyperbolic_normalize examples") {
  Tower t;
  QuadForm h = hyperbolic(2, false);
  HyperbolicFrame id = hyperbolic_normalize(h, t);
  CHECK(id.change.matrix() == Matrix::identity(4));
  CHECK(id.pairs == 2);
  CHECK_FALSE(id.has_z);

  QuadForm d = form_from_rows({{q(1), q(0)}, {q(0), q(-1)}});
  HyperbolicFrame df = hyperbolic_normalize(d, t);
  CHECK(t.height() == 0);
  CHECK(d.in_coordinates(df.change).matrix() == hyperbolic_target(2, 1, false));

  QuadForm s(Matrix::identity(3));
  HyperbolicFrame sf = hyperbolic_normalize(s, t);
  CHECK(t.height() == 1);
  CHECK(sf.pairs == 1);
  CHECK(sf.has_z);
  CHECK(s.in_coordinates(sf.change).matrix() == hyperbolic_target(3, 1, true));
}

TEST_CASE("hyperbolic shape on random forms") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 3 + trial % 5;
    QuadForm f = random_form(rng, n, 3);
    Tower t;
    HyperbolicFrame h = hyperbolic_normalize(f, t);
    CHECK(h.rank() == rank(f));
    CHECK(f.in_coordinates(h.change).matrix() ==
          hyperbolic_target(n, h.pairs, h.has_z));
  }
}

TEST_CASE("cone_decompose") {
  QuadForm smooth = conic_x0x1_z2();
  ConeDecomposition c0 = cone_decompose(smooth);
  CHECK(c0.vertex_dim() == -1);
  CHECK(c0.base == smooth);

  QuadForm x0x1 = form_from_rows({{q(0), q(1, 2), q(0), q(0)},
                                  {q(1, 2), q(0), q(0), q(0)},
                                  {q(0), q(0), q(0), q(0)},
                                  {q(0), q(0), q(0), q(0)}});
  ConeDecomposition c1 = cone_decompose(x0x1);
  CHECK(c1.vertex_dim() == 1);
  CHECK(c1.base.matrix() == hyperbolic_target(2, 1, false));

  ConeDecomposition c2 = cone_decompose(cone_fixture());
  CHECK(c2.vertex_dim() == 0);
  CHECK(c2.rank == 3);
  CHECK(rank(c2.base) == 3);
  CHECK(ProjPoint(c2.vertex.basis()[0]) == ProjPoint::from_rationals({0, 0, 1, 0}));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Vec d{q(1), q(-2), q(3), q(0), q(0)};
    if (trial % 2) d[3] = q(5);
    QuadForm f = congruent_to_diagonal(rng, d);
    ConeDecomposition c = cone_decompose(f);
    Matrix split = f.in_coordinates(c.split).matrix();
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        if (i >= c.rank || j >= c.rank) CHECK(split(i, j).is_zero());
        else CHECK(split(i, j) == c.base.matrix()(i, j));
      }
    }
    CHECK(rank(c.base) == rank(f));
  }
}

TEST_CASE("quadric chart examples") {
  QuadForm f = conic_x0x1_z2();
  Chart c = quadric_chart(f, ProjPoint::from_rationals({0, 1, 0}));
  ProjPoint p = ProjPoint::from_rationals({1, -1, 1});
  FiberCoords fc = c.forward(p);
  CHECK(fc.t.is_zero());
  CHECK(fc.transverse == Vec{q(1)});
  CHECK(c.backward({q(0), {q(1)}}) == p);
  CHECK(c.backward({q(0), {q(0)}}) == ProjPoint::from_rationals({1, 0, 0}));
  try {
    (void)c.forward(ProjPoint::from_rationals({0, 1, 0}));
    FAIL("expected domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::out_of_domain);
  }
}

TEST_CASE("complement cylinder examples") {
  QuadForm f = conic_x0x1_z2();
  Chart c = complement_cylinder(f, ProjPoint::from_rationals({0, 1, 0}));
  FiberCoords fc = c.forward(ProjPoint::from_rationals({1, 1, 0}));
  CHECK(fc.t == q(1));
  CHECK(fc.transverse == Vec{q(0)});
  CHECK(c.backward({q(1), {q(0)}}) == ProjPoint::from_rationals({1, 1, 0}));
  CHECK_FALSE(c.in_domain(ProjPoint::from_rationals({1, -1, 1})));
  CHECK_THROWS_AS(c.forward(ProjPoint::from_rationals({1, -1, 1})), Error);
}

TEST_CASE("standard cylinders examples") {
  Tower t;
  SUBCASE("odd case m = 2") {
    QuadForm f = hyperbolic(2, false);
    HyperbolicFrame h = hyperbolic_normalize(f, t);
    auto charts = standard_cylinders(f, h);
    CHECK(charts.size() == 2);
    Chart u1 = find_chart(charts, ChartKind::standard_u, 0);
    ProjPoint p = ProjPoint::from_rationals({1, 5, 0, 0});
    FiberCoords fc = u1.forward(p);
    CHECK(fc.t == q(5));
    CHECK(fc.transverse == Vec{q(0), q(0)});
    CHECK(fiber_move(u1, p, {q(1), q(0)}) == ProjPoint::from_rationals({1, 5, 1, 0}));
    CHECK(fiber_move(u1, p, fc.transverse) == p);
  }
  SUBCASE("even case m = 1") {
    QuadForm f = hyperbolic(1, true);
    HyperbolicFrame h = hyperbolic_normalize(f, t);
    auto charts = standard_cylinders(f, h);
    CHECK(charts.size() == 3);
    Vec wq = standard_w_point(h);
    CHECK(f(wq).is_zero());
    CHECK(ProjPoint(wq) == ProjPoint::from_rationals({-1, 1, 1}));
    ProjPoint r = ProjPoint::from_rationals({0, 0, 1});
    CHECK_FALSE(find_chart(charts, ChartKind::standard_u, 0).in_domain(r));
    CHECK_FALSE(find_chart(charts, ChartKind::standard_v, 0).in_domain(r));
    CHECK(find_chart(charts, ChartKind::standard_w, 0).in_domain(r));

    Chart u1 = find_chart(charts, ChartKind::standard_u, 0);
    ProjPoint p = ProjPoint::from_rationals({1, 0, 1});
    CHECK(u1.forward(p).t == q(1));
    CHECK(fiber_move(u1, p, {q(2)}) == ProjPoint::from_rationals({1, -3, 2}));
  }
}

TEST_CASE("cone lift") {
  Tower t;
  QuadForm f = cone_fixture();
  ConeDecomposition cone = cone_decompose(f);
  HyperbolicFrame h = hyperbolic_normalize(cone.base, t);
  auto charts = standard_cylinders(cone.base, h);
  Chart w = find_chart(charts, ChartKind::standard_w, 0);
  Chart lifted = cone_lift(w, w.excluded_hyperplane(), cone, f);
  CHECK(lifted.descriptor().vertex_dim == 0);
  CHECK(lifted.fiber_dim() == 2);
  CHECK(f(lifted.descriptor().base_point.coords()).is_zero());

  // Lifted hyperplane: the base hyperplane pulled back, vanishing on the vertex.
  Vec hyper = lifted.excluded_hyperplane();
  CHECK(dot(hyper, cone.vertex.basis()[0]).is_zero());

  Rng rng(12);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 30; ++trial) {
    ProjPoint p = random_point(rng, 4);
    if (!lifted.in_domain(p)) continue;
    FiberCoords fc = lifted.forward(p);
    CHECK(lifted.backward(fc) == p);
    CHECK(fc.t == f(p.coords()) / (dot(hyper, p.coords()) * dot(hyper, p.coords())));
    ++checked;
  }
  CHECK(checked > 0);

  Chart u = find_chart(charts, ChartKind::standard_u, 0);
  Vec wrong = w.excluded_hyperplane();
  if (matrix_rank(Matrix::from_rows({wrong, u.excluded_hyperplane()})) == 2) {
    try {
      (void)cone_lift(u, wrong, cone, f);
      FAIL("expected witness error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::hyperplane_witness_missing);
    }
  }

  ConeDecomposition smooth = cone_decompose(conic_x0x1_z2());
  Chart c = complement_cylinder(conic_x0x1_z2(), ProjPoint::from_rationals({0, 1, 0}));
  Chart same = cone_lift(c, c.excluded_hyperplane(), smooth, conic_x0x1_z2());
  CHECK(same.frame().matrix() == c.frame().matrix());
}

TEST_CASE("round trip and fiber invariance") {
  Rng rng(4242);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 3 + trial % 4;
    Vec d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = TowerScalar(1 + static_cast<long>(i));
    d[1] = -d[1];
    if (n > 3 && trial % 2) d[n - 1] = q(0);
    QuadForm f = congruent_to_diagonal(rng, d);
    Tower t;
    ConeDecomposition cone = cone_decompose(f);
    HyperbolicFrame h = hyperbolic_normalize(cone.base, t);
    std::vector<Chart> charts;
    for (const auto& base : standard_cylinders(cone.base, h)) {
      charts.push_back(cone_lift(base, base.excluded_hyperplane(), cone, f));
    }
    PointSearchOptions opts;
    opts.accept = [&](const ProjPoint& p) { return is_smooth_point(f, p); };
    ProjPoint y = point_on_quadric(f, LinearSubspace::whole(n), rng, t, opts);
    if (cone.vertex_dim() < 0) {
      charts.push_back(complement_cylinder(f, y));
    }
    charts.push_back(quadric_chart(f, y));

    for (const auto& c : charts) {
      for (int k = 0; k < 15; ++k) {
        ProjPoint p;
        if (c.on_quadric()) {
          Vec tr(c.fiber_dim());
          for (auto& x : tr) x = TowerScalar(rng.symmetric(5));
          p = c.backward({q(0), tr});
          CHECK(f(p.coords()).is_zero());
          CHECK(is_smooth_point(f, p));
        } else {
          p = random_point(rng, n);
          if (!c.in_domain(p)) continue;
        }
        FiberCoords before = c.forward(p);
        CHECK(c.backward(before) == p);
        Vec target(c.fiber_dim());
        for (auto& x : target) x = TowerScalar(rng.symmetric(7));
        ProjPoint moved = fiber_move(c, p, target);
        CHECK(c.in_domain(moved));
        FiberCoords after = c.forward(moved);
        CHECK(after.t == before.t);
        CHECK(after.transverse == target);
        // f on the normalized representative equals t.
        Vec rep = dot(c.excluded_hyperplane(), moved.coords()).inverse() *
                  moved.coords();
        CHECK(f(rep) == after.t);
      }
    }
  }
}

TEST_CASE("max_linear_subspace_dim") {
  CHECK(max_linear_subspace_dim(3, 4) == 1);
  for (long n = 2; n < 8; ++n) CHECK(max_linear_subspace_dim(n, 3) == n - 2);
  CHECK(max_linear_subspace_dim(5, 6) == 2);
  CHECK(max_isotropic_dim_f3(3, false) - 1 == max_linear_subspace_dim(5, 6));
  CHECK(max_isotropic_dim_f3(2, true) - 1 == max_linear_subspace_dim(4, 5));
  CHECK(max_isotropic_dim_f3(2, false) - 1 == max_linear_subspace_dim(3, 4));
  CHECK_THROWS_AS(max_linear_subspace_dim(3, 0), Error);
}
