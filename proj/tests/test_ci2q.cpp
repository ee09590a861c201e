#include "doctest.h"
#include "flexcert/ci2q.hpp"
#include "test_support.hpp"

using namespace flexcert;
using flexcert::testing::q;

namespace {

// x0x1 + x2x3 + x4x5 and x0x5 + x1x2 + x3x4.
Pencil p5_pencil() {
  Matrix b(6, 6);
  Matrix c(6, 6);
  auto set = [](Matrix& m, std::size_t i, std::size_t j) {
    m(i, j) = q(1, 2);
    m(j, i) = q(1, 2);
  };
  set(b, 0, 1);
  set(b, 2, 3);
  set(b, 4, 5);
  set(c, 0, 5);
  set(c, 1, 2);
  set(c, 3, 4);
  return Pencil(QuadForm(b), QuadForm(c));
}

ProjPoint e(std::size_t i) { return ProjPoint(unit_vector(6, i)); }

Line fixture_line() { return Line{e(0), e(2)}; }

// Plain cofactor expansion, independent of the elimination used in the library.
TowerScalar cofactor_det(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n == 1) return m(0, 0);
  TowerScalar out;
  for (std::size_t j = 0; j < n; ++j) {
    if (m(0, j).is_zero()) continue;
    Matrix minor(n - 1, n - 1);
    for (std::size_t r = 1; r < n; ++r) {
      for (std::size_t c = 0, k = 0; c < n; ++c) {
        if (c != j) minor(r - 1, k++) = m(r, c);
      }
    }
    TowerScalar term = m(0, j) * cofactor_det(minor);
    out = (j % 2 == 0) ? out + term : out - term;
  }
  return out;
}

Vec random_vec(Rng& rng, std::size_t n, long bound = 4) {
  Vec v(n);
  for (auto& x : v) x = TowerScalar(rng.symmetric(bound));
  return v;
}

std::vector<TowerScalar> lambdas(std::initializer_list<long> values) {
  std::vector<TowerScalar> out;
  for (long v : values) out.emplace_back(v);
  return out;
}

Pencil eacx() { return eacx_build(lambdas({0, 1, 2, 3, 4, 5})); }

// A line through a point of X in the coordinate plane x1 = x3 = x5 = 0.
Line eacx_line(Rng& rng, Tower& t) {
  const Pencil p = eacx();
  LinearSubspace plane(6, {unit_vector(6, 0), unit_vector(6, 2), unit_vector(6, 4)});
  return find_line_through(p, point_on_X(p, plane, rng, t), rng, t);
}

}  // namespace

TEST_CASE("pencil smoothness") {
  Pencil eacx = eacx_build(lambdas({0, 1, 2, 3, 4, 5}));
  SmoothnessReport ok = pencil_smoothness(eacx);
  CHECK(ok.smooth);
  CHECK(ok.discriminant.size() == 6);
  CHECK(ok.infinity_multiplicity == 1);

  // det(sB + tC) = -(s + t)^2 (s^2 - st + t^2)^2 / 64 for the P^5 example.
  SmoothnessReport fixture = pencil_smoothness(p5_pencil());
  CHECK_FALSE(fixture.smooth);
  CHECK(fixture.reason.find("repeated") != std::string::npos);
  const Vec sing = testing::rational_vec({1, 0, 1, 0, 1, 0});
  CHECK(p5_pencil().contains(sing));
  CHECK_FALSE(p5_pencil().is_smooth_point(sing));

  CHECK_FALSE(pencil_smoothness(Pencil(eacx.beta, eacx.beta)).smooth);
  Matrix rep(6, 6);
  long vals[] = {0, 1, 1, 3, 4, 5};
  for (std::size_t i = 0; i < 6; ++i) rep(i, i) = q(vals[i]);
  SmoothnessReport bad = pencil_smoothness(Pencil(eacx.beta, QuadForm(rep)));
  CHECK_FALSE(bad.smooth);
  CHECK(bad.reason.find("repeated") != std::string::npos);

  // A singular B with a double root at s = 0.
  Matrix cone = Matrix::identity(6);
  cone(0, 0) = q(0);
  cone(1, 1) = q(0);
  Matrix c(6, 6);
  for (std::size_t i = 0; i < 6; ++i) c(i, i) = q(static_cast<long>(i) + 1);
  SmoothnessReport inf = pencil_smoothness(Pencil(QuadForm(c), QuadForm(cone)));
  CHECK_FALSE(inf.smooth);
}

TEST_CASE("discriminant matches cofactor determinant") {
  Rng rng(61);
  for (int trial = 0; trial < 8; ++trial) {
    QuadForm b = testing::random_form(rng, 5, 3);
    QuadForm c = testing::random_form(rng, 5, 3);
    SmoothnessReport r = pencil_smoothness(Pencil(b, c));
    for (long t = -3; t <= 3; ++t) {
      Matrix m = b.matrix();
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) m(i, j) += q(t) * c.matrix()(i, j);
      }
      TowerScalar value;
      TowerScalar power(1L);
      for (const auto& coef : r.discriminant) {
        value += coef * power;
        power *= q(t);
      }
      CHECK(value == cofactor_det(m));
    }
  }
}

TEST_CASE("smooth pencils have Jacobian rank 2 on X") {
  Rng rng(8);
  for (const Pencil& pencil : {eacx(), eacx_build(lambdas({-2, -1, 1, 2, 3, 7}))}) {
    Tower t;
    for (int k = 0; k < 5; ++k) {
      ProjPoint x = point_on_X(pencil, LinearSubspace::whole(6), rng, t);
      CHECK(pencil.contains(x.coords()));
      CHECK(pencil.is_smooth_point(x.coords()));
    }
  }
}

TEST_CASE("span criterion") {
  Pencil p = p5_pencil();
  CHECK(span_in_X(p, {e(0)}));
  CHECK(span_in_X(p, {e(0), e(2)}));
  CHECK_FALSE(span_in_X(p, {e(0), e(1)}));
  CHECK(p.beta.bilinear(e(0).coords(), e(1).coords()) == q(1, 2));
}

TEST_CASE("span criterion agrees with sampled combinations") {
  Rng rng(610);
  Pencil p = eacx();
  int agree = 0;
  int positives = 0;
  for (int set = 0; set < 60; ++set) {
    Tower t;
    ProjPoint a = point_on_X(p, LinearSubspace::whole(6), rng, t);
    ProjPoint b = point_on_X(p, LinearSubspace::whole(6), rng, t);
    if (set % 2 == 0) {
      Line l = eacx_line(rng, t);
      a = l.v1;
      b = l.v2;
    }
    const bool criterion = span_in_X(p, {a, b});
    bool sampled = true;
    for (int k = 0; k < 50 && sampled; ++k) {
      Vec x = TowerScalar(rng.symmetric(6)) * a.coords() +
              TowerScalar(rng.symmetric(6)) * b.coords();
      if (!is_zero(x)) sampled = p.contains(x);
    }
    if (criterion == sampled) ++agree;
    if (criterion) ++positives;
  }
  CHECK(agree == 60);
  CHECK(positives >= 30);
}

TEST_CASE("fixture line chart") {
  Pencil p = p5_pencil();
  LineChart chart = chart_from_line(p, fixture_line());
  CHECK(rank(chart.image) == 3);
  // Complement coordinates are (x1, x3, x4, x5).
  Matrix expected(4, 4);
  expected(0, 0) = q(1, 4);
  expected(1, 3) = q(-1, 8);
  expected(3, 1) = q(-1, 8);
  CHECK(chart.image == QuadForm(expected));

  auto x = chart.inverse(ProjPoint(Vec{q(1), q(0), q(0), q(0)}));
  REQUIRE(x);
  CHECK(*x == e(1));
  CHECK(chart.forward(e(1)) == ProjPoint(Vec{q(1), q(0), q(0), q(0)}));
  CHECK_FALSE(chart.inverse(ProjPoint(Vec{q(0), q(1), q(0), q(0)})));
  CHECK_THROWS_AS(chart_from_line(p, Line{e(0), e(1)}), Error);
}

TEST_CASE("line chart round trip") {
  Rng rng(200);
  Pencil p = p5_pencil();
  Tower t;
  Line auto_line = eacx_line(rng, t);
  for (const LineChart& chart :
       {chart_from_line(p, fixture_line()), chart_from_line(eacx(), auto_line)}) {
    const std::size_t r = rank(chart.image);
    CHECK(r >= 3);
    CHECK(r <= 4);
    int tested = 0;
    while (tested < 200) {
      Vec u = random_vec(rng, 4);
      if (is_zero(u)) continue;
      ProjPoint pu(u);
      auto x = chart.inverse(pu);
      CHECK(x.has_value() == !chart.image(u).is_zero());
      if (!x) continue;
      ++tested;
      CHECK(chart.pencil.contains(x->coords()));
      CHECK(chart.forward(*x) == pu);
      CHECK(chart.in_domain(*x));
    }
  }
}

TEST_CASE("image quadric descends along the line") {
  Rng rng(5);
  Pencil p = p5_pencil();
  LineChart chart = chart_from_line(p, fixture_line());
  const Vec& v1 = chart.line.v1.coords();
  const Vec& v2 = chart.line.v2.coords();
  auto phi = [&](const Vec& x) {
    return p.beta.bilinear(v1, x) * p.gamma.bilinear(v2, x) -
           p.beta.bilinear(v2, x) * p.gamma.bilinear(v1, x);
  };
  for (int k = 0; k < 30; ++k) {
    Vec x = random_vec(rng, 6);
    Vec y = x + TowerScalar(rng.symmetric(5)) * v1 + TowerScalar(rng.symmetric(5)) * v2;
    CHECK(phi(x) == phi(y));
    CHECK(dl_quadric(chart)(x) == phi(x));
  }
}

TEST_CASE("D_l quadric") {
  Rng rng(12);
  Pencil p = p5_pencil();
  LineChart chart = chart_from_line(p, fixture_line());
  QuadForm dl = dl_quadric(chart);
  CHECK(dl(e(0).coords()).is_zero());
  CHECK(dl(e(2).coords()).is_zero());
  CHECK(dl((q(3) * e(0).coords()) + e(2).coords()).is_zero());
  CHECK_FALSE(dl(e(1).coords()).is_zero());
  // A line through a point of l meets l, so it lies in D_l.
  Tower t;
  Line through = find_line_through(p, e(0), rng, t);
  for (long s = -2; s <= 2; ++s) {
    Vec x = through.v1.coords() + q(s) * through.v2.coords();
    CHECK(dl(x).is_zero());
    CHECK_FALSE(chart.in_domain(ProjPoint(x)));
  }
}

TEST_CASE("lines through a point") {
  Rng rng(31);
  Pencil p = p5_pencil();
  Tower t;
  Line l = find_line_through(p, e(0), rng, t);
  CHECK(l.v1 == e(0));
  CHECK(l.v2 != e(0));
  CHECK(span_in_X(p, {l.v1, l.v2}));
  CHECK_THROWS_AS(find_line_through(p, ProjPoint(Vec{q(1), q(1), q(0), q(0), q(0), q(0)}),
                                    rng, t),
                  Error);
  for (int k = 0; k < 5; ++k) {
    Line m = eacx_line(rng, t);
    CHECK(m.v1 != m.v2);
    CHECK(span_in_X(eacx(), {m.v1, m.v2}));
  }
}

TEST_CASE("connect on X refuses the singular example") {
  Rng rng(45);
  Pencil p = p5_pencil();
  LineChart chart = chart_from_line(p, fixture_line());
  Tower t;
  ProjPoint target = *chart.inverse(ProjPoint(Vec{q(1), q(2), q(-1), q(3)}));
  try {
    connect_on_X(p, e(1), target, {fixture_line()}, rng, t);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::pencil_not_smooth);
  }
}

TEST_CASE("connect on X through a supplied chart") {
  Rng rng(46);
  Pencil p = eacx();
  Tower t;
  Line line = eacx_line(rng, t);
  LineChart chart = chart_from_line(p, line);
  ProjPoint start;
  int done = 0;
  while (done < 4) {
    Vec u = random_vec(rng, 4);
    if (is_zero(u) || chart.image(u).is_zero()) continue;
    ProjPoint target = *chart.inverse(ProjPoint(u));
    if (done == 0) {
      start = target;
      ++done;
      continue;
    }
    CiPath path = connect_on_X(p, start, target, {line}, rng, t);
    REQUIRE(path.segments.size() == 1);
    CHECK(path.segments[0].line.v2 == line.v2);
    VerifyReport r = verify_ci_path(path);
    CHECK_MESSAGE(r.valid, r.message);
    ++done;
  }
  CiPath same = connect_on_X(p, start, start, {}, rng, t);
  CHECK(same.segments.empty());
  CHECK(verify_ci_path(same).valid);
}

TEST_CASE("connect on X with searched lines") {
  Rng rng(99);
  Pencil p = eacx();
  for (int k = 0; k < 3; ++k) {
    Tower t;
    ProjPoint a = point_on_X(p, LinearSubspace::whole(6), rng, t);
    ProjPoint b = point_on_X(p, LinearSubspace::whole(6), rng, t);
    CiPath path = connect_on_X(p, a, b, {}, rng, t);
    VerifyReport r = verify_ci_path(path);
    CHECK_MESSAGE(r.valid, r.message);
    CHECK(r.radicands.size() == path.tower.radicands().size());
  }
}

TEST_CASE("connect on X errors") {
  Rng rng(1);
  Pencil p = eacx();
  Tower t;
  Line line = eacx_line(rng, t);
  ProjPoint other = point_on_X(p, LinearSubspace::whole(6), rng, t);
  ConnectXOptions none;
  none.retry_limit = 0;
  // Points of the line are never in its chart.
  CHECK_THROWS_WITH_AS(connect_on_X(p, line.v1, other, {line}, rng, t, none),
                       doctest::Contains("attempts"), Error);
  try {
    connect_on_X(p, line.v1, ProjPoint(Vec{q(1), q(1), q(0), q(0), q(0), q(0)}),
                 {}, rng, t);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::point_not_on_quadric);
  }
}

TEST_CASE("ci path tampering is rejected") {
  Rng rng(7);
  Pencil p = eacx();
  Tower t;
  ProjPoint a = point_on_X(p, LinearSubspace::whole(6), rng, t);
  ProjPoint b = point_on_X(p, LinearSubspace::whole(6), rng, t);
  CiPath path = connect_on_X(p, a, b, {}, rng, t);
  REQUIRE(verify_ci_path(path).valid);

  CiPath moved = path;
  moved.segments[0].line = Line{e(0), e(1)};
  CHECK_FALSE(verify_ci_path(moved).valid);

  CiPath swapped = path;
  swapped.segments.back().to = a;
  CHECK_FALSE(verify_ci_path(swapped).valid);

  CiPath inner = path;
  REQUIRE_FALSE(inner.segments[0].inner.steps.empty());
  Vec v = inner.segments[0].inner.steps[0].target;
  v[0] += q(1);
  inner.segments[0].inner.steps[0].target = v;
  CHECK_FALSE(verify_ci_path(inner).valid);

  CiPath shallow = path;
  shallow.tower = Tower();
  CHECK_FALSE(verify_ci_path(shallow).valid);
}

TEST_CASE("degree audits") {
  Rng rng(3);
  Pencil p = p5_pencil();
  Tower t;
  Line auto_line = eacx_line(rng, t);
  for (const LineChart& chart :
       {chart_from_line(p, fixture_line()), chart_from_line(eacx(), auto_line)}) {
    Tower inner_tower = t;
    NavigationFrame nav = navigation_frame(chart.image, inner_tower);
    for (const Chart& inner : nav.charts) {
      DegreeAudit a = polar_degree_audit(chart, inner);
      CHECK_MESSAGE(a.ok, a.message);
      CHECK(a.degrees == std::vector<int>{1, 2});
      CHECK(a.total == 3);
      DegreeAudit b = inner_degree_audit(inner);
      CHECK(b.ok);
      CHECK(b.total == 3);
    }
    LineChart broken = chart;
    broken.line = Line{chart.line.v1, ProjPoint(testing::rational_vec({1, 2, -1, 3, 1, 2}))};
    CHECK_FALSE(polar_degree_audit(broken, nav.charts.front()).ok);
  }
}

TEST_CASE("eacx pencils") {
  Pencil ok = eacx_build(lambdas({0, 1, 2, 3, 4, 5}));
  CHECK(ok.ambient() == 6);
  CHECK(ok.n() == 3);
  CHECK(pencil_smoothness(ok).smooth);
  try {
    eacx_build(lambdas({0, 1, 1, 3, 4, 5}));
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::duplicate_lambda);
  }
  try {
    eacx_build(lambdas({0, 1, 2, 3}));
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::precondition);
  }
}

TEST_CASE("ci certificates") {
  Rng rng(17);
  Pencil p = eacx();
  Tower t;
  json pj = pencil_to_json(p, t);
  CHECK(pj["n"] == 3);
  CHECK(pj["dim"] == 5);
  Tower t2;
  Pencil back = pencil_from_json(pj, t2);
  CHECK(back.beta == p.beta);
  CHECK(back.gamma == p.gamma);
  CHECK(line_from_json(line_to_json(fixture_line()), t).v2 == e(2));

  ProjPoint a = point_on_X(p, LinearSubspace::whole(6), rng, t);
  ProjPoint b = point_on_X(p, LinearSubspace::whole(6), rng, t);
  CiPath path = connect_on_X(p, a, b, {}, rng, t);
  json doc = ci_certificate_json(path);
  VerifyReport r = verify_ci_certificate(json::parse(doc.dump()), p, Tower());
  CHECK_MESSAGE(r.valid, r.message);

  json tampered = doc;
  tampered["endpoints"]["q"] = doc["endpoints"]["p"];
  CHECK_FALSE(verify_ci_certificate(tampered, p, Tower()).valid);
  json relabeled = doc;
  relabeled["seed"] = 12345;
  CHECK(verify_ci_certificate(relabeled, p, Tower()).message == "digest mismatch");
  CHECK_FALSE(verify_ci_certificate(doc, eacx_build(lambdas({0, 1, 2, 3, 4, 6})),
                                    Tower())
                  .valid);
}
