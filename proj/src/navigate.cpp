#include "flexcert/navigate.hpp"

#include <utility>

namespace flexcert {

namespace {

Vec transverse_of(const Chart& chart, const Vec& full) {
  Vec out;
  out.reserve(chart.transverse_indices().size());
  for (auto k : chart.transverse_indices()) out.push_back(full[k]);
  return out;
}

// Appends the move of `chart` sending `p` to the point whose normalized frame
// coordinates agree with `full` off the distinguished pair.
ProjPoint push_move(std::vector<MoveStep>& steps, const Chart& chart,
                    const ProjPoint& p, const Vec& full) {
  Vec target = transverse_of(chart, full);
  ProjPoint exit = fiber_move(chart, p, target);
  steps.push_back(MoveStep::from_chart(chart, p, std::move(target), exit));
  return steps.back().exit;
}

bool same_chart(const MoveStep& x, const MoveStep& y) {
  const auto& a = x.descriptor;
  const auto& b = y.descriptor;
  return a.kind == b.kind && a.index == b.index &&
         a.distinguished == b.distinguished && a.partner == b.partner &&
         a.vertex_dim == b.vertex_dim && x.frame == y.frame;
}

std::optional<std::size_t> first_nonzero(const NavigationFrame& nav,
                                         const Vec& c, bool y_side) {
  for (std::size_t i = 0; i < nav.pairs(); ++i) {
    const std::size_t k = y_side ? nav.y_index(i) : nav.x_index(i);
    if (!c[k].is_zero()) return i;
  }
  return std::nullopt;
}

void append(std::vector<MoveStep>& out, const std::vector<MoveStep>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

std::vector<MoveStep> bridge(const NavigationFrame& nav, std::size_t from,
                             std::size_t to, const TowerScalar& t,
                             const std::optional<TowerScalar>& z) {
  const std::size_t n = nav.form.size();
  Vec start(n);
  start[nav.x_index(from)] = TowerScalar(1L);
  if (z) {
    start[nav.z_index()] = *z;
  } else {
    start[nav.y_index(from)] = t;
  }
  std::vector<MoveStep> steps;
  Vec mid = start;
  mid[nav.x_index(to)] = TowerScalar(1L);
  ProjPoint p = push_move(steps, nav.u(from), nav.point(start), mid);
  Vec end(n);
  end[nav.x_index(to)] = TowerScalar(1L);
  if (z) end[nav.z_index()] = *z;
  push_move(steps, nav.u(to), p, end);
  return steps;
}

void require_rank(const QuadForm& form) {
  const std::size_t r = rank(form);
  if (r < 3) {
    fail(ErrorCode::rank_too_low,
         "quadric has rank " + std::to_string(r) + ", need at least 3");
  }
}

void require_size(const QuadForm& form, const ProjPoint& p) {
  if (p.size() != form.size()) {
    fail(ErrorCode::precondition, "point " + p.to_string() +
                                      " has the wrong number of coordinates");
  }
}

}  // namespace

MoveStep MoveStep::from_chart(const Chart& chart, ProjPoint entry, Vec target,
                              ProjPoint exit) {
  return {chart.descriptor(), chart.frame().matrix(), entry.tidy(),
          std::move(target), exit.tidy()};
}

Chart chart_of(const QuadForm& form, const MoveStep& step) {
  return Chart(form, CoordChange(step.frame), step.descriptor);
}

const Chart& NavigationFrame::u(std::size_t i) const { return charts.at(i); }

const Chart& NavigationFrame::v(std::size_t i) const {
  if (!has_z()) fail(ErrorCode::precondition, "V charts need a z term");
  return charts.at(pairs() + i);
}

const Chart& NavigationFrame::w() const {
  if (!has_z()) fail(ErrorCode::precondition, "the W chart needs a z term");
  return charts.at(2 * pairs());
}

NavigationFrame navigation_frame(const QuadForm& form, Tower& tower) {
  require_rank(form);
  NavigationFrame nav;
  nav.form = form;
  nav.cone = cone_decompose(form);
  nav.hyperbolic = hyperbolic_normalize(nav.cone.base, tower);
  for (const auto& base : standard_cylinders(nav.cone.base, nav.hyperbolic)) {
    nav.charts.push_back(
        cone_lift(base, base.excluded_hyperplane(), nav.cone, form));
  }
  nav.frame = nav.charts.front().frame();
  return nav;
}

CanonicalForm canonicalize_complement(const NavigationFrame& nav,
                                      const ProjPoint& p, Tower& tower) {
  const std::size_t n = nav.form.size();
  CanonicalForm out;
  ProjPoint cur = p.tidy();

  if (!nav.has_z()) {
    auto i = first_nonzero(nav, nav.coords(cur), false);
    if (!i) fail(ErrorCode::endpoint_on_quadric, "point lies on the quadric");
    const Chart& u = nav.u(*i);
    Vec full(n);
    full[nav.x_index(*i)] = TowerScalar(1L);
    out.value = u.forward(cur).t;
    if (fiber_move(u, cur, transverse_of(u, full)) != cur) {
      cur = push_move(out.steps, u, cur, full);
    }
    out.pair = *i;
    out.point = cur;
    return out;
  }

  Vec c = nav.coords(cur);
  if (!first_nonzero(nav, c, false) && !first_nonzero(nav, c, true)) {
    // Only z and vertex coordinates: no U_i or V_i contains the point.
    const Chart& w = nav.w();
    bool left = false;
    for (long k = -1; k < static_cast<long>(w.fiber_dim()) && !left; ++k) {
      Vec target(w.fiber_dim());
      if (k >= 0) target[k] = TowerScalar(1L);
      ProjPoint e = fiber_move(w, cur, target);
      Vec ec = nav.coords(e);
      if (first_nonzero(nav, ec, false) || first_nonzero(nav, ec, true)) {
        out.steps.push_back(MoveStep::from_chart(w, cur, target, e));
        cur = out.steps.back().exit;
        left = true;
      }
    }
    if (!left) fail(ErrorCode::precondition, "W chart failed to move the point");
    c = nav.coords(cur);
  }
  if (!first_nonzero(nav, c, false)) {
    const std::size_t j = *first_nonzero(nav, c, true);
    Vec full(n);
    full[nav.y_index(j)] = TowerScalar(1L);
    cur = push_move(out.steps, nav.v(j), cur, full);
    c = nav.coords(cur);
  }
  const std::size_t i = *first_nonzero(nav, c, false);
  const Chart& u = nav.u(i);
  SqrtResult lambda = try_sqrt(tower, u.forward(cur).t);
  tower = lambda.tower;
  Vec full(n);
  full[nav.x_index(i)] = TowerScalar(1L);
  full[nav.z_index()] = lambda.root;
  if (fiber_move(u, cur, transverse_of(u, full)) != cur) {
    cur = push_move(out.steps, u, cur, full);
  }
  out.pair = i;
  out.value = lambda.root;
  out.point = cur;
  return out;
}

std::vector<MoveStep> rescale_gadget_odd(const NavigationFrame& nav,
                                         std::size_t pair, std::size_t aux,
                                         const TowerScalar& t,
                                         const TowerScalar& t_target,
                                         Tower& tower) {
  if (nav.has_z() || pair == aux || aux >= nav.pairs()) {
    fail(ErrorCode::precondition, "the odd gadget needs two hyperbolic pairs");
  }
  if (t.is_zero() || t_target.is_zero()) {
    fail(ErrorCode::precondition, "fiber values must be nonzero");
  }
  SqrtResult lambda = try_sqrt(tower, t / t_target);
  tower = lambda.tower;
  const TowerScalar& l = lambda.root;
  const std::size_t n = nav.form.size();
  const std::size_t xi = nav.x_index(pair);
  const std::size_t xk = nav.x_index(aux);

  Vec start(n);
  start[xi] = TowerScalar(1L);
  start[nav.y_index(pair)] = t;
  std::vector<MoveStep> steps;
  // (1 : t : lambda : 0) lies in the fiber of U_aux over t / lambda^2.
  Vec first(n);
  first[xi] = TowerScalar(1L);
  first[xk] = l;
  ProjPoint p = push_move(steps, nav.u(pair), nav.point(start), first);
  Vec second(n);
  second[xk] = TowerScalar(1L);
  second[xi] = TowerScalar(1L);
  second[nav.y_index(pair)] = t / l;
  p = push_move(steps, nav.u(aux), p, second);
  Vec third(n);
  third[xi] = TowerScalar(1L);
  push_move(steps, nav.u(pair), p, third);
  return steps;
}

std::vector<MoveStep> rescale_gadget_even(const NavigationFrame& nav,
                                          std::size_t pair,
                                          const TowerScalar& lambda,
                                          const TowerScalar& mu, Tower& tower) {
  if (!nav.has_z()) fail(ErrorCode::precondition, "the even gadget needs z");
  if (lambda.is_zero() || mu.is_zero()) {
    fail(ErrorCode::precondition, "lambda and mu must be nonzero");
  }
  if (lambda == mu) return {};
  const std::size_t n = nav.form.size();
  const std::size_t xi = nav.x_index(pair);
  const std::size_t yi = nav.y_index(pair);
  const std::size_t z = nav.z_index();

  Vec start(n);
  start[xi] = TowerScalar(1L);
  start[z] = lambda;
  std::vector<MoveStep> steps;
  Vec first(n);
  first[xi] = TowerScalar(1L);
  first[z] = TowerScalar(2L) * lambda;
  ProjPoint p = push_move(steps, nav.u(pair), nav.point(start), first);

  // (1/(9 lambda^2) - c^2)^2 = 1/(9 lambda^2 mu^2) lands the last move on mu^2.
  const TowerScalar denom = TowerScalar(9L) * lambda * lambda;
  const TowerScalar ratio = TowerScalar(3L) * lambda / mu;
  const TowerScalar minus = (TowerScalar(1L) - ratio) / denom;
  const TowerScalar plus = (TowerScalar(1L) + ratio) / denom;
  TowerScalar c;
  if (auto r = existing_sqrt(tower, minus)) {
    c = *r;
  } else if (auto r2 = existing_sqrt(tower, plus)) {
    c = *r2;
  } else {
    SqrtResult s = try_sqrt(tower, minus);
    tower = s.tower;
    c = s.root;
  }
  Vec second(n);
  second[yi] = TowerScalar(1L);
  second[z] = c;
  p = push_move(steps, nav.v(pair), p, second);
  Vec third(n);
  third[xi] = TowerScalar(1L);
  third[z] = mu;
  push_move(steps, nav.u(pair), p, third);
  return steps;
}

std::vector<MoveStep> reversed(const QuadForm& form,
                               const std::vector<MoveStep>& steps) {
  std::vector<MoveStep> out;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    Chart chart = chart_of(form, *it);
    out.push_back({it->descriptor, it->frame, it->exit,
                   chart.forward(it->entry).transverse, it->entry});
  }
  return out;
}

std::vector<MoveStep> merge_steps(const std::vector<MoveStep>& steps) {
  std::vector<MoveStep> out;
  for (const auto& s : steps) {
    if (s.entry == s.exit) continue;
    if (!out.empty() && same_chart(out.back(), s)) {
      out.back().target = s.target;
      out.back().exit = s.exit;
      if (out.back().entry == out.back().exit) out.pop_back();
      continue;
    }
    out.push_back(s);
  }
  return out;
}

MovePath connect_complement(const QuadForm& form, const ProjPoint& p,
                            const ProjPoint& q, Tower& tower) {
  require_size(form, p);
  require_size(form, q);
  require_rank(form);
  for (const auto* x : {&p, &q}) {
    if (form(x->coords()).is_zero()) {
      fail(ErrorCode::endpoint_on_quadric,
           "endpoint " + x->to_string() + " lies on the quadric");
    }
  }
  MovePath path;
  path.problem = Problem::complement;
  path.form = form;
  path.p = p.tidy();
  path.q = q.tidy();
  if (p == q) {
    path.tower = tower;
    return path;
  }

  NavigationFrame nav = navigation_frame(form, tower);
  CanonicalForm cp = canonicalize_complement(nav, p, tower);
  CanonicalForm cq = canonicalize_complement(nav, q, tower);
  std::vector<MoveStep> steps = cp.steps;
  if (!nav.has_z()) {
    if (cp.value != cq.value) {
      const std::size_t aux = cp.pair == 0 ? 1 : 0;
      append(steps, rescale_gadget_odd(nav, cp.pair, aux, cp.value, cq.value,
                                       tower));
    }
    if (cp.pair != cq.pair) {
      append(steps, bridge(nav, cp.pair, cq.pair, cq.value, std::nullopt));
    }
  } else {
    const TowerScalar& lambda = cp.value;
    const TowerScalar& mu = cq.value;
    if (lambda * lambda == mu * mu) {
      if (lambda != mu) {
        Vec full(form.size());
        full[nav.x_index(cp.pair)] = TowerScalar(1L);
        full[nav.z_index()] = mu;
        push_move(steps, nav.u(cp.pair), cp.point, full);
      }
    } else {
      append(steps, rescale_gadget_even(nav, cp.pair, lambda, mu, tower));
    }
    if (cp.pair != cq.pair) {
      append(steps, bridge(nav, cp.pair, cq.pair, mu * mu, mu));
    }
  }
  append(steps, reversed(form, cq.steps));
  path.steps = merge_steps(steps);
  path.tower = tower;
  return path;
}

MovePath connect_on_quadric(const QuadForm& form, const ProjPoint& p,
                            const ProjPoint& q, Rng& rng, Tower& tower,
                            const QuadricSearchOptions& options) {
  require_size(form, p);
  require_size(form, q);
  require_rank(form);
  for (const auto* x : {&p, &q}) {
    if (!form(x->coords()).is_zero()) {
      fail(ErrorCode::point_not_on_quadric,
           "endpoint " + x->to_string() + " is not on the quadric");
    }
    if (!is_smooth_point(form, *x)) {
      fail(ErrorCode::singular_endpoint,
           "endpoint " + x->to_string() + " is a singular point");
    }
  }
  MovePath path;
  path.problem = Problem::quadric;
  path.form = form;
  path.p = p.tidy();
  path.q = q.tidy();
  if (p == q) {
    path.tower = tower;
    return path;
  }

  auto off_tangents = [&](std::vector<ProjPoint> anchors) {
    PointSearchOptions o;
    o.retry_limit = options.retry_limit;
    o.accept = [&form, anchors](const ProjPoint& y) {
      if (!is_smooth_point(form, y)) return false;
      for (const auto& a : anchors) {
        if (form.bilinear(y.coords(), a.coords()).is_zero()) return false;
      }
      return true;
    };
    return o;
  };
  auto jump = [&](const Chart& chart, const ProjPoint& from,
                  const ProjPoint& to) {
    Vec target = chart.forward(to).transverse;
    ProjPoint exit = fiber_move(chart, from, target);
    path.steps.push_back(MoveStep::from_chart(chart, from, target, exit));
  };
  const LinearSubspace whole = LinearSubspace::whole(form.size());
  try {
    ProjPoint y = point_on_quadric(form, whole, rng, tower, off_tangents({p, q}));
    jump(quadric_chart(form, y), p, q);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::retry_limit) throw;
    // Two charts through an intermediate point z.
    ProjPoint y1 = point_on_quadric(form, whole, rng, tower, off_tangents({p}));
    Chart first = quadric_chart(form, y1);
    std::optional<ProjPoint> z;
    for (int attempt = 0; attempt < options.retry_limit && !z; ++attempt) {
      Vec tr(first.fiber_dim());
      for (auto& x : tr) x = TowerScalar(rng.symmetric(10 + attempt));
      ProjPoint cand = first.backward({TowerScalar(), tr});
      if (!form.bilinear(cand.coords(), q.coords()).is_zero()) z = cand;
    }
    if (!z) fail(ErrorCode::retry_limit, "no intermediate point found");
    ProjPoint y2 =
        point_on_quadric(form, whole, rng, tower, off_tangents({*z, q}));
    jump(first, p, *z);
    jump(quadric_chart(form, y2), *z, q);
  }
  path.tower = tower;
  return path;
}

MovePath expand_to_unipotent_steps(const MovePath& path) {
  MovePath out = path;
  out.steps.clear();
  for (const auto& s : path.steps) {
    Chart chart = chart_of(path.form, s);
    Vec cur = chart.forward(s.entry).transverse;
    ProjPoint at = s.entry;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      if (cur[k] == s.target[k]) continue;
      cur[k] = s.target[k];
      ProjPoint next = fiber_move(chart, at, cur);
      out.steps.push_back({s.descriptor, s.frame, at, cur, next.tidy()});
      at = out.steps.back().exit;
    }
  }
  return out;
}

namespace {

VerifyReport failure(std::string message,
                     std::optional<std::size_t> step = std::nullopt) {
  VerifyReport r;
  r.valid = false;
  r.failed_step = step;
  r.message = step ? message + " at step " + std::to_string(*step) : message;
  return r;
}

VerifyReport verify_steps(const MovePath& path) {
  const QuadForm& form = path.form;
  const std::size_t n = form.size();
  if (n < 2 || !form.matrix().is_symmetric()) {
    return failure("form is not a symmetric matrix");
  }
  if (rank(form) < 3) return failure("form has rank below 3");

  for (const auto& level : path.tower.levels()) {
    if (sqrt_in(level->radicand, level->parent)) {
      return failure("tower radicand " + level->radicand.to_string() +
                     " is already a square");
    }
  }
  for (const auto* x : {&path.p, &path.q}) {
    if (x->size() != n) return failure("endpoint has the wrong size");
    const bool on = form(x->coords()).is_zero();
    if (path.problem == Problem::complement && on) {
      return failure("endpoint lies on the quadric");
    }
    if (path.problem == Problem::quadric &&
        (!on || !is_smooth_point(form, *x))) {
      return failure("endpoint is not a smooth point of the quadric");
    }
  }
  if (path.steps.empty()) {
    if (path.p != path.q) return failure("empty path between distinct points");
  }

  // Chaining first, so a tampered exit is reported as a broken link.
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const ProjPoint& before = k == 0 ? path.p : path.steps[k - 1].exit;
    if (path.steps[k].entry.size() != n || path.steps[k].entry != before) {
      return failure("chain break", k == 0 ? 1 : k);
    }
  }
  if (!path.steps.empty() && path.steps.back().exit != path.q) {
    return failure("chain break", path.steps.size());
  }

  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const MoveStep& s = path.steps[k];
    const std::size_t label = k + 1;
    if (s.frame.rows() != n || s.frame.cols() != n) {
      return failure("domain failure: chart frame has the wrong size", label);
    }
    std::optional<Chart> chart;
    try {
      chart.emplace(chart_of(form, s));
    } catch (const Error&) {
      return failure("domain failure: chart frame does not normalize the form",
                     label);
    }
    const bool quadric_kind = s.descriptor.kind == ChartKind::quadric;
    if (quadric_kind != (path.problem == Problem::quadric)) {
      return failure("domain failure: chart kind does not match the problem",
                     label);
    }
    if (s.descriptor.base_point.size() != n ||
        s.descriptor.base_point !=
            ProjPoint(s.frame.column(s.descriptor.partner))) {
      return failure("domain failure: base point does not match the frame",
                     label);
    }
    if (!chart->in_domain(s.entry)) {
      return failure("domain failure: entry outside the chart", label);
    }
    if (!chart->in_domain(s.exit)) {
      return failure("domain failure: exit outside the chart", label);
    }
    const FiberCoords in = chart->forward(s.entry);
    const FiberCoords out = chart->forward(s.exit);
    if (in.t != out.t) return failure("fiber parameter changed", label);
    if (s.target.size() != chart->fiber_dim() || out.transverse != s.target ||
        fiber_move(*chart, s.entry, s.target) != s.exit) {
      return failure("replay mismatch", label);
    }
  }
  VerifyReport r;
  r.valid = true;
  r.step_count = path.steps.size();
  r.radicands = path.tower.radicands();
  r.message = "valid: " + std::to_string(r.step_count) + " steps";
  return r;
}

}  // namespace

VerifyReport verify_path(const MovePath& path) {
  try {
    return verify_steps(path);
  } catch (const Error& e) {
    return failure(std::string("malformed path: ") + e.what());
  }
}

}  // namespace flexcert
