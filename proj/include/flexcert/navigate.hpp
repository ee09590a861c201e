#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flexcert/quadric_charts.hpp"

namespace flexcert {

/// One fiber translation: exit = fiber_move(chart, entry, target).
struct MoveStep {
  Chart::Descriptor descriptor;
  Matrix frame;
  ProjPoint entry;
  Vec target;
  ProjPoint exit;

  static MoveStep from_chart(const Chart& chart, ProjPoint entry, Vec target,
                             ProjPoint exit);
};

/// Rebuilds the chart of a step from its descriptor and frame; throws
/// precondition when the frame does not put `form` into chart shape.
Chart chart_of(const QuadForm& form, const MoveStep& step);

enum class Problem { complement, quadric };

struct MovePath {
  Problem problem = Problem::complement;
  QuadForm form;
  Tower tower;
  std::uint64_t seed = 0;
  ProjPoint p;
  ProjPoint q;
  std::vector<MoveStep> steps;
};

/// Coordinates in which a rank >= 3 form on P^n reads
/// x1*y1 + ... + xm*ym (+ z^2), vertex coordinates last, together with the
/// standard cylinders lifted to the whole ambient space.
struct NavigationFrame {
  QuadForm form;
  ConeDecomposition cone;
  HyperbolicFrame hyperbolic;
  CoordChange frame;  // ambient coordinates = frame * normalized coordinates
  std::vector<Chart> charts;

  std::size_t pairs() const { return hyperbolic.pairs; }
  bool has_z() const { return hyperbolic.has_z; }
  std::size_t x_index(std::size_t i) const { return 2 * i; }
  std::size_t y_index(std::size_t i) const { return 2 * i + 1; }
  std::size_t z_index() const { return 2 * hyperbolic.pairs; }

  const Chart& u(std::size_t i) const;
  const Chart& v(std::size_t i) const;
  const Chart& w() const;

  Vec coords(const ProjPoint& p) const { return frame.to_new(p.coords()); }
  ProjPoint point(const Vec& normalized) const {
    return ProjPoint(frame.to_old(normalized));
  }
};

NavigationFrame navigation_frame(const QuadForm& form, Tower& tower);

struct CanonicalForm {
  std::vector<MoveStep> steps;
  ProjPoint point;
  std::size_t pair = 0;
  /// Odd case: the fiber value t of (1 : t : 0 : ... : 0). Even case: the
  /// value lambda of (1 : 0 : ... : 0 : lambda).
  TowerScalar value;
};

/// Moves p to the canonical point (x_i = 1, y_i = t) of its fiber (no z term)
/// or (x_i = 1, z = lambda) with lambda^2 = t (z term present).
CanonicalForm canonicalize_complement(const NavigationFrame& nav,
                                      const ProjPoint& p, Tower& tower);

/// Three moves in U_pair, U_aux, U_pair taking (x_pair = 1, y_pair = t) to
/// (x_pair = 1, y_pair = t_target).
std::vector<MoveStep> rescale_gadget_odd(const NavigationFrame& nav,
                                         std::size_t pair, std::size_t aux,
                                         const TowerScalar& t,
                                         const TowerScalar& t_target,
                                         Tower& tower);

/// Three moves in U_pair, V_pair, U_pair taking (x_pair = 1, z = lambda) to
/// (x_pair = 1, z = mu).
std::vector<MoveStep> rescale_gadget_even(const NavigationFrame& nav,
                                          std::size_t pair,
                                          const TowerScalar& lambda,
                                          const TowerScalar& mu, Tower& tower);

/// The same moves traversed backwards.
std::vector<MoveStep> reversed(const QuadForm& form,
                               const std::vector<MoveStep>& steps);

/// Fuses consecutive moves in the same chart and drops identity moves.
std::vector<MoveStep> merge_steps(const std::vector<MoveStep>& steps);

MovePath connect_complement(const QuadForm& form, const ProjPoint& p,
                            const ProjPoint& q, Tower& tower);

struct QuadricSearchOptions {
  int retry_limit = 64;
};

MovePath connect_on_quadric(const QuadForm& form, const ProjPoint& p,
                            const ProjPoint& q, Rng& rng, Tower& tower,
                            const QuadricSearchOptions& options = {});

MovePath expand_to_unipotent_steps(const MovePath& path);

struct VerifyReport {
  bool valid = false;
  std::string message;
  std::optional<std::size_t> failed_step;  // 1-based
  std::size_t step_count = 0;
  std::vector<TowerScalar> radicands;
};

VerifyReport verify_path(const MovePath& path);

}  // namespace flexcert
