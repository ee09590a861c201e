#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flexcert/certificate.hpp"
#include "flexcert/navigate.hpp"

namespace flexcert {

/// Two quadratic forms on P^{n+2}; X = V(beta) ∩ V(gamma) has dimension n.
struct Pencil {
  QuadForm beta;
  QuadForm gamma;

  Pencil() = default;
  Pencil(QuadForm beta, QuadForm gamma);

  std::size_t ambient() const { return beta.size(); }
  std::size_t n() const { return beta.size() - 3; }
  bool contains(const Vec& x) const;
  /// The Jacobian rows beta(x, .), gamma(x, .) are independent.
  bool is_smooth_point(const Vec& x) const;
};

struct SmoothnessReport {
  bool smooth = false;
  std::string reason;
  /// Coefficients of det(B + t C), lowest degree first.
  std::vector<TowerScalar> discriminant;
  /// Multiplicity of the root s = 0 of det(s B + t C).
  std::size_t infinity_multiplicity = 0;
};

SmoothnessReport pencil_smoothness(const Pencil& pencil);

/// beta and gamma vanish on every ordered pair of the points.
bool span_in_X(const Pencil& pencil, const std::vector<ProjPoint>& points);

struct Line {
  ProjPoint v1;
  ProjPoint v2;
};

struct XSearchOptions {
  int retry_limit = 64;
  int rational_attempts = 16;
};

/// A point of X in `subspace`, from a point z on V(beta), a line of V(beta)
/// through z and the intersection of that line with V(gamma).
ProjPoint point_on_X(const Pencil& pencil, const LinearSubspace& subspace,
                     Rng& rng, Tower& tower, const XSearchOptions& options = {},
                     const std::function<bool(const ProjPoint&)>& accept = {});

Line find_line_through(const Pencil& pencil, const ProjPoint& p, Rng& rng,
                       Tower& tower, const XSearchOptions& options = {});

/// A line through an auxiliary point of X. When det(B + tC) splits over Q
/// the point is taken in the span of three common eigenvectors.
Line search_line(const Pencil& pencil, Rng& rng, Tower& tower,
                 const XSearchOptions& options = {});

/// Projection of X from a line l in X onto P^n.
struct LineChart {
  Pencil pencil;
  Line line;
  /// Columns: a complement basis w_0..w_n of the line, then v1, v2.
  CoordChange adapted;
  /// phi(E): u -> beta(v1,U) gamma(v2,U) - beta(v2,U) gamma(v1,U).
  QuadForm image;

  /// The projection pi_l, an (n+1) x (n+3) matrix.
  Matrix projection() const;
  ProjPoint forward(const ProjPoint& x) const;
  /// The residual point of the plane <l, u> on X; nullopt on V(image).
  std::optional<ProjPoint> inverse(const ProjPoint& u) const;
  /// x on X, off l and off D_l.
  bool in_domain(const ProjPoint& x) const;
};

LineChart chart_from_line(const Pencil& pencil, const Line& line);

/// image ∘ pi_l as a form on the ambient space; D_l = X ∩ V(dl_quadric).
QuadForm dl_quadric(const LineChart& chart);

struct CiSegment {
  Line line;
  ProjPoint from;
  ProjPoint to;
  MovePath inner;  // on P^n \ V(image)
};

struct CiPath {
  Pencil pencil;
  Tower tower;
  std::uint64_t seed = 0;
  ProjPoint p;
  ProjPoint q;
  std::vector<CiSegment> segments;
};

struct ConnectXOptions {
  int retry_limit = 64;
};

CiPath connect_on_X(const Pencil& pencil, const ProjPoint& p,
                    const ProjPoint& q, const std::vector<Line>& lines,
                    Rng& rng, Tower& tower,
                    const ConnectXOptions& options = {});

/// Replays every segment on P^n and lifts each visited point back to X.
VerifyReport verify_ci_path(const CiPath& path);

struct DegreeAudit {
  bool ok = false;
  std::vector<int> degrees;
  int total = 0;
  std::string message;
};

/// Degrees of the components of the complement of `inner` (a chart on
/// P^n \ V(image)) pulled back to X: a hyperplane section and D_l.
DegreeAudit polar_degree_audit(const LineChart& chart, const Chart& inner);
/// The same components on P^n itself.
DegreeAudit inner_degree_audit(const Chart& inner);

/// The diagonal pencil sum x_i^2, sum lambda_i x_i^2 on P^{k-1}.
Pencil eacx_build(const std::vector<TowerScalar>& lambdas);

json pencil_to_json(const Pencil& pencil, const Tower& tower);
Pencil pencil_from_json(const json& j, Tower& tower);
json line_to_json(const Line& line);
Line line_from_json(const json& j, const Tower& tower);

json ci_certificate_json(const CiPath& path);
VerifyReport verify_ci_certificate(const json& doc, const Pencil& pencil,
                                   const Tower& pencil_tower);

}  // namespace flexcert
