#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "flexcert/projlin.hpp"

namespace flexcert {

/// Coordinates in which a smooth point of V(f) is (0:1:0:...:0), its tangent
/// hyperplane is x0 = 0, and f = x0*x1 + g(x2, ..., xn).
struct CtsqFrame {
  CoordChange change;
  QuadForm residual;  // g, on the last n-1 coordinates
};

CtsqFrame ctsq_normalize(const QuadForm& q, const ProjPoint& x);

/// Coordinates (x1:y1:...:xm:ym[:z]:w...) in which
/// f = x1*y1 + ... + xm*ym (+ z^2); the trailing w coordinates span the radical.
struct HyperbolicFrame {
  CoordChange change;
  std::size_t pairs = 0;
  bool has_z = false;

  std::size_t rank() const { return 2 * pairs + (has_z ? 1 : 0); }
};

/// Exact matrix of x1*y1 + ... + xm*ym (+ z^2) padded with zeros to size n.
Matrix hyperbolic_target(std::size_t n, std::size_t pairs, bool has_z);

HyperbolicFrame hyperbolic_normalize(const QuadForm& q, Tower& tower);

struct ConeDecomposition {
  QuadForm base;          // full rank, on the first `rank` split coordinates
  LinearSubspace vertex;  // the radical
  CoordChange split;      // columns: complement K first, then vertex L
  std::size_t rank = 0;

  /// Projective dimension of the vertex, -1 when the quadric is smooth.
  long vertex_dim() const { return vertex.projective_dim(); }
};

ConeDecomposition cone_decompose(const QuadForm& q);

enum class ChartKind {
  quadric,     // X \ T_y X inside a quadric X
  complement,  // Y \ T_x X inside Y = P^n \ X
  standard_u,
  standard_v,
  standard_w,
};

const char* chart_kind_name(ChartKind kind);
std::optional<ChartKind> chart_kind_from_name(const std::string& name);

struct FiberCoords {
  TowerScalar t;
  Vec transverse;
};

/// An explicit cylinder chart.
///
/// Every chart here has the same shape: in the frame coordinates x' the form
/// reads x'_a * x'_b + sigma(rest), with sigma independent of x'_a and x'_b.
/// The domain is x'_a != 0, together with f != 0 for charts on a quadric
/// complement or f = 0 for charts on the quadric itself. Normalizing x'_a = 1,
/// the fiber parameter is t = f = x'_b + sigma(rest) and the remaining
/// coordinates are the affine fiber coordinates.
class Chart {
 public:
  struct Descriptor {
    ChartKind kind = ChartKind::complement;
    std::size_t index = 0;  // pair index for U_i / V_i
    long vertex_dim = -1;   // > -1 for cone-lifted charts
    std::size_t distinguished = 0;
    std::size_t partner = 1;
    ProjPoint base_point;   // frame * e_partner, a point of V(f)
  };

  /// Validates that `frame` puts `form` into the chart shape; throws
  /// precondition otherwise.
  Chart(const QuadForm& form, CoordChange frame, Descriptor descriptor);

  const Descriptor& descriptor() const { return descriptor_; }
  ChartKind kind() const { return descriptor_.kind; }
  const CoordChange& frame() const { return frame_; }
  const QuadForm& form() const { return form_; }
  bool on_quadric() const { return descriptor_.kind == ChartKind::quadric; }
  std::size_t ambient() const { return frame_.size(); }
  std::size_t fiber_dim() const { return ambient() - 2; }
  /// Frame coordinate indices of the fiber coordinates, in order.
  const std::vector<std::size_t>& transverse_indices() const {
    return transverse_;
  }

  bool in_domain(const ProjPoint& p) const;
  FiberCoords forward(const ProjPoint& p) const;
  ProjPoint backward(const FiberCoords& coords) const;
  /// The linear form cutting the excluded hyperplane, in ambient coordinates.
  Vec excluded_hyperplane() const;

 private:
  TowerScalar sigma(const Vec& transverse) const;

  QuadForm form_;
  CoordChange frame_;
  Descriptor descriptor_;
  QuadForm framed_;  // form in frame coordinates
  std::vector<std::size_t> transverse_;
};

ProjPoint fiber_move(const Chart& chart, const ProjPoint& p,
                     const Vec& target);

Chart quadric_chart(const QuadForm& q, const ProjPoint& y);
Chart complement_cylinder(const QuadForm& q, const ProjPoint& x);

/// The point q = (0:...:0:-1:1:1) of the hyperbolic form with a z term.
Vec standard_w_point(const HyperbolicFrame& frame);

/// Standard cylinders of the complement of x1*y1 + ... (+ z^2), expressed on
/// the ambient form `q` through the hyperbolic frame: U_1..U_m, then (odd
/// rank only) V_1..V_m and W. `w_override` replaces the default W point,
/// given in hyperbolic coordinates.
std::vector<Chart> standard_cylinders(
    const QuadForm& q, const HyperbolicFrame& frame,
    const std::optional<Vec>& w_override = std::nullopt);

/// Lifts a chart on the base of a cone to the whole ambient space.
/// `hyperplane` is the linear form h on K (base coordinates) whose zero set
/// must be excluded by the base chart. With vertex_dim = -1 the base chart
/// is returned unchanged.
Chart cone_lift(const Chart& base, const Vec& hyperplane,
                const ConeDecomposition& cone, const QuadForm& ambient_form);

/// Largest projective dimension of a linear subspace on a rank-r quadric in
/// P^n: n - ceil(r / 2).
long max_linear_subspace_dim(long n, long r);

}  // namespace flexcert
