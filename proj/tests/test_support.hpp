#pragma once

#include "flexcert/field_tower.hpp"
#include "flexcert/projlin.hpp"

namespace flexcert::testing {

inline TowerScalar q(long num, long den = 1) {
  return TowerScalar(mpq_class(num, den));
}

/// Random element of the field generated by `level`, using every level.
inline TowerScalar random_scalar(Rng& rng,
                                 const std::shared_ptr<const TowerLevel>& level,
                                 long bound = 9) {
  if (!level) {
    long num = rng.symmetric(bound);
    long den = 1 + static_cast<long>(rng.next() % 4);
    return q(num, den);
  }
  return TowerScalar::from_parts(level, random_scalar(rng, level->parent, bound),
                                 random_scalar(rng, level->parent, bound));
}

inline Vec rational_vec(std::initializer_list<long> values) {
  Vec out;
  for (long v : values) out.emplace_back(v);
  return out;
}

inline QuadForm form_from_rows(
    std::initializer_list<std::initializer_list<TowerScalar>> rows) {
  std::vector<Vec> r;
  for (const auto& row : rows) r.emplace_back(row);
  return QuadForm(Matrix::from_rows(r));
}

/// Random symmetric integer matrix of the given size.
inline QuadForm random_form(Rng& rng, std::size_t n, long bound = 5) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      TowerScalar v(rng.symmetric(bound));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return QuadForm(std::move(m));
}

/// P^T D P with D = diag(entries) and P unit upper triangular random.
inline QuadForm congruent_to_diagonal(Rng& rng, const Vec& entries,
                                      long bound = 3) {
  const std::size_t n = entries.size();
  Matrix p = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) p(i, j) = TowerScalar(rng.symmetric(bound));
  }
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = entries[i];
  return QuadForm(p.transpose() * d * p);
}

}  // namespace flexcert::testing
