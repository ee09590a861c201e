#pragma once

// JSON interchange for scalars, forms, points and move certificates.
//
// Rationals are strings "p/q" (or "p" when q = 1). A scalar a + b*g_k that
// uses the k-th adjoined root is {"a": ..., "b": ..., "rad": k}, where k
// indexes the "tower" list of radicands carried by the enclosing document.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexcert/navigate.hpp"

namespace flexcert {

using json = nlohmann::json;

inline constexpr int certificate_version = 1;

json scalar_to_json(const TowerScalar& x);
/// `levels` is the tower in adjunction order.
TowerScalar scalar_from_json(
    const json& j, const std::vector<std::shared_ptr<const TowerLevel>>& levels);

json tower_to_json(const Tower& tower);
Tower tower_from_json(const json& j,
                      std::size_t height_limit = Tower::default_height_limit);

json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j, const Tower& tower);
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const Tower& tower);

/// Form document {"dim": n, "tower": [...], "matrix": [[...]]} for a quadric
/// in P^n.
json form_to_json(const QuadForm& form, const Tower& tower);
QuadForm form_from_json(const json& j, Tower& tower);

/// Points given as "a,b,c" with rational entries.
ProjPoint parse_point(const std::string& text);

json path_to_json(const MovePath& path);
/// Reads the path part of a certificate. The tower must already be built
/// from the certificate header.
MovePath path_from_json(const json& j, const Tower& tower);

/// Hex SHA-256 of the canonical dump of `doc` without its "digest" field.
std::string content_digest(const json& doc);
void seal(json& doc);
bool digest_matches(const json& doc);

json certificate_json(const MovePath& path);

/// Replays the certificate against `form`, then checks the digest.
VerifyReport verify_certificate(const json& doc, const QuadForm& form,
                                const Tower& form_tower);

}  // namespace flexcert
