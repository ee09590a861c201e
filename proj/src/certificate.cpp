#include "flexcert/certificate.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <sstream>

namespace flexcert {

namespace {

std::string rational_text(const mpq_class& q) {
  return q.get_den() == 1 ? q.get_num().get_str() : q.get_str();
}

const char* problem_name(Problem p) {
  return p == Problem::complement ? "complement" : "quadric";
}

json point_to_json(const ProjPoint& p) { return vec_to_json(p.coords()); }

ProjPoint point_from_json(const json& j, const Tower& tower) {
  return ProjPoint(vec_from_json(j, tower));
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    fail(ErrorCode::parse, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

std::size_t index_from_json(const json& j) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long>() >= 0)) {
    fail(ErrorCode::parse, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

VerifyReport invalid(std::string message) {
  VerifyReport r;
  r.valid = false;
  r.message = std::move(message);
  return r;
}

}  // namespace

json scalar_to_json(const TowerScalar& x) {
  if (x.is_rational()) return rational_text(x.rational());
  return json{{"a", scalar_to_json(x.a())},
              {"b", scalar_to_json(x.b())},
              {"rad", x.depth() - 1}};
}

TowerScalar scalar_from_json(
    const json& j,
    const std::vector<std::shared_ptr<const TowerLevel>>& levels) {
  if (j.is_string()) return TowerScalar::parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return TowerScalar(j.get<long>());
  if (!j.is_object()) fail(ErrorCode::parse, "malformed scalar " + j.dump());
  const std::size_t k = index_from_json(field(j, "rad"));
  if (k >= levels.size()) {
    fail(ErrorCode::parse, "scalar uses radicand " + std::to_string(k) +
                               " beyond the tower");
  }
  const auto& level = levels[k];
  TowerScalar a = scalar_from_json(field(j, "a"), levels);
  TowerScalar b = scalar_from_json(field(j, "b"), levels);
  for (const auto* part : {&a, &b}) {
    if (part->level() && !is_ancestor_or_self(part->level(), level->parent)) {
      fail(ErrorCode::parse, "scalar coefficient lives above its radicand");
    }
  }
  if (b.is_zero()) fail(ErrorCode::parse, "non-canonical scalar with b = 0");
  return TowerScalar::from_parts(level, std::move(a), std::move(b));
}

json tower_to_json(const Tower& tower) {
  json out = json::array();
  for (const auto& r : tower.radicands()) out.push_back(scalar_to_json(r));
  return out;
}

Tower tower_from_json(const json& j, std::size_t height_limit) {
  if (!j.is_array()) fail(ErrorCode::parse, "tower must be a list");
  Tower tower(height_limit);
  for (const auto& r : j) {
    TowerScalar radicand = scalar_from_json(r, tower.levels());
    if (tower.height() >= height_limit) {
      fail(ErrorCode::tower_limit, "tower exceeds the height limit");
    }
    tower = tower.adjoin(radicand);
  }
  return tower;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(scalar_to_json(x));
  return out;
}

Vec vec_from_json(const json& j, const Tower& tower) {
  if (!j.is_array()) fail(ErrorCode::parse, "expected a list of scalars");
  const auto levels = tower.levels();
  Vec out;
  for (const auto& x : j) out.push_back(scalar_from_json(x, levels));
  return out;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(vec_to_json(m.row(i)));
  return out;
}

Matrix matrix_from_json(const json& j, const Tower& tower) {
  if (!j.is_array() || j.empty()) fail(ErrorCode::parse, "expected a matrix");
  std::vector<Vec> rows;
  for (const auto& r : j) rows.push_back(vec_from_json(r, tower));
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) {
      fail(ErrorCode::parse, "matrix rows have different lengths");
    }
  }
  return Matrix::from_rows(rows);
}

json form_to_json(const QuadForm& form, const Tower& tower) {
  return json{{"dim", form.size() - 1},
              {"tower", tower_to_json(tower)},
              {"matrix", matrix_to_json(form.matrix())}};
}

QuadForm form_from_json(const json& j, Tower& tower) {
  if (j.contains("tower")) {
    tower = tower_from_json(j.at("tower"), tower.height_limit());
  }
  Matrix m = matrix_from_json(field(j, "matrix"), tower);
  if (m.rows() != m.cols()) fail(ErrorCode::parse, "form matrix is not square");
  if (j.contains("dim") && index_from_json(j.at("dim")) + 1 != m.rows()) {
    fail(ErrorCode::parse, "form dimension does not match the matrix");
  }
  if (!m.is_symmetric()) fail(ErrorCode::parse, "form matrix is not symmetric");
  return QuadForm(std::move(m));
}

ProjPoint parse_point(const std::string& text) {
  Vec coords;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    coords.push_back(TowerScalar::parse_rational(item));
  }
  if (coords.empty() || is_zero(coords)) {
    fail(ErrorCode::parse, "not a projective point: '" + text + "'");
  }
  return ProjPoint(std::move(coords));
}

json path_to_json(const MovePath& path) {
  json steps = json::array();
  for (const auto& s : path.steps) {
    const auto& d = s.descriptor;
    json chart{{"kind", chart_kind_name(d.kind)},
               {"index", d.index},
               {"distinguished", d.distinguished},
               {"partner", d.partner},
               {"vertex_dim", d.vertex_dim},
               {"base_point", point_to_json(d.base_point)},
               {"frame", matrix_to_json(s.frame)}};
    steps.push_back(json{{"chart", std::move(chart)},
                         {"entry", point_to_json(s.entry)},
                         {"target", vec_to_json(s.target)},
                         {"exit", point_to_json(s.exit)}});
  }
  return json{{"problem", problem_name(path.problem)},
              {"form", matrix_to_json(path.form.matrix())},
              {"endpoints", {{"p", point_to_json(path.p)},
                             {"q", point_to_json(path.q)}}},
              {"steps", std::move(steps)}};
}

MovePath path_from_json(const json& j, const Tower& tower) {
  MovePath path;
  const std::string problem = field(j, "problem").get<std::string>();
  if (problem == "complement") {
    path.problem = Problem::complement;
  } else if (problem == "quadric") {
    path.problem = Problem::quadric;
  } else {
    fail(ErrorCode::parse, "unknown problem '" + problem + "'");
  }
  path.tower = tower;
  path.form = QuadForm(matrix_from_json(field(j, "form"), tower));
  const json& ends = field(j, "endpoints");
  path.p = point_from_json(field(ends, "p"), tower);
  path.q = point_from_json(field(ends, "q"), tower);
  for (const auto& s : field(j, "steps")) {
    const json& c = field(s, "chart");
    MoveStep step;
    auto kind = chart_kind_from_name(field(c, "kind").get<std::string>());
    if (!kind) fail(ErrorCode::parse, "unknown chart kind");
    step.descriptor.kind = *kind;
    step.descriptor.index = index_from_json(field(c, "index"));
    step.descriptor.distinguished = index_from_json(field(c, "distinguished"));
    step.descriptor.partner = index_from_json(field(c, "partner"));
    step.descriptor.vertex_dim = field(c, "vertex_dim").get<long>();
    step.descriptor.base_point = point_from_json(field(c, "base_point"), tower);
    step.frame = matrix_from_json(field(c, "frame"), tower);
    step.entry = point_from_json(field(s, "entry"), tower);
    step.target = vec_from_json(field(s, "target"), tower);
    step.exit = point_from_json(field(s, "exit"), tower);
    path.steps.push_back(std::move(step));
  }
  return path;
}

std::string content_digest(const json& doc) {
  json body = doc;
  if (body.is_object()) body.erase("digest");
  const std::string text = body.dump();
  unsigned char hash[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), hash, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", hash[i]);
    hex += buf;
  }
  return hex;
}

void seal(json& doc) { doc["digest"] = content_digest(doc); }

bool digest_matches(const json& doc) {
  return doc.is_object() && doc.contains("digest") &&
         doc.at("digest").is_string() &&
         doc.at("digest").get<std::string>() == content_digest(doc);
}

json certificate_json(const MovePath& path) {
  json doc{{"version", certificate_version},
           {"kind", problem_name(path.problem)},
           {"seed", path.seed},
           {"tower", tower_to_json(path.tower)},
           {"path", path_to_json(path)}};
  seal(doc);
  return doc;
}

VerifyReport verify_certificate(const json& doc, const QuadForm& form,
                                const Tower& form_tower) {
  MovePath path;
  try {
    if (field(doc, "version").get<int>() != certificate_version) {
      return invalid("unsupported certificate version");
    }
    Tower tower = tower_from_json(field(doc, "tower"));
    // The supplied form may use a subset of the certificate tower.
    const auto levels = tower.levels();
    const auto form_levels = form_tower.levels();
    if (form_levels.size() > levels.size()) {
      return invalid("certificate tower does not extend the form tower");
    }
    for (std::size_t k = 0; k < form_levels.size(); ++k) {
      if (scalar_to_json(form_levels[k]->radicand) !=
          scalar_to_json(levels[k]->radicand)) {
        return invalid("certificate tower does not extend the form tower");
      }
    }
    path = path_from_json(field(doc, "path"), tower);
    if (field(doc, "kind").get<std::string>() !=
        problem_name(path.problem)) {
      return invalid("certificate kind does not match its path");
    }
    path.seed = field(doc, "seed").get<std::uint64_t>();
    if (matrix_to_json(path.form.matrix()) != matrix_to_json(form.matrix())) {
      // Replay against the supplied form so the report names the first move
      // that does not belong to it.
      path.form = QuadForm(matrix_from_json(matrix_to_json(form.matrix()), tower));
      VerifyReport replay = verify_path(path);
      if (replay.valid) {
        return invalid("certificate form differs from the supplied form");
      }
      return replay;
    }
  } catch (const Error& e) {
    return invalid(std::string("malformed certificate: ") + e.what());
  } catch (const json::exception& e) {
    return invalid(std::string("malformed certificate: ") + e.what());
  }
  VerifyReport report = verify_path(path);
  if (report.valid && !digest_matches(doc)) {
    return invalid("digest mismatch");
  }
  return report;
}

}  // namespace flexcert
