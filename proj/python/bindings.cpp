#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flexcert/ci2q.hpp"

namespace py = pybind11;
using namespace flexcert;

namespace {

// Documents cross the boundary as JSON text; the Python package wraps them.

ProjPoint endpoint(const std::optional<std::string>& text,
                   const std::function<ProjPoint()>& random) {
  return text ? parse_point(*text) : random();
}

json report_json(const VerifyReport& r) {
  json radicands = json::array();
  for (const auto& x : r.radicands) radicands.push_back(scalar_to_json(x));
  json out{{"valid", r.valid},
           {"message", r.message},
           {"steps", r.step_count},
           {"radicands", radicands}};
  if (r.failed_step) out["failed_step"] = *r.failed_step;
  return out;
}

std::string hyperbolic(const std::string& form_text) {
  Tower tower;
  QuadForm f = form_from_json(json::parse(form_text), tower);
  HyperbolicFrame h = hyperbolic_normalize(f, tower);
  return json{{"tower", tower_to_json(tower)},
              {"pairs", h.pairs},
              {"has_z", h.has_z},
              {"change", matrix_to_json(h.change.matrix())}}
      .dump();
}

std::string connect(const std::string& kind, const std::string& form_text,
                    const std::optional<std::string>& p_text,
                    const std::optional<std::string>& q_text,
                    std::uint64_t seed, int retry_limit) {
  Rng rng(seed);
  Tower tower;
  QuadForm f = form_from_json(json::parse(form_text), tower);
  MovePath path;
  if (kind == "complement") {
    auto random = [&] {
      for (int attempt = 0; attempt < retry_limit; ++attempt) {
        Vec v(f.size());
        for (auto& x : v) x = TowerScalar(rng.symmetric(5));
        if (!is_zero(v) && !f(v).is_zero()) return ProjPoint(v);
      }
      fail(ErrorCode::retry_limit, "no random point off the quadric found");
    };
    ProjPoint p = endpoint(p_text, random);
    ProjPoint q = endpoint(q_text, random);
    path = connect_complement(f, p, q, tower);
  } else if (kind == "quadric") {
    PointSearchOptions search;
    search.retry_limit = retry_limit;
    search.accept = [&f](const ProjPoint& x) { return is_smooth_point(f, x); };
    auto random = [&] {
      return point_on_quadric(f, LinearSubspace::whole(f.size()), rng, tower, search);
    };
    ProjPoint p = endpoint(p_text, random);
    ProjPoint q = endpoint(q_text, random);
    QuadricSearchOptions opts;
    opts.retry_limit = retry_limit;
    path = connect_on_quadric(f, p, q, rng, tower, opts);
  } else {
    fail(ErrorCode::parse, "unknown problem '" + kind + "'");
  }
  path.seed = seed;
  return certificate_json(path).dump();
}

std::string connect_x(const std::string& pencil_text,
                      const std::optional<std::string>& p_text,
                      const std::optional<std::string>& q_text,
                      std::uint64_t seed, int retry_limit) {
  Rng rng(seed);
  Tower tower;
  Pencil pencil = pencil_from_json(json::parse(pencil_text), tower);
  XSearchOptions search;
  search.retry_limit = retry_limit;
  auto random = [&] {
    return point_on_X(pencil, LinearSubspace::whole(pencil.ambient()), rng,
                      tower, search);
  };
  ProjPoint p = endpoint(p_text, random);
  ProjPoint q = endpoint(q_text, random);
  ConnectXOptions opts;
  opts.retry_limit = retry_limit;
  CiPath path = connect_on_X(pencil, p, q, {}, rng, tower, opts);
  path.seed = seed;
  return ci_certificate_json(path).dump();
}

std::string verify(const std::string& cert_text, const std::string& input_text) {
  json doc = json::parse(cert_text);
  json input = json::parse(input_text);
  Tower tower;
  if (doc.is_object() && doc.value("kind", "") == "ci") {
    Pencil pencil = pencil_from_json(input, tower);
    return report_json(verify_ci_certificate(doc, pencil, tower)).dump();
  }
  QuadForm f = form_from_json(input, tower);
  return report_json(verify_certificate(doc, f, tower)).dump();
}

std::string eacx(const std::vector<std::string>& lambdas) {
  std::vector<TowerScalar> l;
  for (const auto& s : lambdas) l.push_back(TowerScalar::parse_rational(s));
  return pencil_to_json(eacx_build(l), Tower()).dump();
}

std::string smoothness(const std::string& pencil_text) {
  Tower tower;
  Pencil pencil = pencil_from_json(json::parse(pencil_text), tower);
  SmoothnessReport r = pencil_smoothness(pencil);
  return json{{"smooth", r.smooth}, {"reason", r.reason}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<Error> error(m, "FlexcertError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object args = py::make_tuple(error_code_name(e.code()), e.what());
      PyErr_SetObject(error.ptr(), args.ptr());
    } catch (const json::exception& e) {
      py::object args = py::make_tuple("parse-error", e.what());
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  auto release = py::call_guard<py::gil_scoped_release>();
  m.def("hyperbolic_normalize", &hyperbolic, py::arg("form"), release);
  m.def("connect", &connect, py::arg("kind"), py::arg("form"), py::arg("p"),
        py::arg("q"), py::arg("seed"), py::arg("retry_limit"), release);
  m.def("connect_on_x", &connect_x, py::arg("pencil"), py::arg("p"),
        py::arg("q"), py::arg("seed"), py::arg("retry_limit"), release);
  m.def("verify", &verify, py::arg("certificate"), py::arg("input"), release);
  m.def("eacx_build", &eacx, py::arg("lambdas"));
  m.def("pencil_smoothness", &smoothness, py::arg("pencil"));
}
