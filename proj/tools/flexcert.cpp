#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flexcert/ci2q.hpp"

using namespace flexcert;

namespace {

enum Exit {
  exit_ok = 0,
  exit_invalid = 1,
  exit_input = 2,
  exit_exhausted = 3,
  exit_tower = 4,
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::retry_limit:
      return exit_exhausted;
    case ErrorCode::tower_limit:
      return exit_tower;
    default:
      return exit_input;
  }
}

struct Config {
  std::uint64_t seed = 1;
  int retry_limit = 64;
  std::size_t tower_limit = Tower::default_height_limit;
  std::string out;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::parse, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, path + ": " + e.what());
  }
}

void write_output(const Config& cfg, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  if (cfg.out.empty() || cfg.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.out, std::ios::binary);
  if (!out) fail(ErrorCode::parse, "cannot write " + cfg.out);
  out << text;
}

// Summary lines go to stdout only when the document itself goes to a file.
std::ostream& info(const Config& cfg) {
  return (cfg.out.empty() || cfg.out == "-") ? std::cerr : std::cout;
}

json radicand_list(const Tower& tower) {
  json out = json::array();
  for (const auto& r : tower.radicands()) out.push_back(scalar_to_json(r));
  return out;
}

// The tower header of a document, or an empty list.
json tower_of(const json& doc) {
  return doc.is_object() && doc.contains("tower") ? doc.at("tower") : json::array();
}

bool is_prefix(const json& shorter, const json& longer) {
  if (shorter.size() > longer.size()) return false;
  for (std::size_t i = 0; i < shorter.size(); ++i) {
    if (shorter[i] != longer[i]) return false;
  }
  return true;
}

// Input documents plus endpoint files, all read against one tower: the
// longest header, which every other header must be a prefix of.
struct Inputs {
  json primary;
  std::vector<std::optional<json>> points;
  std::vector<json> extras;
  Tower tower;
};

Inputs load_inputs(const Config& cfg, const std::string& primary_path,
                   const std::vector<std::string>& endpoints,
                   const std::vector<std::string>& extra_paths = {}) {
  Inputs in;
  in.primary = read_json(primary_path);
  json longest = tower_of(in.primary);
  for (const auto& path : extra_paths) {
    json doc = read_json(path);
    json t = tower_of(doc);
    if (is_prefix(longest, t)) {
      longest = t;
    } else if (!is_prefix(t, longest)) {
      fail(ErrorCode::incompatible_towers,
           path + " uses a tower that is incompatible with the input");
    }
    in.extras.push_back(std::move(doc));
  }
  for (const auto& e : endpoints) {
    if (!e.empty() && e.front() == '@') {
      json doc = read_json(e.substr(1));
      json t = tower_of(doc);
      if (is_prefix(longest, t)) {
        longest = t;
      } else if (!is_prefix(t, longest)) {
        fail(ErrorCode::incompatible_towers,
             e.substr(1) + " uses a tower that is incompatible with the input");
      }
      in.points.emplace_back(std::move(doc));
    } else {
      in.points.emplace_back(std::nullopt);
    }
  }
  in.tower = tower_from_json(longest, cfg.tower_limit);
  in.primary["tower"] = longest;
  return in;
}

ProjPoint endpoint(const std::string& text, const std::optional<json>& file,
                   const Tower& tower) {
  if (file) {
    if (!file->contains("point")) fail(ErrorCode::parse, "point file needs 'point'");
    return ProjPoint(vec_from_json(file->at("point"), tower));
  }
  return parse_point(text);
}

bool wants_random(const std::string& text) { return text == "random"; }

ProjPoint random_off_quadric(const QuadForm& f, Rng& rng, int retry_limit) {
  for (int attempt = 0; attempt < retry_limit; ++attempt) {
    Vec v(f.size());
    for (auto& x : v) x = TowerScalar(rng.symmetric(5));
    if (!is_zero(v) && !f(v).is_zero()) return ProjPoint(v);
  }
  fail(ErrorCode::retry_limit, "no random point off the quadric found");
}

void print_path_summary(const Config& cfg, std::size_t steps, const Tower& tower) {
  info(cfg) << "steps: " << steps << "\n"
            << "radicands: " << radicand_list(tower).dump() << "\n";
}

// normalize

struct NormalizeArgs {
  std::string form;
  bool hyperbolic = false;
  bool ctsq = false;
  std::string point;
};

int cmd_normalize(const Config& cfg, const NormalizeArgs& args) {
  Tower tower(cfg.tower_limit);
  json doc = read_json(args.form);
  QuadForm f = form_from_json(doc, tower);
  const std::size_t r = rank(f);
  if (r < 3) {
    fail(ErrorCode::rank_too_low,
         "quadric has rank " + std::to_string(r) + ", need at least 3");
  }
  json out;
  if (args.ctsq) {
    ProjPoint x = parse_point(args.point);
    CtsqFrame frame = ctsq_normalize(f, x);
    out = json{{"kind", "ctsq"},
               {"point", vec_to_json(x.coords())},
               {"matrix", matrix_to_json(frame.change.matrix())},
               {"residual", matrix_to_json(frame.residual.matrix())}};
  } else {
    HyperbolicFrame frame = hyperbolic_normalize(f, tower);
    out = json{{"kind", "hyperbolic"},
               {"pairs", frame.pairs},
               {"has_z", frame.has_z},
               {"matrix", matrix_to_json(frame.change.matrix())},
               {"target", matrix_to_json(f.in_coordinates(frame.change).matrix())}};
  }
  out["tower"] = tower_to_json(tower);
  write_output(cfg, out);
  info(cfg) << "radicands: " << radicand_list(tower).dump() << "\n";
  return exit_ok;
}

// connect

struct ConnectArgs {
  std::string kind;
  std::string form;
  std::string pencil;
  std::vector<std::string> lines;
  std::string from;
  std::string to;
};

int cmd_connect(const Config& cfg, const ConnectArgs& args) {
  Rng rng(cfg.seed);
  if (args.kind == "ci") {
    if (args.pencil.empty()) fail(ErrorCode::parse, "connect ci needs --pencil");
    Inputs in = load_inputs(cfg, args.pencil, {args.from, args.to}, args.lines);
    Tower tower = in.tower;
    Pencil pencil = pencil_from_json(in.primary, tower);
    std::vector<Line> lines;
    for (const auto& lj : in.extras) lines.push_back(line_from_json(lj, tower));
    XSearchOptions search;
    search.retry_limit = cfg.retry_limit;
    const LinearSubspace whole = LinearSubspace::whole(pencil.ambient());
    auto pick = [&](const std::string& text, const std::optional<json>& file) {
      return wants_random(text) ? point_on_X(pencil, whole, rng, tower, search)
                                : endpoint(text, file, tower);
    };
    ProjPoint p = pick(args.from, in.points[0]);
    ProjPoint q = pick(args.to, in.points[1]);
    ConnectXOptions opts;
    opts.retry_limit = cfg.retry_limit;
    CiPath path = connect_on_X(pencil, p, q, lines, rng, tower, opts);
    path.seed = cfg.seed;
    write_output(cfg, ci_certificate_json(path));
    std::size_t steps = 0;
    for (const auto& s : path.segments) steps += s.inner.steps.size();
    info(cfg) << "segments: " << path.segments.size() << "\n";
    print_path_summary(cfg, steps, path.tower);
    return exit_ok;
  }

  if (args.form.empty()) fail(ErrorCode::parse, "connect " + args.kind + " needs --form");
  Inputs in = load_inputs(cfg, args.form, {args.from, args.to});
  Tower tower = in.tower;
  QuadForm f = form_from_json(in.primary, tower);
  MovePath path;
  if (args.kind == "complement") {
    auto pick = [&](const std::string& text, const std::optional<json>& file) {
      return wants_random(text) ? random_off_quadric(f, rng, cfg.retry_limit)
                                : endpoint(text, file, tower);
    };
    ProjPoint p = pick(args.from, in.points[0]);
    ProjPoint q = pick(args.to, in.points[1]);
    path = connect_complement(f, p, q, tower);
  } else {
    PointSearchOptions search;
    search.retry_limit = cfg.retry_limit;
    search.accept = [&f](const ProjPoint& x) { return is_smooth_point(f, x); };
    const LinearSubspace whole = LinearSubspace::whole(f.size());
    auto pick = [&](const std::string& text, const std::optional<json>& file) {
      return wants_random(text) ? point_on_quadric(f, whole, rng, tower, search)
                                : endpoint(text, file, tower);
    };
    ProjPoint p = pick(args.from, in.points[0]);
    ProjPoint q = pick(args.to, in.points[1]);
    QuadricSearchOptions opts;
    opts.retry_limit = cfg.retry_limit;
    path = connect_on_quadric(f, p, q, rng, tower, opts);
  }
  path.seed = cfg.seed;
  write_output(cfg, certificate_json(path));
  print_path_summary(cfg, path.steps.size(), path.tower);
  return exit_ok;
}

// verify

struct VerifyArgs {
  std::vector<std::string> certificates;
  std::string form;
  std::string pencil;
  int jobs = 1;
};

json verify_one(const std::string& file, const VerifyArgs& args,
                std::size_t tower_limit) {
  json report{{"file", file}};
  try {
    json doc = read_json(file);
    const bool ci = doc.is_object() && doc.value("kind", "") == "ci";
    VerifyReport r;
    if (ci) {
      if (args.pencil.empty()) fail(ErrorCode::parse, "ci certificates need --pencil");
      Tower t(tower_limit);
      Pencil pencil = pencil_from_json(read_json(args.pencil), t);
      r = verify_ci_certificate(doc, pencil, t);
    } else {
      if (args.form.empty()) fail(ErrorCode::parse, "path certificates need --form");
      Tower t(tower_limit);
      QuadForm f = form_from_json(read_json(args.form), t);
      r = verify_certificate(doc, f, t);
    }
    report["valid"] = r.valid;
    report["message"] = r.message;
    report["steps"] = r.step_count;
    json rads = json::array();
    for (const auto& x : r.radicands) rads.push_back(scalar_to_json(x));
    report["radicands"] = rads;
  } catch (const Error& e) {
    report["valid"] = false;
    report["error"] = error_code_name(e.code());
    report["message"] = e.what();
  }
  return report;
}

int cmd_verify(const Config& cfg, const VerifyArgs& args) {
  std::vector<json> reports(args.certificates.size());
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, args.jobs));
  for (std::size_t start = 0; start < reports.size(); start += jobs) {
    std::vector<std::future<json>> batch;
    for (std::size_t i = start; i < std::min(reports.size(), start + jobs); ++i) {
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                 verify_one, args.certificates[i], std::cref(args),
                                 cfg.tower_limit));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) reports[start + k] = batch[k].get();
  }
  bool all = true;
  bool input_error = false;
  json out = json::array();
  for (auto& r : reports) {
    all = all && r.value("valid", false);
    input_error = input_error || r.contains("error");
    out.push_back(r);
  }
  if (cfg.out.empty() || cfg.out == "-") {
    for (const auto& r : out) std::cout << r.dump() << "\n";
  } else {
    write_output(cfg, out);
  }
  if (all) return exit_ok;
  return input_error ? exit_input : exit_invalid;
}

// audit

struct AuditArgs {
  std::string pencil;
  std::string line;
  int samples = 200;
  bool allow_singular = false;
};

int cmd_audit(const Config& cfg, const AuditArgs& args) {
  Rng rng(cfg.seed);
  std::vector<std::string> extra;
  if (!args.line.empty()) extra.push_back(args.line);
  Inputs in = load_inputs(cfg, args.pencil, {}, extra);
  Tower tower = in.tower;
  Pencil pencil = pencil_from_json(in.primary, tower);
  SmoothnessReport smooth = pencil_smoothness(pencil);
  json report{{"smooth", smooth.smooth}, {"smoothness", smooth.reason}};
  if (!smooth.smooth && !args.allow_singular) {
    write_output(cfg, report);
    fail(ErrorCode::pencil_not_smooth, smooth.reason);
  }
  Line line;
  if (!args.line.empty()) {
    line = line_from_json(in.extras.front(), tower);
  } else {
    XSearchOptions search;
    std::optional<Line> found;
    for (int attempt = 0; attempt < cfg.retry_limit && !found; ++attempt) {
      try {
        found = search_line(pencil, rng, tower, search);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::retry_limit) throw;
      }
    }
    if (!found) fail(ErrorCode::retry_limit, "no line found; supply one with --line");
    line = *found;
  }
  LineChart chart = chart_from_line(pencil, line);
  const std::size_t r = rank(chart.image);
  report["line"] = line_to_json(line);
  report["image_rank"] = r;
  report["image_rank_ok"] = r >= 3 && r <= 4;

  Tower inner_tower = tower;
  NavigationFrame nav = navigation_frame(chart.image, inner_tower);
  json audits = json::array();
  bool audits_ok = true;
  for (const Chart& inner : nav.charts) {
    DegreeAudit a = polar_degree_audit(chart, inner);
    audits_ok = audits_ok && a.ok;
    audits.push_back(json{{"chart", chart_kind_name(inner.descriptor().kind)},
                          {"index", inner.descriptor().index},
                          {"ok", a.ok},
                          {"degrees", a.degrees},
                          {"total", a.total},
                          {"message", a.message}});
  }
  report["degree_audits"] = audits;

  int tested = 0;
  int round_trip_failures = 0;
  const std::size_t m = chart.image.size();
  for (int attempt = 0; tested < args.samples && attempt < 20 * args.samples; ++attempt) {
    Vec u(m);
    for (auto& x : u) x = TowerScalar(rng.symmetric(5));
    if (is_zero(u)) continue;
    auto x = chart.inverse(ProjPoint(u));
    if (!x) continue;
    ++tested;
    if (!pencil.contains(x->coords()) || chart.forward(*x) != ProjPoint(u)) {
      ++round_trip_failures;
    }
  }
  report["round_trip"] = json{{"samples", tested}, {"failures", round_trip_failures}};
  report["tower"] = tower_to_json(tower);
  write_output(cfg, report);
  const bool ok = r >= 3 && r <= 4 && audits_ok && round_trip_failures == 0;
  info(cfg) << "image rank: " << r << "\n"
            << "degrees: " << (audits_ok ? "(1, 2), total 3" : "audit failed") << "\n"
            << "round trip: " << tested - round_trip_failures << "/" << tested << "\n";
  if (!smooth.smooth) {
    info(cfg) << "warning: pencil is not smooth (" << smooth.reason << ")\n";
  }
  return ok ? exit_ok : exit_invalid;
}

// eacx-build

int cmd_eacx(const Config& cfg, const std::vector<std::string>& values) {
  std::vector<TowerScalar> lambdas;
  for (const auto& v : values) lambdas.push_back(TowerScalar::parse_rational(v));
  Pencil pencil = eacx_build(lambdas);
  SmoothnessReport smooth = pencil_smoothness(pencil);
  if (!smooth.smooth) fail(ErrorCode::pencil_not_smooth, smooth.reason);
  write_output(cfg, pencil_to_json(pencil, Tower()));
  return exit_ok;
}

// find-line

struct FindLineArgs {
  std::string pencil;
  std::string point;
};

int cmd_find_line(const Config& cfg, const FindLineArgs& args) {
  Rng rng(cfg.seed);
  Inputs in = load_inputs(cfg, args.pencil, {args.point});
  Tower tower = in.tower;
  Pencil pencil = pencil_from_json(in.primary, tower);
  XSearchOptions search;
  search.retry_limit = cfg.retry_limit;
  Line line;
  if (!args.point.empty()) {
    line = find_line_through(pencil, endpoint(args.point, in.points[0], tower), rng,
                             tower, search);
  } else {
    std::optional<Line> found;
    XSearchOptions inner;
    inner.retry_limit = 16;
    inner.rational_attempts = 2;
    for (int attempt = 0; attempt < cfg.retry_limit && !found; ++attempt) {
      try {
        found = search_line(pencil, rng, tower, inner);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::retry_limit) throw;
      }
    }
    if (!found) fail(ErrorCode::retry_limit, "no line found after " +
                                                 std::to_string(cfg.retry_limit) +
                                                 " attempts");
    line = *found;
  }
  json out = line_to_json(line);
  out["tower"] = tower_to_json(tower);
  write_output(cfg, out);
  info(cfg) << "radicands: " << radicand_list(tower).dump() << "\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact certificates of connectivity by additive-group fiber moves"};
  app.require_subcommand(1);
  Config cfg;
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--retry-limit", cfg.retry_limit, "Attempts for randomized searches")
      ->capture_default_str();
  app.add_option("--tower-limit", cfg.tower_limit, "Maximum number of adjoined roots")
      ->capture_default_str();
  app.add_option("--out", cfg.out, "Output file (default: stdout)");

  NormalizeArgs norm;
  auto* normalize = app.add_subcommand("normalize", "Normal form of a quadric");
  normalize->add_option("form", norm.form, "Form file")->required();
  auto* hyp = normalize->add_flag("--hyperbolic", norm.hyperbolic, "x1*y1 + ... (+ z^2)");
  auto* ctsq = normalize->add_flag("--ctsq", norm.ctsq, "x0*x1 + g at a smooth point");
  hyp->excludes(ctsq);
  normalize->add_option("--point", norm.point, "Smooth point for --ctsq, e.g. 0,1,0")
      ->needs(ctsq);

  ConnectArgs conn;
  auto* connect = app.add_subcommand("connect", "Connect two points by fiber moves");
  connect->add_option("kind", conn.kind, "complement, quadric or ci")
      ->required()
      ->check(CLI::IsMember({"complement", "quadric", "ci"}));
  connect->add_option("--form", conn.form, "Form file");
  connect->add_option("--pencil", conn.pencil, "Pencil file (ci)");
  connect->add_option("--line", conn.lines, "Line file (ci, repeatable)");
  connect->add_option("--from", conn.from, "Start: a,b,c | @point.json | random")
      ->required();
  connect->add_option("--to", conn.to, "End: a,b,c | @point.json | random")->required();

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Replay certificates");
  verify->add_option("certificates", ver.certificates, "Certificate files")->required();
  verify->add_option("--form", ver.form, "Form file");
  verify->add_option("--pencil", ver.pencil, "Pencil file (ci certificates)");
  verify->add_option("--jobs", ver.jobs, "Certificates verified in parallel")
      ->capture_default_str();

  AuditArgs aud;
  auto* audit = app.add_subcommand("audit", "Line chart and degree audit of a pencil");
  audit->add_option("--pencil", aud.pencil, "Pencil file")->required();
  audit->add_option("--line", aud.line, "Line file (default: search one)");
  audit->add_option("--samples", aud.samples, "Round-trip samples")->capture_default_str();
  audit->add_flag("--allow-singular", aud.allow_singular,
                  "Audit the chart even if the pencil is not smooth");

  std::vector<std::string> lambdas;
  auto* eacx = app.add_subcommand("eacx-build", "Diagonal pencil sum x^2, sum l x^2");
  eacx->add_option("lambdas", lambdas, "Pairwise distinct rationals")->required();

  FindLineArgs fl;
  auto* find_line = app.add_subcommand("find-line", "A line contained in X");
  find_line->add_option("--pencil", fl.pencil, "Pencil file")->required();
  find_line->add_option("--point", fl.point, "Point of X: a,b,c | @point.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_input;
  }

  try {
    if (*normalize) return cmd_normalize(cfg, norm);
    if (*connect) return cmd_connect(cfg, conn);
    if (*verify) return cmd_verify(cfg, ver);
    if (*audit) return cmd_audit(cfg, aud);
    if (*eacx) return cmd_eacx(cfg, lambdas);
    if (*find_line) return cmd_find_line(cfg, fl);
  } catch (const Error& e) {
    std::cerr << "error (" << error_code_name(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error (parse): " << e.what() << "\n";
    return exit_input;
  }
  return exit_input;
}
