#include "pjf/scenario_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace pjf {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorCode::InvalidConfig, what); }

const json& need(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) bad(ctx + ": missing '" + key + "'");
  return j.at(key);
}

double num(const json& j, const std::string& ctx) {
  if (!j.is_number()) bad(ctx + ": expected a number");
  return j.get<double>();
}

Vec vec(const json& j, const std::string& ctx) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) bad(ctx + ": expected an array of numbers");
  Vec out;
  for (const auto& e : j) out.push_back(num(e, ctx));
  return out;
}

Matrix mat(const json& j, const std::string& ctx) {
  if (j.is_number()) return Matrix::scalar(j.get<double>());
  if (!j.is_array()) bad(ctx + ": expected a matrix (array of rows)");
  if (j.empty()) return Matrix();
  Matrix m(j.size(), j.front().is_array() ? j.front().size() : 1);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const Vec row = vec(j[r], ctx);
    if (row.size() != m.cols) bad(ctx + ": ragged matrix");
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = row[c];
  }
  return m;
}

std::string kind_of(const json& j, const std::string& ctx) {
  const auto& k = need(j, "kind", ctx);
  if (!k.is_string()) bad(ctx + ": 'kind' must be a string");
  return k.get<std::string>();
}

[[noreturn]] void unknown(const std::string& ctx, const std::string& kind) {
  fail(ErrorCode::UnknownFunctionDescriptor, ctx + ": unknown kind '" + kind + "'");
}

Vec opt_vec(const json& j, const char* key, Vec fallback, const std::string& ctx) {
  return j.contains(key) ? vec(j.at(key), ctx + "." + key) : fallback;
}

ComponentTransform parse_transform(const json& j, const std::string& ctx) {
  ComponentTransform t;
  const auto kind = kind_of(j, ctx);
  if (kind == "identity") {
    t.kind = ComponentTransform::Kind::Identity;
  } else if (kind == "polynomial") {
    t.kind = ComponentTransform::Kind::Polynomial;
    t.coeffs = vec(need(j, "coeffs", ctx), ctx + ".coeffs");
  } else if (kind == "exponential") {
    t.kind = ComponentTransform::Kind::Exponential;
    t.rate = j.contains("rate") ? num(j.at("rate"), ctx + ".rate") : 1.0;
  } else if (kind == "logarithm") {
    t.kind = ComponentTransform::Kind::Logarithm;
  } else {
    unknown(ctx, kind);
  }
  return t;
}

Matrix identity_like(std::size_t m) { return Matrix::identity(m); }

VectorMap parse_drift(const json& j, std::size_t m, const std::string& ctx) {
  VectorMap v;
  const auto kind = kind_of(j, ctx);
  const Vec zero(m, 0.0);
  if (kind == "composed") {
    v.transform = parse_transform(need(j, "transform", ctx), ctx + ".transform");
    v.matrix = mat(need(j, "matrix", ctx), ctx + ".matrix");
    v.offset = opt_vec(j, "offset", zero, ctx);
  } else if (kind == "linear" || kind == "affine") {
    v.matrix = mat(need(j, "matrix", ctx), ctx + ".matrix");
    v.offset = kind == "affine" ? vec(need(j, "offset", ctx), ctx + ".offset") : zero;
  } else if (kind == "constant") {
    v.matrix = Matrix(m, m);
    v.offset = vec(need(j, "value", ctx), ctx + ".value");
  } else if (kind == "polynomial" || kind == "exponential") {
    json t = {{"kind", kind}};
    if (j.contains("coeffs")) t["coeffs"] = j.at("coeffs");
    if (j.contains("rate")) t["rate"] = j.at("rate");
    v.transform = parse_transform(t, ctx);
    v.matrix = j.contains("matrix") ? mat(j.at("matrix"), ctx + ".matrix") : identity_like(m);
    v.offset = opt_vec(j, "offset", zero, ctx);
  } else {
    unknown(ctx, kind);
  }
  return v;
}

MatrixField parse_field(const json& j, std::size_t m, const std::string& ctx) {
  MatrixField f;
  const auto kind = kind_of(j, ctx);
  if (kind == "composed") {
    f.constant = mat(need(j, "constant", ctx), ctx + ".constant");
    f.diagonal = opt_vec(j, "diagonal", {}, ctx);
    if (j.contains("transform")) f.transform = parse_transform(j.at("transform"), ctx + ".transform");
  } else if (kind == "constant") {
    f.constant = mat(need(j, "value", ctx), ctx + ".value");
  } else if (kind == "multiplicative") {
    f.constant = Matrix(m, m);
    f.diagonal = vec(need(j, "beta", ctx), ctx + ".beta");
  } else {
    unknown(ctx, kind);
  }
  return f;
}

JumpMap parse_jump(const json& j, std::size_t m, const std::string& ctx) {
  JumpMap c;
  const auto kind = kind_of(j, ctx);
  if (kind == "none") {
    c.kind = JumpMap::Kind::None;
  } else if (kind == "linear") {
    c.kind = JumpMap::Kind::Linear;
    c.loading = parse_field(need(j, "loading", ctx), m, ctx + ".loading");
  } else if (kind == "additive") {
    c.kind = JumpMap::Kind::Linear;
    c.loading.constant = identity_like(m);
  } else if (kind == "multiplicative") {
    // x + x * xi
    c.kind = JumpMap::Kind::Linear;
    c.loading.constant = Matrix(m, m);
    c.loading.diagonal = Vec(m, 1.0);
  } else if (kind == "exp_multiplicative") {
    c.kind = JumpMap::Kind::ExpMultiplicative;
  } else if (kind == "log_loss") {
    c.kind = JumpMap::Kind::LogLoss;
    c.beta = num(need(j, "beta", ctx), ctx + ".beta");
    c.y_bar = num(need(j, "y_bar", ctx), ctx + ".y_bar");
  } else {
    unknown(ctx, kind);
  }
  return c;
}

ObservationMap parse_observation(const json& j, std::size_t n, const std::string& ctx) {
  ObservationMap o;
  const auto kind = kind_of(j, ctx);
  if (kind == "composed" || kind == "linear" || kind == "log_linear") {
    if (kind == "composed") o.transform = parse_transform(need(j, "transform", ctx), ctx + ".transform");
    if (kind == "log_linear") o.transform.kind = ComponentTransform::Kind::Logarithm;
    o.a = mat(need(j, "A", ctx), ctx + ".A");
    o.c = j.contains("C") ? mat(j.at("C"), ctx + ".C") : Matrix(n, n);
    o.offset = opt_vec(j, "offset", Vec(n, 0.0), ctx);
  } else {
    unknown(ctx, kind);
  }
  return o;
}

JumpLaw parse_law(const json& j, const std::string& ctx) {
  JumpLaw l;
  const auto kind = kind_of(j, ctx);
  l.xi_mean = opt_vec(j, "xi_mean", {}, ctx);
  if (j.contains("match_tol")) l.match_tol = num(j.at("match_tol"), ctx + ".match_tol");
  auto atoms = [&](bool with_eta) {
    const auto& arr = need(j, "atoms", ctx);
    if (!arr.is_array()) bad(ctx + ".atoms: expected an array");
    for (const auto& a : arr) {
      JumpLaw::Atom atom;
      atom.xi = vec(need(a, "xi", ctx + ".atoms"), ctx + ".atoms.xi");
      if (with_eta) atom.eta = vec(need(a, "eta", ctx + ".atoms"), ctx + ".atoms.eta");
      atom.prob = num(need(a, "prob", ctx + ".atoms"), ctx + ".atoms.prob");
      l.atoms.push_back(std::move(atom));
    }
  };
  if (kind == "gaussian_product") {
    l.kind = JumpLaw::Kind::GaussianProduct;
    l.q = mat(need(j, "Q", ctx), ctx + ".Q");
    l.r = mat(need(j, "R", ctx), ctx + ".R");
  } else if (kind == "gaussian_joint") {
    l.kind = JumpLaw::Kind::GaussianJoint;
    l.joint = mat(need(j, "cov", ctx), ctx + ".cov");
  } else if (kind == "degenerate_xi_zero") {
    l.kind = JumpLaw::Kind::DegenerateXiZero;
    l.r = mat(need(j, "R", ctx), ctx + ".R");
  } else if (kind == "discrete") {
    l.kind = JumpLaw::Kind::Discrete;
    atoms(true);
  } else if (kind == "discrete_xi_gaussian_eta") {
    l.kind = JumpLaw::Kind::DiscreteXiGaussianEta;
    l.r = mat(need(j, "R", ctx), ctx + ".R");
    atoms(false);
  } else {
    fail(ErrorCode::InvalidConfig, ctx + ": unknown jump law kind '" + kind + "'");
  }
  return l;
}

Schedule parse_schedule(const json& j) {
  Schedule s;
  const auto kind = kind_of(j, "schedule");
  if (kind == "deterministic") {
    s.kind = Schedule::Kind::Deterministic;
    s.times = vec(need(j, "times", "schedule"), "schedule.times");
  } else if (kind == "threshold") {
    s.kind = Schedule::Kind::Threshold;
    s.grid = vec(need(j, "grid", "schedule"), "schedule.grid");
    s.thresholds = vec(need(j, "thresholds", "schedule"), "schedule.thresholds");
  } else {
    fail(ErrorCode::InvalidSchedule, "schedule: unknown kind '" + kind + "'");
  }
  return s;
}

std::size_t count(const json& j, const std::string& ctx) {
  if (!j.is_number_integer() || j.get<long long>() < 0) bad(ctx + ": expected a nonnegative integer");
  return j.get<std::size_t>();
}

FilterSettings parse_filter(const json& j) {
  FilterSettings f;
  if (!j.is_object()) bad("filter: expected an object");
  if (j.contains("particles")) f.particles = count(j.at("particles"), "filter.particles");
  if (j.contains("resample_threshold")) f.resample_threshold = num(j.at("resample_threshold"), "filter.resample_threshold");
  if (j.contains("report_every")) f.report_every = num(j.at("report_every"), "filter.report_every");
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (g.contains("nodes")) f.grid.nodes = count(g.at("nodes"), "filter.grid.nodes");
    if (g.contains("lo") && !g.at("lo").is_null()) f.grid.lo = num(g.at("lo"), "filter.grid.lo");
    if (g.contains("hi") && !g.at("hi").is_null()) f.grid.hi = num(g.at("hi"), "filter.grid.hi");
    if (g.contains("sd_span")) f.grid.sd_span = num(g.at("sd_span"), "filter.grid.sd_span");
    if (g.contains("xi_points")) f.grid.xi_points = count(g.at("xi_points"), "filter.grid.xi_points");
  }
  return f;
}

// ---------------------------------------------------------------------------

json to_j(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_j(const Vec& v) {
  json a = json::array();
  for (double d : v) a.push_back(d);
  return a;
}

json to_j(const ComponentTransform& t) {
  switch (t.kind) {
    case ComponentTransform::Kind::Identity: return {{"kind", "identity"}};
    case ComponentTransform::Kind::Polynomial: return {{"kind", "polynomial"}, {"coeffs", to_j(t.coeffs)}};
    case ComponentTransform::Kind::Exponential: return {{"kind", "exponential"}, {"rate", t.rate}};
    case ComponentTransform::Kind::Logarithm: return {{"kind", "logarithm"}};
  }
  return {};
}

json to_j(const MatrixField& f) {
  return {{"kind", "composed"}, {"constant", to_j(f.constant)}, {"diagonal", to_j(f.diagonal)},
          {"transform", to_j(f.transform)}};
}

json to_j(const JumpMap& c) {
  switch (c.kind) {
    case JumpMap::Kind::None: return {{"kind", "none"}};
    case JumpMap::Kind::Linear: return {{"kind", "linear"}, {"loading", to_j(c.loading)}};
    case JumpMap::Kind::ExpMultiplicative: return {{"kind", "exp_multiplicative"}};
    case JumpMap::Kind::LogLoss: return {{"kind", "log_loss"}, {"beta", c.beta}, {"y_bar", c.y_bar}};
  }
  return {};
}

json to_j(const JumpLaw& l) {
  json j;
  auto atoms = [&](bool with_eta) {
    json arr = json::array();
    for (const auto& a : l.atoms) {
      json e = {{"xi", to_j(a.xi)}};
      if (with_eta) e["eta"] = to_j(a.eta);
      e["prob"] = a.prob;
      arr.push_back(std::move(e));
    }
    return arr;
  };
  switch (l.kind) {
    case JumpLaw::Kind::GaussianProduct:
      j = {{"kind", "gaussian_product"}, {"Q", to_j(l.q)}, {"R", to_j(l.r)}};
      break;
    case JumpLaw::Kind::GaussianJoint: j = {{"kind", "gaussian_joint"}, {"cov", to_j(l.joint)}}; break;
    case JumpLaw::Kind::DegenerateXiZero: j = {{"kind", "degenerate_xi_zero"}, {"R", to_j(l.r)}}; break;
    case JumpLaw::Kind::Discrete: j = {{"kind", "discrete"}, {"atoms", atoms(true)}}; break;
    case JumpLaw::Kind::DiscreteXiGaussianEta:
      j = {{"kind", "discrete_xi_gaussian_eta"}, {"R", to_j(l.r)}, {"atoms", atoms(false)}};
      break;
  }
  j["xi_mean"] = to_j(l.xi_mean);
  j["match_tol"] = l.match_tol;
  return j;
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) bad("scenario must be a JSON object");
  try {
    ScenarioConfig c;
    if (root.contains("preset")) {
      const auto name = root.at("preset").get<std::string>();
      const auto p = preset_from_name(name);
      if (!p) bad("unknown preset tag '" + name + "'");
      c.preset = *p;
    }
    c.horizon = num(need(root, "horizon", "scenario"), "horizon");
    c.dt = num(need(root, "dt", "scenario"), "dt");
    if (root.contains("seed")) {
      const auto& s = root.at("seed");
      if (!s.is_number_integer()) bad("seed must be an integer");
      c.seed = s.is_number_unsigned() ? s.get<std::uint64_t>() : static_cast<std::uint64_t>(s.get<std::int64_t>());
    }
    const auto& m = need(root, "model", "scenario");
    c.model.m = count(need(m, "m", "model"), "model.m");
    c.model.n = count(need(m, "n", "model"), "model.n");
    c.model.x0 = vec(need(m, "x0", "model"), "model.x0");
    c.model.drift = parse_drift(need(m, "drift", "model"), c.model.m, "model.drift");
    c.model.diffusion = parse_field(need(m, "diffusion", "model"), c.model.m, "model.diffusion");
    c.model.jump = m.contains("jump") ? parse_jump(m.at("jump"), c.model.m, "model.jump") : JumpMap{};
    c.model.observation = parse_observation(need(m, "observation", "model"), c.model.n, "model.observation");
    c.model.jump_law = parse_law(need(m, "jump_law", "model"), "model.jump_law");
    c.schedule = parse_schedule(need(root, "schedule", "scenario"));
    if (root.contains("filter")) c.filter = parse_filter(root.at("filter"));
    return c;
  } catch (const json::exception& e) {
    bad(std::string("malformed scenario: ") + e.what());
  }
}

std::string scenario_to_json(const ScenarioConfig& c) {
  const auto& s = c.model;
  json model = {
      {"m", s.m},
      {"n", s.n},
      {"x0", to_j(s.x0)},
      {"drift",
       {{"kind", "composed"}, {"transform", to_j(s.drift.transform)}, {"matrix", to_j(s.drift.matrix)},
        {"offset", to_j(s.drift.offset)}}},
      {"diffusion", to_j(s.diffusion)},
      {"jump", to_j(s.jump)},
      {"observation",
       {{"kind", "composed"}, {"transform", to_j(s.observation.transform)}, {"A", to_j(s.observation.a)},
        {"C", to_j(s.observation.c)}, {"offset", to_j(s.observation.offset)}}},
      {"jump_law", to_j(s.jump_law)},
  };
  json schedule;
  if (c.schedule.kind == Schedule::Kind::Deterministic)
    schedule = {{"kind", "deterministic"}, {"times", to_j(c.schedule.times)}};
  else
    schedule = {{"kind", "threshold"}, {"grid", to_j(c.schedule.grid)}, {"thresholds", to_j(c.schedule.thresholds)}};
  const auto& g = c.filter.grid;
  json grid = {{"nodes", g.nodes},
               {"lo", g.lo ? json(*g.lo) : json(nullptr)},
               {"hi", g.hi ? json(*g.hi) : json(nullptr)},
               {"sd_span", g.sd_span},
               {"xi_points", g.xi_points}};
  json root = {
      {"preset", std::string(preset_name(c.preset))},
      {"horizon", c.horizon},
      {"dt", c.dt},
      {"seed", c.seed},
      {"model", std::move(model)},
      {"schedule", std::move(schedule)},
      {"filter",
       {{"particles", c.filter.particles},
        {"resample_threshold", c.filter.resample_threshold},
        {"report_every", c.filter.report_every},
        {"grid", std::move(grid)}}},
  };
  return root.dump(2) + "\n";
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pjf
