#include "lipflow/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include <toml.hpp>

namespace lipflow::config {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw InvalidArgument("config: " + where + ": " + msg);
}

void check_keys(const toml::table& t, const std::string& where, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, node] : t) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key.str() == a;
    if (!ok) fail(where, "unknown key '" + std::string(key.str()) + "'");
  }
}

double get_double(const toml::table& t, std::string_view key, double fallback, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  if (const auto v = node->value<double>()) return *v;
  if (const auto s = node->value<std::string>()) {
    if (*s == "inf") return std::numeric_limits<double>::infinity();
  }
  fail(where, "'" + std::string(key) + "' must be a number");
}

long long get_int(const toml::table& t, std::string_view key, long long fallback, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  if (!node->is_integer()) fail(where, "'" + std::string(key) + "' must be an integer");
  return node->value<long long>().value();
}

std::uint64_t get_seed(const toml::table& t, std::uint64_t fallback, const std::string& where) {
  const long long v = get_int(t, "seed", static_cast<long long>(fallback), where);
  if (v < 0) fail(where, "'seed' must be >= 0");
  return static_cast<std::uint64_t>(v);
}

bool get_bool(const toml::table& t, std::string_view key, bool fallback, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  if (!node->is_boolean()) fail(where, "'" + std::string(key) + "' must be a boolean");
  return node->value<bool>().value();
}

std::string get_string(const toml::table& t, std::string_view key, std::string fallback, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  if (!node->is_string()) fail(where, "'" + std::string(key) + "' must be a string");
  return node->value<std::string>().value();
}

std::vector<double> number_list(const toml::node& node, const std::string& where, std::string_view key) {
  const auto* arr = node.as_array();
  if (!arr) fail(where, "'" + std::string(key) + "' must be an array");
  std::vector<double> out;
  for (const auto& e : *arr) {
    if (const auto v = e.value<double>())
      out.push_back(*v);
    else if (const auto s = e.value<std::string>(); s && *s == "inf")
      out.push_back(std::numeric_limits<double>::infinity());
    else
      fail(where, "'" + std::string(key) + "' must contain numbers");
  }
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<Vector> point_list(const toml::node& node, const std::string& where, std::string_view key) {
  const auto* arr = node.as_array();
  if (!arr) fail(where, "'" + std::string(key) + "' must be an array of points");
  std::vector<Vector> out;
  for (const auto& e : *arr) out.push_back(to_vector(number_list(e, where, key)));
  return out;
}

datasets::DistSpec parse_dist(const toml::table& t, const std::string& where, Eigen::Index* n_out) {
  check_keys(t, where, {"kind", "seed", "center", "dim", "scale", "sigma", "centers", "weights", "df", "beta", "level",
                        "box", "noise", "ambient_dim", "offset", "ortho_sigma", "rotate", "inner", "n"});
  datasets::DistSpec s;
  const std::string kind = get_string(t, "kind", "", where);
  if (kind.empty()) fail(where, "missing 'kind'");
  s.kind = datasets::dist_kind_from_string(kind);
  s.seed = get_seed(t, 0, where);
  if (const auto* c = t.get("center")) s.center = to_vector(number_list(*c, where, "center"));
  s.dim = static_cast<int>(get_int(t, "dim", s.center.size() ? s.center.size() : 2, where));
  s.scale = get_double(t, "scale", get_double(t, "sigma", 1.0, where), where);
  if (const auto* c = t.get("centers")) s.centers = point_list(*c, where, "centers");
  if (const auto* w = t.get("weights")) s.weights = number_list(*w, where, "weights");
  s.df = get_double(t, "df", s.df, where);
  s.beta = get_double(t, "beta", s.beta, where);
  s.level = static_cast<int>(get_int(t, "level", s.level, where));
  if (const auto* b = t.get("box")) {
    const auto v = number_list(*b, where, "box");
    if (v.size() != 2) fail(where, "'box' must be [lo, hi]");
    s.box = {v[0], v[1]};
  }
  s.noise = get_double(t, "noise", 0.0, where);
  s.ambient_dim = static_cast<int>(get_int(t, "ambient_dim", 0, where));
  s.offset = get_double(t, "offset", 0.0, where);
  s.ortho_sigma = get_double(t, "ortho_sigma", 0.0, where);
  s.rotate = get_bool(t, "rotate", false, where);
  if (const auto* inner = t.get("inner")) {
    const auto* it = inner->as_table();
    if (!it) fail(where, "'inner' must be a table");
    s.inner = std::make_shared<datasets::DistSpec>(parse_dist(*it, where + ".inner", nullptr));
  }
  const long long n = get_int(t, "n", 0, where);
  if (n < 0) fail(where, "'n' must be >= 0");
  if (n_out) *n_out = n;
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    fail(where, e.what());
  }
  return s;
}

SideConfig parse_side(const toml::table& t, const std::string& where, const std::filesystem::path& base) {
  SideConfig side;
  if (const auto* csv = t.get("csv")) {
    if (t.contains("kind")) fail(where, "give either 'csv' or 'kind', not both");
    check_keys(t, where, {"csv"});
    const auto p = csv->value<std::string>();
    if (!p) fail(where, "'csv' must be a string");
    side.csv = std::filesystem::path(*p);
    if (side.csv.is_relative() && !base.empty()) side.csv = base / side.csv;
    return side;
  }
  side.dist = parse_dist(t, where, &side.n);
  return side;
}

void parse_transport(const toml::table& t, transport::TransportConfig& c, bool replay) {
  const std::string w = "[transport]";
  check_keys(t, w, {"dt", "n_max", "m_max", "L", "f", "alpha", "nu_mode", "integrator", "warm_start",
                    "checkpoint_every", "stop_ke", "seed", "widths", "activation", "smooth_eps", "sn_method",
                    "sn_power_iters", "lr", "beta1", "beta2", "adam_eps"});
  c.lipschitz = get_double(t, "L", 1.0, w);
  c.dt = get_double(t, "dt", std::isfinite(c.lipschitz) ? 0.2 / c.lipschitz : 0.2, w);
  c.n_max = static_cast<int>(get_int(t, "n_max", c.n_max, w));
  c.m_max = static_cast<int>(get_int(t, "m_max", c.m_max, w));
  c.fdiv = fdiv::parse_spec(get_string(t, "f", "kl", w), get_double(t, "alpha", 2.0, w),
                            get_string(t, "nu_mode", "", w));
  c.integrator = transport::integrator_from_string(get_string(t, "integrator", "euler", w));
  c.warm_start = get_bool(t, "warm_start", true, w);
  const long long every = get_int(t, "checkpoint_every", replay ? 1 : 100, w);
  if (replay && every != 1) fail(w, "replay requires checkpoint_every = 1");
  c.checkpoint_every = static_cast<int>(every);
  c.stop_ke = get_double(t, "stop_ke", -1.0, w);
  c.seed = get_seed(t, 0, w);
  if (const auto* wd = t.get("widths")) {
    c.widths.clear();
    for (double v : number_list(*wd, w, "widths")) {
      if (v < 1 || v != std::floor(v)) fail(w, "'widths' must be positive integers");
      c.widths.push_back(static_cast<int>(v));
    }
  }
  const std::string act = get_string(t, "activation", "relu", w);
  if (act == "relu")
    c.activation = netdisc::Activation::relu;
  else if (act == "smooth_relu")
    c.activation = netdisc::Activation::smooth_relu;
  else
    fail(w, "unknown activation '" + act + "'");
  c.smooth_eps = get_double(t, "smooth_eps", c.smooth_eps, w);
  const std::string sn = get_string(t, "sn_method", "exact", w);
  if (sn == "exact")
    c.sn_method = netdisc::SpectralMethod::exact;
  else if (sn == "power")
    c.sn_method = netdisc::SpectralMethod::power;
  else
    fail(w, "unknown sn_method '" + sn + "'");
  c.sn_power_iters = static_cast<int>(get_int(t, "sn_power_iters", c.sn_power_iters, w));
  c.adam.lr = get_double(t, "lr", c.adam.lr, w);
  c.adam.beta1 = get_double(t, "beta1", c.adam.beta1, w);
  c.adam.beta2 = get_double(t, "beta2", c.adam.beta2, w);
  c.adam.eps = get_double(t, "adam_eps", c.adam.eps, w);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    fail(w, e.what());
  }
}

const toml::table* subtable(const toml::table& root, std::string_view key) {
  const auto* node = root.get(key);
  if (!node) return nullptr;
  const auto* t = node->as_table();
  if (!t) fail("[" + std::string(key) + "]", "must be a table");
  return t;
}

toml::table parse_toml(std::string_view text, const std::string& origin) {
  try {
    return toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << origin << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

ParticleSet SideConfig::load(Role role) const {
  ParticleSet p;
  if (dist) {
    const Eigen::Index count = n > 0 ? n : default_count(*dist);
    p = datasets::sample(*dist, count);
  } else {
    p = datasets::load_csv(csv);
  }
  p.role = role;
  return p;
}

Eigen::Index default_count(const datasets::DistSpec& spec) {
  if (spec.kind == datasets::DistKind::sierpinski) {
    Eigen::Index c = 1;
    for (int i = 0; i < spec.level; ++i) c *= 8;
    return c;
  }
  return 200;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  const toml::table root = parse_toml(text, "config");
  check_keys(root, "top level", {"name", "source", "target", "transport", "latent", "output", "eval", "sweep"});
  ExperimentConfig cfg;
  cfg.name = get_string(root, "name", cfg.name, "top level");

  const auto* src = subtable(root, "source");
  const auto* tgt = subtable(root, "target");
  if (!src) fail("[source]", "missing table");
  if (!tgt) fail("[target]", "missing table");
  cfg.source = parse_side(*src, "[source]", base_dir);
  cfg.target = parse_side(*tgt, "[target]", base_dir);

  if (const auto* out = subtable(root, "output")) {
    check_keys(*out, "[output]", {"dir", "snapshot_every", "replay"});
    cfg.output.dir = get_string(*out, "dir", cfg.output.dir.string(), "[output]");
    cfg.output.snapshot_every = static_cast<int>(get_int(*out, "snapshot_every", 0, "[output]"));
    if (cfg.output.snapshot_every < 0) fail("[output]", "'snapshot_every' must be >= 0");
    cfg.output.replay = get_bool(*out, "replay", false, "[output]");
  }

  if (const auto* tr = subtable(root, "transport"))
    parse_transport(*tr, cfg.transport, cfg.output.replay);
  else
    parse_transport(toml::table{}, cfg.transport, cfg.output.replay);

  if (const auto* lat = subtable(root, "latent")) {
    check_keys(*lat, "[latent]", {"dim", "dpi_inner_steps"});
    cfg.latent.dim = static_cast<int>(get_int(*lat, "dim", 0, "[latent]"));
    cfg.latent.dpi_inner_steps = static_cast<int>(get_int(*lat, "dpi_inner_steps", 0, "[latent]"));
    if (cfg.latent.dim < 0 || cfg.latent.dpi_inner_steps < 0) fail("[latent]", "values must be >= 0");
  }

  if (const auto* ev = subtable(root, "eval")) {
    const std::string w = "[eval]";
    check_keys(*ev, w, {"sinkhorn", "epsilon", "max_iters", "tolerance", "debiased", "mode_centers", "mode_radius",
                        "carpet_level", "carpet_box"});
    cfg.eval.sinkhorn = get_bool(*ev, "sinkhorn", true, w);
    cfg.eval.sinkhorn_cfg.epsilon = get_double(*ev, "epsilon", -1.0, w);
    cfg.eval.sinkhorn_cfg.max_iters = static_cast<int>(get_int(*ev, "max_iters", cfg.eval.sinkhorn_cfg.max_iters, w));
    cfg.eval.sinkhorn_cfg.tolerance = get_double(*ev, "tolerance", cfg.eval.sinkhorn_cfg.tolerance, w);
    cfg.eval.sinkhorn_cfg.debiased = get_bool(*ev, "debiased", true, w);
    if (const auto* mc = ev->get("mode_centers")) cfg.eval.mode_centers = point_list(*mc, w, "mode_centers");
    cfg.eval.mode_radius = get_double(*ev, "mode_radius", cfg.eval.mode_radius, w);
    cfg.eval.carpet_level = static_cast<int>(get_int(*ev, "carpet_level", 0, w));
    if (const auto* b = ev->get("carpet_box")) {
      const auto v = number_list(*b, w, "carpet_box");
      if (v.size() != 2) fail(w, "'carpet_box' must be [lo, hi]");
      cfg.eval.carpet_box = {v[0], v[1]};
    }
  }

  if (const auto* sw = subtable(root, "sweep")) {
    const std::string w = "[sweep]";
    check_keys(*sw, w, {"L", "dt", "f", "alpha", "threads"});
    if (const auto* n = sw->get("L")) cfg.sweep.lipschitz = number_list(*n, w, "L");
    if (const auto* n = sw->get("dt")) cfg.sweep.dt = number_list(*n, w, "dt");
    if (const auto* n = sw->get("alpha")) cfg.sweep.alpha = number_list(*n, w, "alpha");
    if (const auto* n = sw->get("f")) {
      const auto* arr = n->as_array();
      if (!arr) fail(w, "'f' must be an array of strings");
      for (const auto& e : *arr) {
        const auto s = e.value<std::string>();
        if (!s) fail(w, "'f' must be an array of strings");
        cfg.sweep.f.push_back(*s);
      }
    }
    cfg.sweep.threads = static_cast<int>(get_int(*sw, "threads", 0, w));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::pair<datasets::DistSpec, Eigen::Index> parse_dist_text(std::string_view text) {
  std::string body(text);
  const auto first = body.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && body[first] == '{') body = "spec = " + body;
  const toml::table root = parse_toml(body, "spec");
  const toml::table* t = &root;
  if (root.size() == 1 && root.contains("spec") && root.get("spec")->is_table()) t = root.get("spec")->as_table();
  Eigen::Index n = 0;
  datasets::DistSpec spec = parse_dist(*t, "spec", &n);
  return {spec, n};
}

}  // namespace lipflow::config
