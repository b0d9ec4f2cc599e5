#include "lichlab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lichlab {

namespace {

struct RawConfig {
  // section -> key -> (value, line, col-of-value)
  std::map<std::string, std::map<std::string, std::tuple<std::string, int, int>>> kv;
  bool has(const std::string& sec) const { return kv.count(sec) > 0; }
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigParseError("unterminated section header", lineno, (int)line.size());
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigParseError("empty section name", lineno, 1);
      raw.kv[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigParseError("expected 'key = value'", lineno, 1);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigParseError("empty key", lineno, 1);
    if (section.empty()) throw ConfigParseError("key outside any section", lineno, 1);
    raw.kv[section][key] = {val, lineno, (int)eq + 2};
  }
  return raw;
}

struct Fetch {
  const RawConfig& raw;
  std::string get(const std::string& sec, const std::string& key, const std::string& dflt,
                  bool required = false) const {
    auto si = raw.kv.find(sec);
    if (si == raw.kv.end()) {
      if (required) throw ConfigParseError("missing section [" + sec + "]", 1, 1);
      return dflt;
    }
    auto ki = si->second.find(key);
    if (ki == si->second.end()) {
      if (required) throw ConfigParseError("missing key '" + key + "' in [" + sec + "]", 1, 1);
      return dflt;
    }
    return std::get<0>(ki->second);
  }
  double num(const std::string& sec, const std::string& key, double dflt, bool required = false) const {
    const std::string v = get(sec, key, "", required);
    if (v.empty()) return dflt;
    auto si = raw.kv.find(sec);
    auto ki = si->second.find(key);
    try {
      std::size_t used;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return d;
    } catch (...) {
      throw ConfigParseError("bad number for '" + key + "'", std::get<1>(ki->second), std::get<2>(ki->second));
    }
  }
};

void check_expr(const std::string& src, const std::string& what, int line) {
  try {
    Expr::parse(src);
  } catch (const ExprError& e) {
    throw ConfigParseError(what + ": " + e.what(), line, (int)e.pos + 1);
  }
}

int line_of(const RawConfig& raw, const std::string& sec, const std::string& key) {
  auto si = raw.kv.find(sec);
  if (si == raw.kv.end()) return 1;
  auto ki = si->second.find(key);
  return ki == si->second.end() ? 1 : std::get<1>(ki->second);
}

bool is_file_src(const std::string& s) { return s.rfind("file ", 0) == 0; }

}  // namespace

ProblemConfig parse_problem_config(const std::string& text) {
  const RawConfig raw = tokenize(text);
  const Fetch f{raw};
  if (!raw.has("grid")) throw ConfigParseError("missing section [grid]", 1, 1);

  ProblemConfig cfg;
  cfg.R_trunc = f.num("grid", "R_trunc", 2.0, true);
  cfg.h = f.num("grid", "h", 0.1, true);

  const std::string pole = f.get("pole", "P", "0 0 0 1");
  {
    std::istringstream is(pole);
    for (int c = 0; c < 4; ++c)
      if (!(is >> cfg.pole[c]))
        throw ConfigParseError("pole P needs 4 components", line_of(raw, "pole", "P"), 1);
    const double n = norm4(cfg.pole);
    if (std::abs(n - 1.0) > 1e-6)
      throw ConfigParseError("pole P must be a unit 4-vector", line_of(raw, "pole", "P"), 1);
    for (auto& c : cfg.pole) c /= n;
  }

  cfg.tau_src = f.get("data", "tau", "0");
  cfg.psi_src = f.get("data", "psi", "0");
  cfg.pi_src = f.get("data", "pi", "0");
  for (const auto* src : {&cfg.tau_src, &cfg.psi_src, &cfg.pi_src})
    if (!is_file_src(*src))
      check_expr(*src, "data expression", line_of(raw, "data", src == &cfg.tau_src ? "tau" : src == &cfg.psi_src ? "psi" : "pi"));

  const std::string U = f.get("data", "U", "zero");
  if (U == "zero") {
    cfg.U_kind = "zero";
  } else if (U.rfind("const ", 0) == 0) {
    cfg.U_kind = "const";
    std::istringstream is(U.substr(6));
    for (int c = 0; c < 6; ++c)
      if (!(is >> cfg.U_const[c]))
        throw ConfigParseError("U const needs 6 entries (xx xy xz yy yz zz)", line_of(raw, "data", "U"), 1);
    if (std::abs(cfg.U_const[0] + cfg.U_const[3] + cfg.U_const[5]) > 1e-10)
      throw ConfigParseError("U const must be traceless", line_of(raw, "data", "U"), 1);
  } else if (is_file_src(U)) {
    cfg.U_kind = "file";
    cfg.U_file = trim(U.substr(5));
  } else {
    throw ConfigParseError("U must be 'zero', 'const ...' or 'file PATH'", line_of(raw, "data", "U"), 1);
  }

  cfg.V_src = f.get("potential", "V", "1");
  cfg.dV_src = f.get("potential", "dV", "0");
  check_expr(cfg.V_src, "potential V", line_of(raw, "potential", "V"));
  check_expr(cfg.dV_src, "potential dV", line_of(raw, "potential", "dV"));

  cfg.strategy = f.get("solver", "strategy", "newton");
  if (cfg.strategy != "newton" && cfg.strategy != "monotone")
    throw ConfigParseError("strategy must be newton or monotone", line_of(raw, "solver", "strategy"), 1);
  cfg.tol = f.num("solver", "tol", 1e-8);
  cfg.max_outer = (int)f.num("solver", "max_outer", 30);

  if (raw.has("stability")) {
    StabilitySpec st;
    std::istringstream is(f.get("stability", "deltas", "", true));
    double d;
    while (is >> d) st.deltas.push_back(d);
    if (st.deltas.empty())
      throw ConfigParseError("stability needs at least one delta", line_of(raw, "stability", "deltas"), 1);
    st.V_src = f.get("stability", "V", "", true);
    st.dV_src = f.get("stability", "dV", "", true);
    check_expr(st.V_src, "stability V", line_of(raw, "stability", "V"));
    check_expr(st.dV_src, "stability dV", line_of(raw, "stability", "dV"));
    cfg.stability = st;
  }
  return cfg;
}

ProblemConfig load_problem_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_problem_config(ss.str());
}

std::string ProblemConfig::canonical() const {
  char buf[64];
  std::ostringstream os;
  auto put = [&](const char* k, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << k << "=" << buf << ";";
  };
  put("R_trunc", R_trunc);
  put("h", h);
  for (int c = 0; c < 4; ++c) put("P", pole[c]);
  os << "tau=" << tau_src << ";psi=" << psi_src << ";pi=" << pi_src << ";Ukind=" << U_kind << ";";
  for (int c = 0; c < 6; ++c) put("Uc", U_const[c]);
  os << "Ufile=" << U_file << ";V=" << V_src << ";dV=" << dV_src << ";strategy=" << strategy << ";";
  put("tol", tol);
  put("max_outer", max_outer);
  if (stability) {
    for (double d : stability->deltas) put("delta", d);
    os << "sV=" << stability->V_src << ";sdV=" << stability->dV_src << ";";
  }
  return os.str();
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t ProblemConfig::hash() const { return fnv1a(canonical()); }

namespace {

std::function<double(const Vec3&)> field_source(const std::string& src) {
  if (is_file_src(src)) {
    const std::string path = trim(src.substr(5));
    auto field = std::make_shared<ScalarField>(ScalarField(load_field<1>(path)));
    return [field](const Vec3& x) {
      const int id = field->grid->locate(x);
      if (id < 0) throw std::runtime_error("field file does not cover the requested grid");
      return field->v[id];
    };
  }
  return Expr::parse(src).field_fn();
}

}  // namespace

ProblemInputs make_inputs(const ProblemConfig& cfg) {
  ProblemInputs in;
  in.R_trunc = cfg.R_trunc;
  in.h = cfg.h;
  in.pole = cfg.pole;
  in.tau = field_source(cfg.tau_src);
  in.psi = field_source(cfg.psi_src);
  in.pi = field_source(cfg.pi_src);
  if (cfg.U_kind == "const") {
    Sym3 s;
    s.c = cfg.U_const;
    in.Uchart = [s](const Vec3&) { return s; };
  } else if (cfg.U_kind == "file") {
    auto field = std::make_shared<SymTensorField>(SymTensorField(load_field<6>(cfg.U_file)));
    in.Uchart = [field](const Vec3& x) {
      const int id = field->grid->locate(x);
      if (id < 0) throw std::runtime_error("U field file does not cover the requested grid");
      return field->sym(id);
    };
  }
  in.potential.V = Expr::parse(cfg.V_src).scalar_fn();
  in.potential.dV = Expr::parse(cfg.dV_src).scalar_fn();
  in.strategy = cfg.strategy;
  in.tol = cfg.tol;
  in.max_outer = cfg.max_outer;
  return in;
}

std::vector<PotentialPerturbation> make_perturbations(const ProblemConfig& cfg) {
  std::vector<PotentialPerturbation> out;
  if (!cfg.stability) return out;
  const Expr V = Expr::parse(cfg.stability->V_src);
  const Expr dV = Expr::parse(cfg.stability->dV_src);
  for (double d : cfg.stability->deltas) {
    PotentialPerturbation p;
    p.delta = d;
    p.potential.V = V.scalar_fn({{"delta", d}});
    p.potential.dV = dV.scalar_fn({{"delta", d}});
    out.push_back(p);
  }
  return out;
}

void write_stability_csv(const std::vector<StabilityRow>& rows, const std::string& path) {
  std::ofstream os(path);
  os << "delta,data_distance,solution_distance,outer_iters,status\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,", r.delta, r.data_distance,
                  r.solution_distance, r.outer_iters);
    os << buf << r.status << "\n";
  }
}

void write_stability_plot_csv(const std::vector<StabilityRow>& rows, const std::string& path) {
  std::ofstream os(path);
  os << "log10_delta,log10_solution_distance\n";
  char buf[96];
  for (const auto& r : rows) {
    if (!(r.delta > 0) || !(r.solution_distance > 0) || r.status != "ok") continue;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", std::log10(r.delta), std::log10(r.solution_distance));
    os << buf;
  }
}

}  // namespace lichlab
