#include "dpgt/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dpgt {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

using KvMap = std::map<std::string, std::map<std::string, std::string>>;

KvMap parse_kv(const std::string& text) {
  KvMap out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": key outside any [section]");
    if (out[section].count(key))
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    out[section][key] = val;
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(KvMap& kv, const std::string& name) : name_(name) {
    auto it = kv.find(name);
    if (it != kv.end()) entries_ = &it->second;
  }
  bool has(const std::string& key) {
    if (!entries_) return false;
    return entries_->count(key) > 0;
  }
  std::string str(const std::string& key, const std::string& def) {
    seen_.insert(key);
    if (!entries_ || !entries_->count(key)) return def;
    return entries_->at(key);
  }
  int integer(const std::string& key, int def) {
    const std::string v = str(key, "");
    if (v.empty()) return def;
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size())
      throw std::invalid_argument("config: bad integer for '" + key + "'");
    return r;
  }
  double real(const std::string& key, double def) {
    const std::string v = str(key, "");
    if (v.empty()) return def;
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size())
      throw std::invalid_argument("config: bad number for '" + key + "'");
    return r;
  }
  bool boolean(const std::string& key, bool def) {
    const std::string v = str(key, "");
    if (v.empty()) return def;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: bad boolean for '" + key + "'");
  }
  void finish() const {
    if (!entries_) return;
    for (const auto& [k, v] : *entries_)
      if (!seen_.count(k))
        throw std::invalid_argument("config: unknown key '" + k +
                                    "' in section [" + name_ + "]");
  }

 private:
  std::string name_;
  const std::map<std::string, std::string>* entries_ = nullptr;
  std::set<std::string> seen_;
};

std::vector<double> split_numbers(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  double v;
  while (in >> v) out.push_back(v);
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  KvMap kv = parse_kv(text);
  for (const auto& [sec, _] : kv)
    if (sec != "problem" && sec != "discretization" && sec != "run" &&
        sec != "output")
      throw std::invalid_argument("config: unknown section [" + sec + "]");

  ExperimentConfig cfg;
  {
    SectionReader r(kv, "problem");
    cfg.dim = r.integer("dim", 1);
    const auto dom = split_numbers(r.str("domain", "0 1"));
    if (cfg.dim == 1) {
      if (dom.size() != 2)
        throw std::invalid_argument("config: 1D domain needs 2 numbers");
      cfg.ax = dom[0];
      cfg.bx = dom[1];
    } else {
      if (dom.size() != 4)
        throw std::invalid_argument("config: 2D domain needs 4 numbers");
      cfg.ax = dom[0];
      cfg.bx = dom[1];
      cfg.ay = dom[2];
      cfg.by = dom[3];
    }
    cfg.resolution = r.integer("resolution", 4);
    const auto bb = split_numbers(r.str("b", cfg.dim == 1 ? "1" : "1 0"));
    if (static_cast<int>(bb.size()) != cfg.dim)
      throw std::invalid_argument("config: b needs dim components");
    cfg.b = {bb[0], bb.size() > 1 ? bb[1] : 0.0};
    cfg.c = r.real("c", 0.0);
    cfg.f_spec = r.str("f", "const 1");
    cfg.exact = r.str("exact", "none");
    r.finish();
  }
  {
    SectionReader r(kv, "discretization");
    cfg.disc.m_u = r.integer("m_u", 1);
    cfg.disc.m_w = r.integer("m_w", 1);
    cfg.disc.m_v = r.integer("m_v", 2);
    cfg.disc.m_b = r.integer("m_b", 0);
    cfg.disc.m_c = r.integer("m_c", 0);
    cfg.disc.m_f = r.integer("m_f", 1);
    cfg.disc.subgrid_depth = r.integer("subgrid_depth", 1);
    cfg.disc.theta = r.real("theta", 0.5);
    cfg.disc.beta = r.real("beta", 0.2);
    cfg.disc.refine_depth = r.integer("refine_depth", 1);
    cfg.disc.downwind_depth =
        r.integer("downwind_depth", cfg.disc.refine_depth);
    cfg.disc.cg_tol = r.real("cg_tol", 1e-11);
    cfg.disc.dense_limit = r.integer("dense_limit", 2000);
    r.finish();
  }
  {
    SectionReader r(kv, "run");
    cfg.mode = r.str("mode", "adaptive");
    cfg.max_iterations = r.integer("max_iterations", 25);
    cfg.target_eta_rel = r.real("target_eta_rel", 1e-8);
    cfg.max_dofs = r.integer("max_dofs", 200000);
    cfg.marker = r.str("marker", "eta");
    cfg.compare_ls = r.boolean("compare_ls", false);
    cfg.compute_infsup = r.boolean("compute_infsup", false);
    cfg.conjecture_max_depth = r.integer("conjecture_max_depth", 5);
    cfg.conjecture_setup_iterations =
        r.integer("conjecture_setup_iterations", 3);
    cfg.uniform_steps = r.integer("uniform_steps", 4);
    r.finish();
  }
  {
    SectionReader r(kv, "output");
    cfg.output_dir = r.str("directory", "out");
    cfg.seed = static_cast<uint64_t>(r.integer("seed", 1234));
    r.finish();
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("config: dim must be 1 or 2");
  if (!(bx > ax) || (dim == 2 && !(by > ay)))
    throw std::invalid_argument("config: degenerate domain");
  if (resolution < 1) throw std::invalid_argument("config: resolution >= 1");
  if (norm(b) <= 0.0) throw std::invalid_argument("config: |b| must be > 0");
  if (c < 0.0)
    throw std::invalid_argument("config: reaction must be non-negative");
  disc.validate(mode == "adaptive");
  if (mode != "adaptive" && mode != "uniform" && mode != "verify" &&
      mode != "conjecture")
    throw std::invalid_argument("config: unknown mode " + mode);
  if (marker != "eta" && marker != "rdelta")
    throw std::invalid_argument("config: marker must be eta or rdelta");
  if (max_iterations < 1 || max_dofs < 1 || uniform_steps < 1 ||
      conjecture_max_depth < 1)
    throw std::invalid_argument("config: loop limits must be positive");
}

TransportProblem ExperimentConfig::make_problem() const {
  SimplicialMesh root = dim == 1
                            ? build_root_mesh_interval(ax, bx, resolution)
                            : build_root_mesh_box(ax, bx, ay, by, resolution);
  std::istringstream in(f_spec);
  std::string kind;
  in >> kind;
  TransportProblem pr;
  if (kind == "const") {
    double v;
    if (!(in >> v)) throw std::invalid_argument("config: f = const <value>");
    pr = TransportProblem::constant_coefficients(std::move(root), b, c,
                                                 Poly::constant(dim, v));
  } else if (kind == "poly") {
    std::vector<double> coeffs;
    double v;
    while (in >> v) coeffs.push_back(v);
    if (coeffs.empty())
      throw std::invalid_argument("config: f = poly <c0> <c1> ...");
    Poly f(dim);
    if (dim == 1) {
      f = poly_1d(coeffs);
    } else {
      // coefficients a0 + a1 x + a2 y
      if (coeffs.size() != 3)
        throw std::invalid_argument("config: 2D poly takes a0 a1 a2");
      f = Poly::constant(2, coeffs[0]) + Poly::var(2, 0) * coeffs[1] +
          Poly::var(2, 1) * coeffs[2];
    }
    pr = TransportProblem::constant_coefficients(std::move(root), b, c, f);
  } else if (kind == "jump") {
    if (dim != 1)
      throw std::invalid_argument("config: jump sources are 1D only");
    double vl, vr, x0;
    if (!(in >> vl >> vr >> x0))
      throw std::invalid_argument("config: f = jump <left> <right> <x0>");
    if (!(x0 > ax && x0 < bx))
      throw std::invalid_argument("config: jump location outside domain");
    pr = TransportProblem::constant_coefficients(std::move(root), b, c,
                                                 Poly::constant(1, 0.0));
    pr.f_kind = TransportProblem::SourceKind::Piecewise1D;
    pr.f_pieces = {{ax, x0, Poly::constant(1, vl)},
                   {x0, bx, Poly::constant(1, vr)}};
  } else {
    throw std::invalid_argument("config: unknown source kind '" + kind + "'");
  }

  if (exact == "none") {
  } else if (exact == "one_minus_exp_x") {
    const double bx_comp = b.x;
    pr.u_exact = [](const Vec2& p) { return 1.0 - std::exp(-p.x); };
    pr.b_grad_u_exact = [bx_comp](const Vec2& p) {
      return bx_comp * std::exp(-p.x);
    };
  } else if (exact == "linear_x") {
    const double bx_comp = b.x;
    pr.u_exact = [](const Vec2& p) { return p.x; };
    pr.b_grad_u_exact = [bx_comp](const Vec2&) { return bx_comp; };
  } else if (exact == "jump_primitive") {
    if (pr.f_kind != TransportProblem::SourceKind::Piecewise1D || c != 0.0 ||
        b.x != 1.0 || dim != 1)
      throw std::invalid_argument(
          "config: jump_primitive needs 1D, b=1, c=0, f=jump");
    const double vl = pr.f_pieces[0].p(0.0);
    const double vr = pr.f_pieces[1].p(0.0);
    const double x0 = pr.f_pieces[0].hi;
    const double a0 = ax;
    pr.u_exact = [vl, vr, x0, a0](const Vec2& p) {
      return p.x <= x0 ? vl * (p.x - a0)
                       : vl * (x0 - a0) + vr * (p.x - x0);
    };
    pr.b_grad_u_exact = [vl, vr, x0](const Vec2& p) {
      return p.x <= x0 ? vl : vr;
    };
  } else {
    throw std::invalid_argument("config: unknown exact solution '" + exact +
                                "'");
  }
  return pr;
}

}  // namespace dpgt
