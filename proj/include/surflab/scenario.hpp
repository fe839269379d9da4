// Scenario catalog and configuration: a small INI-style key-value file (with
// optional [sections], flattened as "section.key") resolves to a manifold,
// grid, initial map, optional perturbation path, and solver knobs.  Every
// value read is recorded with its default so reports can echo the effective
// configuration.
#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "surflab/ambient.hpp"
#include "surflab/core.hpp"
#include "surflab/domain.hpp"
#include "surflab/holomorphy.hpp"
#include "surflab/mapspace.hpp"
#include "surflab/structure_path.hpp"

namespace surflab::scenario {

using ambient::AmbientManifold;
using ambient::BumpSpec;
using ambient::JSource;
using ambient::StructurePath;
using domain::SphereGrid;
using mapspace::SurfaceMap;

// ---------------------------------------------------------------------------
// Config

class Config {
 public:
  static Config from_string(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(strip_comment(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      c.kv_[key] = val;
    }
    return c;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::string get_str(const std::string& key, const std::string& def) const {
    const auto it = kv_.find(key);
    const std::string v = (it == kv_.end()) ? def : it->second;
    effective_[key] = v;
    return v;
  }

  double get_num(const std::string& key, double def) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) {
      effective_[key] = fmt_g17(def);
      return def;
    }
    try {
      const double v = std::stod(it->second);
      effective_[key] = fmt_g17(v);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not a number: " + it->second);
    }
  }

  int get_int(const std::string& key, int def) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) {
      effective_[key] = std::to_string(def);
      return def;
    }
    try {
      const int v = std::stoi(it->second);
      effective_[key] = std::to_string(v);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not an integer: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool def) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) {
      effective_[key] = def ? "true" : "false";
      return def;
    }
    const std::string& s = it->second;
    bool v;
    if (s == "1" || s == "true" || s == "yes" || s == "on") v = true;
    else if (s == "0" || s == "false" || s == "no" || s == "off") v = false;
    else throw ConfigError("config key '" + key + "': not a boolean: " + s);
    effective_[key] = v ? "true" : "false";
    return v;
  }

  // complex from "re im"
  cd get_cplx(const std::string& key, cd def) const {
    const auto it = kv_.find(key);
    if (it != kv_.end()) {
      std::istringstream ss(it->second);
      double re, im;
      if (!(ss >> re >> im)) throw ConfigError("config key '" + key + "': expected two reals");
      def = cd(re, im);
    }
    effective_[key] = fmt_g17(def.real()) + " " + fmt_g17(def.imag());
    return def;
  }

  const std::map<std::string, std::string>& effective() const { return effective_; }
  const std::map<std::string, std::string>& raw() const { return kv_; }

 private:
  static std::string strip_comment(const std::string& s) {
    for (size_t i = 0; i < s.size(); ++i)
      if (s[i] == '#' || s[i] == ';') return s.substr(0, i);
    return s;
  }
  static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::map<std::string, std::string> kv_;
  mutable std::map<std::string, std::string> effective_;
};

// ---------------------------------------------------------------------------
// Scenario

struct Scenario {
  std::string name;  // cp2-line | s2s2-sphere
  std::string cls;
  std::shared_ptr<const AmbientManifold> man;
  std::shared_ptr<const SphereGrid> grid;
  std::shared_ptr<const StructurePath> path;  // null when no perturbation configured
  double lam = 0.0;
  int seed = 0;
  bool quick = false;

  cd alpha{0.0, 0.0}, beta{0.0, 0.0};  // cp2 line coefficients
  cd w0{0.0, 0.0};                     // s2s2 second-factor position
  int k2 = 0;

  holomorphy::GNOptions gn;
  double perturb_scale = 1e-2;  // initial-guess perturbation for solve tests
  int n_steps = 10;             // continuation steps
  int mc_samples = 0;           // invariant Monte Carlo samples (0 = per-scenario default)
  int quad_nr = 10, quad_nt = 20;

  SurfaceMap initial_map() const {
    if (name == "cp2-line") return mapspace::line_map(grid, man, alpha, beta);
    return mapspace::sphere_map(grid, man, w0, k2);
  }

  JSource jsource() const {
    if (path && lam > 0.0) return JSource::on_path(*path, lam);
    return JSource::standard_of(*man);
  }
  JSource jsource_at(double l) const {
    if (path && l > 0.0) return JSource::on_path(*path, l);
    return JSource::standard_of(*man);
  }

  int expected_kernel_dim() const { return 2 * man->class_info(cls).c1 + 4; }
};

// Effective grid dimensions after --quick / --grid overrides are applied by
// the caller through Config::set before building.
inline Scenario build_scenario(const Config& cfg) {
  Scenario sc;
  sc.name = cfg.get_str("scenario", "cp2-line");
  if (sc.name != "cp2-line" && sc.name != "s2s2-sphere")
    throw ConfigError("unknown scenario: " + sc.name + " (catalog: cp2-line, s2s2-sphere)");
  sc.quick = cfg.get_bool("quick", false);
  sc.seed = cfg.get_int("seed", 1234);

  const bool is_cp2 = (sc.name == "cp2-line");
  const double lam_area = cfg.get_num("lambda_area", is_cp2 ? 0.0 : 0.3);
  sc.man = ambient::make_manifold(is_cp2 ? "CP2" : "S2xS2", lam_area);
  sc.cls = cfg.get_str("class", is_cp2 ? "L" : "S2xPT");
  sc.man->class_info(sc.cls);  // resolvable or throw

  int n_r = cfg.get_int("n_radial", 12);
  int n_t = cfg.get_int("n_angular", 24);
  if (sc.quick) {
    n_r = std::min(n_r, 8);
    n_t = std::min(n_t, 16);
  }
  const double delta = cfg.get_num("delta", 0.08);
  sc.grid = std::make_shared<SphereGrid>(n_r, n_t, delta);

  if (is_cp2) {
    sc.alpha = cfg.get_cplx("alpha", cd(0.0, 0.0));
    sc.beta = cfg.get_cplx("beta", cd(0.0, 0.0));
  } else {
    sc.w0 = cfg.get_cplx("w0", cd(0.25, 0.15));
    sc.k2 = cfg.get_int("k2", 0);
  }

  // perturbation path: compactly supported metric bumps, polar-recompatibilized
  const int nb = cfg.get_int("bump_count", 1);
  sc.lam = cfg.get_num("lam", 0.0);
  if (nb > 0) {
    std::vector<BumpSpec> bumps;
    for (int b = 1; b <= nb; ++b) {
      const std::string p = "bump" + std::to_string(b) + "_";
      const int chart = cfg.get_int(p + "chart", is_cp2 ? 1 : 0);
      const cd c0 = cfg.get_cplx(p + "center0", is_cp2 ? cd(0.0, 0.0) : cd(0.1, 0.2));
      const cd c1 = cfg.get_cplx(p + "center1", is_cp2 ? cd(0.0, 0.0) : cd(0.15, -0.1));
      const double r2 = cfg.get_num(p + "r2", 0.7);
      const double amp = cfg.get_num(p + "amp", 0.02);
      const int bseed = cfg.get_int(p + "seed", 7 + b);
      C2 center;
      center << c0, c1;
      bumps.push_back(BumpSpec::random(*sc.man, chart, center, r2, amp,
                                       static_cast<std::uint64_t>(bseed)));
    }
    sc.path = std::make_shared<StructurePath>(sc.man.get(), std::move(bumps));
  }

  sc.gn.tol = cfg.get_num("gn_tol", 1e-10);
  sc.gn.max_iter = cfg.get_int("gn_max_iter", 25);
  sc.gn.use_tsvd = cfg.get_bool("gn_tsvd", false);
  sc.perturb_scale = cfg.get_num("perturb_scale", 1e-2);
  sc.n_steps = cfg.get_int("n_steps", 10);
  sc.mc_samples = cfg.get_int("mc_samples", is_cp2 ? (sc.quick ? 2000 : 8000)
                                                   : (sc.quick ? 96 : 160));
  sc.quad_nr = cfg.get_int("quad_nr", sc.quick ? 8 : 12);
  sc.quad_nt = cfg.get_int("quad_nt", sc.quick ? 16 : 24);
  return sc;
}

}  // namespace surflab::scenario
