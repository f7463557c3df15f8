#include "mmc/config.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace mmc {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("unknown config key: " + path + item.key());
  }
}

template <typename T>
void load(const json& obj, const std::string& path, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config key has the wrong type: " + path + key);
  }
}

}  // namespace

RunConfig default_config(const std::string& preset) {
  RunConfig cfg;
  cfg.problem = preset;
  cfg.def = preset_problem(preset);
  return cfg;
}

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  if (!root.is_object())
    throw std::invalid_argument("config root must be a JSON object");
  reject_unknown(root, "",
                 {"problem", "domain", "background", "n_be", "partition",
                  "volume_fraction", "material", "regularization", "layout",
                  "mma", "solver", "run"});

  std::string preset = "cantilever2d";
  load(root, "", "problem", preset);
  RunConfig cfg = default_config(preset);
  ProblemDef& d = cfg.def;
  RunParams& p = cfg.params;

  if (root.contains("domain")) {
    const json& o = root["domain"];
    reject_unknown(o, "domain.", {"lx", "ly", "lz"});
    load(o, "domain.", "lx", d.lx);
    load(o, "domain.", "ly", d.ly);
    load(o, "domain.", "lz", d.lz);
  }
  if (root.contains("background")) {
    const json& o = root["background"];
    reject_unknown(o, "background.", {"nx", "ny", "nz"});
    load(o, "background.", "nx", d.nx);
    load(o, "background.", "ny", d.ny);
    load(o, "background.", "nz", d.nz);
  }
  load(root, "", "n_be", d.n_be);
  if (root.contains("partition")) {
    const json& o = root["partition"];
    reject_unknown(o, "partition.", {"x", "y", "z"});
    load(o, "partition.", "x", d.nsx);
    load(o, "partition.", "y", d.nsy);
    load(o, "partition.", "z", d.nsz);
  }
  load(root, "", "volume_fraction", d.vol_frac);
  if (root.contains("material")) {
    const json& o = root["material"];
    reject_unknown(o, "material.", {"E", "nu", "q"});
    load(o, "material.", "E", d.material.E);
    load(o, "material.", "nu", d.material.nu);
    load(o, "material.", "q", d.material.q_penal);
  }
  if (root.contains("regularization")) {
    const json& o = root["regularization"];
    reject_unknown(o, "regularization.",
                   {"eps_cells", "alpha_min", "ks_l", "p_exp"});
    load(o, "regularization.", "eps_cells", p.eps_cells);
    load(o, "regularization.", "alpha_min", p.alpha_min);
    load(o, "regularization.", "ks_l", p.ks_l);
    load(o, "regularization.", "p_exp", p.p_exp);
  }
  if (root.contains("layout")) {
    const json& o = root["layout"];
    reject_unknown(o, "layout.",
                   {"cx", "cy", "cz", "pairs", "size_scale", "thickness_scale"});
    load(o, "layout.", "cx", d.layout.cx);
    load(o, "layout.", "cy", d.layout.cy);
    load(o, "layout.", "cz", d.layout.cz);
    load(o, "layout.", "pairs", d.layout.pairs);
    load(o, "layout.", "size_scale", d.layout.size_scale);
    load(o, "layout.", "thickness_scale", d.layout.thickness_scale);
  }
  if (root.contains("mma")) {
    const json& o = root["mma"];
    reject_unknown(o, "mma.",
                   {"move_frac", "move_angle", "asym_init", "asym_incr",
                    "asym_decr", "kkt_tol"});
    load(o, "mma.", "move_frac", p.move_frac);
    load(o, "mma.", "move_angle", p.move_angle);
    load(o, "mma.", "asym_init", p.mma.asym_init);
    load(o, "mma.", "asym_incr", p.mma.asym_incr);
    load(o, "mma.", "asym_decr", p.mma.asym_decr);
    load(o, "mma.", "kkt_tol", p.mma.kkt_tol);
  }
  if (root.contains("solver")) {
    const json& o = root["solver"];
    reject_unknown(o, "solver.", {"direct_dof_cap", "cg_tol", "cg_max_iters"});
    load(o, "solver.", "direct_dof_cap", p.solver.direct_dof_cap);
    load(o, "solver.", "cg_tol", p.solver.cg_tol);
    load(o, "solver.", "cg_max_iters", p.solver.cg_max_iters);
  }
  if (root.contains("run")) {
    const json& o = root["run"];
    reject_unknown(o, "run.",
                   {"max_iters", "conv_tol", "conv_window", "conv_start",
                    "post_analysis", "deterministic", "threads", "log_every",
                    "size_floor", "size_ceil", "thick_ceil"});
    load(o, "run.", "max_iters", p.max_iters);
    load(o, "run.", "conv_tol", p.conv_tol);
    load(o, "run.", "conv_window", p.conv_window);
    load(o, "run.", "conv_start", p.conv_start);
    load(o, "run.", "post_analysis", p.post_analysis);
    load(o, "run.", "deterministic", p.deterministic);
    load(o, "run.", "threads", p.threads);
    load(o, "run.", "log_every", p.log_every);
    load(o, "run.", "size_floor", p.size_floor);
    load(o, "run.", "size_ceil", p.size_ceil);
    load(o, "run.", "thick_ceil", p.thick_ceil);
  }

  // Early structural validation so config errors surface before a run.
  if (d.dim == 3 && d.nz < 1)
    throw std::invalid_argument("background.nz must be >= 1 for 3D problems");
  if (d.n_be < 1) throw std::invalid_argument("n_be must be >= 1");
  if (d.nx < 1 || d.ny < 1)
    throw std::invalid_argument("background cell counts must be >= 1");
  if (d.nx % d.n_be != 0 || d.ny % d.n_be != 0 ||
      (d.dim == 3 && d.nz % d.n_be != 0))
    throw std::invalid_argument("background cells must be divisible by n_be");
  if (!(d.vol_frac > 0 && d.vol_frac < 1))
    throw std::invalid_argument("volume_fraction must be in (0, 1)");
  return cfg;
}

std::string emit_config(const RunConfig& cfg) {
  const ProblemDef& d = cfg.def;
  const RunParams& p = cfg.params;
  json root;
  root["problem"] = cfg.problem;
  root["domain"] = {{"lx", d.lx}, {"ly", d.ly}, {"lz", d.lz}};
  root["background"] = {{"nx", d.nx}, {"ny", d.ny}, {"nz", d.nz}};
  root["n_be"] = d.n_be;
  root["partition"] = {{"x", d.nsx}, {"y", d.nsy}, {"z", d.nsz}};
  root["volume_fraction"] = d.vol_frac;
  root["material"] = {
      {"E", d.material.E}, {"nu", d.material.nu}, {"q", d.material.q_penal}};
  root["regularization"] = {{"eps_cells", p.eps_cells},
                            {"alpha_min", p.alpha_min},
                            {"ks_l", p.ks_l},
                            {"p_exp", p.p_exp}};
  root["layout"] = {{"cx", d.layout.cx},
                    {"cy", d.layout.cy},
                    {"cz", d.layout.cz},
                    {"pairs", d.layout.pairs},
                    {"size_scale", d.layout.size_scale},
                    {"thickness_scale", d.layout.thickness_scale}};
  root["mma"] = {{"move_frac", p.move_frac},   {"move_angle", p.move_angle},
                 {"asym_init", p.mma.asym_init}, {"asym_incr", p.mma.asym_incr},
                 {"asym_decr", p.mma.asym_decr}, {"kkt_tol", p.mma.kkt_tol}};
  root["solver"] = {{"direct_dof_cap", p.solver.direct_dof_cap},
                    {"cg_tol", p.solver.cg_tol},
                    {"cg_max_iters", p.solver.cg_max_iters}};
  root["run"] = {{"max_iters", p.max_iters},
                 {"conv_tol", p.conv_tol},
                 {"conv_window", p.conv_window},
                 {"conv_start", p.conv_start},
                 {"post_analysis", p.post_analysis},
                 {"deterministic", p.deterministic},
                 {"threads", p.threads},
                 {"log_every", p.log_every},
                 {"size_floor", p.size_floor},
                 {"size_ceil", p.size_ceil},
                 {"thick_ceil", p.thick_ceil}};
  return root.dump(2) + "\n";
}

}  // namespace mmc
