// Command-line front end: run an optimization, sweep resolution ratios, or
// validate a config file. Exit codes: 0 success/converged, 2 iteration cap
// reached, 1 error.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmc/config.hpp"
#include "mmc/driver.hpp"
#include "mmc/outputs.hpp"

namespace {

mmc::RunConfig load_config(const std::string& cfg_path,
                           const std::string& problem) {
  if (cfg_path.empty()) return mmc::default_config(problem);
  std::ifstream is(cfg_path);
  if (!is) throw std::runtime_error("cannot open config: " + cfg_path);
  std::stringstream ss;
  ss << is.rdbuf();
  return mmc::parse_config(ss.str());
}

mmc::TdfField final_field(const mmc::RunConfig& cfg,
                          const mmc::BackgroundGrid& grid,
                          const mmc::RunResult& res) {
  mmc::RegularizationParams reg;
  reg.epsilon = cfg.params.eps_cells * grid.min_cell_edge();
  reg.alpha_min = cfg.params.alpha_min;
  reg.ks_l = cfg.params.ks_l;
  reg.p_exp = cfg.params.p_exp;
  const mmc::TdfOverrides ov = mmc::materialize_overrides(cfg.def, grid);
  if (res.dim == 2)
    return mmc::build_structure_tdf(mmc::unflatten2(res.design), grid, reg,
                                    &ov);
  return mmc::build_structure_tdf(mmc::unflatten3(res.design), grid, reg, &ov);
}

void write_run_outputs(const std::filesystem::path& dir,
                       const mmc::RunConfig& cfg, const mmc::RunResult& res) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "config.json");
    os << mmc::emit_config(cfg);
  }
  mmc::write_history_csv((dir / "history.csv").string(), res.history);
  mmc::write_components_csv((dir / "components.csv").string(), res.design,
                            res.dim);
  const mmc::BackgroundGrid grid = mmc::problem_grid(cfg.def);
  const mmc::TdfField field = final_field(cfg, grid, res);
  if (res.dim == 2)
    mmc::write_field_pgm((dir / "field.pgm").string(), grid, field);
  mmc::write_field_vtk((dir / "field.vtk").string(), grid, field);
  mmc::write_summary_json((dir / "summary.json").string(), cfg.def, cfg.params,
                          res);
}

void print_run_summary(const mmc::RunConfig& cfg, const mmc::RunResult& res,
                       const std::string& out_dir) {
  std::printf("problem %s: %s after %d iterations\n", cfg.def.name.c_str(),
              res.converged ? "converged" : "hit iteration cap",
              res.iterations);
  if (res.has_post)
    std::printf("compliance %.6g (fine-mesh %.6g, rel err %.3f%%)\n",
                res.c_obj, res.c_post, 100.0 * res.rel_error);
  else
    std::printf("compliance %.6g\n", res.c_obj);
  const double vd = cfg.def.dim == 3 ? cfg.def.lx * cfg.def.ly * cfg.def.lz
                                     : cfg.def.lx * cfg.def.ly;
  std::printf("volume %.6g (limit %.6g)\n", res.v_final,
              cfg.def.vol_frac * vd);
  std::printf("wall time %.1f s\n", res.seconds);
  std::printf("results in %s\n", out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology optimization with movable components on a "
               "two-resolution mesh pair"};
  app.require_subcommand(1);

  std::string problem = "cantilever2d";
  std::string cfg_path;
  std::string out_dir = "out";
  int max_iters = -1;
  int n_be = 0;
  int log_every = -1;
  int threads = 0;
  bool deterministic = false;
  std::vector<int> ratios;

  CLI::App* run_cmd =
      app.add_subcommand("run", "Optimize a problem and write results");
  CLI::Option* opt_p =
      run_cmd->add_option("--problem", problem, "Built-in problem preset")
          ->check(CLI::IsMember(mmc::preset_names()));
  run_cmd->add_option("--config", cfg_path, "JSON config file")
      ->excludes(opt_p);
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--max-iters", max_iters, "Iteration cap override");
  run_cmd->add_option("--n-be", n_be, "Resolution ratio override");
  run_cmd->add_option("--log-every", log_every,
                      "Print progress every N iterations");
  run_cmd->add_option("--threads", threads, "Solver thread count");
  run_cmd->add_flag("--deterministic", deterministic,
                    "Force bitwise-reproducible execution");

  CLI::App* study_cmd = app.add_subcommand(
      "study", "Optimize at several resolution ratios and tabulate");
  CLI::Option* sopt_p =
      study_cmd->add_option("--problem", problem, "Built-in problem preset")
          ->check(CLI::IsMember(mmc::preset_names()));
  study_cmd->add_option("--config", cfg_path, "JSON config file")
      ->excludes(sopt_p);
  study_cmd->add_option("--out", out_dir, "Output directory");
  study_cmd->add_option("--ratios", ratios, "Resolution ratios to sweep")
      ->expected(1, 16);
  study_cmd->add_option("--max-iters", max_iters, "Iteration cap override");

  CLI::App* check_cmd =
      app.add_subcommand("check", "Validate a config file and print its "
                                  "canonical form");
  check_cmd->add_option("--config", cfg_path, "JSON config file")->required();

  CLI::App* presets_cmd =
      app.add_subcommand("presets", "List built-in problem names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets_cmd->parsed()) {
      for (const std::string& n : mmc::preset_names())
        std::printf("%s\n", n.c_str());
      return 0;
    }

    if (check_cmd->parsed()) {
      const mmc::RunConfig cfg = load_config(cfg_path, problem);
      std::fputs(mmc::emit_config(cfg).c_str(), stdout);
      return 0;
    }

    mmc::RunConfig cfg = load_config(cfg_path, problem);
    if (max_iters > 0) cfg.params.max_iters = max_iters;
    if (n_be > 0) cfg.def.n_be = n_be;
    if (log_every >= 0) cfg.params.log_every = log_every;
    if (threads > 0) cfg.params.threads = threads;
    if (deterministic) cfg.params.deterministic = true;

    if (run_cmd->parsed()) {
      const mmc::RunResult res = mmc::run(cfg.def, cfg.params);
      write_run_outputs(out_dir, cfg, res);
      print_run_summary(cfg, res, out_dir);
      return res.converged ? 0 : 2;
    }

    // study
    if (ratios.empty()) ratios = {1, 2, 4, 8};
    const std::vector<mmc::StudyRow> rows =
        mmc::resolution_study(cfg.def, cfg.params, ratios);
    std::filesystem::create_directories(out_dir);
    std::ofstream os(std::filesystem::path(out_dir) / "study.csv");
    os << "ratio,compliance,compliance_fine,rel_error,iterations,converged,"
          "seconds\n";
    std::printf("%6s %14s %14s %9s %6s %9s\n", "ratio", "compliance",
                "fine-mesh", "rel err", "iters", "seconds");
    bool all_converged = true;
    for (const mmc::StudyRow& r : rows) {
      const mmc::RunResult& q = r.result;
      std::printf("%6d %14.6g %14.6g %8.3f%% %6d %9.1f\n", r.ratio, q.c_obj,
                  q.has_post ? q.c_post : q.c_obj,
                  100.0 * (q.has_post ? q.rel_error : 0.0), q.iterations,
                  q.seconds);
      char line[256];
      std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%d,%d,%.17g\n",
                    r.ratio, q.c_obj, q.has_post ? q.c_post : q.c_obj,
                    q.has_post ? q.rel_error : 0.0, q.iterations,
                    int(q.converged), q.seconds);
      os << line;
      all_converged = all_converged && q.converged;
    }
    return all_converged ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
