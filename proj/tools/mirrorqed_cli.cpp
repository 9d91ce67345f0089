// mirrorqed: JSON config in, CSV/JSON tables out.
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mirrorqed/experiments.hpp"

using namespace mirrorqed;
using namespace mirrorqed::experiments;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string format;
  std::optional<std::size_t> stop_after;
  bool fresh = false;
};

void add_common(CLI::App* sub, CommonFlags& f, bool sweep) {
  sub->add_option("--config", f.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory (overrides output.directory)");
  sub->add_option("--seed", f.seed, "random seed (overrides seed)");
  sub->add_option("--threads", f.threads, "OpenMP threads, 0 keeps the runtime default")->check(CLI::NonNegativeNumber);
  sub->add_option("--format", f.format, "csv or json (overrides output.formats)")->check(CLI::IsMember({"csv", "json"}));
  if (sweep) {
    sub->add_option("--stop-after", f.stop_after, "compute at most this many new points, then stop");
    sub->add_flag("--fresh", f.fresh, "ignore an existing checkpoint");
  }
}

struct Context {
  ExperimentConfig cfg;
  std::filesystem::path dir;
  std::string command;

  void write(const Table& t, const std::string& stem) const {
    for (const auto& fmt : cfg.formats) {
      const std::filesystem::path path = dir / (stem + "." + fmt);
      if (fmt == "csv")
        write_table_csv(path.string(), t, cfg, command);
      else
        write_table_json(path.string(), t, cfg, command);
      std::cout << "wrote " << path.string() << '\n';
    }
  }

  RunControl control(const CommonFlags& f, const std::string& stem) const {
    RunControl ctl;
    ctl.checkpoint_path = (dir / (stem + ".checkpoint.jsonl")).string();
    ctl.stop_after = f.stop_after;
    if (f.fresh) std::filesystem::remove(ctl.checkpoint_path);
    return ctl;
  }
};

Context prepare(const CommonFlags& f, const std::string& command) {
  Context c;
  c.cfg = load_config(f.config);
  if (f.seed) c.cfg.seed = *f.seed;
  if (!f.format.empty()) c.cfg.formats = {f.format};
  if (!f.out.empty()) c.cfg.output_directory = f.out;
  refresh_hash(c.cfg);
  if (f.threads > 0) omp_set_num_threads(f.threads);
  c.dir = c.cfg.output_directory;
  std::filesystem::create_directories(c.dir);
  c.command = command;
  return c;
}

void cmd_reflection(const CommonFlags& f) {
  const Context c = prepare(f, "reflection");
  const Table t = run_reflection_circle(c.cfg);
  c.write(t, "reflection");
  const Table s = reflection_summary(c.cfg, t);
  c.write(s, "reflection_summary");
  std::printf("circle radius %.6f, min |r| on critical trace %.3e, |r| at resonant minimum %.6f\n", s.rows[0][0],
              s.rows[0][3], s.rows[0][4]);
}

void cmd_wln_sweep(const CommonFlags& f) {
  const Context c = prepare(f, "wln-sweep");
  const Table t = run_wln_sweep(c.cfg, c.control(f, "wln_sweep"));
  c.write(t, "wln_sweep");
  const std::size_t w = t.column("wln_ideal");
  std::size_t best = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.rows[i][w] > t.rows[best][w]) best = i;
  if (!t.rows.empty()) std::printf("peak wln %.5f at %s = %.4g\n", t.rows[best][w], t.columns[0].c_str(), t.rows[best][0]);
}

void cmd_dephasing_map(const CommonFlags& f) {
  const Context c = prepare(f, "dephasing-map");
  const DephasingMap m = run_dephasing_map(c.cfg, c.control(f, "dephasing_map"));
  c.write(m.map, "dephasing_map");
  c.write(m.cut_gamma_p, "dephasing_cut_gamma_p");
  c.write(m.cut_gamma_n, "dephasing_cut_gamma_n");
}

void cmd_optimize(const CommonFlags& f) {
  const Context c = prepare(f, "optimize-filter");
  Table t;
  auto record = [&](const std::vector<double>& x, double wln, double evals, const std::string& status) {
    for (std::size_t k = 0; k < x.size(); ++k) t.columns.push_back("param_" + std::to_string(k));
    t.columns.push_back("wln");
    t.columns.push_back("evaluations");
    std::vector<double> row = x;
    row.push_back(wln);
    row.push_back(evals);
    t.add(row, status);
    c.write(t, "optimize_filter");
  };
  try {
    const FilterOptimum o = optimize_filter(c.cfg);
    record(o.parameters, o.wln, static_cast<double>(o.evaluations), "ok");
    std::printf("%s optimum wln %.5f after %zu evaluations\n", o.family.c_str(), o.wln, o.evaluations);
  } catch (const BudgetExhaustedError& e) {
    record(e.best_x(), e.best_value(), static_cast<double>(c.cfg.budget), "budget_exhausted");
    throw;
  }
}

void cmd_qubit_curves(const CommonFlags& f) {
  const Context c = prepare(f, "qubit-curves");
  c.write(run_qubit_state_curves(c.cfg), "qubit_curves");
}

void cmd_mollow(const CommonFlags& f) {
  const Context c = prepare(f, "mollow");
  const MollowResult m = run_mollow(c.cfg);
  c.write(m.spectrum, "mollow_spectrum");
  Table fit;
  fit.columns = {"delta_hz", "omega_hz", "fitted_omega_hz", "fitted_over_gamma_1", "coherent_flux"};
  for (std::size_t v = 0; v < m.variants.size(); ++v) {
    fit.add({m.drive_delta[v] / kTwoPi, m.drive_omega[v] / kTwoPi, m.fitted_omega[v] / kTwoPi,
             m.fitted_omega[v] / c.cfg.params.gamma_1, m.coherent_flux[v]},
            m.variants[v]);
    std::printf("%s: fitted Omega/Gamma_1 = %.4f\n", m.variants[v].c_str(), m.fitted_omega[v] / c.cfg.params.gamma_1);
  }
  c.write(fit, "mollow_fit");
}

void cmd_capture(const CommonFlags& f) {
  const Context c = prepare(f, "capture");
  const CaptureDump d = run_capture(c.cfg);
  Table rho;
  rho.columns = {"n", "m", "re", "im"};
  for (Eigen::Index i = 0; i < d.rho_mode.rows(); ++i)
    for (Eigen::Index j = 0; j < d.rho_mode.cols(); ++j)
      rho.add({double(i), double(j), d.rho_mode(i, j).real(), d.rho_mode(i, j).imag()});
  c.write(rho, "capture_rho");
  c.write(d.summary, "capture_summary");
  std::printf("wln %.5f, <n> %.5f\n", d.summary.rows[0][0], d.summary.rows[0][3]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-mode capture, tomography and spectra for a driven emitter in front of a mirror"};
  app.require_subcommand(1);
  CommonFlags flags;
  struct Entry {
    const char* name;
    const char* help;
    bool sweep;
    void (*run)(const CommonFlags&);
  };
  const Entry entries[] = {
      {"reflection", "reflection circles at weak and critical drive", false, cmd_reflection},
      {"wln-sweep", "WLN, populations and tomography fidelity against filter width", true, cmd_wln_sweep},
      {"dephasing-map", "filter-optimised WLN over pure dephasing and non-radiative decay", true, cmd_dephasing_map},
      {"optimize-filter", "simplex search for the WLN-maximising filter", false, cmd_optimize},
      {"qubit-curves", "steady-state coherence, population and purity against drive", false, cmd_qubit_curves},
      {"mollow", "resonance fluorescence spectrum and Rabi fit", false, cmd_mollow},
      {"capture", "single captured-mode state dump", false, cmd_capture},
  };
  void (*selected)(const CommonFlags&) = nullptr;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, flags, e.sweep);
    sub->callback([&selected, run = e.run] { selected = run; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    selected(flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InterruptedError& e) {
    std::cerr << "interrupted: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
