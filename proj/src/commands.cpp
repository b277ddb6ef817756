#include "sideband/commands.hpp"

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sideband/analytic.hpp"
#include "sideband/config.hpp"
#include "sideband/fock.hpp"
#include "sideband/output.hpp"
#include "sideband/pipeline.hpp"
#include "sideband/scan.hpp"
#include "sideband/selfcheck.hpp"

namespace sideband::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kDefaultOut = "sideband_out";

struct Flags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  bool oracle = false;
  std::string tol;
  int threads = 0;
  std::string out_dir;
  std::string cut;
  bool no_postselect = false;
  std::string input;
};

struct Context {
  config::Config cfg;
  std::ostream& out;
  std::ostream& err;
};

fs::path output_dir(Context& ctx, bool required) {
  if (!ctx.cfg.is_set("out")) {
    if (!required) return {};
    ctx.cfg.set("out", kDefaultOut);
  }
  const fs::path dir = ctx.cfg.raw("out");
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  f << content;
  if (!f) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  write_file(path, os.str());
}

void write_resolved(const Context& ctx, const fs::path& dir) {
  write_with(dir / "resolved.cfg", [&](std::ostream& os) { ctx.cfg.write(os); });
}

std::string complex_json(complex z) { return out::JsonObject().add("re", z.real()).add("im", z.imag()).str(); }

// ---------------------------------------------------------------------------

int cmd_model(Context& ctx) {
  const ModelParams p = config::model_params(ctx.cfg);
  const double tol = ctx.cfg.real("tol");
  const SidebandObservables obs = sideband_observables(p);
  const double efficiency = p.squeeze.r() > 0.0 ? conversion_efficiency(p) : std::nan("");
  out::JsonObject json;
  json.add("mean_n", obs.mean_n)
      .add("var_x", obs.var_x)
      .add("var_p", obs.var_p)
      .add_raw("a_sq", complex_json(obs.a_sq))
      .add("efficiency", efficiency)
      .add("label", scan::to_string(scan::classify_state(obs.var_x, obs.var_p, tol)));

  bool pass = true;
  if (ctx.cfg.boolean("oracle.check")) {
    fock::ConvergeOptions conv;
    conv.max_total_cutoff = ctx.cfg.unsigned_integer("oracle.max_total_cutoff");
    const double target = ctx.cfg.real("oracle.target_leakage");
    ctx.err << fmt::format("running Fock oracle (target leakage {:g})\n", target);
    const auto o = fock::oracle_observables(p, target, conv);
    const double d_n = selfcheck::relative_error(obs.mean_n, o.sideband.mean_n);
    const double d_x = selfcheck::relative_error(obs.var_x, o.sideband.var_x);
    const double d_p = selfcheck::relative_error(obs.var_p, o.sideband.var_p);
    const double d_a = selfcheck::relative_error(obs.a_sq, o.sideband.a_sq);
    pass = std::max({d_n, d_x, d_p, d_a}) <= tol;
    json.add_raw("oracle", out::JsonObject()
                               .add("mean_n", o.sideband.mean_n)
                               .add("var_x", o.sideband.var_x)
                               .add("var_p", o.sideband.var_p)
                               .add_raw("a_sq", complex_json(o.sideband.a_sq))
                               .add("cutoff0", static_cast<std::uint64_t>(o.cutoff0))
                               .add("cutoff_sb", static_cast<std::uint64_t>(o.cutoff_sb))
                               .add("leakage", o.leakage)
                               .str());
    json.add_raw("delta", out::JsonObject()
                              .add("mean_n", d_n)
                              .add("var_x", d_x)
                              .add("var_p", d_p)
                              .add("a_sq", d_a)
                              .str());
    json.add("tol", tol).add("pass", pass);
    if (!pass) ctx.err << fmt::format("oracle disagreement above tolerance {:g}\n", tol);
  }
  const std::string text = json.str() + "\n";
  ctx.out << text;
  if (const fs::path dir = output_dir(ctx, false); !dir.empty()) {
    write_file(dir / "model.json", text);
    write_resolved(ctx, dir);
  }
  return pass ? kOk : kCheckFailed;
}

int cmd_scan(Context& ctx) {
  const ModelParams base = config::model_params(ctx.cfg);
  const auto axes = config::grid_axes(ctx.cfg);
  const double tol = ctx.cfg.real("tol");
  std::optional<double> cut;
  if (ctx.cfg.is_set("scan.cut")) cut = ctx.cfg.real("scan.cut");
  const scan::MapGrid grid = scan::phase_map(base, axes.phi, axes.dtheta);
  std::optional<scan::PhiSeries> series;
  if (cut) {
    try {
      series = scan::line_cut(grid, *cut);
    } catch (const std::invalid_argument& e) {
      throw config::ConfigError(e.what());
    }
  }
  const fs::path dir = output_dir(ctx, true);

  std::vector<std::string> files = {"plane_n.csv", "plane_var_x.csv", "plane_var_p.csv", "axes.csv"};
  write_with(dir / files[0], [&](std::ostream& os) { scan::write_plane_csv(os, grid, scan::Plane::MeanN); });
  write_with(dir / files[1], [&](std::ostream& os) { scan::write_plane_csv(os, grid, scan::Plane::VarX); });
  write_with(dir / files[2], [&](std::ostream& os) { scan::write_plane_csv(os, grid, scan::Plane::VarP); });
  write_with(dir / files[3], [&](std::ostream& os) { scan::write_axes_csv(os, grid); });
  if (series) {
    files.emplace_back("line_cut.csv");
    write_with(dir / files.back(), [&](std::ostream& os) { scan::write_series_csv(os, *series, tol); });
  }
  files.emplace_back("resolved.cfg");
  write_resolved(ctx, dir);

  std::map<std::string, std::uint64_t> labels;
  for (std::size_t k = 0; k < grid.plane_n.size(); ++k) {
    ++labels[std::string(scan::to_string(scan::classify_state(grid.plane_var_x[k], grid.plane_var_p[k], tol)))];
  }
  out::JsonObject label_json;
  for (const auto& [name, count] : labels) label_json.add(name, count);
  std::string file_list = "[";
  for (std::size_t i = 0; i < files.size(); ++i) file_list += (i ? "," : "") + out::quote((dir / files[i]).string());
  file_list += "]";

  const std::size_t violations = scan::heisenberg_violations(grid);
  out::JsonObject json;
  json.add("rows", static_cast<std::uint64_t>(grid.rows()))
      .add("cols", static_cast<std::uint64_t>(grid.cols()))
      .add_raw("files", file_list)
      .add_raw("labels", label_json.str())
      .add("heisenberg_violations", static_cast<std::uint64_t>(violations));
  if (series) json.add("cut_dtheta", series->dtheta);
  json.add("pass", violations == 0);
  ctx.out << json.str() << "\n";
  if (violations) ctx.err << fmt::format("{} grid points violate var_x var_p >= 1\n", violations);
  return violations == 0 ? kOk : kCheckFailed;
}

int cmd_analyze(Context& ctx) {
  if (!ctx.cfg.is_set("input")) throw config::ConfigError("analyze needs an input CSV (positional or input = ...)");
  const std::string input = ctx.cfg.raw("input");
  const auto cal = config::calibration(ctx.cfg);
  const auto n_blocks = ctx.cfg.unsigned_integer("n_blocks");
  const auto bins = ctx.cfg.unsigned_integer("analyze.hist_bins");
  const bool postselect = ctx.cfg.boolean("analyze.postselect");
  const double band = ctx.cfg.real("analyze.band_fraction");
  if (bins < 1) throw config::ConfigError("analyze.hist_bins must be >= 1");

  auto ingested = pipeline::ingest_shots(input);
  for (const auto& reason : ingested.report.skip_reasons) ctx.err << "skipped " << reason << "\n";
  if (ingested.report.skipped) {
    ctx.err << fmt::format("{} of {} rows skipped\n", ingested.report.skipped, ingested.report.data_rows);
  }
  auto table = pipeline::calibrate(std::move(ingested.table), cal);
  if (postselect) table = pipeline::postselect_pump_band(std::move(table), band);
  ctx.err << fmt::format("{} of {} shots selected\n", table.selected_count(), table.rows());

  const fs::path dir = output_dir(ctx, true);
  std::vector<std::string> channels = table.channel_names;
  channels.emplace_back("bsv_monitor");
  channels.emplace_back("mir_monitor");
  std::string reports = "[";
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto rep = pipeline::channel_report(table, channels[i], cal, n_blocks, bins);
    reports += (i ? "," : "") + pipeline::to_json(rep);
    write_with(dir / fmt::format("hist_{}.csv", channels[i]),
               [&](std::ostream& os) { stats::write_histogram_csv(os, rep.histogram); });
  }
  reports += "]";
  const std::string text = out::JsonObject()
                               .add("input", input)
                               .add("rows", static_cast<std::uint64_t>(table.rows()))
                               .add("skipped", static_cast<std::uint64_t>(ingested.report.skipped))
                               .add("postselect", postselect)
                               .add("selected", static_cast<std::uint64_t>(table.selected_count()))
                               .add_raw("reports", reports)
                               .str() +
                           "\n";
  write_file(dir / "reports.json", text);
  write_resolved(ctx, dir);
  ctx.out << text;
  return kOk;
}

int cmd_simulate(Context& ctx) {
  const auto sim = config::simulator(ctx.cfg);
  const auto cal = config::calibration(ctx.cfg);
  const auto table = pipeline::simulate_experiment(sim, cal);
  const fs::path dir = output_dir(ctx, true);
  const fs::path path = dir / "shots.csv";
  write_with(path, [&](std::ostream& os) { pipeline::write_shots_csv(os, table); });
  write_resolved(ctx, dir);
  ctx.out << out::JsonObject()
                 .add("output", path.string())
                 .add("n_shots", static_cast<std::uint64_t>(table.rows()))
                 .add("seed", sim.seed)
                 .str()
          << "\n";
  return kOk;
}

int cmd_selfcheck(Context& ctx) {
  selfcheck::Options opts;
  opts.oracle_points = ctx.cfg.unsigned_integer("selfcheck.oracle_points");
  opts.seed = ctx.cfg.unsigned_integer("seed");
  opts.tol = ctx.cfg.real("tol");
  opts.target_leakage = ctx.cfg.real("oracle.target_leakage");
  opts.max_total_cutoff = ctx.cfg.unsigned_integer("oracle.max_total_cutoff");
  const auto results = selfcheck::run_all(opts, &ctx.err);
  bool pass = true;
  std::string checks = "[";
  for (std::size_t i = 0; i < results.size(); ++i) {
    checks += (i ? "," : "") + selfcheck::to_json(results[i]);
    pass = pass && results[i].pass;
  }
  checks += "]";
  const std::string text = out::JsonObject().add_raw("checks", checks).add("pass", pass).str() + "\n";
  ctx.out << text;
  if (const fs::path dir = output_dir(ctx, false); !dir.empty()) {
    write_file(dir / "selfcheck.json", text);
    write_resolved(ctx, dir);
  }
  return pass ? kOk : kCheckFailed;
}

std::string key_list() {
  std::string s = "Config keys (flat key = value, SI units):\n";
  for (const auto& k : config::known_keys()) {
    s += fmt::format("  {:<28} {:<24} {}\n", k.key, k.default_value.empty() ? "(unset)" : k.default_value, k.doc);
  }
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sideband wave-mixing model, Fock oracle and shot-statistics pipeline", "sideband"};
  app.require_subcommand(1);
  app.footer(key_list());
  Flags f;
  app.add_option("--config", f.config_path, "Flat key = value config file");
  app.add_option("--set", f.sets, "Override one config key (key=value); repeatable");
  app.add_option("--seed", f.seed, "Master RNG seed");
  app.add_flag("--oracle", f.oracle, "model: cross-check against the Fock oracle");
  app.add_option("--tol", f.tol, "Oracle agreement / classification tolerance");
  app.add_option("--threads", f.threads, "Cap on worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", f.out_dir, "Output directory");
  app.add_option("--cut", f.cut, "scan: dtheta of the exported line cut [rad]");
  app.add_flag("--no-postselect", f.no_postselect, "analyze: keep every shot");

  std::vector<CLI::App*> subs = {
      app.add_subcommand("model", "Analytic sideband observables (optionally checked against the oracle)"),
      app.add_subcommand("scan", "Phase maps, line cut and Heisenberg check"),
      app.add_subcommand("analyze", "Channel reports for a shots CSV"),
      app.add_subcommand("simulate", "Synthetic shots CSV"),
      app.add_subcommand("selfcheck", "Oracle equivalence and estimator calibration suite"),
  };
  for (auto* s : subs) s->fallthrough();
  subs[2]->add_option("input", f.input, "Shots CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  Context ctx{config::Config(), out, err};
  try {
    auto& cfg = ctx.cfg;
    if (!f.config_path.empty()) cfg.load_file(f.config_path);
    for (const auto& s : f.sets) cfg.assign(s);
    if (!f.seed.empty()) cfg.set("seed", f.seed);
    if (!f.tol.empty()) cfg.set("tol", f.tol);
    if (f.oracle) cfg.set("oracle.check", "true");
    if (!f.out_dir.empty()) cfg.set("out", f.out_dir);
    if (!f.cut.empty()) cfg.set("scan.cut", f.cut);
    if (f.no_postselect) cfg.set("analyze.postselect", "false");
    if (!f.input.empty()) cfg.set("input", f.input);
    cfg.set("subcommand", name);
    (void)cfg.unsigned_integer("seed");
    if (f.threads > 0) omp_set_num_threads(f.threads);

    if (name == "model") return cmd_model(ctx);
    if (name == "scan") return cmd_scan(ctx);
    if (name == "analyze") return cmd_analyze(ctx);
    if (name == "simulate") return cmd_simulate(ctx);
    return cmd_selfcheck(ctx);
  } catch (const pipeline::MissingColumnError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const pipeline::InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
}

}  // namespace sideband::cli
