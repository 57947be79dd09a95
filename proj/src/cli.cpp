#include "tgom/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tgom/analysis.hpp"
#include "tgom/data_io.hpp"
#include "tgom/errors.hpp"
#include "tgom/prediction.hpp"
#include "tgom/util.hpp"

#ifndef TGOM_VERSION
#define TGOM_VERSION "0.0.0"
#endif

namespace tgom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

template <typename Writer>
fs::path write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw IoError("error while writing " + path.string());
  return path;
}

json read_json_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError({what + " not found: " + path.string()});
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({what + " is not valid JSON: " + std::string(e.what())});
  }
}

PanelDataset load_panel(const fs::path& path, double age_offset) {
  if (!fs::exists(path)) throw IoError("data file not found: " + path.string());
  return parse_panel_file(path, ParseOptions{age_offset});
}

// One manifest per output directory, rewritten by every command that writes there.
struct Manifest {
  Manifest(std::string cmd, std::vector<std::string> arguments)
      : command(std::move(cmd)), args(std::move(arguments)), started(utc_now()) {}

  std::string command;
  std::vector<std::string> args;
  json config;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
  std::string started;
  std::vector<fs::path> outputs;
  json extra = json::object();

  void write(const fs::path& dir) const {
    json j{{"command", command},
           {"arguments", args},
           {"tool", "tgom"},
           {"version", TGOM_VERSION},
           {"seed", seed},
           {"config", config},
           {"dataset_fingerprint", dataset_fingerprint},
           {"started", started},
           {"finished", utc_now()}};
    json outs = json::array();
    for (const auto& p : outputs) outs.push_back(p.filename().string());
    j["outputs"] = outs;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    write_file(dir / "manifest.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }
};

json error_record(const Error& e) {
  json j{{"kind", e.kind()}, {"exit_code", static_cast<int>(e.exit_code())}, {"message", e.what()}};
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) j["problems"] = c->problems();
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    json issues = json::array();
    for (const auto& is : v->issues()) {
      issues.push_back({{"row", is.row}, {"column", is.column}, {"code", is.code}, {"message", is.message}});
    }
    j["issues"] = issues;
  }
  return {{"error", j}};
}

std::vector<double> age_grid(double from, double to, double step) {
  if (!(step > 0.0) || !(to >= from)) throw ConfigError({"age grid needs from <= to and step > 0"});
  std::vector<double> grid;
  for (std::size_t n = 0;; ++n) {
    const double a = from + static_cast<double>(n) * step;
    if (a > to + 1e-9) break;
    grid.push_back(a);
  }
  return grid;
}

std::string model_name(const ModelSpec& m) {
  return std::string(m.kind == ModelKind::kCohort ? "TGoM cohort " : "TGoM ") + "K=" + std::to_string(m.n_profiles);
}

// ---------------------------------------------------------------- commands

struct Common {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::vector<std::string> args;
};

struct FitArgs {
  std::string data, config, out;
  std::uint64_t progress_every = 0;
};

int cmd_fit(const FitArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  Manifest m{"fit", c.args};
  FitConfig fc = read_fit_config_file(a.config);
  if (c.seed) fc.sampler.seed = *c.seed;
  fc.sampler.threads = c.threads;
  if (a.progress_every > 0) fc.sampler.progress_every = a.progress_every;
  const PanelDataset data = load_panel(a.data, fc.age_offset);
  const fs::path dir(a.out);
  ensure_dir(dir);

  RunOptions opts;
  opts.progress = [&err](const ProgressRecord& r) { err << progress_json(r) << '\n' << std::flush; };
  const PosteriorChain chain = run_chain(data, fc.priors, fc.sampler, fc.model, opts);

  m.outputs.push_back(dir / "chain.jsonl");
  write_chain_file(chain, m.outputs.back());

  const LabelSwitchingReport sw = detect_label_switching(chain);
  json flags = json::array();
  for (const auto& f : sw.flags) {
    flags.push_back({{"window", f.window}, {"profile_a", f.profile_a + 1}, {"profile_b", f.profile_b + 1},
                     {"inversion", f.inversion}});
  }
  json diag{{"draws", chain.draws.size()},
            {"beta_acceptance", chain.meta.beta_acceptance},
            {"alpha_acceptance", chain.meta.alpha_acceptance},
            {"final_scales",
             {{"beta0_sd", chain.meta.final_scales.beta0_sd},
              {"beta1_sd", chain.meta.final_scales.beta1_sd},
              {"log_alpha_sd", chain.meta.final_scales.log_alpha_sd}}},
            {"cohort_sizes", chain.meta.cohort_sizes},
            {"label_switching", {{"windows", sw.windows}, {"margin", sw.margin}, {"window_xi", sw.window_xi},
                                 {"flags", flags}}}};
  m.outputs.push_back(write_file(dir / "diagnostics.json", [&](std::ostream& os) { os << diag.dump(2) << '\n'; }));
  if (fc.model.kind == ModelKind::kCohort) {
    const auto table = assign_cohorts(data, fc.model.partition);
    m.outputs.push_back(write_file(dir / "cohorts.csv", [&](std::ostream& os) {
      write_cohort_table(table, data, fc.model.partition, os);
    }));
  }
  m.config = to_json(fc);
  m.seed = fc.sampler.seed;
  m.dataset_fingerprint = chain.meta.dataset_fingerprint;
  m.write(dir);
  out << json{{"status", "ok"}, {"chain", (dir / "chain.jsonl").string()}, {"draws", chain.draws.size()}}.dump()
      << '\n';
  return 0;
}

struct SimulateArgs {
  std::string spec, out;
};

int cmd_simulate(const SimulateArgs& a, const Common& c, std::ostream& out) {
  Manifest m{"simulate", c.args};
  const json j = read_json_file(a.spec, "generator spec");
  const GeneratorSpec spec = parse_generator_spec(j);
  const std::uint64_t seed = c.seed.value_or(j.value("seed", std::uint64_t{1}));
  const auto [data, truth] = generate_dataset(spec, seed);
  const fs::path dir(a.out);
  ensure_dir(dir);
  m.outputs.push_back(dir / "data.csv");
  write_panel_file(data, m.outputs.back());
  m.outputs.push_back(write_file(dir / "ground_truth.csv", [&](std::ostream& os) {
    write_ground_truth(truth, data, os);
  }));
  m.config = to_json(spec);
  m.seed = seed;
  m.dataset_fingerprint = dataset_fingerprint(data);
  m.write(dir);
  out << json{{"status", "ok"}, {"data", (dir / "data.csv").string()}, {"individuals", data.n_individuals}}.dump()
      << '\n';
  return 0;
}

struct SummarizeArgs {
  std::string chain, out;
  bool cohort = false;
  bool relabel = true;
  std::size_t individuals = 100;
  double age_from = 65.0, age_to = 105.0, age_step = 1.0;
};

int cmd_summarize(const SummarizeArgs& a, const Common& c, std::ostream& out) {
  Manifest m{"summarize", c.args};
  PosteriorChain chain = read_chain_file(a.chain);
  if (a.cohort && chain.meta.model.kind != ModelKind::kCohort) {
    throw ConfigError({"cohort table requested, but " + a.chain + " holds a basic-model chain"});
  }
  std::vector<std::size_t> perm(chain.meta.n_profiles());
  std::iota(perm.begin(), perm.end(), 0);
  if (a.relabel) {
    Relabeling r = relabel_profiles(chain);
    chain = std::move(r.chain);
    perm = std::move(r.permutation);
  }
  const fs::path dir(a.out);
  ensure_dir(dir);
  const ProfileSummary s = summarize_profiles(chain);
  m.outputs.push_back(write_file(dir / "profiles.csv", [&](std::ostream& os) { write_profile_table(s, os); }));
  m.outputs.push_back(write_file(dir / "onset_ages.csv", [&](std::ostream& os) { write_onset_table(s, os); }));
  m.outputs.push_back(write_file(dir / "xi.csv", [&](std::ostream& os) { write_xi_table(s, os); }));
  const auto grid = age_grid(a.age_from, a.age_to, a.age_step);
  const auto extreme = trajectory_curve_table(chain, grid, CurveMode::kExtreme);
  m.outputs.push_back(write_file(dir / "curves_profiles.csv", [&](std::ostream& os) {
    write_curve_table(extreme, chain, os);
  }));
  if (!chain.meta.membership_ids.empty() && a.individuals > 0) {
    const auto indiv = trajectory_curve_table(chain, grid, CurveMode::kIndividual, a.individuals);
    m.outputs.push_back(write_file(dir / "curves_individuals.csv", [&](std::ostream& os) {
      write_curve_table(indiv, chain, os);
    }));
  }
  if (chain.meta.model.kind == ModelKind::kCohort) {
    const auto rows = cohort_xi_table(chain);
    m.outputs.push_back(write_file(dir / "cohort_xi.csv", [&](std::ostream& os) { write_cohort_xi_table(rows, os); }));
  }
  m.config = {{"chain", a.chain}, {"relabel", a.relabel}, {"age_grid", {a.age_from, a.age_to, a.age_step}},
              {"individual_curves", a.individuals}};
  m.seed = chain.meta.config.seed;
  m.dataset_fingerprint = chain.meta.dataset_fingerprint;
  m.extra["relabel_permutation"] = json::array();
  for (std::size_t p : perm) m.extra["relabel_permutation"].push_back(p + 1);
  m.write(dir);
  out << json{{"status", "ok"}, {"out", dir.string()}}.dump() << '\n';
  return 0;
}

struct CvArgs {
  std::string data, out;
  std::vector<std::string> configs;
  std::vector<std::size_t> compare_k;
  std::size_t folds = 4;
  std::size_t membership_draws = 20;
  std::size_t max_draws = 0;
  bool baseline = true;
};

int cmd_cv(const CvArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  Manifest m{"cv", c.args};
  std::vector<FitConfig> base;
  for (const auto& path : a.configs) base.push_back(read_fit_config_file(path));
  const std::uint64_t seed = c.seed.value_or(base.front().sampler.seed);
  std::vector<CvModel> models;
  for (FitConfig fc : base) {
    fc.sampler.seed = seed;
    fc.sampler.threads = c.threads;
    if (a.compare_k.empty()) {
      models.push_back({model_name(fc.model), fc});
      continue;
    }
    for (std::size_t k : a.compare_k) {
      FitConfig v = fc;
      v.model.n_profiles = k;
      v.priors.validate();
      v.sampler.validate(v.priors);
      models.push_back({model_name(v.model), v});
    }
  }
  const PanelDataset data = load_panel(a.data, base.front().age_offset);
  for (const auto& b : base) {
    if (b.age_offset != base.front().age_offset) throw ConfigError({"all configs must share one age_offset"});
  }
  CvSettings settings;
  settings.models = models;
  settings.folds = a.folds;
  settings.seed = seed;
  settings.phi.membership_draws = a.membership_draws;
  settings.phi.max_posterior_draws = a.max_draws;
  settings.phi.seed = seed;
  settings.phi.threads = c.threads;
  settings.baseline = a.baseline;
  settings.log = [&err](const std::string& msg) { err << json{{"event", "cv"}, {"message", msg}}.dump() << '\n'; };
  if (a.folds > data.n_individuals) {
    throw ValidationError({{0, "", "too_few_individuals",
                            "number of folds (" + std::to_string(a.folds) + ") exceeds the number of individuals (" +
                                std::to_string(data.n_individuals) + ")"}});
  }
  const PredictionReport report = cross_validate(data, settings);
  const fs::path dir(a.out);
  ensure_dir(dir);
  m.outputs.push_back(write_file(dir / "report.csv", [&](std::ostream& os) { write_report_csv(report, os); }));
  m.outputs.push_back(write_file(dir / "report.json", [&](std::ostream& os) { os << to_json(report).dump(2) << '\n'; }));
  const auto folds = kfold_split(data.n_individuals, a.folds, seed);
  m.outputs.push_back(write_file(dir / "folds.csv", [&](std::ostream& os) {
    os << "id,fold\n";
    for (std::size_t i = 0; i < folds.size(); ++i) os << data.individual_ids[i] << ',' << folds[i] + 1 << '\n';
  }));
  json cfg = json::array();
  for (const auto& mdl : models) cfg.push_back({{"name", mdl.name}, {"fit", to_json(mdl.fit)}});
  m.config = {{"models", cfg},
              {"folds", a.folds},
              {"membership_draws", a.membership_draws},
              {"max_posterior_draws", a.max_draws},
              {"baseline", a.baseline}};
  m.seed = seed;
  m.dataset_fingerprint = dataset_fingerprint(data);
  m.extra["fold_fingerprint"] = report.fold_fingerprint;
  m.write(dir);
  write_report_csv(report, out);
  return 0;
}

struct PredictArgs {
  std::string chain, holdout, out;
  std::size_t membership_draws = 20;
  std::size_t max_draws = 0;
};

int cmd_predict(const PredictArgs& a, const Common& c, std::ostream& out) {
  Manifest m{"predict", c.args};
  const PosteriorChain chain = read_chain_file(a.chain);
  const PanelDataset heldout = load_panel(a.holdout, chain.meta.age_offset);
  if (heldout.item_labels != chain.meta.item_labels) {
    throw ValidationError({{1, "", "item_mismatch", "holdout items do not match the items of the fitted chain"}});
  }
  PhiSettings phi;
  phi.membership_draws = a.membership_draws;
  phi.max_posterior_draws = a.max_draws;
  phi.seed = c.seed.value_or(chain.meta.config.seed);
  phi.threads = c.threads;
  const auto values = phi_quantities(heldout, chain, phi);
  const fs::path dir(a.out);
  ensure_dir(dir);
  m.outputs.push_back(write_file(dir / "phi_individuals.csv", [&](std::ostream& os) {
    os << "id,phi_i,mean_phi_ijt,mean_phi_ij,mean_phi_it\n" << std::setprecision(10);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const PhiMeans pm = average_phi({values[i]});
      os << heldout.individual_ids[i] << ',' << pm.all << ',' << pm.cell << ',' << pm.item << ',' << pm.wave << '\n';
    }
  }));
  PredictionReport report;
  report.rows.push_back({model_name(chain.meta.model), average_phi(values)});
  report.seed = phi.seed;
  report.membership_draws = phi.membership_draws;
  report.max_posterior_draws = phi.max_posterior_draws;
  m.outputs.push_back(write_file(dir / "report.csv", [&](std::ostream& os) { write_report_csv(report, os); }));
  m.outputs.push_back(write_file(dir / "report.json", [&](std::ostream& os) { os << to_json(report).dump(2) << '\n'; }));
  m.config = {{"chain", a.chain}, {"holdout", a.holdout}, {"membership_draws", a.membership_draws},
              {"max_posterior_draws", a.max_draws}};
  m.seed = phi.seed;
  m.dataset_fingerprint = dataset_fingerprint(heldout);
  m.extra["chain_dataset_fingerprint"] = chain.meta.dataset_fingerprint;
  m.write(dir);
  write_report_csv(report, out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory grade-of-membership models for binary panel data", "tgom"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_version_flag("--version", TGOM_VERSION);

  Common common;
  common.args = args;
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random stream (overrides the config file)");
  app.add_option("--threads", common.threads, "Worker cap; 0 uses available parallelism. Results do not depend on it");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model by Metropolis-within-Gibbs and write the chain");
  fit_cmd->add_option("--data", fit.data, "Panel CSV")->required();
  fit_cmd->add_option("--config", fit.config, "Fit configuration (JSON)")->required();
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  fit_cmd->add_option("--progress-every", fit.progress_every, "Iterations between progress records on stderr");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic panel and its ground truth");
  sim_cmd->add_option("--spec", sim.spec, "Generator specification (JSON)")->required();
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();

  SummarizeArgs sum;
  auto* sum_cmd = app.add_subcommand("summarize", "Relabel a chain and write profile, onset, curve and cohort tables");
  sum_cmd->add_option("--chain", sum.chain, "Chain file written by fit")->required();
  sum_cmd->add_option("--out", sum.out, "Output directory")->required();
  sum_cmd->add_flag("--cohort", sum.cohort, "Require the cohort table (fails for basic chains)");
  sum_cmd->add_flag("!--no-relabel", sum.relabel, "Keep the sampler's profile labels");
  sum_cmd->add_option("--individual-curves", sum.individuals, "Stored individuals to draw curves for");
  sum_cmd->add_option("--age-from", sum.age_from, "First age of the curve grid (years)");
  sum_cmd->add_option("--age-to", sum.age_to, "Last age of the curve grid (years)");
  sum_cmd->add_option("--age-step", sum.age_step, "Curve grid spacing (years)");

  CvArgs cv;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validated correct-prediction rates against an independence baseline");
  cv_cmd->add_option("--data", cv.data, "Panel CSV")->required();
  cv_cmd->add_option("--config", cv.configs, "Fit configuration(s); one report row per model")->required();
  cv_cmd->add_option("--out", cv.out, "Output directory")->required();
  cv_cmd->add_option("--compare-k", cv.compare_k, "Refit each config with these numbers of profiles")->delimiter(',');
  cv_cmd->add_option("--folds", cv.folds, "Number of folds")->check(CLI::Range(2, 1000000));
  cv_cmd->add_option("--membership-draws", cv.membership_draws, "Membership draws per posterior draw")
      ->check(CLI::PositiveNumber);
  cv_cmd->add_option("--max-draws", cv.max_draws, "Posterior draws used per fit, evenly spaced; 0 uses all");
  cv_cmd->add_flag("!--no-baseline", cv.baseline, "Skip the independence baseline row");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Correct-prediction rates of a fitted chain on a holdout panel");
  pred_cmd->add_option("--chain", pred.chain, "Chain file written by fit")->required();
  pred_cmd->add_option("--holdout", pred.holdout, "Holdout panel CSV")->required();
  pred_cmd->add_option("--out", pred.out, "Output directory")->required();
  pred_cmd->add_option("--membership-draws", pred.membership_draws, "Membership draws per posterior draw")
      ->check(CLI::PositiveNumber);
  pred_cmd->add_option("--max-draws", pred.max_draws, "Posterior draws used, evenly spaced; 0 uses all");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << TGOM_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", {{"kind", "usage"}, {"exit_code", 2}, {"message", e.what()}}}}.dump() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  }
  if (app.count("--seed") > 0) common.seed = seed;

  try {
    if (*fit_cmd) return cmd_fit(fit, common, out, err);
    if (*sim_cmd) return cmd_simulate(sim, common, out);
    if (*sum_cmd) return cmd_summarize(sum, common, out);
    if (*cv_cmd) return cmd_cv(cv, common, out, err);
    if (*pred_cmd) return cmd_predict(pred, common, out);
  } catch (const Error& e) {
    err << error_record(e).dump() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::invalid_argument& e) {
    err << json{{"error", {{"kind", "invalid_argument"}, {"exit_code", 2}, {"message", e.what()}}}}.dump() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const std::exception& e) {
    err << json{{"error", {{"kind", "internal"}, {"exit_code", 4}, {"message", e.what()}}}}.dump() << '\n';
    return static_cast<int>(ExitCode::kNumerical);
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace tgom
