// Experiment driver: model validation, covariance and LLT checks, first
// return tails, the two-particle simulation, the renewal lab and the
// mixture goodness-of-fit, with CSV/JSON outputs and a reproducibility
// manifest per run.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rwis/collision.hpp"
#include "rwis/config.hpp"
#include "rwis/duet.hpp"
#include "rwis/mixture.hpp"
#include "rwis/model.hpp"
#include "rwis/renewal.hpp"
#include "rwis/spectral.hpp"
#include "rwis/stattest.hpp"
#include "rwis/walk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rwis;

namespace {

struct RunContext {
  ExperimentConfig config;
  std::string subcommand;
  fs::path out_dir;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  std::vector<std::string> outputs;

  fs::path path(const std::string& name) const { return out_dir / name; }

  void note_output(const fs::path& p) { outputs.push_back(p.string()); }

  void write_manifest() {
    RunManifest m;
    m.config = config;
    m.subcommand = subcommand;
    m.master_seed = config.seed;
    m.workers = config.workers;
    m.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    for (const auto& o : outputs) {
      OutputRecord rec;
      rec.path = o;
      rec.bytes = fs::file_size(o);
      rec.fnv1a64 = fnv1a64_file(o);
      m.outputs.push_back(rec);
    }
    std::ofstream out(path("manifest.json"));
    out << format_manifest(m);
  }
};

CollisionKernel make_kernel(const KernelConfig& kc) {
  CollisionKernel k = [&] {
    if (kc.type == "uniform") return CollisionKernel::uniform_energy();
    if (kc.type == "sticky") return CollisionKernel::sticky_beta(kc.kappa);
    if (kc.type == "swap") return CollisionKernel::deterministic_swap();
    if (kc.type == "tabulated") {
      if (kc.csv.empty() || kc.bins <= 0) {
        throw std::runtime_error("tabulated kernel needs kernel.csv and kernel.bins");
      }
      return CollisionKernel::tabulated_from_csv(kc.csv, kc.bins);
    }
    throw std::runtime_error("unknown kernel type '" + kc.type + "'");
  }();
  if (kc.directions == "uniform") {
    k.direction_law = DirectionLaw::UniformArcs;
  } else if (kc.directions != "rho") {
    throw std::runtime_error("kernel.directions must be 'rho' or 'uniform'");
  }
  return k;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

int run_validate(RunContext& ctx) {
  const auto model = resolve_model(ctx.config.model);
  const auto rep = validate(model);
  json j;
  j["model"] = model.name.empty() ? ctx.config.model : model.name;
  j["all_pass"] = rep.all_pass();
  j["checks"] = json::array();
  for (const auto& c : rep.checks) {
    j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value},
                           {"detail", c.detail}});
  }
  const auto p = ctx.path("validate.json");
  std::ofstream(p) << j.dump(2) << "\n";
  ctx.note_output(p);
  std::cout << rep.summary();
  return rep.all_pass() ? 0 : 2;
}

int run_sigma(RunContext& ctx) {
  const auto model = resolve_model(ctx.config.model);
  const Matrix sigma = asymptotic_covariance(model);

  // Monte Carlo cross-check of eta_t / sqrt(lambda t).
  const double lam_t = ctx.config.sigma_lambda_t;
  const double horizon = lam_t / model.rate;
  const long long trials = ctx.config.sigma_trials;
  const JumpSampler sampler(model);
  const int d = model.dim;
  std::vector<double> xs(trials), ys(trials, 0.0);
  parallel_trials(trials, ctx.config.workers, [&](long long i) {
    Rng rng(ctx.config.seed, static_cast<std::uint64_t>(i));
    const auto w = single_walk_terminal(sampler, model.rate, horizon, 0, rng);
    xs[i] = w.x / std::sqrt(lam_t);
    if (d == 2) ys[i] = w.y / std::sqrt(lam_t);
  });
  Matrix emp = Matrix::Zero(d, d);
  double mx = 0, my = 0;
  for (long long i = 0; i < trials; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= trials;
  my /= trials;
  for (long long i = 0; i < trials; ++i) {
    emp(0, 0) += (xs[i] - mx) * (xs[i] - mx);
    if (d == 2) {
      emp(1, 1) += (ys[i] - my) * (ys[i] - my);
      emp(0, 1) += (xs[i] - mx) * (ys[i] - my);
    }
  }
  emp /= static_cast<double>(trials - 1);
  if (d == 2) emp(1, 0) = emp(0, 1);

  json j;
  j["model"] = ctx.config.model;
  j["sigma"] = matrix_to_json(sigma);
  j["sigma_monte_carlo"] = matrix_to_json(emp);
  j["lambda_t"] = lam_t;
  j["trials"] = trials;
  // 3 combined standard errors per entry (variance-of-variance ~ 2 sigma^4 / n).
  bool ok = true;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const double se = std::sqrt((sigma(a, a) * sigma(b, b) + sigma(a, b) * sigma(a, b)) /
                                  static_cast<double>(trials));
      if (std::abs(emp(a, b) - sigma(a, b)) > 3.0 * se) ok = false;
    }
  }
  j["within_3se"] = ok;
  const auto p = ctx.path("sigma.json");
  std::ofstream(p) << j.dump(2) << "\n";
  ctx.note_output(p);
  std::cout << "sigma =\n" << sigma << "\nMC agreement within 3 SE: " << (ok ? "yes" : "NO")
            << "\n";
  return 0;
}

int run_llt_check(RunContext& ctx) {
  const auto model = resolve_model(ctx.config.model);
  CsvWriter csv(ctx.path("llt.csv").string(), {"t", "lambda_t", "error_sum", "error_sup"});
  std::vector<double> lts, sums, sups;
  for (const double t : ctx.config.llt_t_grid) {
    const auto r = llt_error(model, t / model.rate, ctx.config.llt_initial_state);
    csv.row({r.t, r.lambda_t, r.error_sum, r.error_sup});
    lts.push_back(r.lambda_t);
    sums.push_back(r.error_sum);
    sups.push_back(r.error_sup);
    std::cout << "lambda_t = " << r.lambda_t << ": error_sum = " << r.error_sum
              << ", error_sup = " << r.error_sup << "\n";
  }
  csv.close();
  ctx.note_output(ctx.path("llt.csv"));
  const auto fit_sup = fit_rate(lts, sups);
  const auto fit_sum = fit_rate(lts, sums);
  json j;
  j["model"] = ctx.config.model;
  j["rate_exponent_sup"] = fit_sup.exponent;
  j["rate_exponent_sup_ci"] = {fit_sup.ci_lo, fit_sup.ci_hi};
  j["rate_exponent_sum"] = fit_sum.exponent;
  j["rate_exponent_sum_ci"] = {fit_sum.ci_lo, fit_sum.ci_hi};
  j["expected_exponent"] = -(model.dim + 1) / 2.0;
  const auto p = ctx.path("llt.json");
  std::ofstream(p) << j.dump(2) << "\n";
  ctx.note_output(p);
  std::cout << "fitted exponent (sup metric): " << fit_sup.exponent << "  [" << fit_sup.ci_lo
            << ", " << fit_sup.ci_hi << "]\n";
  return 0;
}

int run_return_tail(RunContext& ctx) {
  const auto model = resolve_model(ctx.config.model);
  const auto res =
      first_return_tail(model, ctx.config.tail_t_grid, ctx.config.tail_trials, ctx.config.seed,
                        ctx.config.workers, ctx.config.tail_t_max);
  CsvWriter csv(ctx.path("return_tail.csv").string(),
                {"t", "survivors", "tail_est", "tail_est_times_log", "ci_lo", "ci_hi"});
  for (const auto& pt : res.points) {
    csv.row({pt.t, static_cast<double>(pt.survivors), pt.tail, pt.tail_times_log, pt.ci_lo,
             pt.ci_hi});
    std::cout << "t = " << pt.t << ": tail = " << pt.tail << ", tail*log = " << pt.tail_times_log
              << (pt.low_survivors ? "  (low survivors)" : "") << "\n";
  }
  csv.close();
  ctx.note_output(ctx.path("return_tail.csv"));
  json j;
  j["constant_2pi_sqrt_det_sigma"] = res.constant;
  j["trials"] = res.trials;
  j["t_max"] = res.t_max;
  const auto p = ctx.path("return_tail.json");
  std::ofstream(p) << j.dump(2) << "\n";
  ctx.note_output(p);
  std::cout << "2 pi sqrt|sigma| = " << res.constant << "\n";
  return 0;
}

int run_simulate_duet(RunContext& ctx) {
  const auto model = resolve_model(ctx.config.model);
  const auto kernel = make_kernel(ctx.config.kernel);
  const double lt0 = EnergySplit{ctx.config.duet_lambda0}.lambda_tilde();

  std::vector<double> horizons;
  if (!ctx.config.duet_horizons.empty()) {
    for (const double h : ctx.config.duet_horizons) horizons.push_back(h / lt0);
  } else {
    horizons.push_back(ctx.config.duet_t_events / lt0);
  }
  std::sort(horizons.begin(), horizons.end());

  DuetState j0;
  j0.lambda = ctx.config.duet_lambda0;
  DuetOptions opts;
  opts.max_events = ctx.config.duet_max_events;
  const auto table = last_collision_ensemble(model, kernel, j0, horizons,
                                             ctx.config.duet_trials, ctx.config.seed,
                                             ctx.config.workers, opts);

  for (std::size_t h = 0; h < table.horizons.size(); ++h) {
    const std::string name =
        table.horizons.size() == 1 ? "duet.csv" : "duet_h" + std::to_string(h) + ".csv";
    CsvWriter csv(ctx.path(name).string(),
                  {"trial", "tau_over_t", "eta_c_over_sqrt_t", "lambda_out", "x1", "y1", "eps1",
                   "x2", "y2", "eps2", "n_collisions"});
    const auto& rows = table.rows[h];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      csv.row({static_cast<double>(i), r.tau_over_t, r.eta_c_over_sqrt_t, r.lambda_out, r.x1,
               r.y1, static_cast<double>(r.eps1), r.x2, r.y2, static_cast<double>(r.eps2),
               static_cast<double>(r.n_collisions)});
    }
    csv.close();
    ctx.note_output(ctx.path(name));
    std::cout << "horizon t = " << table.horizons[h]
              << " (events ~ " << table.horizons[h] * lt0
              << "): zero-collision trials = " << table.zero_collision_trials[h] << "\n";
  }
  return 0;
}

int run_renewal(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto tail = tail_by_name(c.renewal_tail);
  const std::string cls = tail.tail_class == TailClass::SlowlyVarying  ? "slowly_varying"
                          : tail.tail_class == TailClass::RegularlyVarying
                              ? "regularly_varying"
                              : "light";
  if (c.renewal_task == "age") {
    const auto chain = energy_chain(make_kernel(c.kernel), c.renewal_a, c.renewal_b);
    const STMRP p{tail, chain, c.renewal_lambda0};
    const auto rows = age_residual_law(p, c.renewal_t_grid, c.renewal_trials, c.seed, c.workers);
    CsvWriter csv(ctx.path("renewal_age.csv").string(),
                  {"t", "age_q10", "age_median", "age_q90", "residual_q10", "residual_median",
                   "residual_q90"});
    for (const auto& r : rows) {
      csv.row({r.t, r.age_q10, r.age_median, r.age_q90, r.residual_q10, r.residual_median,
               r.residual_q90});
      std::cout << "t = " << r.t << ": median age/t = " << r.age_median << "\n";
    }
    csv.close();
    ctx.note_output(ctx.path("renewal_age.csv"));
  } else if (c.renewal_task == "type") {
    const auto chain = energy_chain(make_kernel(c.kernel), c.renewal_a, c.renewal_b);
    const STMRP p{tail, chain, c.renewal_lambda0};
    CsvWriter csv(ctx.path("renewal_type.csv").string(),
                  {"t", "statistic", "ci_lo", "ci_hi", "tail_class"});
    for (const double t : c.renewal_t_grid) {
      const auto types = current_type_law(p, t, c.renewal_trials, c.seed, c.workers);
      double ks = -1.0;
      if (chain.stationary_cdf) ks = ks_statistic(types, chain.stationary_cdf);
      const double noise = 1.0 / std::sqrt(static_cast<double>(types.size()));
      csv.raw_row(format_double(t) + "," + format_double(ks) + "," +
                  format_double(std::max(0.0, ks - 3 * noise)) + "," +
                  format_double(ks + 3 * noise) + "," + cls);
      std::cout << "t = " << t << ": KS(Phi, rho_s) = " << ks << "\n";
    }
    csv.close();
    ctx.note_output(ctx.path("renewal_type.csv"));
  } else if (c.renewal_task == "order") {
    const auto r = order_statistic_dominance(tail, c.renewal_order_n, c.renewal_trials, c.seed,
                                             c.workers);
    CsvWriter csv(ctx.path("renewal_order.csv").string(),
                  {"n", "statistic", "ci_lo", "ci_hi", "tail_class"});
    csv.raw_row(format_double(static_cast<double>(c.renewal_order_n)) + "," +
                format_double(r.median_gap_ratio) + ",," + "," + cls);
    csv.raw_row(format_double(static_cast<double>(c.renewal_order_n)) + "," +
                format_double(r.median_sum_over_max) + ",," + "," + cls);
    csv.close();
    ctx.note_output(ctx.path("renewal_order.csv"));
    std::cout << "median gap ratio = " << r.median_gap_ratio
              << ", median sum/max = " << r.median_sum_over_max << "\n";
  } else if (c.renewal_task == "tauberian") {
    const auto r = tauberian_checks(tail, c.renewal_z_grid, c.renewal_t_grid, c.renewal_trials,
                                    c.seed, c.workers);
    CsvWriter csv(ctx.path("renewal_tauberian.csv").string(),
                  {"z_or_t", "statistic", "ci_lo", "ci_hi", "tail_class"});
    for (const auto& pt : r.laplace) {
      csv.raw_row(format_double(pt.z) + "," + format_double(pt.ratio_to_tail) + ",," + "," + cls);
      std::cout << "z = " << pt.z << ": (1-phi)/tail = " << pt.ratio_to_tail << "\n";
    }
    for (const auto& pt : r.renewal) {
      csv.raw_row(format_double(pt.t) + "," + format_double(pt.u_times_tail) + "," +
                  format_double(pt.ci_lo) + "," + format_double(pt.ci_hi) + "," + cls);
      std::cout << "t = " << pt.t << ": U(t)(1-F(t)) = " << pt.u_times_tail << "\n";
    }
    csv.close();
    ctx.note_output(ctx.path("renewal_tauberian.csv"));
  } else {
    throw std::runtime_error("unknown renewal task '" + c.renewal_task + "'");
  }
  return 0;
}

std::vector<MixtureSample> load_duet_samples(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open duet CSV '" + csv_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty duet CSV");
  std::vector<MixtureSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 11> v{};
    std::size_t pos = 0;
    for (int c = 0; c < 11; ++c) {
      const auto comma = line.find(',', pos);
      v[c] = std::stod(line.substr(pos, comma - pos));
      pos = comma == std::string::npos ? line.size() : comma + 1;
    }
    MixtureSample s;
    s.x1 = {v[4], v[5]};
    s.u1 = static_cast<int>(v[6]);
    s.x2 = {v[7], v[8]};
    s.u2 = static_cast<int>(v[9]);
    out.push_back(s);
  }
  return out;
}

int run_mixture_test(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto model = resolve_model(c.model);
  const auto kernel = make_kernel(c.kernel);
  if (c.mixture_duet_csv.empty()) {
    throw std::runtime_error("mixture-test needs mixture_test.duet_csv (output of simulate-duet)");
  }
  const auto simulated = load_duet_samples(c.mixture_duet_csv);

  EnergyLawRep rho_s;
  if (kernel.has_closed_form()) {
    rho_s = uniform_energy_rho_s();
  } else {
    const EnergyChain chain{kernel};
    auto est = stationary_energy(chain, StationaryMethod::LongRun, 200000, c.seed ^ 0xE5);
    rho_s = empirical_energy(std::move(est.sample));
  }
  const auto law = make_mixture_law(model, std::move(rho_s));
  Rng rng(c.seed, 0xF17);
  const auto reference = sample_mixture(law, c.mixture_n, rng);

  Rng prng(c.seed, 0xFE9);
  const auto fit = two_sample_fit(simulated, reference, c.mixture_permutations, prng, model.grid,
                                  c.mixture_pair_cap);

  json j;
  j["energy_statistic"] = fit.energy_statistic;
  j["p_value"] = fit.p_value;
  j["permutations"] = fit.permutations;
  j["n_simulated"] = fit.n_a;
  j["n_reference"] = fit.n_b;
  j["pair_cap"] = fit.pair_cap;
  j["ks_marginals"] = {fit.ks_x[0], fit.ks_x[1], fit.ks_x[2], fit.ks_x[3]};
  j["state_tv"] = {fit.state_tv1, fit.state_tv2};
  j["energy_corr_simulated"] = {{"value", fit.energy_corr_a.value},
                                {"lo", fit.energy_corr_a.lo},
                                {"hi", fit.energy_corr_a.hi}};
  j["energy_corr_reference"] = {{"value", fit.energy_corr_b.value},
                                {"lo", fit.energy_corr_b.lo},
                                {"hi", fit.energy_corr_b.hi}};
  j["corr_signs_agree"] = fit.corr_signs_agree;
  const auto p = ctx.path("mixture_fit.json");
  std::ofstream(p) << j.dump(2) << "\n";
  ctx.note_output(p);

  CsvWriter csv(ctx.path("mixture_marginals.csv").string(), {"marginal", "ks"});
  const char* names[4] = {"x1_x", "x1_y", "x2_x", "x2_y"};
  for (int k = 0; k < 4; ++k) csv.raw_row(std::string(names[k]) + "," + format_double(fit.ks_x[k]));
  csv.close();
  ctx.note_output(ctx.path("mixture_marginals.csv"));

  std::cout << "energy-distance p = " << fit.p_value
            << ", corr(sim) = " << fit.energy_corr_a.value
            << " [" << fit.energy_corr_a.lo << ", " << fit.energy_corr_a.hi << "]\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"random walks with internal states: simulation and verification toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> workers_flag;
  std::optional<std::string> out_flag;
  std::optional<std::string> model_flag;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--seed", seed_flag, "master seed (overrides config)");
  app.add_option("--workers", workers_flag, "worker threads (overrides config)");
  app.add_option("--out", out_flag, "output directory (overrides config)");
  app.add_option("--model", model_flag, "builtin model name or model file (overrides config)");

  for (const auto* name : {"validate", "sigma", "llt-check", "return-tail", "simulate-duet",
                           "renewal", "mixture-test"}) {
    app.add_subcommand(name)->fallthrough();  // accept the global flags after the verb
  }

  CLI11_PARSE(app, argc, argv);

  try {
    RunContext ctx;
    if (!config_path.empty()) ctx.config = load_config(config_path);
    if (seed_flag) ctx.config.seed = *seed_flag;
    if (workers_flag) ctx.config.workers = *workers_flag;
    if (out_flag) ctx.config.out = *out_flag;
    if (model_flag) ctx.config.model = *model_flag;
    if (const char* env_out = std::getenv("RWIS_OUT")) ctx.config.out = env_out;

    ctx.subcommand = app.get_subcommands().front()->get_name();
    ctx.out_dir = ctx.config.out;
    fs::create_directories(ctx.out_dir);

    int status = 0;
    if (ctx.subcommand == "validate") {
      status = run_validate(ctx);
    } else if (ctx.subcommand == "sigma") {
      status = run_sigma(ctx);
    } else if (ctx.subcommand == "llt-check") {
      status = run_llt_check(ctx);
    } else if (ctx.subcommand == "return-tail") {
      status = run_return_tail(ctx);
    } else if (ctx.subcommand == "simulate-duet") {
      status = run_simulate_duet(ctx);
    } else if (ctx.subcommand == "renewal") {
      status = run_renewal(ctx);
    } else if (ctx.subcommand == "mixture-test") {
      status = run_mixture_test(ctx);
    }
    ctx.write_manifest();
    return status;
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
