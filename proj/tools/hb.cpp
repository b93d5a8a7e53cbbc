// Command-line front end: every experiment is a subcommand that writes a CSV
// artifact (header row + config-hash comment) and exits 0 when all built-in
// assertions pass. Exit codes: 1 assertion failure (failures.json written),
// 2 unknown subcommand, 3 malformed config/flags, 4 unwritable output,
// 5 capability/divergence error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hb/beta_polynomials.hpp"
#include "hb/bseries.hpp"
#include "hb/coefficients.hpp"
#include "hb/dynamics.hpp"
#include "hb/losses.hpp"
#include "hb/manifold.hpp"
#include "hb/rooted_trees.hpp"
#include "hb/util.hpp"

namespace {

constexpr int kExitAssert = 1;
constexpr int kExitUnknown = 2;
constexpr int kExitConfig = 3;
constexpr int kExitOutput = 4;
constexpr int kExitCapability = 5;

struct UnwritableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct CsvWriter {
  std::ofstream os;
  explicit CsvWriter(const std::string& path, std::uint64_t config_hash) {
    os.open(path);
    if (!os) throw UnwritableError("cannot open output file: " + path);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash));
    os << "# config_hash=" << buf << "\n";
  }
  void comment(const std::string& s) { os << "# " << s << "\n"; }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      os << cells[i] << (i + 1 < cells.size() ? "," : "\n");
  }
};

struct FailureLog {
  nlohmann::json failures = nlohmann::json::array();
  std::string out_path;

  void check(bool ok, const std::string& name, double measured,
             const std::string& requirement) {
    if (ok) return;
    failures.push_back({{"check", name},
                        {"measured", measured},
                        {"requirement", requirement}});
  }
  int finish() const {
    if (failures.empty()) return 0;
    std::filesystem::path dir =
        std::filesystem::path(out_path).parent_path();
    std::filesystem::path file = dir / "failures.json";
    std::ofstream os(file);
    os << failures.dump(2) << "\n";
    std::cerr << failures.size() << " assertion(s) failed; see "
              << file.string() << "\n";
    return kExitAssert;
  }
};

hb::Vec parse_vec(const std::string& s) {
  hb::Vec v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  return v;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read config file: " + path);
  return nlohmann::json::parse(is);
}

std::uint64_t flag_hash(const std::string& s) { return hb::fnv1a(s); }

int max_threads() {
  const char* env = std::getenv("HB_MAX_THREADS");
  if (!env) return 1;
  int v = std::atoi(env);
  return std::max(1, v);
}

// ---------------------------------------------------------------------------

int cmd_trees(int max_m, const std::string& out) {
  CsvWriter csv(out, flag_hash("trees;max_m=" + std::to_string(max_m)));
  csv.row({"m", "canonical_key", "sigma", "n_markings"});
  for (int m = 1; m <= max_m; ++m)
    for (const hb::RootedTree& t : hb::enumerate_trees(m))
      csv.row({std::to_string(m), t.canonical_key(),
               std::to_string(hb::symmetry_coefficient(t)),
               std::to_string(hb::enumerate_markings(t).size())});
  return 0;
}

int cmd_poly(const std::string& family, int max_m, const std::string& out) {
  CsvWriter csv(out, flag_hash("poly;family=" + family +
                               ";max_m=" + std::to_string(max_m)));
  if (family == "narayana" || family == "eulerian" || family == "v" ||
      family == "z") {
    csv.row({"m", "coefficient"});
    for (int m = 1; m <= max_m; ++m) {
      hb::BetaRational c = family == "narayana" ? hb::narayana(m)
                           : family == "eulerian" ? hb::eulerian(m)
                           : family == "v"         ? hb::v_inf(m)
                                                   : hb::z_inf(m);
      csv.row({std::to_string(m), "\"" + hb::to_string(c) + "\""});
    }
    return 0;
  }
  if (family == "e") {
    csv.row({"m", "canonical_key", "coefficient"});
    for (int m = 1; m <= max_m; ++m)
      for (const hb::RootedTree& t : hb::enumerate_trees(m))
        csv.row({std::to_string(m), t.canonical_key(),
                 "\"" + hb::to_string(hb::e_coefficient(t)) + "\""});
    return 0;
  }
  throw std::invalid_argument("poly: unknown family " + family);
}

int cmd_bseries(int order, double beta, const std::string& out) {
  auto [a, g] = hb::solve_a_g(order);
  hb::ExactSeries mem = hb::limiting_memoryless_series(order);
  hb::ExactSeries bea = hb::limiting_bea_series(order);
  CsvWriter csv(out, flag_hash("bseries;order=" + std::to_string(order) +
                               ";beta=" + fmt(beta)));
  csv.row({"m", "canonical_key", "a", "g", "memoryless", "bea",
           "bea_at_beta"});
  for (int m = 1; m <= order; ++m)
    for (const hb::RootedTree& t : hb::enumerate_trees(m))
      csv.row({std::to_string(m), t.canonical_key(),
               "\"" + hb::to_string(a.at(t)) + "\"",
               "\"" + hb::to_string(g.at(t)) + "\"",
               "\"" + hb::to_string(mem.at(t)) + "\"",
               "\"" + hb::to_string(bea.at(t)) + "\"",
               fmt(bea.at(t).eval_double(beta))});
  return 0;
}

int cmd_coeffs(const std::string& loss_path, double beta, int n, int order,
               const std::string& theta_csv, const std::string& out) {
  hb::LossConfig loss = hb::load_loss_config(load_json(loss_path));
  hb::Vec theta = parse_vec(theta_csv);
  hb::CoefficientContext ctx(beta, n, hb::constant_losses(loss.full), theta);
  CsvWriter csv(out,
                flag_hash("coeffs;loss=" + loss_path + ";beta=" + fmt(beta) +
                          ";n=" + std::to_string(n) +
                          ";order=" + std::to_string(order) +
                          ";theta=" + theta_csv));
  csv.row({"m", "route", "component", "value"});
  for (int m = 1; m <= order; ++m) {
    hb::Vec ts = hb::f_treesum(ctx, m);
    for (std::size_t i = 0; i < ts.size(); ++i)
      csv.row({std::to_string(m), "treesum", std::to_string(i), fmt(ts[i])});
    if (m <= 4) {
      hb::Vec rc = hb::f_recursive(ctx, m);
      for (std::size_t i = 0; i < rc.size(); ++i)
        csv.row(
            {std::to_string(m), "recursive", std::to_string(i), fmt(rc[i])});
    }
  }
  return 0;
}

int cmd_minibatch(const std::string& config_path, double beta, int batch_size,
                  int n, const std::string& theta_csv, const std::string& out,
                  FailureLog& log) {
  hb::LossConfig loss = hb::load_loss_config(load_json(config_path), batch_size);
  if (!loss.family)
    throw std::invalid_argument(
        "minibatch: config must define a per-sample family (lstsq)");
  hb::MiniBatchFamily& fam = *loss.family;
  hb::Vec theta = parse_vec(theta_csv);
  if (static_cast<int>(theta.size()) != loss.full->dim())
    throw std::invalid_argument("minibatch: theta dimension mismatch");
  CsvWriter csv(out, flag_hash("minibatch;config=" + config_path +
                               ";beta=" + fmt(beta) +
                               ";B=" + std::to_string(batch_size) +
                               ";n=" + std::to_string(n) +
                               ";theta=" + theta_csv));
  csv.row({"quantity", "component", "value"});
  hb::Mat sigma = hb::empirical_covariance(fam, theta);
  double trace = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) trace += sigma[i][i];
  csv.row({"covariance_trace", "0", fmt(trace)});
  hb::Vec gts = hb::grad_trace_covariance(fam, theta);
  for (std::size_t i = 0; i < gts.size(); ++i)
    csv.row({"grad_trace_covariance", std::to_string(i), fmt(gts[i])});
  auto [psi_eq, psi_neq] = hb::psi_coefficients(n);
  csv.row({"psi_eq", "0", fmt(psi_eq.eval_double(beta))});
  csv.row({"psi_neq", "0", fmt(psi_neq.eval_double(beta))});
  if (fam.sample_count() <= 8 &&
      (n + 1) * fam.batch_size() == fam.sample_count()) {
    hb::PermutationAverage avg =
        hb::permutation_average_f2(fam, theta, n, beta);
    double gap = 0.0;
    for (std::size_t i = 0; i < avg.mean.size(); ++i) {
      csv.row({"perm_mean_f2", std::to_string(i), fmt(avg.mean[i])});
      csv.row({"psi_prediction", std::to_string(i), fmt(avg.prediction[i])});
      gap = std::max(gap, std::fabs(avg.mean[i] - avg.prediction[i]));
    }
    csv.row({"perm_count", "0", std::to_string(avg.permutations)});
    log.check(gap <= 1e-10, "minibatch.permutation_average", gap, "<= 1e-10");
  }
  return 0;
}

int cmd_converge(const std::string& loss_path, const std::string& orders_csv,
                 const std::string& hgrid_csv, double beta, double horizon,
                 int batch_size, std::uint64_t seed, const std::string& out,
                 FailureLog& log) {
  nlohmann::json lj = load_json(loss_path);
  std::vector<int> orders;
  for (double v : parse_vec(orders_csv)) orders.push_back(static_cast<int>(v));
  hb::Vec hgrid = parse_vec(hgrid_csv);
  if (hgrid.size() < 3)
    throw std::invalid_argument("converge: need at least three h values");

  struct Task {
    int p;
    double h;
    double error = 0.0;
    std::exception_ptr err;
  };
  std::vector<Task> tasks;
  for (int p : orders)
    for (double hv : hgrid) tasks.push_back({p, hv, 0.0, nullptr});

  auto run_one = [&](Task& task) {
    try {
      hb::LossConfig loss = hb::load_loss_config(lj, batch_size);
      hb::RunConfig cfg;
      cfg.beta = beta;
      cfg.h = task.h;
      cfg.horizon = horizon;
      cfg.order = task.p;
      cfg.loss = loss.full;
      cfg.loss_tag = loss_path;
      cfg.seed = seed;
      cfg.theta0 = lj.value("theta0", hb::Vec(loss.full->dim(), 0.4));
      if (batch_size > 0 && loss.family) {
        cfg.family = loss.family;
        cfg.family->shuffle(seed);
      }
      task.error = hb::global_error(hb::hb_run(cfg), hb::memoryless_run(cfg));
    } catch (...) {
      task.err = std::current_exception();
    }
  };

  const int threads = std::min<int>(max_threads(), tasks.size());
  if (threads <= 1) {
    for (Task& t : tasks) run_one(t);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++)
          run_one(tasks[i]);
      });
    for (std::thread& t : pool) t.join();
  }
  for (const Task& t : tasks)
    if (t.err) std::rethrow_exception(t.err);

  CsvWriter csv(out, flag_hash("converge;loss=" + loss_path + ";orders=" +
                               orders_csv + ";h=" + hgrid_csv + ";beta=" +
                               fmt(beta) + ";T=" + fmt(horizon) + ";B=" +
                               std::to_string(batch_size) + ";seed=" +
                               std::to_string(seed)));
  csv.row({"p", "h", "error", "fitted_slope"});
  for (int p : orders) {
    std::vector<double> errs;
    for (const Task& t : tasks)
      if (t.p == p) errs.push_back(t.error);
    double slope = hb::order_estimate(
        std::vector<double>(hgrid.begin(), hgrid.end()), errs);
    for (std::size_t i = 0; i < hgrid.size(); ++i)
      csv.row({std::to_string(p), fmt(hgrid[i]), fmt(errs[i]), fmt(slope)});
    log.check(slope >= p - 0.3, "converge.order_" + std::to_string(p), slope,
              ">= p - 0.3");
  }
  return 0;
}

int cmd_flow(double beta, double h, double quad_a, int steps, double theta0,
             const std::string& out, FailureLog& log) {
  // 1-D quadratic L = a theta^2 / 2: flow interpolation of the
  // manifold-initialized heavy-ball iterate, with the iterate for comparison.
  auto [lp, lm] = hb::quad_roots(beta, h * quad_a);
  double v0 = ((lp.real() - 1.0 + h * quad_a) / (h * beta)) * theta0;
  CsvWriter csv(out, flag_hash("flow;beta=" + fmt(beta) + ";h=" + fmt(h) +
                               ";a=" + fmt(quad_a) +
                               ";steps=" + std::to_string(steps) +
                               ";theta0=" + fmt(theta0)));
  csv.comment("branch=principal(lambda_plus)");
  csv.row({"n", "t", "re", "im", "hb_theta"});
  double theta = theta0, v = v0, gap = 0.0;
  for (int n = 0; n <= steps; ++n) {
    double t = n * h;
    std::complex<double> flow =
        theta0 * std::exp((t / h) * std::log(lp));
    csv.row({std::to_string(n), fmt(t), fmt(flow.real()), fmt(flow.imag()),
             fmt(theta)});
    gap = std::max(gap, std::fabs(flow.real() - theta));
    v = beta * v - quad_a * theta;
    theta += h * v;
  }
  if (std::fabs(lp.imag()) < 1e-14)
    log.check(gap <= 1e-8, "flow.manifold_agreement", gap, "<= 1e-8");
  return 0;
}

int cmd_manifold(double beta, double h, const std::string& loss_path,
                 double radius, const std::string& out, FailureLog& log) {
  hb::LossConfig loss = hb::load_loss_config(load_json(loss_path));
  if (loss.full->dim() != 1)
    throw std::invalid_argument("manifold: loss must be 1-D");
  hb::ManifoldResult res =
      hb::manifold_fixed_point(*loss.full, beta, h, radius);
  CsvWriter csv(out, flag_hash("manifold;beta=" + fmt(beta) + ";h=" + fmt(h) +
                               ";loss=" + loss_path +
                               ";radius=" + fmt(radius)));
  csv.comment("iterations=" + std::to_string(res.iterations));
  csv.comment("converged=" + std::string(res.converged ? "true" : "false"));
  csv.comment("residual=" + fmt(res.residual));
  csv.comment("clamp_events=" + std::string(res.clamp_events ? "true" : "false"));
  csv.row({"zeta", "g"});
  for (std::size_t i = 0; i < res.g.vals.size(); ++i)
    csv.row({fmt(res.g.xmin + i * res.g.dx), fmt(res.g.vals[i])});
  log.check(res.converged, "manifold.converged", res.iterations, "< 500 iters");
  log.check(res.residual <= 1e-8, "manifold.residual", res.residual,
            "<= 1e-8");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heavy-ball memoryless-approximation experiments"};
  // --help only: the default -h short flag would collide with the --h option.
  app.set_help_flag("--help", "print usage");
  app.require_subcommand(1);

  static const std::vector<std::string> known = {
      "trees", "poly", "bseries", "coeffs",
      "minibatch", "converge", "flow", "manifold"};
  if (argc < 2 || std::find(known.begin(), known.end(),
                            std::string(argv[1])) == known.end()) {
    std::cerr << "unknown subcommand; expected one of: ";
    for (const std::string& s : known) std::cerr << s << " ";
    std::cerr << "\n";
    return kExitUnknown;
  }

  int max_m = 6, order = 4, n_index = 10, batch_size = 1, steps = 100;
  double beta = 0.5, h = 0.01, horizon = 1.0, quad_a = 1.0, theta_flow = 1.0,
         radius = 1.5;
  std::uint64_t seed = 0;
  std::string out = "out.csv", family = "narayana", loss_path, theta_csv = "1",
              orders_csv = "2,3", hgrid_csv = "0.02,0.01,0.005,0.0025";

  CLI::App* c_trees = app.add_subcommand("trees");
  c_trees->add_option("--max-m", max_m);
  c_trees->add_option("--out", out);

  CLI::App* c_poly = app.add_subcommand("poly");
  c_poly->add_option("--family", family);
  c_poly->add_option("--max-m", max_m);
  c_poly->add_option("--out", out);

  CLI::App* c_bseries = app.add_subcommand("bseries");
  c_bseries->add_option("--order", order);
  c_bseries->add_option("--beta-val", beta);
  c_bseries->add_option("--out", out);

  CLI::App* c_coeffs = app.add_subcommand("coeffs");
  c_coeffs->add_option("--loss", loss_path)->required();
  c_coeffs->add_option("--beta-val", beta);
  c_coeffs->add_option("--n", n_index);
  c_coeffs->add_option("--order", order);
  c_coeffs->add_option("--theta", theta_csv);
  c_coeffs->add_option("--out", out);

  CLI::App* c_mini = app.add_subcommand("minibatch");
  c_mini->add_option("--config", loss_path)->required();
  c_mini->add_option("--beta-val", beta);
  c_mini->add_option("--batch-size", batch_size);
  c_mini->add_option("--n", n_index);
  c_mini->add_option("--theta", theta_csv);
  c_mini->add_option("--out", out);

  CLI::App* c_conv = app.add_subcommand("converge");
  c_conv->add_option("--loss", loss_path)->required();
  c_conv->add_option("--orders", orders_csv);
  c_conv->add_option("--h-grid", hgrid_csv);
  c_conv->add_option("--beta-val", beta);
  c_conv->add_option("--horizon", horizon);
  c_conv->add_option("--batch-size", batch_size);
  c_conv->add_option("--seed", seed);
  c_conv->add_option("--out", out);

  CLI::App* c_flow = app.add_subcommand("flow");
  c_flow->add_option("--beta-val", beta);
  c_flow->add_option("--h", h);
  c_flow->add_option("--quadratic", quad_a);
  c_flow->add_option("--steps", steps);
  c_flow->add_option("--theta0", theta_flow);
  c_flow->add_option("--out", out);

  CLI::App* c_mani = app.add_subcommand("manifold");
  c_mani->add_option("--beta-val", beta);
  c_mani->add_option("--h", h);
  c_mani->add_option("--loss", loss_path)->required();
  c_mani->add_option("--radius", radius);
  c_mani->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  FailureLog log;
  log.out_path = out;
  try {
    int rc = 0;
    if (c_trees->parsed()) rc = cmd_trees(max_m, out);
    else if (c_poly->parsed()) rc = cmd_poly(family, max_m, out);
    else if (c_bseries->parsed()) rc = cmd_bseries(order, beta, out);
    else if (c_coeffs->parsed())
      rc = cmd_coeffs(loss_path, beta, n_index, order, theta_csv, out);
    else if (c_mini->parsed())
      rc = cmd_minibatch(loss_path, beta, batch_size, n_index, theta_csv, out,
                         log);
    else if (c_conv->parsed())
      rc = cmd_converge(loss_path, orders_csv, hgrid_csv, beta, horizon,
                        batch_size, seed, out, log);
    else if (c_flow->parsed())
      rc = cmd_flow(beta, h, quad_a, steps, theta_flow, out, log);
    else if (c_mani->parsed())
      rc = cmd_manifold(beta, h, loss_path, radius, out, log);
    if (rc != 0) return rc;
  } catch (const UnwritableError& e) {
    std::cerr << e.what() << "\n";
    return kExitOutput;
  } catch (const hb::CapabilityError& e) {
    std::cerr << e.what() << "\n";
    return kExitCapability;
  } catch (const hb::DivergedError& e) {
    std::cerr << e.what() << "\n";
    return kExitCapability;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  return log.finish();
}
