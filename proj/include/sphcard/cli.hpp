#pragma once

// Command line front end.  Single results leave as JSON, tables as CSV;
// every command is a pure function of its flags, so reruns are
// byte-identical.  Exit codes: 0 success, 2 degenerate estimate, 64 usage
// or data error, 70 internal numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include <sphcard/cardioid.hpp>
#include <sphcard/common.hpp>
#include <sphcard/estimation.hpp>
#include <sphcard/experiment.hpp>
#include <sphcard/geometry.hpp>
#include <sphcard/gof.hpp>
#include <sphcard/io.hpp>
#include <sphcard/rng.hpp>
#include <sphcard/sampling.hpp>

namespace sphcard::cli {

namespace detail_cli {

inline void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout.write(content.data(), static_cast<std::streamsize>(content.size()));
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::domain_error("cannot open output file " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline UnitVector pole(int d) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d + 1);
  v[d] = 1.0;
  return UnitVector(v);
}

inline UnitVector parse_unit(const std::string& text, int ambient_dim) {
  std::vector<double> vals;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, ',')) {
    double x = 0.0;
    if (!sphcard::detail::parse_double(cur, x)) {
      throw std::domain_error("cannot parse coordinate '" + cur + "'");
    }
    vals.push_back(x);
  }
  if (ambient_dim > 0 && static_cast<int>(vals.size()) != ambient_dim) {
    throw std::domain_error("expected " + std::to_string(ambient_dim) +
                            " comma-separated coordinates");
  }
  if (vals.size() < 2) throw std::domain_error("need at least 2 coordinates");
  Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vals.data(),
                                                  static_cast<Eigen::Index>(vals.size()));
  return UnitVector(v);
}

// Ingestion flags shared by the commands that read a sample.
struct IngestCli {
  std::string input;
  std::string format = "vectors_csv";
  double tol = 1e-6;
  bool degrees = false;
  bool radians = false;
  std::string exclude;

  void attach(CLI::App* cmd) {
    cmd->add_option("--input", input, "input sample file")->required();
    cmd->add_option("--format", format,
                    "vectors_csv | angles_csv_d1 | latlon_csv_d2 | "
                    "orbital_elements_csv | sphc")
        ->check(CLI::IsMember({"vectors_csv", "vectors", "angles_csv_d1", "angles",
                               "latlon_csv_d2", "latlon", "orbital_elements_csv",
                               "orbital", "sphc"}));
    cmd->add_option("--tol", tol, "norm tolerance for raw vector rows");
    cmd->add_flag("--degrees", degrees, "angle columns are in degrees");
    cmd->add_flag("--radians", radians, "angle columns are in radians");
    cmd->add_option("--exclude", exclude, "drop orbital rows whose name contains this");
  }

  LoadResult load() const {
    if (degrees && radians) {
      throw std::domain_error("--degrees and --radians are mutually exclusive");
    }
    if (format == "sphc") {
      return LoadResult{read_sample_sphc_file(input), {}, 0};
    }
    IngestSpec spec;
    spec.normalize_tol = tol;
    spec.exclude_pattern = exclude;
    if (format == "vectors_csv" || format == "vectors") {
      spec.format = IngestFormat::vectors_csv;
      spec.degrees = false;
    } else if (format == "angles_csv_d1" || format == "angles") {
      spec.format = IngestFormat::angles_csv_d1;
      spec.degrees = degrees;
    } else if (format == "latlon_csv_d2" || format == "latlon") {
      spec.format = IngestFormat::latlon_csv_d2;
      spec.degrees = degrees;
    } else {
      spec.format = IngestFormat::orbital_elements_csv;
      // Orbital catalogues quote angles in degrees unless told otherwise.
      spec.degrees = !radians;
    }
    LoadResult lr = load_sample_file(input, spec);
    for (const auto& [line, reason] : lr.dropped) {
      std::cerr << "note: dropped row " << line << ": " << reason << "\n";
    }
    if (lr.renormalized > 0) {
      std::cerr << "note: renormalized " << lr.renormalized << " rows\n";
    }
    return lr;
  }
};

inline SignHint hint_from_string(const std::string& s) {
  if (s == "+") return SignHint::plus;
  if (s == "-") return SignHint::minus;
  if (s == "auto") return SignHint::automatic;
  throw std::domain_error("--sign must be one of +, -, auto");
}

// "mm" picks the moment estimator whose order matches k.
inline Estimator resolve_estimator(const std::string& name, int k) {
  if (name == "mm") {
    if (k == 1) return Estimator::mm1;
    if (k == 2) return Estimator::mm2;
    throw std::domain_error("no moment estimator matches order k = " +
                            std::to_string(k) + "; use --estimator ml");
  }
  if (name == "mm1") {
    if (k != 1) throw std::domain_error("estimator mm1 requires --k 1");
    return Estimator::mm1;
  }
  if (name == "mm2") {
    if (k != 2) throw std::domain_error("estimator mm2 requires --k 2");
    return Estimator::mm2;
  }
  if (name == "gm") return Estimator::gm;
  if (name == "ml") return Estimator::ml;
  throw std::domain_error("unknown estimator " + name);
}

}  // namespace detail_cli

inline int run(int argc, const char* const* argv) {
  using sphcard::detail::fmt_17;
  using sphcard::detail::fmt_shortest;

  CLI::App app{"spherical cardioid distributions: sampling, fitting, testing"};
  app.require_subcommand(1);

  // --- sample -------------------------------------------------------------
  auto* c_sample = app.add_subcommand("sample", "draw observations from the model");
  struct {
    int d = 2;
    int k = 1;
    double rho = 0.0;
    std::string mu;
    long n = 0;
    std::uint64_t seed = 0;
    std::string sampler = "auto";
    bool binary = false;
    std::string out = "-";
  } sa;
  c_sample->add_option("--d", sa.d, "sphere dimension")->required();
  c_sample->add_option("--k", sa.k, "cosine order")->required();
  c_sample->add_option("--rho", sa.rho, "concentration in [-1, 1]")->required();
  c_sample->add_option("--mu", sa.mu, "location as comma-separated coordinates");
  c_sample->add_option("--n", sa.n, "number of observations")->required()
      ->check(CLI::NonNegativeNumber);
  c_sample->add_option("--seed", sa.seed, "stream seed");
  c_sample->add_option("--sampler", sa.sampler, "auto | rejection | rejection-free | inverse")
      ->check(CLI::IsMember({"auto", "rejection", "rejection-free", "inverse"}));
  c_sample->add_flag("--binary", sa.binary, "emit the binary columnar format");
  c_sample->add_option("--out", sa.out, "output path, - for stdout");
  c_sample->callback([&]() {
    const UnitVector mu =
        sa.mu.empty() ? detail_cli::pole(sa.d) : detail_cli::parse_unit(sa.mu, sa.d + 1);
    const CardioidParams p(sa.d, sa.k, mu, sa.rho);
    SphereSample s;
    if (sa.n == 0) {
      s.d = sa.d;
      s.points.resize(0, sa.d + 1);
    } else {
      SamplerKind kind = SamplerKind::automatic;
      if (sa.sampler == "rejection") kind = SamplerKind::rejection;
      else if (sa.sampler == "rejection-free") kind = SamplerKind::rejection_free_odd;
      else if (sa.sampler == "inverse") kind = SamplerKind::inverse_d2k2;
      RngStream rng(sa.seed);
      s = sample(p, sa.n, kind, rng);
    }
    std::ostringstream os;
    if (sa.binary) write_sample_sphc(os, s);
    else write_sample_csv(os, s);
    detail_cli::write_output(sa.out, os.str());
  });

  // --- density ------------------------------------------------------------
  auto* c_density = app.add_subcommand("density", "evaluate the density at sample points");
  struct {
    detail_cli::IngestCli in;
    int k = 1;
    double rho = 0.0;
    std::string mu;
    std::string out = "-";
  } de;
  de.in.attach(c_density);
  c_density->add_option("--k", de.k, "cosine order")->required();
  c_density->add_option("--rho", de.rho, "concentration in [-1, 1]")->required();
  c_density->add_option("--mu", de.mu, "location as comma-separated coordinates");
  c_density->add_option("--out", de.out, "output path, - for stdout");
  c_density->callback([&]() {
    LoadResult lr = de.in.load();
    const int d = lr.sample.d;
    const UnitVector mu =
        de.mu.empty() ? detail_cli::pole(d) : detail_cli::parse_unit(de.mu, d + 1);
    const CardioidParams p(d, de.k, mu, de.rho);
    std::ostringstream os;
    for (int c = 0; c <= d; ++c) os << 'x' << c << ',';
    os << "density\n";
    for (Eigen::Index i = 0; i < lr.sample.n(); ++i) {
      for (int c = 0; c <= d; ++c) os << fmt_17(lr.sample.points(i, c)) << ',';
      os << fmt_17(density(p, lr.sample.point(i))) << '\n';
    }
    detail_cli::write_output(de.out, os.str());
  });

  // --- fit ----------------------------------------------------------------
  auto* c_fit = app.add_subcommand("fit", "estimate location and concentration");
  struct {
    detail_cli::IngestCli in;
    int k = 1;
    std::string estimator = "ml";
    std::string sign = "auto";
    std::string mu;
    std::string out = "-";
  } fi;
  fi.in.attach(c_fit);
  c_fit->add_option("--k", fi.k, "cosine order")->required();
  c_fit->add_option("--estimator", fi.estimator, "mm1 | mm2 | gm | ml")
      ->check(CLI::IsMember({"mm1", "mm2", "gm", "ml"}));
  c_fit->add_option("--sign", fi.sign, "+ | - | auto, branch choice for even orders")
      ->check(CLI::IsMember({"+", "-", "auto"}));
  c_fit->add_option("--mu", fi.mu, "known location, required for gm");
  c_fit->add_option("--out", fi.out, "output path, - for stdout");
  c_fit->callback([&]() {
    const Estimator est = detail_cli::resolve_estimator(fi.estimator, fi.k);
    if (est == Estimator::gm && fi.mu.empty()) {
      throw std::domain_error("estimator gm needs a known location via --mu");
    }
    LoadResult lr = fi.in.load();
    FitResult r = [&]() {
      switch (est) {
        case Estimator::mm1:
          return fit_mm1(lr.sample);
        case Estimator::mm2:
          return fit_mm2(lr.sample, fi.sign == "-" ? SignChoice::minus : SignChoice::plus);
        case Estimator::gm:
          return fit_gm(lr.sample,
                        detail_cli::parse_unit(fi.mu, lr.sample.d + 1), fi.k);
        default:
          return fit_ml(lr.sample, fi.k, std::nullopt,
                        detail_cli::hint_from_string(fi.sign));
      }
    }();
    detail_cli::write_output(fi.out, fit_to_json(r).dump(2) + "\n");
  });

  // --- gof ----------------------------------------------------------------
  auto* c_gof = app.add_subcommand("gof", "projected-ecdf bootstrap test");
  struct {
    detail_cli::IngestCli in;
    int k = 1;
    std::string weight = "cvm";
    std::string lambda = "unif";
    int K = 50;
    int B = 100;
    std::uint64_t seed = 0;
    std::string estimator = "mm";
    std::string simple_null;
    double ci_alpha = 0.05;
    bool shared_directions = false;
    std::string out = "-";
  } go;
  go.in.attach(c_gof);
  c_gof->add_option("--k", go.k, "order of the null family")->required();
  c_gof->add_option("--weight", go.weight, "cvm | ad")
      ->check(CLI::IsMember({"cvm", "ad"}));
  c_gof->add_option("--lambda", go.lambda, "unif | pn | null, direction measure")
      ->check(CLI::IsMember({"unif", "pn", "null"}));
  c_gof->add_option("--K", go.K, "Monte Carlo directions");
  c_gof->add_option("--B", go.B, "bootstrap replicates");
  c_gof->add_option("--seed", go.seed, "stream seed");
  c_gof->add_option("--estimator", go.estimator, "mm | mm1 | mm2 | ml")
      ->check(CLI::IsMember({"mm", "mm1", "mm2", "ml"}));
  c_gof->add_option("--simple-null", go.simple_null,
                    "fixed null parameters as JSON, skips refitting");
  c_gof->add_option("--ci-alpha", go.ci_alpha, "level for the bootstrap interval");
  c_gof->add_flag("--shared-directions", go.shared_directions,
                  "reuse one direction set across bootstrap replicates");
  c_gof->add_option("--out", go.out, "output path, - for stdout");
  c_gof->callback([&]() {
    LoadResult lr = go.in.load();
    GofConfig cfg;
    cfg.weight = go.weight == "ad" ? GofWeight::ad : GofWeight::cvm;
    cfg.lambda = go.lambda == "pn"     ? GofLambda::empirical_pn
                 : go.lambda == "null" ? GofLambda::cardioid_null
                                       : GofLambda::unif;
    cfg.mc_directions = go.K;
    cfg.bootstrap_reps = go.B;
    cfg.seed = go.seed;
    cfg.estimator = detail_cli::resolve_estimator(go.estimator, go.k);
    cfg.ci_alpha = go.ci_alpha;
    cfg.shared_directions = go.shared_directions;
    if (!go.simple_null.empty()) {
      cfg.simple_null = params_from_json(nlohmann::json::parse(go.simple_null));
    }
    GofResult res = bootstrap_test(lr.sample, go.k, cfg);
    detail_cli::write_output(go.out, gof_to_json(res).dump(2) + "\n");
  });

  // --- are ----------------------------------------------------------------
  auto* c_are = app.add_subcommand("are", "efficiency of the explicit estimators");
  struct {
    int d = 1;
    int k = 1;
    double rho_min = 0.05;
    double rho_max = 0.95;
    int steps = 19;
    std::string out = "-";
  } ar;
  c_are->add_option("--d", ar.d, "sphere dimension")->required();
  c_are->add_option("--k", ar.k, "cosine order")->required();
  c_are->add_option("--rho-min", ar.rho_min, "grid start, in (0, 1)");
  c_are->add_option("--rho-max", ar.rho_max, "grid end, in (0, 1)");
  c_are->add_option("--steps", ar.steps, "number of grid points");
  c_are->add_option("--out", ar.out, "output path, - for stdout");
  c_are->callback([&]() {
    if (ar.steps < 1) throw std::domain_error("--steps must be >= 1");
    if (!(ar.rho_min > 0.0 && ar.rho_max < 1.0 && ar.rho_min <= ar.rho_max)) {
      throw std::domain_error("need 0 < rho-min <= rho-max < 1");
    }
    const bool has_mm = ar.k == 1 || ar.k == 2;
    std::ostringstream os;
    os << "rho,ARE_MM_mu,ARE_MM_rho,ARE_GM_rho\n";
    for (int i = 0; i < ar.steps; ++i) {
      const double t = ar.steps == 1 ? 0.0
                                     : static_cast<double>(i) /
                                           static_cast<double>(ar.steps - 1);
      const double rho = ar.rho_min + t * (ar.rho_max - ar.rho_min);
      os << fmt_shortest(rho) << ',';
      os << (has_mm ? fmt_shortest(are(ar.d, ar.k, rho, AreKind::mm_mu)) : "nan") << ',';
      os << (has_mm ? fmt_shortest(are(ar.d, ar.k, rho, AreKind::mm_rho)) : "nan") << ',';
      os << fmt_shortest(are(ar.d, ar.k, rho, AreKind::gm_rho)) << '\n';
    }
    detail_cli::write_output(ar.out, os.str());
  });

  // --- experiment ---------------------------------------------------------
  auto* c_exp = app.add_subcommand("experiment", "run a Monte Carlo study from a spec");
  struct {
    std::string spec_path;
    std::string out = "-";
  } ex;
  c_exp->add_option("--spec", ex.spec_path, "JSON experiment spec")->required();
  c_exp->add_option("--out", ex.out, "output path, - for stdout");
  c_exp->callback([&]() {
    std::ifstream f(ex.spec_path);
    if (!f) throw std::domain_error("cannot open spec file " + ex.spec_path);
    nlohmann::json j = nlohmann::json::parse(f);
    ExperimentReport report = run_experiment(experiment_spec_from_json(j));
    detail_cli::write_output(ex.out, report.to_csv());
  });

  // --- project ------------------------------------------------------------
  auto* c_proj = app.add_subcommand(
      "project", "projected ecdf against the model cdf along one direction");
  struct {
    detail_cli::IngestCli in;
    std::string params_json;
    int k = 1;
    double rho = 0.0;
    std::string mu;
    std::string gamma;
    std::string out = "-";
  } pr;
  pr.in.attach(c_proj);
  c_proj->add_option("--params", pr.params_json, "model parameters as JSON");
  c_proj->add_option("--k", pr.k, "cosine order, ignored when --params is given");
  c_proj->add_option("--rho", pr.rho, "concentration, ignored when --params is given");
  c_proj->add_option("--mu", pr.mu, "location, ignored when --params is given");
  c_proj->add_option("--gamma", pr.gamma, "projection direction")->required();
  c_proj->add_option("--out", pr.out, "output path, - for stdout");
  c_proj->callback([&]() {
    LoadResult lr = pr.in.load();
    const int d = lr.sample.d;
    const CardioidParams p = [&]() {
      if (!pr.params_json.empty()) {
        return params_from_json(nlohmann::json::parse(pr.params_json));
      }
      const UnitVector mu =
          pr.mu.empty() ? detail_cli::pole(d) : detail_cli::parse_unit(pr.mu, d + 1);
      return CardioidParams(d, pr.k, mu, pr.rho);
    }();
    if (p.d != d) {
      throw std::domain_error("parameter dimension does not match the sample");
    }
    const UnitVector gamma = detail_cli::parse_unit(pr.gamma, d + 1);
    std::vector<double> ts(static_cast<std::size_t>(lr.sample.n()));
    for (Eigen::Index i = 0; i < lr.sample.n(); ++i) {
      ts[static_cast<std::size_t>(i)] = lr.sample.points.row(i).dot(gamma.coords());
    }
    std::sort(ts.begin(), ts.end());
    std::ostringstream os;
    os << "proj,cdf,ecdf\n";
    const double n = static_cast<double>(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      os << fmt_17(ts[i]) << ',' << fmt_17(proj_cdf(p, gamma, ts[i])) << ','
         << fmt_17(static_cast<double>(i + 1) / n) << '\n';
    }
    detail_cli::write_output(pr.out, os.str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  } catch (const degenerate_error& e) {
    std::cerr << "degenerate: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
  return 0;
}

}  // namespace sphcard::cli
