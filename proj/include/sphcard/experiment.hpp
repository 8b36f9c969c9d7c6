#pragma once

// Monte Carlo experiment harness: empirical size tables, power tables, and
// finite-sample spread of the estimators against their asymptotic standard
// deviations.  A run is a pure function of (spec, seed): cells, replicates,
// and bootstrap draws all get their streams from fixed substream keys, so
// rerunning a spec reproduces the report byte for byte.

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <Eigen/Dense>

#include <sphcard/cardioid.hpp>
#include <sphcard/common.hpp>
#include <sphcard/estimation.hpp>
#include <sphcard/gof.hpp>
#include <sphcard/io.hpp>
#include <sphcard/rng.hpp>
#include <sphcard/sampling.hpp>

namespace sphcard {

enum class ExperimentKind { size_table, power_table, asymptotics };

struct StatVariant {
  GofWeight weight = GofWeight::cvm;
  GofLambda lambda = GofLambda::unif;
};

// One grid cell: data are C_k(mu0, rho) on S^d with n observations; the
// goodness-of-fit null is the order-k0 family (k0 == k in a size table).
struct ExperimentCell {
  int d = 1;
  int k = 1;
  int k0 = 1;
  double rho = 0.5;
  long n = 100;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::size_table;
  std::vector<ExperimentCell> grid;
  int replications = 200;   // M
  int bootstrap_reps = 99;  // B, size and power tables only
  int mc_directions = 50;   // K for direction-sampled statistics
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::vector<StatVariant> variants = {{GofWeight::cvm, GofLambda::unif}};
};

struct ExperimentReport {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) os << ',';
      os << header[i];
    }
    os << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << row[i];
      }
      os << '\n';
    }
    return os.str();
  }
};

inline std::string weight_name(GofWeight w) {
  return w == GofWeight::cvm ? "cvm" : "ad";
}

inline std::string lambda_name(GofLambda l) {
  switch (l) {
    case GofLambda::unif: return "unif";
    case GofLambda::empirical_pn: return "pn";
    case GofLambda::cardioid_null: return "null";
  }
  return "unknown";
}

namespace detail {

constexpr std::uint64_t kExperimentDataTag = 0xDA7A;
constexpr std::uint64_t kExperimentTestTag = 0x5EED;

// Truth location used by every cell: the pole of the ambient space.
inline UnitVector experiment_pole(int d) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d + 1);
  v[d] = 1.0;
  return UnitVector(v);
}

inline std::optional<Estimator> matched_moment_estimator(int k0) {
  if (k0 == 1) return Estimator::mm1;
  if (k0 == 2) return Estimator::mm2;
  return std::nullopt;
}

inline void validate_experiment(const ExperimentSpec& spec) {
  if (spec.grid.empty()) throw std::domain_error("experiment: empty grid");
  if (spec.replications < 1) throw std::domain_error("experiment: M must be >= 1");
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw std::domain_error("experiment: alpha must lie in (0, 1)");
  }
  if (spec.kind != ExperimentKind::asymptotics) {
    if (spec.bootstrap_reps < 19) throw std::domain_error("experiment: B must be >= 19");
    if (spec.mc_directions < 1) throw std::domain_error("experiment: K must be >= 1");
    if (spec.variants.empty()) throw std::domain_error("experiment: no statistic variants");
  }
  for (const auto& c : spec.grid) {
    validate_basis(PolyBasis{c.d, c.k});
    if (c.k < 1 || c.k0 < 1) throw std::domain_error("experiment: orders must be >= 1");
    if (c.n < 2) throw std::domain_error("experiment: n must be >= 2");
    if (std::fabs(c.rho) > 1.0) throw std::domain_error("experiment: |rho| must be <= 1");
    if (spec.kind == ExperimentKind::power_table && c.k == c.k0) {
      throw std::domain_error("experiment: power cells need k != k0");
    }
    if (spec.kind == ExperimentKind::size_table && c.k != c.k0) {
      throw std::domain_error("experiment: size cells need k == k0");
    }
  }
}

struct SpreadAccum {
  std::vector<double> mu1_err;  // sqrt(n) * (mu_hat[0] - mu0[0])
  std::vector<double> rho_err;  // sqrt(n) * (rho_hat - rho)
  long failed = 0;
};

inline double vec_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double vec_sd(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = vec_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// --- Size and power tables ------------------------------------------------

namespace detail {

inline void run_rejection_cell(const ExperimentSpec& spec, std::size_t cell_idx,
                               ExperimentReport& report) {
  const ExperimentCell& cell = spec.grid[cell_idx];
  const std::string kind =
      spec.kind == ExperimentKind::size_table ? "size" : "power";
  std::vector<std::string> base = {
      kind,
      std::to_string(cell.d),
      std::to_string(cell.k),
      std::to_string(cell.k0),
      fmt_shortest(cell.rho),
      std::to_string(cell.n),
      std::to_string(spec.replications),
      std::to_string(spec.bootstrap_reps),
      fmt_shortest(spec.alpha),
  };
  const auto est = matched_moment_estimator(cell.k0);
  if (!est) {
    for (const auto& var : spec.variants) {
      auto row = base;
      row.push_back(weight_name(var.weight));
      row.push_back(lambda_name(var.lambda));
      row.insert(row.end(), {"", "", "", "", "", "skipped",
                             "no matched-order moment estimator for k0 >= 3"});
      report.rows.push_back(std::move(row));
    }
    return;
  }
  const long min_n = *est == Estimator::mm2 ? cell.d + 1 : 2;
  if (cell.n < min_n) {
    for (const auto& var : spec.variants) {
      auto row = base;
      row.push_back(weight_name(var.weight));
      row.push_back(lambda_name(var.lambda));
      row.insert(row.end(),
                 {"", "", "", "", "", "skipped", "n too small for the estimator"});
      report.rows.push_back(std::move(row));
    }
    return;
  }

  const CardioidParams truth(cell.d, cell.k, experiment_pole(cell.d), cell.rho);
  RngStream root(spec.seed);
  std::vector<long> rejections(spec.variants.size(), 0);
  std::vector<long> failures(spec.variants.size(), 0);
  for (int m = 0; m < spec.replications; ++m) {
    RngStream data_rng = root.substream(
        {kExperimentDataTag, static_cast<std::uint64_t>(cell_idx),
         static_cast<std::uint64_t>(m)});
    SphereSample s = sample(truth, cell.n, data_rng);
    for (std::size_t v = 0; v < spec.variants.size(); ++v) {
      GofConfig cfg;
      cfg.weight = spec.variants[v].weight;
      cfg.lambda = spec.variants[v].lambda;
      cfg.mc_directions = spec.mc_directions;
      cfg.bootstrap_reps = spec.bootstrap_reps;
      cfg.estimator = *est;
      RngStream seed_rng = root.substream(
          {kExperimentTestTag, static_cast<std::uint64_t>(cell_idx),
           static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(m)});
      cfg.seed = seed_rng.next_u64();
      try {
        GofResult res = bootstrap_test(s, cell.k0, cfg);
        if (res.pvalue <= spec.alpha) ++rejections[v];
      } catch (const std::exception&) {
        ++failures[v];
      }
    }
  }
  for (std::size_t v = 0; v < spec.variants.size(); ++v) {
    auto row = base;
    row.push_back(weight_name(spec.variants[v].weight));
    row.push_back(lambda_name(spec.variants[v].lambda));
    row.push_back(estimator_name(*est));
    const long eff = spec.replications - failures[v];
    row.push_back(std::to_string(eff));
    if (eff > 0) {
      const double p = static_cast<double>(rejections[v]) / static_cast<double>(eff);
      const double half = 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(eff));
      row.push_back(fmt_shortest(100.0 * p));
      row.push_back(fmt_shortest(100.0 * std::max(0.0, p - half)));
      row.push_back(fmt_shortest(100.0 * std::min(1.0, p + half)));
      row.push_back("ok");
      row.push_back("");
    } else {
      row.insert(row.end(), {"", "", "", "skipped", "every replicate failed"});
    }
    report.rows.push_back(std::move(row));
  }
}

// --- Estimator spread against asymptotic standard deviations --------------

inline void run_asymptotics_cell(const ExperimentSpec& spec, std::size_t cell_idx,
                                 ExperimentReport& report) {
  const ExperimentCell& cell = spec.grid[cell_idx];
  std::vector<std::string> base = {
      "asymptotics",
      std::to_string(cell.d),
      std::to_string(cell.k),
      fmt_shortest(cell.rho),
      std::to_string(cell.n),
      std::to_string(spec.replications),
  };
  if (!(cell.rho > 0.0 && cell.rho < 1.0)) {
    auto row = base;
    row.insert(row.end(), {"", "", "", "", "", "", "skipped",
                           "asymptotics cells need rho in (0, 1)"});
    report.rows.push_back(std::move(row));
    return;
  }

  std::vector<Estimator> ests;
  if (auto mm = matched_moment_estimator(cell.k)) ests.push_back(*mm);
  ests.push_back(Estimator::ml);

  const UnitVector mu0 = experiment_pole(cell.d);
  const CardioidParams truth(cell.d, cell.k, mu0, cell.rho);
  const double sqn = std::sqrt(static_cast<double>(cell.n));
  const bool even_k = cell.k % 2 == 0;

  RngStream root(spec.seed);
  std::vector<SpreadAccum> acc(ests.size());
  for (int m = 0; m < spec.replications; ++m) {
    RngStream data_rng = root.substream(
        {kExperimentDataTag, static_cast<std::uint64_t>(cell_idx),
         static_cast<std::uint64_t>(m)});
    SphereSample s = sample(truth, cell.n, data_rng);
    for (std::size_t e = 0; e < ests.size(); ++e) {
      try {
        FitResult fit = [&]() {
          switch (ests[e]) {
            case Estimator::mm1: return fit_mm1(s);
            case Estimator::mm2: return fit_mm2(s, SignChoice::plus);
            default:
              // For even orders the likelihood has mirrored branches and
              // the true sign resolves which one the spread is measured on.
              return fit_ml(s, cell.k, std::nullopt,
                            even_k ? SignHint::plus : SignHint::automatic);
          }
        }();
        Eigen::VectorXd mu_hat = fit.params.mu.coords();
        if (even_k && mu_hat.dot(mu0.coords()) < 0.0) mu_hat = -mu_hat;
        acc[e].mu1_err.push_back(sqn * (mu_hat[0] - mu0.coords()[0]));
        acc[e].rho_err.push_back(sqn * (fit.params.rho - cell.rho));
      } catch (const std::exception&) {
        ++acc[e].failed;
      }
    }
  }

  for (std::size_t e = 0; e < ests.size(); ++e) {
    double asym_mu = std::numeric_limits<double>::quiet_NaN();
    double asym_rho = std::numeric_limits<double>::quiet_NaN();
    switch (ests[e]) {
      case Estimator::mm1:
        asym_mu = std::sqrt(sigma2_mm1_mu(cell.d, cell.rho));
        asym_rho = std::sqrt(sigma2_mm1_rho(cell.d, cell.rho));
        break;
      case Estimator::mm2:
        asym_mu = std::sqrt(sigma2_mm2_mu(cell.d, cell.rho));
        asym_rho = std::sqrt(sigma2_mm2_rho(cell.d, cell.rho));
        break;
      default: {
        FisherInfo info = fisher_info(cell.d, cell.k, cell.rho);
        asym_mu = std::sqrt(info.sigma2_mu());
        asym_rho = std::sqrt(info.sigma2_rho());
        break;
      }
    }
    const long eff = static_cast<long>(acc[e].mu1_err.size());
    for (int metric = 0; metric < 2; ++metric) {
      auto row = base;
      row.push_back(estimator_name(ests[e]));
      row.push_back(metric == 0 ? "sqrt_n_mu1_err" : "sqrt_n_rho_err");
      row.push_back(std::to_string(eff));
      if (eff >= 2) {
        const auto& vals = metric == 0 ? acc[e].mu1_err : acc[e].rho_err;
        row.push_back(fmt_shortest(vec_mean(vals)));
        row.push_back(fmt_shortest(vec_sd(vals)));
        row.push_back(fmt_shortest(metric == 0 ? asym_mu : asym_rho));
        row.push_back("ok");
        row.push_back("");
      } else {
        row.insert(row.end(), {"", "", "", "skipped", "too few successful fits"});
      }
      report.rows.push_back(std::move(row));
    }
  }
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  detail::validate_experiment(spec);
  ExperimentReport report;
  if (spec.kind == ExperimentKind::asymptotics) {
    report.header = {"kind", "d",         "k",    "rho",  "n",       "M",     "estimator",
                     "metric", "m_effective", "mean", "sd", "asym_sd", "status", "reason"};
    for (std::size_t c = 0; c < spec.grid.size(); ++c) {
      detail::run_asymptotics_cell(spec, c, report);
    }
  } else {
    report.header = {"kind",   "d",      "k",           "k0",         "rho",
                     "n",      "M",      "B",           "alpha",      "weight",
                     "lambda", "estimator", "m_effective", "reject_pct", "ci_lo_pct",
                     "ci_hi_pct", "status", "reason"};
    for (std::size_t c = 0; c < spec.grid.size(); ++c) {
      detail::run_rejection_cell(spec, c, report);
    }
  }
  return report;
}

// --- Spec JSON ------------------------------------------------------------

inline StatVariant variant_from_string(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::domain_error("experiment: variant must look like weight:lambda");
  }
  const std::string w = text.substr(0, colon);
  const std::string l = text.substr(colon + 1);
  StatVariant out;
  if (w == "cvm") out.weight = GofWeight::cvm;
  else if (w == "ad") out.weight = GofWeight::ad;
  else throw std::domain_error("experiment: unknown weight " + w);
  if (l == "unif") out.lambda = GofLambda::unif;
  else if (l == "pn") out.lambda = GofLambda::empirical_pn;
  else if (l == "null") out.lambda = GofLambda::cardioid_null;
  else throw std::domain_error("experiment: unknown lambda " + l);
  return out;
}

inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "size_table") spec.kind = ExperimentKind::size_table;
  else if (kind == "power_table") spec.kind = ExperimentKind::power_table;
  else if (kind == "asymptotics") spec.kind = ExperimentKind::asymptotics;
  else throw std::domain_error("experiment: unknown kind " + kind);
  for (const auto& cj : j.at("grid")) {
    ExperimentCell cell;
    cell.d = cj.at("d").get<int>();
    cell.k = cj.at("k").get<int>();
    cell.k0 = cj.contains("k0") ? cj.at("k0").get<int>() : cell.k;
    cell.rho = cj.at("rho").get<double>();
    cell.n = cj.at("n").get<long>();
    spec.grid.push_back(cell);
  }
  if (j.contains("M")) spec.replications = j.at("M").get<int>();
  if (j.contains("B")) spec.bootstrap_reps = j.at("B").get<int>();
  if (j.contains("K")) spec.mc_directions = j.at("K").get<int>();
  if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("variants")) {
    spec.variants.clear();
    for (const auto& vj : j.at("variants")) {
      spec.variants.push_back(variant_from_string(vj.get<std::string>()));
    }
  }
  return spec;
}

}  // namespace sphcard
