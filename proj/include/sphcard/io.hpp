#pragma once

// Serialization and ingestion.  Parameters, fit results, and test results
// travel as JSON; samples travel as CSV (17 significant digits, enough to
// reproduce every double bit for bit) or as a compact binary columnar
// format tagged "SPHC".  Ingestion accepts raw unit vectors plus three
// angle conventions, validates row by row, and reports what it dropped
// instead of failing wholesale.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <Eigen/Dense>

#include <sphcard/cardioid.hpp>
#include <sphcard/common.hpp>
#include <sphcard/estimation.hpp>
#include <sphcard/geometry.hpp>
#include <sphcard/gof.hpp>
#include <sphcard/sampling.hpp>

namespace sphcard {

// --- Number formatting ----------------------------------------------------

namespace detail {

// Shortest decimal string that parses back to the same double.
inline std::string fmt_shortest(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

// Fixed 17 significant digits; also round-trips exactly.
inline std::string fmt_17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 40> buf{};
  int len = std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return std::string(buf.data(), static_cast<std::size_t>(len));
}

inline bool parse_double(std::string_view text, double& out) {
  const char* b = text.data();
  const char* e = b + text.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  if (b == e) return false;
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

// --- Parameter JSON -------------------------------------------------------

inline nlohmann::json params_to_json(const CardioidParams& p) {
  nlohmann::json j;
  j["d"] = p.d;
  j["k"] = p.k;
  std::vector<double> mu(p.mu.coords().data(), p.mu.coords().data() + p.mu.coords().size());
  j["mu"] = mu;
  j["rho"] = p.rho;
  return j;
}

inline CardioidParams params_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("d") || !j.contains("k") || !j.contains("mu") ||
      !j.contains("rho")) {
    throw std::domain_error("params_from_json: need keys d, k, mu, rho");
  }
  const int d = j.at("d").get<int>();
  const int k = j.at("k").get<int>();
  const auto mu_vals = j.at("mu").get<std::vector<double>>();
  if (static_cast<int>(mu_vals.size()) != d + 1) {
    throw std::domain_error("params_from_json: mu must have d + 1 entries");
  }
  Eigen::VectorXd mu(d + 1);
  for (int i = 0; i <= d; ++i) mu[i] = mu_vals[static_cast<std::size_t>(i)];
  return CardioidParams(d, k, UnitVector(mu), j.at("rho").get<double>());
}

// --- Fit and test-result JSON --------------------------------------------

inline std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::mm1: return "mm1";
    case Estimator::mm2: return "mm2";
    case Estimator::gm: return "gm";
    case Estimator::ml: return "ml";
  }
  return "unknown";
}

inline nlohmann::json fit_to_json(const FitResult& r) {
  nlohmann::json j;
  j["estimator"] = estimator_name(r.estimator);
  j["params"] = params_to_json(r.params);
  j["sigma2_mu"] = r.sigma2_mu;
  j["sigma2_rho"] = r.sigma2_rho;
  j["truncated"] = r.truncated;
  j["iterations"] = r.iterations;
  j["loglik"] = r.loglik;
  j["diagnostics"] = r.diagnostics;
  return j;
}

inline nlohmann::json gof_to_json(const GofResult& r) {
  nlohmann::json j;
  j["statistic"] = r.statistic;
  j["statistic_se"] = r.statistic_se;
  j["pvalue"] = r.pvalue;
  j["B_effective"] = r.b_effective;
  j["failed_replicates"] = r.failed_replicates;
  j["boot_stats"] = r.boot_stats;
  if (r.fitted) j["fitted"] = fit_to_json(*r.fitted);
  if (r.ci_rho) j["ci_rho"] = {r.ci_rho->first, r.ci_rho->second};
  if (r.cap_mu) j["cap_mu_threshold"] = *r.cap_mu;
  return j;
}

// --- Sample CSV -----------------------------------------------------------

inline void write_sample_csv(std::ostream& os, const SphereSample& s) {
  for (int c = 0; c <= s.d; ++c) {
    if (c) os << ',';
    os << 'x' << c;
  }
  os << '\n';
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    for (int c = 0; c <= s.d; ++c) {
      if (c) os << ',';
      os << detail::fmt_17(s.points(i, c));
    }
    os << '\n';
  }
}

inline std::string sample_to_csv(const SphereSample& s) {
  std::ostringstream os;
  write_sample_csv(os, s);
  return os.str();
}

// --- Sample binary columnar ("SPHC") -------------------------------------

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "binary sample format assumes a little-endian host");

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace detail

// Layout: "SPHC" | u32 version | u32 d | u64 n | (d+1) columns of n doubles.
inline void write_sample_sphc(std::ostream& os, const SphereSample& s) {
  os.write("SPHC", 4);
  detail::put_u32(os, 1u);
  detail::put_u32(os, static_cast<std::uint32_t>(s.d));
  detail::put_u64(os, static_cast<std::uint64_t>(s.n()));
  std::vector<double> col(static_cast<std::size_t>(s.n()));
  for (int c = 0; c <= s.d; ++c) {
    for (Eigen::Index i = 0; i < s.n(); ++i) col[static_cast<std::size_t>(i)] = s.points(i, c);
    os.write(reinterpret_cast<const char*>(col.data()),
             static_cast<std::streamsize>(col.size() * sizeof(double)));
  }
}

inline SphereSample read_sample_sphc(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SPHC", 4) != 0) {
    throw std::domain_error("read_sample_sphc: bad magic, not a binary sample");
  }
  const std::uint32_t version = detail::get_u32(is);
  if (version != 1u) throw std::domain_error("read_sample_sphc: unsupported version");
  const std::uint32_t d = detail::get_u32(is);
  const std::uint64_t n = detail::get_u64(is);
  if (!is || d > 64u || n > (1ull << 40)) {
    throw std::domain_error("read_sample_sphc: implausible header");
  }
  SphereSample out;
  out.d = static_cast<int>(d);
  out.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d) + 1);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (std::uint32_t c = 0; c <= d; ++c) {
    is.read(reinterpret_cast<char*>(col.data()),
            static_cast<std::streamsize>(col.size() * sizeof(double)));
    if (!is) throw std::domain_error("read_sample_sphc: truncated payload");
    for (std::uint64_t i = 0; i < n; ++i) {
      out.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          col[static_cast<std::size_t>(i)];
    }
  }
  check_sample(out);
  return out;
}

// --- Ingestion ------------------------------------------------------------

enum class IngestFormat { vectors_csv, angles_csv_d1, latlon_csv_d2, orbital_elements_csv };

struct IngestSpec {
  IngestFormat format = IngestFormat::vectors_csv;
  double normalize_tol = 1e-6;
  bool degrees = false;          // convert angle columns from degrees
  std::string exclude_pattern;   // drop named rows containing this substring
};

// Orbit pole from inclination and ascending node, both in radians.
inline UnitVector orbital_to_normal(double inclination, double node) {
  if (!(inclination >= 0.0 && inclination <= std::numbers::pi_v<double>)) {
    throw std::domain_error("orbital_to_normal: inclination outside [0, pi]");
  }
  if (!(node >= 0.0 && node < 2.0 * std::numbers::pi_v<double>)) {
    throw std::domain_error("orbital_to_normal: node outside [0, 2*pi)");
  }
  const double si = std::sin(inclination);
  Eigen::Vector3d v(si * std::sin(node), -si * std::cos(node), std::cos(inclination));
  return UnitVector(v);
}

struct LoadResult {
  SphereSample sample;
  std::vector<std::pair<long, std::string>> dropped;  // (1-based line, reason)
  long renormalized = 0;
};

namespace detail {

// Keep coordinates untouched when the norm is already unit to rounding
// noise, so that ingesting our own output reproduces every bit.
constexpr double kExactNormSlack = 1e-12;

}  // namespace detail

inline LoadResult load_sample(std::istream& is, const IngestSpec& spec) {
  const double deg = std::numbers::pi_v<double> / 180.0;
  LoadResult out;
  std::vector<Eigen::VectorXd> rows;
  int dim_cols = -1;  // d + 1 for vectors_csv, locked by the first data row
  std::string line;
  long line_no = 0;
  bool saw_data = false;
  while (std::getline(is, line)) {
    ++line_no;
    {
      bool blank = true;
      for (char c : line) {
        if (c != ' ' && c != '\t' && c != '\r') { blank = false; break; }
      }
      if (blank) continue;
    }
    auto fields = detail::split_csv(line);
    std::string name;
    if (spec.format == IngestFormat::orbital_elements_csv && fields.size() >= 3) {
      double probe = 0.0;
      if (!detail::parse_double(fields[0], probe)) {
        name = fields[0];
        fields.erase(fields.begin());
      }
    }
    std::vector<double> vals(fields.size());
    bool ok = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!detail::parse_double(fields[i], vals[i])) { ok = false; break; }
    }
    if (!ok) {
      if (!saw_data && line_no == 1) continue;  // header line
      out.dropped.emplace_back(line_no, "unparseable field");
      continue;
    }
    saw_data = true;
    if (!name.empty() && !spec.exclude_pattern.empty() &&
        name.find(spec.exclude_pattern) != std::string::npos) {
      out.dropped.emplace_back(line_no, "excluded by name pattern");
      continue;
    }
    switch (spec.format) {
      case IngestFormat::vectors_csv: {
        if (vals.size() < 2) {
          out.dropped.emplace_back(line_no, "need at least 2 coordinates");
          continue;
        }
        if (dim_cols < 0) dim_cols = static_cast<int>(vals.size());
        if (static_cast<int>(vals.size()) != dim_cols) {
          out.dropped.emplace_back(line_no, "inconsistent column count");
          continue;
        }
        Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vals.data(), dim_cols);
        const double norm = v.norm();
        const double dev = std::fabs(norm - 1.0);
        if (dev > spec.normalize_tol) {
          out.dropped.emplace_back(line_no, "norm deviates from 1 beyond tolerance");
          continue;
        }
        if (dev > detail::kExactNormSlack) {
          v /= norm;
          ++out.renormalized;
        }
        rows.push_back(std::move(v));
        break;
      }
      case IngestFormat::angles_csv_d1: {
        if (vals.size() != 1) {
          out.dropped.emplace_back(line_no, "expected a single angle column");
          continue;
        }
        const double th = spec.degrees ? vals[0] * deg : vals[0];
        Eigen::VectorXd v(2);
        v << std::cos(th), std::sin(th);
        rows.push_back(std::move(v));
        dim_cols = 2;
        break;
      }
      case IngestFormat::latlon_csv_d2: {
        if (vals.size() != 2) {
          out.dropped.emplace_back(line_no, "expected colatitude,longitude");
          continue;
        }
        const double th = spec.degrees ? vals[0] * deg : vals[0];
        const double ph = spec.degrees ? vals[1] * deg : vals[1];
        if (!(th >= 0.0 && th <= std::numbers::pi_v<double>)) {
          out.dropped.emplace_back(line_no, "colatitude outside [0, pi]");
          continue;
        }
        Eigen::VectorXd v(3);
        v << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
        rows.push_back(std::move(v));
        dim_cols = 3;
        break;
      }
      case IngestFormat::orbital_elements_csv: {
        if (vals.size() != 2) {
          out.dropped.emplace_back(line_no, "expected inclination,node");
          continue;
        }
        const double inc = spec.degrees ? vals[0] * deg : vals[0];
        const double node = spec.degrees ? vals[1] * deg : vals[1];
        try {
          UnitVector u = orbital_to_normal(inc, node);
          rows.push_back(u.coords());
        } catch (const std::domain_error& e) {
          out.dropped.emplace_back(line_no, e.what());
          continue;
        }
        dim_cols = 3;
        break;
      }
    }
  }
  if (rows.empty()) {
    throw std::domain_error("load_sample: no valid rows in input");
  }
  SphereSample s;
  s.d = dim_cols - 1;
  s.normalize_tol = std::max(spec.normalize_tol, 1e-9);
  s.points.resize(static_cast<Eigen::Index>(rows.size()), dim_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s.points.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  check_sample(s);
  out.sample = std::move(s);
  return out;
}

inline LoadResult load_sample_file(const std::string& path, const IngestSpec& spec) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::domain_error("load_sample: cannot open " + path);
  return load_sample(f, spec);
}

inline SphereSample read_sample_sphc_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::domain_error("read_sample_sphc: cannot open " + path);
  return read_sample_sphc(f);
}

}  // namespace sphcard
