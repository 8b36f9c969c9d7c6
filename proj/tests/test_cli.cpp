#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <sphcard/cli.hpp>
#include <sphcard/experiment.hpp>
#include <sphcard/io.hpp>

using namespace sphcard;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

std::filesystem::path test_dir() {
  static const std::filesystem::path dir = [] {
    auto p = std::filesystem::temp_directory_path() / "sphcard_cli_tests";
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

std::string path_of(const std::string& name) { return (test_dir() / name).string(); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Drive the CLI in-process with stdout/stderr muted.
int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sphcard");
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream sink_out, sink_err;
  auto* old_out = std::cout.rdbuf(sink_out.rdbuf());
  auto* old_err = std::cerr.rdbuf(sink_err.rdbuf());
  int rc = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return rc;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    std::istringstream ls(line);
    while (std::getline(ls, cur, ',')) fields.push_back(cur);
    if (line.back() == ',') fields.push_back("");
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

TEST_CASE("parameters and samples round-trip exactly") {
  SECTION("parameter JSON preserves every bit") {
    RngStream rng(314);
    for (int rep = 0; rep < 5; ++rep) {
      const int d = 1 + rep % 3;
      const UnitVector mu = uniform_sphere(d, rng);
      const double rho = 2.0 * rng.uniform() - 1.0;
      const CardioidParams p(d, 1 + rep % 2 + (d == 1 ? 0 : 0), mu, rho);
      const CardioidParams q = params_from_json(
          nlohmann::json::parse(params_to_json(p).dump()));
      REQUIRE(q.d == p.d);
      REQUIRE(q.k == p.k);
      REQUIRE(q.rho == p.rho);
      REQUIRE(q.mu.coords() == p.mu.coords());
    }
  }

  SECTION("sample CSV ingests back bit for bit") {
    RngStream rng(11);
    const CardioidParams p(2, 2, UnitVector(Eigen::Vector3d(0.0, 0.0, 1.0)), 0.6);
    SphereSample s = sample(p, 50, rng);
    const std::string csv = sample_to_csv(s);
    std::istringstream is(csv);
    LoadResult lr = load_sample(is, IngestSpec{});
    REQUIRE(lr.sample.d == 2);
    REQUIRE(lr.dropped.empty());
    REQUIRE(lr.renormalized == 0);
    REQUIRE(lr.sample.points == s.points);
    REQUIRE(sample_to_csv(lr.sample) == csv);
  }

  SECTION("binary samples ingest back bit for bit") {
    RngStream rng(12);
    const CardioidParams p(3, 1, UnitVector(Eigen::Vector4d(0.5, 0.5, 0.5, 0.5)), -0.4);
    SphereSample s = sample(p, 33, rng);
    std::stringstream buf;
    write_sample_sphc(buf, s);
    SphereSample t = read_sample_sphc(buf);
    REQUIRE(t.d == 3);
    REQUIRE(t.points == s.points);
  }

  SECTION("binary reader rejects garbage") {
    std::stringstream buf("not a sample at all");
    REQUIRE_THROWS_AS(read_sample_sphc(buf), std::domain_error);
  }
}

TEST_CASE("orbital elements map to orbit poles") {
  SECTION("pinned conversions") {
    const UnitVector a = orbital_to_normal(0.0, 1.234);
    CHECK(a.coords()(0) == Approx(0.0).margin(1e-15));
    CHECK(a.coords()(1) == Approx(0.0).margin(1e-15));
    CHECK(a.coords()(2) == Approx(1.0).margin(1e-15));
    const UnitVector b = orbital_to_normal(kPi / 2.0, 0.0);
    CHECK(b.coords()(0) == Approx(0.0).margin(1e-15));
    CHECK(b.coords()(1) == Approx(-1.0).margin(1e-15));
    CHECK(b.coords()(2) == Approx(0.0).margin(1e-15));
    const UnitVector c = orbital_to_normal(kPi, kPi / 2.0);
    CHECK(c.coords()(0) == Approx(0.0).margin(1e-15));
    CHECK(c.coords()(1) == Approx(0.0).margin(1e-15));
    CHECK(c.coords()(2) == Approx(-1.0).margin(1e-15));
    for (const auto* u : {&a, &b, &c}) {
      CHECK(std::fabs(u->coords().norm() - 1.0) < 1e-12);
    }
  }

  SECTION("range validation") {
    CHECK_THROWS_AS(orbital_to_normal(-0.1, 0.0), std::domain_error);
    CHECK_THROWS_AS(orbital_to_normal(kPi + 0.1, 0.0), std::domain_error);
    CHECK_THROWS_AS(orbital_to_normal(1.0, -0.1), std::domain_error);
    CHECK_THROWS_AS(orbital_to_normal(1.0, 2.0 * kPi), std::domain_error);
  }

  SECTION("catalogue ingestion with names, degrees, and rejects") {
    const std::string csv =
        "name,i,node\n"
        "alpha,0,45\n"
        "P/sungrazer,30,60\n"
        "beta,90,0\n"
        "gamma,200,10\n"
        "delta,180,90\n";
    IngestSpec spec;
    spec.format = IngestFormat::orbital_elements_csv;
    spec.degrees = true;
    spec.exclude_pattern = "P/";
    std::istringstream is(csv);
    LoadResult lr = load_sample(is, spec);
    REQUIRE(lr.sample.n() == 3);
    REQUIRE(lr.sample.d == 2);
    REQUIRE(lr.dropped.size() == 2);
    CHECK(lr.dropped[0].first == 3);
    CHECK(lr.dropped[0].second.find("excluded") != std::string::npos);
    CHECK(lr.dropped[1].first == 5);
    CHECK(lr.dropped[1].second.find("inclination") != std::string::npos);
    CHECK(lr.sample.points(0, 2) == Approx(1.0).margin(1e-15));
    CHECK(lr.sample.points(1, 1) == Approx(-1.0).margin(1e-15));
    CHECK(lr.sample.points(2, 2) == Approx(-1.0).margin(1e-15));
  }
}

TEST_CASE("ingestion handles angle formats, headers, and bad rows") {
  SECTION("circle angles") {
    IngestSpec spec;
    spec.format = IngestFormat::angles_csv_d1;
    std::istringstream is("theta\n1.5707963267948966\n0\n");
    LoadResult lr = load_sample(is, spec);
    REQUIRE(lr.sample.n() == 2);
    CHECK(lr.sample.points(0, 0) == Approx(0.0).margin(1e-15));
    CHECK(lr.sample.points(0, 1) == Approx(1.0).margin(1e-15));
    CHECK(lr.sample.points(1, 0) == 1.0);
    CHECK(lr.sample.points(1, 1) == 0.0);
    spec.degrees = true;
    std::istringstream is2("90\n");
    LoadResult lr2 = load_sample(is2, spec);
    CHECK(lr2.sample.points(0, 1) == Approx(1.0).margin(1e-15));
  }

  SECTION("colatitude and longitude") {
    IngestSpec spec;
    spec.format = IngestFormat::latlon_csv_d2;
    spec.degrees = true;
    std::istringstream is("colat,lon\n90,0\n0,123\n181,0\n");
    LoadResult lr = load_sample(is, spec);
    REQUIRE(lr.sample.n() == 2);
    CHECK(lr.sample.points(0, 0) == Approx(1.0).margin(1e-15));
    CHECK(lr.sample.points(1, 2) == Approx(1.0).margin(1e-15));
    REQUIRE(lr.dropped.size() == 1);
    CHECK(lr.dropped[0].second.find("colatitude") != std::string::npos);
  }

  SECTION("raw vectors: renormalization and rejection") {
    IngestSpec spec;
    std::ostringstream src;
    src << "x0,x1\n";
    src << "1,0\n";
    src << detail::fmt_17(1.0 + 5e-7) << ",0\n";   // renormalizable
    src << "1.001,0\n";                            // beyond tolerance
    src << "0.7,oops\n";                           // unparseable
    src << "1,0,0\n";                              // wrong arity
    std::istringstream is(src.str());
    LoadResult lr = load_sample(is, spec);
    REQUIRE(lr.sample.n() == 2);
    CHECK(lr.renormalized == 1);
    CHECK(std::fabs(lr.sample.points.row(1).norm() - 1.0) < 1e-12);
    REQUIRE(lr.dropped.size() == 3);
    CHECK(lr.dropped[0].second.find("norm") != std::string::npos);
    CHECK(lr.dropped[1].second.find("unparseable") != std::string::npos);
    CHECK(lr.dropped[2].second.find("column") != std::string::npos);
  }

  SECTION("empty input is an error") {
    IngestSpec spec;
    std::istringstream is("x0,x1\n");
    REQUIRE_THROWS_AS(load_sample(is, spec), std::domain_error);
    std::istringstream is2("");
    REQUIRE_THROWS_AS(load_sample(is2, spec), std::domain_error);
  }
}

TEST_CASE("cli sample output is deterministic and reingests exactly") {
  const auto f1 = path_of("s1.csv");
  const auto f2 = path_of("s2.csv");
  const std::vector<std::string> flags = {"sample", "--d", "2",    "--k",    "2",
                                          "--rho",  "0.6", "--n",  "40",     "--seed",
                                          "9",      "--out", f1};
  REQUIRE(run_cli(flags) == 0);
  auto flags2 = flags;
  flags2.back() = f2;
  REQUIRE(run_cli(flags2) == 0);
  REQUIRE(slurp(f1) == slurp(f2));

  SECTION("matches the library draw and reingests bit for bit") {
    RngStream rng(9);
    const CardioidParams p(2, 2, UnitVector(Eigen::Vector3d(0.0, 0.0, 1.0)), 0.6);
    SphereSample s = sample(p, 40, rng);
    REQUIRE(slurp(f1) == sample_to_csv(s));
    LoadResult lr = load_sample_file(f1, IngestSpec{});
    REQUIRE(lr.sample.points == s.points);
  }

  SECTION("another seed differs") {
    const auto f3 = path_of("s3.csv");
    REQUIRE(run_cli({"sample", "--d", "2", "--k", "2", "--rho", "0.6", "--n", "40",
                     "--seed", "10", "--out", f3}) == 0);
    REQUIRE(slurp(f3) != slurp(f1));
  }

  SECTION("empty draw leaves just the header") {
    const auto f4 = path_of("s0.csv");
    REQUIRE(run_cli({"sample", "--d", "2", "--k", "1", "--rho", "0.3", "--n", "0",
                     "--out", f4}) == 0);
    REQUIRE(slurp(f4) == "x0,x1,x2\n");
  }

  SECTION("binary flag emits the tagged columnar format") {
    const auto fb = path_of("s1.sphc");
    REQUIRE(run_cli({"sample", "--d", "2", "--k", "2", "--rho", "0.6", "--n", "40",
                     "--seed", "9", "--binary", "--out", fb}) == 0);
    const std::string raw = slurp(fb);
    REQUIRE(raw.size() > 4);
    REQUIRE(raw.substr(0, 4) == "SPHC");
    SphereSample t = read_sample_sphc_file(fb);
    LoadResult lr = load_sample_file(f1, IngestSpec{});
    REQUIRE(t.points == lr.sample.points);
  }
}

TEST_CASE("cli fit, gof, and experiment runs are deterministic") {
  const auto data = path_of("d1k1.csv");
  REQUIRE(run_cli({"sample", "--d", "1", "--k", "1", "--rho", "0.5", "--n", "40",
                   "--seed", "21", "--out", data}) == 0);

  SECTION("fit JSON is stable and well-formed") {
    const auto o1 = path_of("fit1.json");
    const auto o2 = path_of("fit2.json");
    REQUIRE(run_cli({"fit", "--input", data, "--k", "1", "--estimator", "mm1",
                     "--out", o1}) == 0);
    REQUIRE(run_cli({"fit", "--input", data, "--k", "1", "--estimator", "mm1",
                     "--out", o2}) == 0);
    REQUIRE(slurp(o1) == slurp(o2));
    const auto j = nlohmann::json::parse(slurp(o1));
    CHECK(j.at("estimator") == "mm1");
    CHECK(j.at("params").at("d") == 1);
    CHECK(j.at("params").at("k") == 1);
    const double rho = j.at("params").at("rho").get<double>();
    CHECK(rho > 0.0);
    CHECK(rho <= 1.0);
    CHECK(j.at("sigma2_rho").get<double>() > 0.0);
  }

  SECTION("ml fit accepts a sign hint") {
    const auto o = path_of("fitml.json");
    REQUIRE(run_cli({"fit", "--input", data, "--k", "1", "--estimator", "ml",
                     "--sign", "auto", "--out", o}) == 0);
    const auto j = nlohmann::json::parse(slurp(o));
    CHECK(j.at("estimator") == "ml");
    CHECK(j.at("iterations").get<int>() >= 1);
    CHECK(std::isfinite(j.at("loglik").get<double>()));
  }

  SECTION("gof JSON is stable with an exact p-value") {
    const auto o1 = path_of("gof1.json");
    const auto o2 = path_of("gof2.json");
    const std::vector<std::string> flags = {"gof",  "--input", data, "--k", "1",
                                            "--B",  "19",      "--K", "5",  "--seed",
                                            "4",    "--out",   o1};
    REQUIRE(run_cli(flags) == 0);
    auto flags2 = flags;
    flags2.back() = o2;
    REQUIRE(run_cli(flags2) == 0);
    REQUIRE(slurp(o1) == slurp(o2));
    const auto j = nlohmann::json::parse(slurp(o1));
    CHECK(j.at("B_effective").get<int>() == 19);
    CHECK(j.at("boot_stats").size() == 19);
    const double pv = j.at("pvalue").get<double>();
    CHECK(pv > 0.0);
    CHECK(pv <= 1.0);
    int exceed = 0;
    const double stat = j.at("statistic").get<double>();
    for (const auto& b : j.at("boot_stats")) {
      if (b.get<double>() > stat) ++exceed;
    }
    CHECK(pv == Approx((1.0 + exceed) / 20.0).margin(1e-12));
    CHECK(j.at("fitted").at("estimator") == "mm1");
  }

  SECTION("experiment reports are deterministic") {
    const auto spec_path = path_of("size_spec.json");
    write_file(spec_path,
               R"({"kind":"size_table","grid":[{"d":1,"k":1,"rho":0.5,"n":30}],)"
               R"("M":6,"B":19,"alpha":0.05,"seed":3,"variants":["cvm:unif","ad:unif"]})");
    const auto r1 = path_of("rep1.csv");
    const auto r2 = path_of("rep2.csv");
    REQUIRE(run_cli({"experiment", "--spec", spec_path, "--out", r1}) == 0);
    REQUIRE(run_cli({"experiment", "--spec", spec_path, "--out", r2}) == 0);
    REQUIRE(slurp(r1) == slurp(r2));
    const auto rows = parse_csv(slurp(r1));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "kind");
    CHECK(rows[0][13] == "reject_pct");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i][0] == "size");
      CHECK(rows[i][16] == "ok");
      const double pct = std::stod(rows[i][13]);
      CHECK(pct >= 0.0);
      CHECK(pct <= 100.0);
    }
  }

  SECTION("asymptotics reports cover both estimators and skip infeasible ones") {
    const auto spec_path = path_of("asym_spec.json");
    write_file(spec_path,
               R"({"kind":"asymptotics","grid":[{"d":1,"k":1,"rho":0.5,"n":40},)"
               R"({"d":1,"k":1,"rho":-0.5,"n":40}],"M":5,"seed":5})");
    const auto r = path_of("asym.csv");
    REQUIRE(run_cli({"experiment", "--spec", spec_path, "--out", r}) == 0);
    const auto rows = parse_csv(slurp(r));
    REQUIRE(rows.size() == 6);  // header + 4 metric rows + 1 skipped cell
    CHECK(rows[0][6] == "estimator");
    CHECK(rows[1][6] == "mm1");
    CHECK(rows[3][6] == "ml");
    CHECK(rows[5][12] == "skipped");
    for (int i = 1; i <= 4; ++i) {
      CHECK(std::isfinite(std::stod(rows[i][9])));   // mean
      CHECK(std::stod(rows[i][10]) > 0.0);           // sd
      CHECK(std::stod(rows[i][11]) > 0.0);           // asymptotic sd
    }
  }

  SECTION("power spec with matching orders is rejected") {
    const auto spec_path = path_of("bad_power.json");
    write_file(spec_path,
               R"({"kind":"power_table","grid":[{"d":1,"k":1,"k0":1,"rho":0.5,"n":30}],)"
               R"("M":5,"B":19})");
    CHECK(run_cli({"experiment", "--spec", spec_path, "--out",
                   path_of("bad_power.csv")}) == 64);
  }
}

TEST_CASE("cli density, are, and project match the library") {
  const auto data = path_of("d2pts.csv");
  REQUIRE(run_cli({"sample", "--d", "2", "--k", "2", "--rho", "0.6", "--n", "12",
                   "--seed", "33", "--out", data}) == 0);

  SECTION("density at rho zero is the uniform height") {
    const auto o = path_of("dens0.csv");
    REQUIRE(run_cli({"density", "--input", data, "--k", "1", "--rho", "0",
                     "--out", o}) == 0);
    const auto rows = parse_csv(slurp(o));
    REQUIRE(rows.size() == 13);
    CHECK(rows[0][3] == "density");
    const double height = 1.0 / (4.0 * kPi);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(std::stod(rows[i][3]) == Approx(height).margin(1e-15));
    }
  }

  SECTION("density values agree with direct evaluation") {
    const auto o = path_of("dens.csv");
    REQUIRE(run_cli({"density", "--input", data, "--k", "2", "--rho", "0.6",
                     "--mu", "0,0,1", "--out", o}) == 0);
    const auto rows = parse_csv(slurp(o));
    const CardioidParams p(2, 2, UnitVector(Eigen::Vector3d(0.0, 0.0, 1.0)), 0.6);
    LoadResult lr = load_sample_file(data, IngestSpec{});
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double want = density(p, lr.sample.point(static_cast<Eigen::Index>(i - 1)));
      CHECK(std::stod(rows[i][3]) == want);
    }
  }

  SECTION("circle efficiency curves do not depend on the order") {
    const auto o1 = path_of("are1.csv");
    const auto o2 = path_of("are2.csv");
    REQUIRE(run_cli({"are", "--d", "1", "--k", "1", "--steps", "7", "--out", o1}) == 0);
    REQUIRE(run_cli({"are", "--d", "1", "--k", "2", "--steps", "7", "--out", o2}) == 0);
    const auto a1 = parse_csv(slurp(o1));
    const auto a2 = parse_csv(slurp(o2));
    REQUIRE(a1.size() == 8);
    REQUIRE(a2.size() == 8);
    for (std::size_t i = 1; i < a1.size(); ++i) {
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(std::stod(a1[i][c]) == Approx(std::stod(a2[i][c])).margin(1e-12));
      }
      const double v = std::stod(a1[i][1]);
      CHECK(v > 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }

  SECTION("moment columns are empty beyond order two") {
    const auto o = path_of("are3.csv");
    REQUIRE(run_cli({"are", "--d", "2", "--k", "3", "--steps", "3", "--out", o}) == 0);
    const auto rows = parse_csv(slurp(o));
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i][1] == "nan");
      CHECK(rows[i][2] == "nan");
      const double gm = std::stod(rows[i][3]);
      CHECK(gm > 0.0);
      CHECK(gm <= 1.0 + 1e-12);
    }
  }

  SECTION("projection curve matches the model cdf") {
    const auto o = path_of("proj.csv");
    REQUIRE(run_cli({"project", "--input", data, "--k", "2", "--rho", "0.6",
                     "--mu", "0,0,1", "--gamma", "0,0,1", "--out", o}) == 0);
    const auto rows = parse_csv(slurp(o));
    REQUIRE(rows.size() == 13);
    const CardioidParams p(2, 2, UnitVector(Eigen::Vector3d(0.0, 0.0, 1.0)), 0.6);
    const UnitVector gamma(Eigen::Vector3d(0.0, 0.0, 1.0));
    double prev_t = -2.0, prev_e = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double t = std::stod(rows[i][0]);
      const double cdf = std::stod(rows[i][1]);
      const double ecdf = std::stod(rows[i][2]);
      CHECK(t >= prev_t);
      CHECK(ecdf > prev_e);
      CHECK(cdf == proj_cdf(p, gamma, t));
      prev_t = t;
      prev_e = ecdf;
    }
    CHECK(prev_e == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("cli exit codes follow the contract") {
  const auto data = path_of("ec.csv");
  REQUIRE(run_cli({"sample", "--d", "1", "--k", "1", "--rho", "0.5", "--n", "10",
                   "--seed", "2", "--out", data}) == 0);

  CHECK(run_cli({"bogus"}) == 64);
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"sample", "--d", "2", "--k", "1"}) == 64);  // missing required flags
  CHECK(run_cli({"fit", "--input", data, "--k", "2", "--estimator", "mm1"}) == 64);
  CHECK(run_cli({"fit", "--input", data, "--k", "1", "--estimator", "gm"}) == 64);
  CHECK(run_cli({"gof", "--input", data, "--k", "3", "--estimator", "mm"}) == 64);
  CHECK(run_cli({"gof", "--input", data, "--k", "1", "--B", "19", "--K", "5",
                 "--simple-null", "{broken"}) == 64);
  CHECK(run_cli({"experiment", "--spec", path_of("missing_spec.json")}) == 64);
  CHECK(run_cli({"density", "--input", data, "--k", "1", "--rho", "0",
                 "--degrees", "--radians"}) == 64);
  CHECK(run_cli({"sample", "--d", "1", "--k", "1", "--rho", "2.0", "--n", "5"}) == 64);

  const auto anti = path_of("antipodal.csv");
  write_file(anti, "1,0\n-1,0\n");
  CHECK(run_cli({"fit", "--input", anti, "--k", "1", "--estimator", "mm1"}) == 2);

  SECTION("simple null gof works end to end") {
    const auto o = path_of("gof_null.json");
    REQUIRE(run_cli({"gof", "--input", data, "--k", "1", "--B", "19", "--K", "5",
                     "--seed", "8", "--simple-null",
                     R"({"d":1,"k":1,"mu":[1.0,0.0],"rho":0.5})", "--out", o}) == 0);
    const auto j = nlohmann::json::parse(slurp(o));
    CHECK(j.at("fitted").at("params").at("rho") == 0.5);
    CHECK(!j.contains("ci_rho"));
  }
}
