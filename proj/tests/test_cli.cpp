#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include <clocale>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "topocorr/analytic.hpp"
#include "topocorr/cli.hpp"
#include "topocorr/errors.hpp"

using namespace topocorr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> v;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) v.push_back(cell);
  if (!line.empty() && line.back() == ',') v.emplace_back();
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("topocorr_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("format_number round-trips and ignores the locale") {
  for (double v : {0.0, 1.0, -0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, 0.07957747154594767}) {
    const std::string s = format_number(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(NAN) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8")) {
    CHECK(format_number(0.25) == "0.25");
    std::setlocale(LC_NUMERIC, "C");
  }
}

TEST_CASE("densities prints the analytic values") {
  const Run r = run({"densities", "--model", "ring", "--json"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK_THAT(j["densities"]["vector2"].get<double>(), WithinRel(1.0 / (4.0 * M_PI), 1e-14));
  CHECK_THAT(j["densities"]["critical"].get<double>(), WithinRel(1.0 / (2.0 * std::sqrt(3.0) * M_PI), 1e-14));
  CHECK_THAT(j["densities"]["umbilic"].get<double>(), WithinRel(1.0 / (4.0 * M_PI), 1e-14));
  CHECK_THAT(j["hypervolume"]["2"].get<double>(), WithinRel(1.0 / (2.0 * M_PI), 1e-14));
  CHECK(j["manifest"]["command"] == "densities");
  CHECK(j["manifest"]["model"] == "ring");

  const Run text = run({"densities", "--model", "gauss"});
  REQUIRE(text.code == kExitOk);
  CHECK(text.out.find("d_critical = 0.36755259694786") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({"densities", "--model", "foo"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"curve", "--kind", "vector2", "--model", "ring", "--rmin", "2", "--rmax", "1"}).code == kExitUsage);
  CHECK(run({"curve", "--kind", "vector2", "--model", "ring", "--rmin", "0", "--rmax", "1"}).code == kExitUsage);
  CHECK(run({"curve", "--kind", "vector2", "--model", "ring", "--points", "1"}).code == kExitUsage);
  CHECK(run({"sumrule", "--kind", "vector2", "--model", "ring", "--rmax", "20"}).code == kExitUsage);
  CHECK(run({"simulate", "--kind", "vector3", "--model", "ring", "--out", scratch("v3").string()}).code == kExitUsage);
  CHECK(run({"simulate", "--kind", "critical", "--model", "ring", "--margin", "30", "--window", "40",
             "--out", scratch("geom").string()})
            .code == kExitUsage);
  CHECK(run({"rerun", "--manifest", "/nonexistent/manifest.json"}).code == kExitUsage);
  const Run help = run({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("library failures map to exit codes") {
  std::ostringstream err;
  CHECK(run_guarded([]() -> int { throw ConditioningError("solve_xi", 1e-18); }, err) == kExitNumerical);
  CHECK(err.str().find("solve_xi") != std::string::npos);
  CHECK(run_guarded([]() -> int { throw DegenerateSeparation(1e-4, 1e-3); }, err) == kExitNumerical);
  CHECK(err.str().find("assemble_sigma") != std::string::npos);
  CHECK(run_guarded([]() -> int { throw DomainError("x"); }, err) == kExitUsage);
  CHECK(run_guarded([]() -> int { throw ContractViolation("x"); }, err) == kExitUsage);
  CHECK(run_guarded([] { return 0; }, err) == kExitOk);
}

TEST_CASE("curve CSV matches the library and the scheme column") {
  const Run r = run({"curve", "--kind", "critical", "--model", "ring", "--rmin", "0.0005", "--rmax", "6", "--points", "13",
                     "--with-scheme"});
  REQUIRE(r.code == kExitOk);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 14);
  CHECK(rows[0] == "r,g,h,g_scheme,Q");
  // below r_min the scheme cell is empty and a warning is issued
  CHECK(split(rows[1])[3].empty());
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(r.err.find("max relative deviation") != std::string::npos);
  const auto kind = SingularityKind::critical();
  const auto model = CorrelationModel::ring();
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const auto c = split(rows[i]);
    REQUIRE(c.size() == 5);
    const double x = std::stod(c[0]);
    CHECK(std::stod(c[1]) == g_analytic(kind, model, x));
    CHECK(std::stod(c[2]) == h_function(kind, model, x));
    CHECK_THAT(std::stod(c[3]), WithinAbs(std::stod(c[1]), 1e-9));
    CHECK(std::stod(c[4]) == cumulative_charge(kind, model, x));
  }
  CHECK(std::stod(split(rows.back())[0]) == 6.0);

  const Run plain = run({"curve", "--kind", "vector3", "--model", "gauss", "--points", "5", "--json"});
  REQUIRE(plain.code == kExitOk);
  const auto j = nlohmann::json::parse(plain.out);
  CHECK(j["columns"].size() == 4);
  CHECK(j["rows"].size() == 5);
  CHECK(j["manifest"]["n"] == 3);
  CHECK(j["manifest"]["r_grid"]["points"] == 5);
}

TEST_CASE("sumrule report") {
  const Run r = run({"sumrule", "--kind", "critical", "--model", "gauss", "--rmax", "60"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK_THAT(j["first_moment"]["closed_form"].get<double>(), WithinAbs(-1.0, 1e-12));
  CHECK_THAT(j["first_moment"]["quadrature"].get<double>(), WithinAbs(-1.0, 1e-6));
  CHECK(j["second_moment"]["verdict"] == "Converged");
  CHECK(j["second_moment"]["converged_value"].is_number());
  CHECK(j["manifest"]["r_grid"]["rmax"] == 60.0);
}

TEST_CASE("simulate writes the artifacts and reruns byte-identically") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const std::vector<std::string> args{"simulate", "--kind", "critical", "--model", "ring", "--realizations", "3",
                                      "--seed", "11", "--window", "24", "--margin", "5", "--waves", "64",
                                      "--binwidth", "0.25", "--dump-detections", "--out", a.string()};
  const Run r = run(args);
  REQUIRE(r.code == kExitOk);
  for (const char* f : {"histogram.csv", "screening.csv", "report.json", "manifest.json", "detections.csv"})
    CHECK(fs::exists(a / f));

  const auto hist = lines(slurp(a / "histogram.csv"));
  CHECK(hist[0] == "r_lo,r_hi,sum_qq,pairs,g_emp,stderr");
  CHECK(hist.size() == 21);
  CHECK(lines(slurp(a / "screening.csv"))[0] == "R,Q,stderr,Q_analytic");
  CHECK(lines(slurp(a / "detections.csv"))[0] == "realization,kind,x,y,charge,residual");

  const auto man = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(man["seed"] == 11);
  CHECK(man["waves"] == 64);
  CHECK(man["window"] == 24.0);
  CHECK(man["realizations"] == 3);
  CHECK(man["bin_width"] == 0.25);
  CHECK(man["kind"] == "critical");
  CHECK(man["tool_version"].is_string());
  CHECK(man["timestamp"].is_string());

  const auto rep = nlohmann::json::parse(slurp(a / "report.json"));
  CHECK(rep["manifest"] == "manifest.json");
  CHECK(rep["density"]["analytic"].get<double>() == density(SingularityKind::critical(), CorrelationModel::ring()));
  CHECK(rep["detection"]["dropped_candidate_rate"].get<double>() <= 1e-3);

  const Run again = run({"rerun", "--manifest", (a / "manifest.json").string(), "--out", b.string()});
  REQUIRE(again.code == kExitOk);
  for (const char* f : {"histogram.csv", "screening.csv", "report.json", "detections.csv"})
    CHECK(slurp(a / f) == slurp(b / f));
  auto man_b = nlohmann::json::parse(slurp(b / "manifest.json"));
  CHECK(man_b["argv"].back() == b.string());

  // thread count is not part of the result
  const fs::path c = scratch("sim_c");
  auto threaded = args;
  threaded.back() = c.string();
  threaded.insert(threaded.end() - 2, {"--threads", "3"});
  REQUIRE(run(threaded).code == kExitOk);
  CHECK(slurp(a / "histogram.csv") == slurp(c / "histogram.csv"));
}

TEST_CASE("manifest timestamp honours SOURCE_DATE_EPOCH") {
  const fs::path out = scratch("dens.txt");
  setenv("SOURCE_DATE_EPOCH", "86400", 1);
  const Run r = run({"densities", "--model", "ring", "--out", out.string()});
  unsetenv("SOURCE_DATE_EPOCH");
  REQUIRE(r.code == kExitOk);
  const auto man = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
  CHECK(man["timestamp"] == "1970-01-02T00:00:00Z");
  CHECK(slurp(out).find("d_vector2 = ") == 0);
}
