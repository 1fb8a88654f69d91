#include "topocorr/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "topocorr/analytic.hpp"
#include "topocorr/errors.hpp"
#include "topocorr/gauss_scheme.hpp"
#include "topocorr/sampler.hpp"

#ifndef TOPOCORR_VERSION
#define TOPOCORR_VERSION "0.0.0"
#endif

namespace topocorr {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

CorrelationModel model_from_name(const std::string& name) {
  if (name == "ring") return CorrelationModel::ring();
  if (name == "gauss") return CorrelationModel::gaussian();
  throw ContractViolation("unknown model '" + name + "' (expected ring or gauss)");
}

// nlohmann writes doubles in shortest round-trip form; NaN becomes null.
ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Params {
  std::string kind = "vector2";
  std::string model = "ring";
  double rmin = 0.05, rmax = 10.0;
  std::size_t points = 200;
  bool with_scheme = false;
  bool json = false;
  std::string out;
  double sum_rmax = 200.0;
  std::uint64_t seed = 1;
  std::size_t realizations = 200;
  double window = 40.0, margin = 8.0, binwidth = 0.1;
  std::size_t waves = 256;
  unsigned threads = 1;
  bool dump = false;
  std::string manifest_path;
};

ordered_json manifest(const std::string& command, const Params& p, const std::vector<std::string>& argv) {
  ordered_json m;
  m["command"] = command;
  const bool has_kind = command != "densities";
  m["kind"] = has_kind ? ordered_json(p.kind) : ordered_json(nullptr);
  m["model"] = p.model;
  m["n"] = has_kind ? ordered_json(SingularityKind::parse(p.kind).n) : ordered_json(nullptr);
  if (command == "curve")
    m["r_grid"] = {{"rmin", p.rmin}, {"rmax", p.rmax}, {"points", p.points}, {"spacing", "linear"}};
  else if (command == "sumrule")
    m["r_grid"] = {{"rmax", p.sum_rmax}};
  else
    m["r_grid"] = nullptr;
  const bool sim = command == "simulate";
  m["seed"] = sim ? ordered_json(p.seed) : ordered_json(nullptr);
  m["waves"] = sim ? ordered_json(p.waves) : ordered_json(nullptr);
  m["window"] = sim ? ordered_json(p.window) : ordered_json(nullptr);
  m["margin"] = sim ? ordered_json(p.margin) : ordered_json(nullptr);
  m["realizations"] = sim ? ordered_json(p.realizations) : ordered_json(nullptr);
  m["bin_width"] = sim ? ordered_json(p.binwidth) : ordered_json(nullptr);
  m["tool_version"] = TOPOCORR_VERSION;
  m["timestamp"] = utc_timestamp();
  m["argv"] = argv;
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ContractViolation("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw ContractViolation("failed writing '" + path + "'");
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s + '\n';
}

// ---------------------------------------------------------------- commands

int cmd_densities(const Params& p, const std::vector<std::string>& argv, std::ostream& out) {
  const CorrelationModel model = model_from_name(p.model);
  const std::pair<const char*, SingularityKind> kinds[] = {
      {"vector2", SingularityKind::vector(2)}, {"critical", SingularityKind::critical()}, {"umbilic", SingularityKind::umbilic()}};
  std::string text;
  ordered_json j;
  j["model"] = p.model;
  for (const auto& [name, kind] : kinds) {
    const double d = density(kind, model);
    j["densities"][name] = d;
    text += std::string("d_") + name + " = " + format_number(d) + '\n';
  }
  for (int n = 1; n <= 3; ++n) {
    const double v = hypervolume_constant(n);
    j["hypervolume"][std::to_string(n)] = v;
    text += "hypervolume_" + std::to_string(n) + " = " + format_number(v) + '\n';
  }
  j["manifest"] = manifest("densities", p, argv);
  const std::string body = p.json ? j.dump(2) + '\n' : text;
  if (p.out.empty()) {
    out << body;
  } else {
    write_text(p.out, body);
    if (!p.json) write_text(p.out + ".manifest.json", j["manifest"].dump(2) + '\n');
  }
  return kExitOk;
}

int cmd_curve(const Params& p, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  if (!(p.rmin > 0.0 && p.rmax > p.rmin)) throw ContractViolation("curve needs 0 < rmin < rmax");
  if (p.points < 2) throw ContractViolation("curve needs at least 2 points");
  const SingularityKind kind = SingularityKind::parse(p.kind);
  const CorrelationModel model = model_from_name(p.model);

  std::vector<double> rs(p.points);
  for (std::size_t i = 0; i < p.points; ++i)
    rs[i] = p.rmin + (p.rmax - p.rmin) * static_cast<double>(i) / static_cast<double>(p.points - 1);
  rs.back() = p.rmax;

  std::string csv = p.with_scheme ? "r,g,h,g_scheme,Q\n" : "r,g,h,Q\n";
  ordered_json rows = ordered_json::array();
  double max_dev = 0.0;
  std::size_t null_rows = 0;
  for (double r : rs) {
    const double g = g_analytic(kind, model, r);
    const double h = h_function(kind, model, r);
    const double q = cumulative_charge(kind, model, r);
    std::optional<double> gs;
    if (p.with_scheme) {
      try {
        gs = scheme_g(kind, model, r);
        max_dev = std::max(max_dev, std::abs(*gs - g) / std::max(std::abs(g), std::numeric_limits<double>::min()));
      } catch (const DegenerateSeparation& e) {
        ++null_rows;
        err << "warning: no scheme value at r = " << format_number(r) << ": " << e.what() << '\n';
      }
    }
    if (p.with_scheme) {
      csv += csv_line({format_number(r), format_number(g), format_number(h), gs ? format_number(*gs) : "", format_number(q)});
      rows.push_back({num(r), num(g), num(h), gs ? num(*gs) : ordered_json(nullptr), num(q)});
    } else {
      csv += csv_line({format_number(r), format_number(g), format_number(h), format_number(q)});
      rows.push_back({num(r), num(g), num(h), num(q)});
    }
  }

  ordered_json j;
  j["columns"] = p.with_scheme ? ordered_json({"r", "g", "h", "g_scheme", "Q"}) : ordered_json({"r", "g", "h", "Q"});
  j["rows"] = rows;
  if (p.with_scheme) j["max_relative_deviation"] = max_dev;
  j["manifest"] = manifest("curve", p, argv);

  const std::string body = p.json ? j.dump(2) + '\n' : csv;
  if (p.out.empty()) {
    out << body;
  } else {
    write_text(p.out, body);
    if (!p.json) write_text(p.out + ".manifest.json", j["manifest"].dump(2) + '\n');
  }
  if (p.with_scheme) {
    std::ostream& summary = p.out.empty() ? err : out;
    summary << "max relative deviation scheme vs closed form: " << format_number(max_dev) << " over "
            << (rs.size() - null_rows) << " rows\n";
  }
  return kExitOk;
}

int cmd_sumrule(const Params& p, const std::vector<std::string>& argv, std::ostream& out) {
  if (!(p.sum_rmax >= 50.0)) throw ContractViolation("sumrule needs --rmax >= 50");
  const SingularityKind kind = SingularityKind::parse(p.kind);
  const CorrelationModel model = model_from_name(p.model);
  const SumRuleReport rep = second_moment(kind, model, p.sum_rmax);

  ordered_json j;
  j["kind"] = p.kind;
  j["model"] = p.model;
  j["first_moment"] = {{"closed_form", num(rep.first_moment_closed)},
                       {"quadrature", num(rep.first_moment_quadrature.value)},
                       {"quadrature_error", num(rep.first_moment_quadrature.error_estimate)},
                       {"quadrature_cutoff", num(rep.first_moment_quadrature.cutoff)},
                       {"quadrature_converged", rep.first_moment_quadrature.converged}};
  ordered_json partials = ordered_json::array();
  for (const auto& pt : rep.second_moment)
    partials.push_back({{"R", num(pt.R)}, {"partial", num(pt.partial)}, {"smoothed", num(pt.smoothed)}});
  j["second_moment"] = {{"verdict", to_string(rep.verdict)},
                        {"doubling_ratio", num(rep.doubling_ratio)},
                        {"log_fit", {{"a", num(rep.fit_a)}, {"b", num(rep.fit_b)}, {"b_stderr", num(rep.fit_b_stderr)}}},
                        {"converged_value", rep.verdict == MomentVerdict::Converged ? num(rep.converged_value)
                                                                                    : ordered_json(nullptr)},
                        {"partials", partials}};
  j["manifest"] = manifest("sumrule", p, argv);
  const std::string body = j.dump(2) + '\n';
  if (p.out.empty()) {
    out << body;
  } else {
    write_text(p.out, body);
    out << "first moment " << format_number(rep.first_moment_closed) << " (closed form), "
        << format_number(rep.first_moment_quadrature.value) << " (quadrature); second moment "
        << to_string(rep.verdict) << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const Params& p, const std::vector<std::string>& argv, std::ostream& out) {
  const SingularityKind kind = SingularityKind::parse(p.kind);
  if (kind.tag == KindTag::VectorZero && kind.n != 2)
    throw ContractViolation("simulate supports vector2, critical and umbilic only");
  const CorrelationModel model = model_from_name(p.model);
  if (p.out.empty()) throw ContractViolation("simulate needs --out DIR");
  if (p.realizations < 1) throw ContractViolation("need at least one realization");
  if (p.waves < 32) throw ContractViolation("need --waves >= 32");

  SimulationConfig cfg;
  cfg.kind = kind;
  cfg.realizations = p.realizations;
  cfg.seed = p.seed;
  cfg.geometry = PairGeometry{p.window, p.margin, p.binwidth, p.margin};
  cfg.geometry.validate();
  cfg.waves = p.waves;
  cfg.threads = p.threads;
  cfg.keep_detections = p.dump;

  const SimulationResult res = simulate(cfg, model);
  const PairHistogram& h = res.histogram;
  fs::create_directories(p.out);
  const fs::path dir(p.out);

  std::string hist = "r_lo,r_hi,sum_qq,pairs,g_emp,stderr\n";
  std::string scr = "R,Q,stderr,Q_analytic\n";
  for (std::size_t b = 0; b < h.bins(); ++b) {
    const auto g = h.g(b);
    hist += csv_line({format_number(h.r_lo(b)), format_number(h.r_hi(b)), format_number(h.sum_qq(b)),
                      std::to_string(h.pairs(b)), format_number(g.value), format_number(g.std_error)});
    const auto q = h.cumulative_charge(b);
    scr += csv_line({format_number(h.r_hi(b)), format_number(q.value), format_number(q.std_error),
                     format_number(cumulative_charge(kind, model, h.r_hi(b)))});
  }
  write_text((dir / "histogram.csv").string(), hist);
  write_text((dir / "screening.csv").string(), scr);

  if (p.dump) {
    std::string det = "realization,kind,x,y,charge,residual\n";
    for (std::size_t k = 0; k < res.detections.size(); ++k)
      for (const auto& s : res.detections[k])
        det += csv_line({std::to_string(k), kind.label(), format_number(s.x), format_number(s.y),
                         std::to_string(s.charge), format_number(s.residual)});
    write_text((dir / "detections.csv").string(), det);
  }

  const auto d = h.density();
  const double d_analytic = density(kind, model);
  const double z = d.std_error > 0 ? (d.value - d_analytic) / d.std_error : 0.0;
  const auto cmp = compare_with_analytic(h, kind, model, std::min(0.5, p.margin), p.margin);
  const auto q_end = h.cumulative_charge(h.bins() - 1);
  const auto& diag = res.diagnostics;
  const double dropped_rate =
      diag.winding_cells ? static_cast<double>(diag.winding_mismatches) / static_cast<double>(diag.winding_cells) : 0.0;

  ordered_json rep;
  rep["kind"] = p.kind;
  rep["model"] = p.model;
  rep["density"] = {{"estimate", num(d.value)}, {"stderr", num(d.std_error)}, {"analytic", num(d_analytic)}, {"z", num(z)}};
  rep["g_vs_analytic"] = {{"r_lo", std::min(0.5, p.margin)},
                          {"r_hi", p.margin},
                          {"chi2", num(cmp.chi2)},
                          {"bins_used", cmp.bins_used},
                          {"empty_bins", cmp.empty_bins},
                          {"reduced_chi2", num(cmp.reduced())}};
  rep["screening"] = {{"R", num(h.r_hi(h.bins() - 1))},
                      {"Q", num(q_end.value)},
                      {"stderr", num(q_end.std_error)},
                      {"Q_analytic", num(cumulative_charge(kind, model, h.r_hi(h.bins() - 1)))}};
  const auto pos = h.positive_fraction();
  rep["positive_fraction"] = {{"estimate", num(pos.value)}, {"stderr", num(pos.std_error)}};
  rep["mean_abs_inner_charge"] = num(h.mean_abs_inner_charge());
  rep["detection"] = {{"cells", diag.cells},
                      {"candidate_cells", diag.candidate_cells},
                      {"winding_cells", diag.winding_cells},
                      {"unresolved_cells", diag.winding_mismatches},
                      {"dropped_candidate_rate", num(dropped_rate)},
                      {"newton_starts", diag.newton_starts},
                      {"newton_failures", diag.newton_failures},
                      {"rejected_residual", diag.rejected_residual}};
  rep["manifest"] = "manifest.json";
  write_text((dir / "report.json").string(), rep.dump(2) + '\n');

  ordered_json man = manifest("simulate", p, argv);
  man["outputs"] = {"histogram.csv", "screening.csv", "report.json"};
  if (p.dump) man["outputs"].push_back("detections.csv");
  write_text((dir / "manifest.json").string(), man.dump(2) + '\n');

  out << "density " << format_number(d.value) << " +- " << format_number(d.std_error) << " (analytic "
      << format_number(d_analytic) << ", z = " << format_number(z) << ")\n"
      << "Q(" << format_number(h.r_hi(h.bins() - 1)) << ") = " << format_number(q_end.value) << " +- "
      << format_number(q_end.std_error) << "\n"
      << "reduced chi2 vs analytic g: " << format_number(cmp.reduced()) << " over " << cmp.bins_used << " bins\n"
      << "dropped candidate rate: " << format_number(dropped_rate) << '\n';
  return kExitOk;
}

// Normalised argument lists, stored in manifests so that `rerun` can replay them.
std::vector<std::string> normalised_args(const std::string& command, const Params& p) {
  std::vector<std::string> a{command};
  auto add = [&a](const std::string& k, const std::string& v) {
    a.push_back(k);
    a.push_back(v);
  };
  if (command != "densities") add("--kind", p.kind);
  add("--model", p.model);
  if (command == "curve") {
    add("--rmin", format_number(p.rmin));
    add("--rmax", format_number(p.rmax));
    add("--points", std::to_string(p.points));
    if (p.with_scheme) a.push_back("--with-scheme");
  } else if (command == "sumrule") {
    add("--rmax", format_number(p.sum_rmax));
  } else if (command == "simulate") {
    add("--realizations", std::to_string(p.realizations));
    add("--seed", std::to_string(p.seed));
    add("--window", format_number(p.window));
    add("--margin", format_number(p.margin));
    add("--waves", std::to_string(p.waves));
    add("--binwidth", format_number(p.binwidth));
    if (p.dump) a.push_back("--dump-detections");
  }
  if ((command == "densities" || command == "curve") && p.json) a.push_back("--json");
  if (!p.out.empty()) add("--out", p.out);
  return a;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Charge correlations of topological singularities in Gaussian random fields", "topocorr"};
  app.require_subcommand(1);
  Params p;

  const std::vector<std::string> kinds{"vector2", "vector3", "critical", "umbilic"};
  const std::vector<std::string> models{"ring", "gauss"};

  auto* dens = app.add_subcommand("densities", "densities of all kinds and the hypervolume constants");
  dens->add_option("--model", p.model, "ring or gauss")->required()->check(CLI::IsMember(models));
  dens->add_flag("--json", p.json, "machine-readable output");
  dens->add_option("--out", p.out, "output file (default stdout)");

  auto* curve = app.add_subcommand("curve", "closed-form g(r), h(r) and Q(r) on a linear grid");
  curve->add_option("--kind", p.kind)->required()->check(CLI::IsMember(kinds));
  curve->add_option("--model", p.model)->required()->check(CLI::IsMember(models));
  curve->add_option("--rmin", p.rmin)->capture_default_str();
  curve->add_option("--rmax", p.rmax)->capture_default_str();
  curve->add_option("--points", p.points)->capture_default_str();
  curve->add_flag("--with-scheme", p.with_scheme, "add the Gaussian-scheme column");
  curve->add_flag("--json", p.json);
  curve->add_option("--out", p.out, "output file (default stdout)");

  auto* sum = app.add_subcommand("sumrule", "screening and second-moment sum rules");
  sum->add_option("--kind", p.kind)->required()->check(CLI::IsMember(kinds));
  sum->add_option("--model", p.model)->required()->check(CLI::IsMember(models));
  sum->add_option("--rmax", p.sum_rmax, "largest cutoff of the second moment (>= 50)")->capture_default_str();
  sum->add_option("--out", p.out, "output JSON file (default stdout)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo densities, pair correlations and screening");
  sim->add_option("--kind", p.kind)->required()->check(CLI::IsMember({"vector2", "critical", "umbilic"}));
  sim->add_option("--model", p.model)->required()->check(CLI::IsMember(models));
  sim->add_option("--realizations", p.realizations)->capture_default_str();
  sim->add_option("--seed", p.seed)->capture_default_str();
  sim->add_option("--window", p.window, "window side")->capture_default_str();
  sim->add_option("--margin", p.margin, "inner margin, also the largest pair distance")->capture_default_str();
  sim->add_option("--waves", p.waves, "plane waves per field component")->capture_default_str();
  sim->add_option("--binwidth", p.binwidth)->capture_default_str();
  sim->add_option("--threads", p.threads, "worker threads (results do not depend on it)")->capture_default_str();
  sim->add_flag("--dump-detections", p.dump, "write detections.csv");
  sim->add_option("--out", p.out, "output directory")->required();

  auto* rerun = app.add_subcommand("rerun", "replay the command recorded in a manifest");
  rerun->add_option("--manifest", p.manifest_path)->required();
  std::string rerun_out;
  rerun->add_option("--out", rerun_out, "replace the recorded output path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return run_guarded(
      [&]() -> int {
        if (rerun->parsed()) {
          std::ifstream f(p.manifest_path);
          if (!f) throw ContractViolation("cannot read manifest '" + p.manifest_path + "'");
          const auto m = nlohmann::json::parse(f, nullptr, false);
          if (m.is_discarded() || !m.contains("argv") || !m["argv"].is_array())
            throw ContractViolation("'" + p.manifest_path + "' is not a manifest");
          auto replay = m["argv"].get<std::vector<std::string>>();
          if (!rerun_out.empty()) {
            auto it = std::find(replay.begin(), replay.end(), "--out");
            if (it != replay.end() && it + 1 != replay.end())
              *(it + 1) = rerun_out;
            else {
              replay.push_back("--out");
              replay.push_back(rerun_out);
            }
          }
          return run_cli(replay, out, err);
        }
        if (dens->parsed()) return cmd_densities(p, normalised_args("densities", p), out);
        if (curve->parsed()) return cmd_curve(p, normalised_args("curve", p), out, err);
        if (sum->parsed()) return cmd_sumrule(p, normalised_args("sumrule", p), out);
        if (sim->parsed()) return cmd_simulate(p, normalised_args("simulate", p), out);
        return kExitUsage;
      },
      err);
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const NumericalFailure& e) {
    err << "error: numerical failure in " << e.operation() << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ContractViolation& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace topocorr
