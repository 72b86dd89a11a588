#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "deform/parallel.hpp"
#include "deform/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw deform::ConfigError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw deform::ConfigError("cannot write file: " + path);
  out << text;
}

// A config reference is either a JSON file on disk or the name of a
// builtin scenario, so quick runs need no config file at all.
deform::Scenario load_scenario(const std::string& ref) {
  if (std::ifstream(ref).good())
    return deform::scenario_from_json(read_file(ref));
  try {
    return deform::builtin_scenario(ref);
  } catch (const deform::ConfigError&) {
    throw deform::ConfigError("config '" + ref +
                              "' is neither a readable file nor a builtin "
                              "scenario name");
  }
}

}  // namespace

int main(int argc, char** argv) {
  deform::apply_thread_cap_from_env();

  CLI::App app{"deformation-calculus experiment runner"};
  app.require_subcommand(1);

  std::string config;
  std::string out_path = "-";
  CLI::App* run =
      app.add_subcommand("run", "run a scenario and write its report CSV");
  run->add_option("--config", config,
                  "scenario JSON file or builtin scenario name")
      ->required();
  run->add_option("--out", out_path, "report CSV path ('-' for stdout)");

  CLI::App* list =
      app.add_subcommand("list-scenarios", "print the builtin scenarios");

  std::string check = "continuity";
  std::string in_path;
  std::string series_out = "-";
  std::string kind;
  std::string scen_filter;
  CLI::App* series = app.add_subcommand(
      "series", "turn report rows into a plottable two-column series");
  series->add_option("--check", check,
                     "source check: continuity or kernel-oracle");
  series->add_option("--in", in_path, "report CSV to read")->required();
  series->add_option("--out", series_out, "series path ('-' for stdout)");
  series->add_option("--kind", kind,
                     "series kind override (continuity-curve, "
                     "convergence-curve)");
  series->add_option("--scenario", scen_filter,
                     "use only rows from this scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      const deform::Scenario s = load_scenario(config);
      const std::vector<deform::ReportRow> rows = deform::run_scenario(s);
      write_output(out_path, deform::rows_to_csv(rows));
      size_t failing = 0;
      for (const deform::ReportRow& r : rows)
        if (!r.pass) ++failing;
      std::cerr << "scenario " << s.name << ": " << rows.size() << " rows, "
                << failing << " failing\n";
      return failing > 0 ? 1 : 0;
    }
    if (list->parsed()) {
      for (const deform::Scenario& s : deform::builtin_scenarios()) {
        std::printf("%-20s %-14s", s.name.c_str(), s.groupoid.c_str());
        for (size_t i = 0; i < s.checks.size(); ++i)
          std::printf("%s%s", i ? "," : " ", s.checks[i].c_str());
        std::printf("\n");
      }
      return 0;
    }
    if (series->parsed()) {
      std::vector<deform::ReportRow> rows =
          deform::rows_from_csv(read_file(in_path));
      if (!scen_filter.empty())
        std::erase_if(rows, [&](const deform::ReportRow& r) {
          return r.scenario != scen_filter;
        });
      std::string k = kind;
      if (k.empty()) {
        if (check == "continuity")
          k = "continuity-curve";
        else if (check == "kernel-oracle")
          k = "convergence-curve";
        else
          throw deform::SeriesError("no series kind for check: " + check);
      }
      write_output(series_out, deform::emit_series(rows, k));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "deform: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
