#include <filesystem>
#include <fstream>
#include <iostream>

#include "cli.hpp"
#include "falldet/error.hpp"

namespace falldet::cli {

namespace {

bool flat(const Json& j) {
  if (!j.is_object()) return false;
  for (const auto& [k, v] : j.items()) {
    if (v.is_structured()) return false;
  }
  return true;
}

std::string scalar(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

void emit(const Globals& g, const Json& data) {
  if (g.quiet) return;
  if (g.format == "json" || !flat(data)) {
    std::cout << data.dump(2) << '\n';
    return;
  }
  std::string csv_head, csv_row, text;
  for (const auto& [k, v] : data.items()) {
    csv_head += (csv_head.empty() ? "" : ",") + k;
    csv_row += (csv_row.empty() ? "" : ",") + scalar(v);
    text += k + ": " + scalar(v) + "\n";
  }
  std::cout << (g.format == "csv" ? csv_head + "\n" + csv_row + "\n" : text);
}

void emit(const Globals& g, const Json& data, const std::string& csv, const std::string& text) {
  if (g.quiet) return;
  if (g.format == "csv") {
    std::cout << csv;
  } else if (g.format == "text") {
    std::cout << text;
  } else {
    std::cout << data.dump(2) << '\n';
  }
}

void note(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + file.string());
  f << text;
  if (!f) throw ConfigError("write failed: " + file.string());
}

std::filesystem::path out_dir(const Globals& g, bool required, const char* cmd) {
  if (g.out.empty()) {
    if (required) throw ConfigError(std::string(cmd) + " needs --out DIR");
    return {};
  }
  std::filesystem::create_directories(g.out);
  return g.out;
}

}  // namespace falldet::cli

int main(int argc, char** argv) {
  using namespace falldet;
  using namespace falldet::cli;

  CLI::App app{"WiFi-CSI fall detection pipeline, alarm service and responder simulator", "falldet"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (default 1; synth defaults to the spec's seed)");
  app.add_option("--out", g.out, "output directory for data files");
  app.add_flag("--quiet", g.quiet, "no stdout summary and no progress on stderr");
  app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"json", "csv", "text"}));

  Action action;
  add_data_commands(app, g, action);
  add_model_commands(app, g, action);
  add_service_commands(app, g, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const NetworkError& e) {
    std::cerr << "network failure: " << e.what() << '\n';
    return kNetwork;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
