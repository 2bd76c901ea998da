#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace falldet::cli {

// Stable process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kNumerical = 3, kNetwork = 4 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  bool quiet = false;
  std::string format = "json";

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
};

using Action = std::function<int()>;
using Json = nlohmann::ordered_json;

/// Prints `data` to stdout in the selected format unless --quiet.
/// Flat objects render as one CSV row or `key: value` lines; anything
/// nested falls back to JSON.
void emit(const Globals& g, const Json& data);
/// Like emit, with caller-supplied CSV and text renderings.
void emit(const Globals& g, const Json& data, const std::string& csv, const std::string& text);

/// Diagnostics go to stderr, never stdout.
void note(const Globals& g, const std::string& msg);

void write_text(const std::filesystem::path& file, const std::string& text);
/// Creates --out if given; throws ConfigError when `required` and absent.
std::filesystem::path out_dir(const Globals& g, bool required, const char* cmd);

void add_data_commands(CLI::App& app, Globals& g, Action& action);
void add_model_commands(CLI::App& app, Globals& g, Action& action);
void add_service_commands(CLI::App& app, Globals& g, Action& action);

}  // namespace falldet::cli
