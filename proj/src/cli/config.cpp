#include "cli/config.hpp"

#include <fstream>

#include "fastknock/errors.hpp"

namespace fastknock::cli {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

ConfigBinder::ConfigBinder(CLI::App& app) : app_(app) {
  app_.add_option("--config", config_path_, "JSON file with default values for any flag");
}

CLI::Option* ConfigBinder::flag(const std::string& flags, const std::string& key, bool& ref, const std::string& help) {
  CLI::Option* opt = app_.add_flag(flags, ref, help);
  entries_.push_back({opt, key, [&ref](const json& j) { ref = j.get<bool>(); }});
  return opt;
}

void ConfigBinder::apply() const {
  if (config_path_.empty()) return;
  const json j = read_json(config_path_);
  if (!j.is_object()) throw ParseError(config_path_, 1, "config must be a JSON object");
  for (const Entry& e : entries_) {
    if (e.opt->count() > 0 || !j.contains(e.key)) continue;
    try {
      e.set(j.at(e.key));
    } catch (const json::exception& ex) {
      throw InvalidArgument("config '" + config_path_ + "': bad value for '" + e.key + "': " + ex.what());
    }
  }
}

}  // namespace fastknock::cli
