#pragma once

#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace fastknock::cli {

using json = nlohmann::json;

json read_json(const std::string& path);
void write_json(const std::string& path, const json& j);

/// Registers CLI flags that may also come from a JSON config file.
/// A flag given on the command line always wins over the file.
class ConfigBinder {
 public:
  explicit ConfigBinder(CLI::App& app);

  template <class T>
  CLI::Option* option(const std::string& flags, const std::string& key, T& ref, const std::string& help) {
    CLI::Option* opt = app_.add_option(flags, ref, help);
    entries_.push_back({opt, key, [&ref](const json& j) { ref = j.get<T>(); }});
    return opt;
  }

  CLI::Option* flag(const std::string& flags, const std::string& key, bool& ref, const std::string& help);

  /// Fills every option that was not given on the command line from --config.
  void apply() const;

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<void(const json&)> set;
  };
  CLI::App& app_;
  std::string config_path_;
  std::vector<Entry> entries_;
};

}  // namespace fastknock::cli
