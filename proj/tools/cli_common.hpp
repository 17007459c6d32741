#pragma once

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tensorad/csv.hpp"
#include "tensorad/error.hpp"
#include "tensorad/json_io.hpp"

namespace tensorad::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

/// Bad flag or config value; reported with the field name, exit code 1.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error("invalid config field '" + field + "': " + what) {}
};

inline void require_field(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

inline std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

/// Output directory plus the metadata written as config.json.
class RunDir {
 public:
  RunDir(const std::string& command, const std::string& dir) : command_(command), dir_(dir) {
    require_field(!dir.empty(), "out", "output directory required");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  std::ofstream open(const std::string& name) const { return csv::open_output(path(name).string()); }

  /// Records the digest of an input file under `key`.
  void input(const std::string& key, const fs::path& p) { inputs_[key] = sha256_file(p); }

  json config = json::object();
  json resolved = json::object();  // derived settings, informational

  void write() const {
    json j = {{"command", command_},
              {"config", config},
              {"resolved", resolved},
              {"inputs", inputs_},
              {"versions",
               {{"tensorad", kVersion},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                {"compiler", __VERSION__}}}};
    std::ofstream out = csv::open_output(path("config.json").string());
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  fs::path dir_;
  std::map<std::string, std::string> inputs_;
};

inline json typed_value(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  std::int64_t i = 0;
  auto [pi, ei] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ei == std::errc{} && pi == v.data() + v.size() && !v.empty()) return i;
  double d = 0.0;
  auto [pd, ed] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ed == std::errc{} && pd == v.data() + v.size() && !v.empty()) return d;
  return v;
}

/// Every long option of `sub` (given or defaulted) except output location,
/// config file and help.
inline json resolved_options(const CLI::App& sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "out" || name == "config" || opt->get_lnames().empty()) continue;
    if (opt->get_type_size() == 0) {
      j[name] = opt->count() > 0 && opt->as<bool>();
    } else {
      j[name] = typed_value(opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str());
    }
  }
  return j;
}

/// Fills options of `sub` that were not given on the command line from a
/// JSON object keyed by long option name. Either the flat object or the
/// "config" member of a previous run's config.json is accepted.
inline void apply_config_file(CLI::App& sub, const std::string& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open config file '" + file + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("config file '" + file + "' is not valid JSON: " + e.what());
  }
  if (j.contains("config") && j.contains("command")) j = j["config"];
  if (!j.is_object()) throw DataError("config file '" + file + "' must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) throw ConfigError(key, "not an option of '" + sub.get_name() + "'");
    if (opt->count() > 0) continue;  // command line wins
    std::string v;
    if (value.is_string()) {
      v = value.get<std::string>();
    } else if (value.is_number() || value.is_boolean()) {
      v = value.dump();
    } else {
      throw ConfigError(key, "must be a string, number or boolean");
    }
    opt->clear();
    try {
      opt->add_result(v);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(key, e.what());
    }
  }
}

}  // namespace tensorad::cli
