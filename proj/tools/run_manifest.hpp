#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace jsee::cli {

// SHA-1 of "blob <size>\0<contents>", as printed by `git hash-object`.
std::string git_blob_hash(const std::string& contents);

// One record per CLI invocation.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void set_config(const std::string& path) { config_path_ = path; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  // Files are hashed when the manifest is written; directories hash each
  // regular file below them.
  void add_input(const std::string& path) { inputs_.push_back(path); }
  void add_output(const std::string& path) { outputs_.push_back(path); }

  nlohmann::ordered_json finish(int exit_code, const std::string& error = "") const;
  void write(const std::string& path, int exit_code, const std::string& error = "") const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_at_;
  std::optional<std::string> config_path_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

std::string utc_timestamp();

}  // namespace jsee::cli
