#include "run_manifest.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>

#include <openssl/sha.h>

#include "jsee/common.hpp"

namespace jsee::cli {

namespace fs = std::filesystem;

std::string git_blob_hash(const std::string& contents) {
  const std::string payload = "blob " + std::to_string(contents.size()) + '\0' + contents;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(payload.data()), payload.size(), digest);
  std::string hex;
  char buf[3];
  for (unsigned char b : digest) {
    std::snprintf(buf, sizeof(buf), "%02x", b);
    hex += buf;
  }
  return hex;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

nlohmann::ordered_json describe(const std::string& path) {
  nlohmann::ordered_json j;
  j["path"] = path;
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) {
    j["sha1"] = git_blob_hash(read_file(path));
  } else if (fs::is_directory(path, ec)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    nlohmann::ordered_json entries = nlohmann::ordered_json::object();
    for (const auto& f : files) {
      entries[fs::relative(f, path).string()] = git_blob_hash(read_file(f));
    }
    j["files"] = entries;
  } else {
    j["missing"] = true;
  }
  return j;
}

}  // namespace

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_at_(utc_timestamp()) {}

nlohmann::ordered_json RunManifest::finish(int exit_code, const std::string& error) const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["config"] = config_path_ ? nlohmann::ordered_json(*config_path_) : nlohmann::ordered_json(nullptr);
  j["seed"] = seed_ ? nlohmann::ordered_json(*seed_) : nlohmann::ordered_json(nullptr);
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& p : inputs_) j["inputs"].push_back(describe(p));
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& p : outputs_) j["outputs"].push_back(describe(p));
  j["started_at"] = started_at_;
  j["finished_at"] = utc_timestamp();
  j["exit_code"] = exit_code;
  if (!error.empty()) j["error"] = error;
  return j;
}

void RunManifest::write(const std::string& path, int exit_code, const std::string& error) const {
  write_file_atomic(path, finish(exit_code, error).dump(2) + "\n");
}

}  // namespace jsee::cli
