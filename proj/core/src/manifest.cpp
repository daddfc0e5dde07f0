#include "hfspec/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "hfspec/error.hpp"
#include "hfspec/table_io.hpp"

namespace hfspec {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof buf, "%02x", digest[k]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

RunManifest::RunManifest(std::string command) : command_(std::move(command)) {}

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_.push_back({role, path.string(), sha256_file(path)});
}

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs_.emplace_back(path.filename().string(), sha256_file(path));
}

void RunManifest::set(const std::string& key, Value value) {
  for (auto& [k, v] : parameters_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  parameters_.emplace_back(key, std::move(value));
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json root;
  root["command"] = command_;
  root["tool_version"] = library_version();
  root["timestamp"] = timestamp_;
  root["inputs"] = nlohmann::ordered_json::array();
  for (const Input& in : inputs_) {
    root["inputs"].push_back({{"role", in.role}, {"path", in.path}, {"sha256", in.sha256}});
  }
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [key, value] : parameters_) {
    std::visit([&](const auto& v) { params[key] = v; }, value);
  }
  root["parameters"] = params;
  root["outputs"] = nlohmann::ordered_json::array();
  for (const auto& [path, digest] : outputs_) {
    root["outputs"].push_back({{"file", path}, {"sha256", digest}});
  }
  return root.dump(2) + "\n";
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const char* library_version() { return HFSPEC_VERSION; }

}  // namespace hfspec
