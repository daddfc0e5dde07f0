#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace hfspec {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Record of one run: what was read, which parameters were in effect, what
// was written. Everything except `timestamp` is a function of the inputs.
class RunManifest {
 public:
  using Value = std::variant<std::string, double, long long, bool>;

  explicit RunManifest(std::string command);

  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, Value value);
  void set_timestamp(std::string iso8601) { timestamp_ = std::move(iso8601); }

  const std::string& command() const { return command_; }
  std::string to_json() const;

 private:
  struct Input {
    std::string role;
    std::string path;
    std::string sha256;
  };
  std::string command_;
  std::string timestamp_;
  std::vector<Input> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;  // path, sha256
  std::vector<std::pair<std::string, Value>> parameters_;
};

std::string utc_timestamp();

const char* library_version();

}  // namespace hfspec
