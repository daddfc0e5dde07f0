#include "hfspec/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hfspec/error.hpp"
#include "hfspec/table_io.hpp"

namespace hfspec {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& source, const std::string& key,
                       const std::string& message) {
  throw InputError(source + ": " + key + ": " + message);
}

std::pair<int, int> line_and_column(std::string_view text, std::size_t byte) {
  int line = 1;
  int column = 1;
  for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

Eigen::Vector3d read_vector3(const json& node, const std::string& source,
                             const std::string& key) {
  if (!node.is_array() || node.size() != 3) fail(source, key, "expected an array of 3 numbers");
  Eigen::Vector3d v;
  for (int k = 0; k < 3; ++k) {
    if (!node[k].is_number()) fail(source, key, "element " + std::to_string(k) + " is not a number");
    v[k] = node[k].get<double>();
  }
  return v;
}

Tensor3 read_tensor(const json& parent, const std::string& source,
                    const std::string& key, const char* name) {
  const std::string path = key + "." + name;
  if (!parent.contains(name)) fail(source, path, "missing");
  const json& node = parent.at(name);
  if (!node.is_object()) fail(source, path, "expected an object");
  try {
    if (node.contains("matrix")) {
      const json& rows = node.at("matrix");
      if (!rows.is_array() || rows.size() != 3) fail(source, path + ".matrix", "expected 3 rows");
      Eigen::Matrix3d m;
      for (int r = 0; r < 3; ++r) {
        m.row(r) = read_vector3(rows[r], source, path + ".matrix[" + std::to_string(r) + "]");
      }
      return Tensor3::from_matrix(m);
    }
    if (node.contains("principal")) {
      if (!node.contains("euler_deg")) fail(source, path, "'principal' requires 'euler_deg'");
      return Tensor3::from_principal(read_vector3(node.at("principal"), source, path + ".principal"),
                                     read_vector3(node.at("euler_deg"), source, path + ".euler_deg"));
    }
  } catch (const InputError& e) {
    const std::string what = e.what();
    if (what.rfind(source, 0) == 0) throw;
    fail(source, path, what);
  }
  fail(source, path, "expected 'matrix' or 'principal' + 'euler_deg'");
}

void check_units(const json& root, const std::string& source) {
  if (!root.contains("units")) fail(source, "units", "missing (expected {\"Q\":\"MHz\",\"M\":\"MHz_per_T\",\"B\":\"mT\"})");
  const json& u = root.at("units");
  const std::pair<const char*, const char*> expected[] = {
      {"Q", "MHz"}, {"M", "MHz_per_T"}, {"B", "mT"}};
  for (const auto& [key, unit] : expected) {
    if (!u.contains(key) || !u.at(key).is_string() || u.at(key).get<std::string>() != unit) {
      fail(source, std::string("units.") + key, std::string("must be \"") + unit + "\"");
    }
  }
}

StateTensors read_state(const json& root, const std::string& source, const char* name) {
  if (!root.contains(name) || !root.at(name).is_object()) fail(source, name, "missing or not an object");
  const json& node = root.at(name);
  return {read_tensor(node, source, name, "Q"), read_tensor(node, source, name, "M")};
}

json tensor_json(const Tensor3& t) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({t(r, 0), t(r, 1), t(r, 2)});
  return json{{"matrix", rows}};
}

}  // namespace

SpinModel parse_spin_model(std::string_view json_text, const std::string& source) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                     ": JSON syntax error: " + e.what());
  }
  if (!root.is_object()) fail(source, "<root>", "expected a JSON object");
  check_units(root, source);
  return {read_state(root, source, "ground"), read_state(root, source, "excited")};
}

SpinModel load_spin_model(const std::filesystem::path& path) {
  return parse_spin_model(read_text_file(path), path.string());
}

std::string spin_model_to_json(const SpinModel& model) {
  json root;
  root["units"] = {{"Q", "MHz"}, {"M", "MHz_per_T"}, {"B", "mT"}};
  root["ground"] = {{"Q", tensor_json(model.ground.Q)}, {"M", tensor_json(model.ground.M)}};
  root["excited"] = {{"Q", tensor_json(model.excited.Q)}, {"M", tensor_json(model.excited.M)}};
  return root.dump(2) + "\n";
}

FieldVector parse_field(std::string_view text) {
  const auto parts = split_fields(text, ',');
  if (parts.size() != 3) {
    throw InputError("field must be \"bx,by,bz\" in mT, got '" + std::string(text) + "'");
  }
  return FieldVector(parse_double(parts[0], "field D1"), parse_double(parts[1], "field D2"),
                     parse_double(parts[2], "field b"));
}

}  // namespace hfspec
