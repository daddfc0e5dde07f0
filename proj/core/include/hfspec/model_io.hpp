#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hfspec/spin_core.hpp"

namespace hfspec {

// Tensor configuration file:
//
//   {
//     "units":   {"Q": "MHz", "M": "MHz_per_T", "B": "mT"},
//     "ground":  {"Q": {...}, "M": {...}},
//     "excited": {"Q": {...}, "M": {...}}
//   }
//
// where each tensor is either {"matrix": [[..], [..], [..]]} or
// {"principal": [a, b, c], "euler_deg": [alpha, beta, gamma]} (ZYZ, rotating
// the principal frame into the crystal frame). Errors are InputError with the
// offending key path, and the line/column for JSON syntax errors.
SpinModel parse_spin_model(std::string_view json_text,
                           const std::string& source = "<string>");
SpinModel load_spin_model(const std::filesystem::path& path);

// Serialized form always uses the "matrix" representation.
std::string spin_model_to_json(const SpinModel& model);

// "bx,by,bz" in mT
FieldVector parse_field(std::string_view text);

}  // namespace hfspec
