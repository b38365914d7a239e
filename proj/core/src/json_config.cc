// Copyright 2026 The gatedctr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gatedctr/json_config.h"

#include <fstream>

namespace gatedctr {

StrictObject::StrictObject(const nlohmann::json& object, std::string where)
    : object_(object), where_(std::move(where)) {
  if (!object_.is_object()) {
    throw ConfigError(where_ + ": expected a JSON object");
  }
}

const nlohmann::json& StrictObject::Take(const char* key) {
  consumed_.insert(key);
  return object_.at(key);
}

const nlohmann::json& StrictObject::Raw(const char* key) {
  if (!Has(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
  return Take(key);
}

void StrictObject::Read(const char* key, std::size_t* value) {
  if (!Has(key)) return;
  const auto& v = Take(key);
  if (!v.is_number_unsigned() &&
      !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(where_ + ": '" + key +
                      "' must be a non-negative integer");
  }
  *value = v.get<std::size_t>();
}

void StrictObject::Read(const char* key, double* value) {
  if (!Has(key)) return;
  const auto& v = Take(key);
  if (!v.is_number()) {
    throw ConfigError(where_ + ": '" + key + "' must be a number");
  }
  *value = v.get<double>();
}

void StrictObject::Read(const char* key, bool* value) {
  if (!Has(key)) return;
  const auto& v = Take(key);
  if (!v.is_boolean()) {
    throw ConfigError(where_ + ": '" + key + "' must be true or false");
  }
  *value = v.get<bool>();
}

void StrictObject::Read(const char* key, std::string* value) {
  if (!Has(key)) return;
  const auto& v = Take(key);
  if (!v.is_string()) {
    throw ConfigError(where_ + ": '" + key + "' must be a string");
  }
  *value = v.get<std::string>();
}

void StrictObject::Finish() const {
  std::string unknown;
  for (const auto& [key, _] : object_.items()) {
    if (!consumed_.contains(key)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += "'" + key + "'";
    }
  }
  if (!unknown.empty()) {
    throw ConfigError(where_ + ": unknown key(s) " + unknown);
  }
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path,
                   const nlohmann::json& value) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << value.dump(2) << "\n";
}

}  // namespace gatedctr
