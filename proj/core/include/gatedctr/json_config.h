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

// Strict JSON object reader for config files: every key must be consumed,
// so a misspelled option is an error instead of a silent default.

#ifndef GATEDCTR_JSON_CONFIG_H_
#define GATEDCTR_JSON_CONFIG_H_

#include <cstddef>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace gatedctr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StrictObject {
 public:
  StrictObject(const nlohmann::json& object, std::string where);

  // Each Read* leaves *value untouched when the key is absent.
  void Read(const char* key, std::size_t* value);
  void Read(const char* key, double* value);
  void Read(const char* key, bool* value);
  void Read(const char* key, std::string* value);
  bool Has(const char* key) const { return object_.contains(key); }
  const nlohmann::json& Raw(const char* key);

  // Throws ConfigError listing keys that no Read consumed.
  void Finish() const;

 private:
  const nlohmann::json& Take(const char* key);

  const nlohmann::json& object_;
  std::string where_;
  std::set<std::string> consumed_;
};

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path,
                   const nlohmann::json& value);

}  // namespace gatedctr

#endif  // GATEDCTR_JSON_CONFIG_H_
