// scoh/kv_config.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// UTF-8 "key = value" text files. Blank lines and lines starting with '#'
// are ignored; later keys override earlier ones.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "scoh/roomsim.hpp"

namespace scoh {

class KvConfig {
 public:
  static KvConfig Parse(const std::string &text);
  static KvConfig Load(const std::string &path);
  void Save(const std::string &path) const;
  std::string ToString() const;

  bool Has(const std::string &key) const { return values_.count(key) > 0; }
  void Set(const std::string &key, const std::string &value) { values_[key] = value; }
  const std::map<std::string, std::string> &values() const { return values_; }

  /// Throws a configuration error when the key is missing or malformed.
  std::string GetString(const std::string &key) const;
  double GetDouble(const std::string &key) const;
  long GetInt(const std::string &key) const;
  std::vector<double> GetDoubles(const std::string &key) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Room, array, sources, azimuths, timeline and seed as key-value entries.
KvConfig ScenarioToConfig(const Scenario &scenario);
Scenario ScenarioFromConfig(const KvConfig &config);

}  // namespace scoh
