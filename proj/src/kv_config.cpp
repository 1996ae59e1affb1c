// kv_config.cpp

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

#include "scoh/kv_config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "scoh/error.hpp"

namespace scoh {

namespace {

std::string Trim(const std::string &s) {
  const char *ws = " \t\r\n";
  size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

std::string Join(const std::vector<double> &v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

std::string PointText(const Point3 &p) { return Join({p(0), p(1), p(2)}); }

Point3 PointFrom(const KvConfig &c, const std::string &key) {
  auto v = c.GetDoubles(key);
  Require(v.size() == 3, ErrorKind::kConfiguration, "'" + key + "' needs three coordinates");
  return {v[0], v[1], v[2]};
}

}  // namespace

KvConfig KvConfig::Parse(const std::string &text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    Require(eq != std::string::npos, ErrorKind::kConfiguration,
            "line " + std::to_string(number) + " is not 'key = value'");
    std::string key = Trim(t.substr(0, eq));
    Require(!key.empty(), ErrorKind::kConfiguration, "empty key on line " + std::to_string(number));
    cfg.values_[key] = Trim(t.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::Load(const std::string &path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

std::string KvConfig::ToString() const {
  std::ostringstream os;
  for (const auto &[k, v] : values_) os << k << " = " << v << '\n';
  return os.str();
}

void KvConfig::Save(const std::string &path) const {
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out << ToString();
  Require(static_cast<bool>(out), ErrorKind::kIo, "write to '" + path + "' failed");
}

std::string KvConfig::GetString(const std::string &key) const {
  auto it = values_.find(key);
  Require(it != values_.end(), ErrorKind::kConfiguration, "missing key '" + key + "'");
  return it->second;
}

double KvConfig::GetDouble(const std::string &key) const {
  const std::string s = GetString(key);
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  Require(used == s.size() && used > 0, ErrorKind::kConfiguration, "'" + key + "' is not a number: " + s);
  return v;
}

long KvConfig::GetInt(const std::string &key) const {
  const std::string s = GetString(key);
  size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  Require(used == s.size() && used > 0, ErrorKind::kConfiguration, "'" + key + "' is not an integer: " + s);
  return v;
}

std::vector<double> KvConfig::GetDoubles(const std::string &key) const {
  std::istringstream in(GetString(key));
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception &) {
      Fail(ErrorKind::kConfiguration, "'" + key + "' has a non-numeric entry: " + tok);
    }
  }
  return out;
}

KvConfig ScenarioToConfig(const Scenario &sc) {
  KvConfig c;
  const RoomSpec &r = sc.room;
  c.Set("seed", std::to_string(sc.seed));
  c.Set("room.dims", PointText(r.dims));
  c.Set("room.t60", Join({r.t60}));
  c.Set("room.sound_speed", Join({r.sound_speed}));
  c.Set("room.sample_rate", Join({r.sample_rate}));
  c.Set("mics", std::to_string(r.num_mics()));
  for (int m = 0; m < r.num_mics(); ++m) c.Set("mic." + std::to_string(m), PointText(r.array_positions[m]));
  c.Set("sources", std::to_string(r.num_sources()));
  for (int j = 0; j < r.num_sources(); ++j) {
    c.Set("source." + std::to_string(j), PointText(r.source_positions[j]));
    if (j < static_cast<int>(sc.azimuths_deg.size()))
      c.Set("source." + std::to_string(j) + ".azimuth", Join({sc.azimuths_deg[j]}));
    std::vector<double> spans;
    if (j < sc.timeline.num_speakers())
      for (const auto &s : sc.timeline.intervals[j]) {
        spans.push_back(s.start);
        spans.push_back(s.end);
      }
    c.Set("source." + std::to_string(j) + ".spans", Join(spans));
  }
  c.Set("clip_len_s", Join({sc.timeline.clip_len_s}));
  return c;
}

Scenario ScenarioFromConfig(const KvConfig &c) {
  Scenario sc;
  const std::string seed = c.GetString("seed");
  size_t used = 0;
  try {
    sc.seed = std::stoull(seed, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  Require(used == seed.size() && used > 0 && seed[0] != '-', ErrorKind::kConfiguration,
          "'seed' is not an unsigned integer: " + seed);
  RoomSpec &r = sc.room;
  r.dims = PointFrom(c, "room.dims");
  r.t60 = c.GetDouble("room.t60");
  r.sound_speed = c.GetDouble("room.sound_speed");
  r.sample_rate = c.GetDouble("room.sample_rate");
  const long mics = c.GetInt("mics"), sources = c.GetInt("sources");
  Require(mics >= 0 && sources >= 0, ErrorKind::kConfiguration, "negative mic or source count");
  for (long m = 0; m < mics; ++m) r.array_positions.push_back(PointFrom(c, "mic." + std::to_string(m)));
  sc.timeline.clip_len_s = c.GetDouble("clip_len_s");
  sc.timeline.intervals.resize(sources);
  for (long j = 0; j < sources; ++j) {
    const std::string key = "source." + std::to_string(j);
    r.source_positions.push_back(PointFrom(c, key));
    if (c.Has(key + ".azimuth")) sc.azimuths_deg.push_back(c.GetDouble(key + ".azimuth"));
    auto spans = c.GetDoubles(key + ".spans");
    Require(spans.size() % 2 == 0, ErrorKind::kConfiguration, "'" + key + ".spans' needs start/end pairs");
    for (size_t i = 0; i < spans.size(); i += 2) sc.timeline.intervals[j].push_back({spans[i], spans[i + 1]});
  }
  r.Validate();
  sc.timeline.Validate();
  return sc;
}

}  // namespace scoh
