#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"

namespace epd {

/// Time grid plus named real channels. `provenance` records the producing route
/// ("HE", "ME", "oracle", ...); `metadata` carries free-form key/value notes.
struct TimeSeries {
  std::vector<double> t;
  std::vector<std::string> names;
  std::vector<std::vector<double>> channels;
  std::string provenance;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return t.size(); }

  void add_channel(std::string name, std::vector<double> values) {
    if (values.size() != t.size())
      throw NumericalError("channel '" + name + "' has " + std::to_string(values.size()) +
                           " samples for a grid of " + std::to_string(t.size()));
    names.push_back(std::move(name));
    channels.push_back(std::move(values));
  }

  bool has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }

  const std::vector<double>& channel(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw NumericalError("no channel named '" + name + "'");
    return channels[static_cast<std::size_t>(it - names.begin())];
  }
};

}  // namespace epd
