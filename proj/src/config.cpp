// SPDX-License-Identifier: Apache-2.0
#include "kane/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>

#include "kane/error.hpp"

namespace kane {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

template <typename E>
E to_enum(const std::string& key, const std::string& v,
          std::initializer_list<std::pair<const char*, E>> options) {
  std::string allowed;
  for (const auto& [name, e] : options) {
    if (v == name) return e;
    allowed += (allowed.empty() ? "" : "|") + std::string(name);
  }
  throw ConfigError(key + ": expected one of " + allowed + ", got '" + v + "'");
}

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dim", [](auto& c, auto& k, auto& v) { c.model.dim = to_size(k, v); }},
      {"head_dim", [](auto& c, auto& k, auto& v) { c.model.head_dim = to_size(k, v); }},
      {"heads", [](auto& c, auto& k, auto& v) { c.model.heads = to_size(k, v); }},
      {"layers", [](auto& c, auto& k, auto& v) { c.model.layers = to_size(k, v); }},
      {"aggregator",
       [](auto& c, auto& k, auto& v) {
         c.model.aggregator =
             to_enum<Aggregator>(k, v, {{"concat", Aggregator::Concat}, {"average", Aggregator::Average}});
       }},
      {"encoder",
       [](auto& c, auto& k, auto& v) {
         c.model.encoder = to_enum<Encoder>(k, v, {{"bow", Encoder::Bow}, {"lstm", Encoder::Lstm}});
       }},
      {"leaky_slope", [](auto& c, auto& k, auto& v) { c.model.leaky_slope = to_double(k, v); }},
      {"norm",
       [](auto& c, auto& k, auto& v) {
         c.model.norm = to_enum<Norm>(k, v, {{"l1", Norm::L1}, {"l2", Norm::L2}});
       }},
      {"attention_form",
       [](auto& c, auto& k, auto& v) {
         c.model.attention = to_enum<AttentionForm>(
             k, v, {{"bilinear", AttentionForm::Bilinear}, {"translational", AttentionForm::Translational}});
       }},
      {"use_attributes", [](auto& c, auto& k, auto& v) { c.model.use_attributes = to_bool(k, v); }},
      {"margin", [](auto& c, auto& k, auto& v) { c.margin = to_double(k, v); }},
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.learning_rate = to_double(k, v); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.batch_size = to_size(k, v); }},
      {"negatives", [](auto& c, auto& k, auto& v) { c.negatives = to_size(k, v); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.epochs = to_size(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_size(k, v); }},
      {"task",
       [](auto& c, auto& k, auto& v) {
         c.task = to_enum<Task>(k, v, {{"completion", Task::Completion},
                                        {"classification", Task::Classification}});
       }},
      {"validate_every", [](auto& c, auto& k, auto& v) { c.validate_every = to_size(k, v); }},
      {"patience", [](auto& c, auto& k, auto& v) { c.patience = to_size(k, v); }},
      {"renormalize", [](auto& c, auto& k, auto& v) { c.renormalize = to_bool(k, v); }},
      {"filter_negatives", [](auto& c, auto& k, auto& v) { c.filter_negatives = to_bool(k, v); }},
      {"mean_reduction", [](auto& c, auto& k, auto& v) { c.mean_reduction = to_bool(k, v); }},
  };
  return table;
}

}  // namespace

KeyValues parse_key_values(std::string_view text, std::string_view source) {
  KeyValues out;
  std::size_t number = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++number;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(std::string(source), number, "expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(std::string(source), number, "empty key");
    out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

std::pair<std::string, std::string> parse_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || trim(text.substr(0, eq)).empty()) {
    throw ConfigError("expected key=value, got '" + std::string(text) + "'");
  }
  return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

void apply_setting(TrainConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown setting '" + key + "'");
  it->second(config, key, value);
}

void apply_settings(TrainConfig& config, const KeyValues& values) {
  for (const auto& [k, v] : values) apply_setting(config, k, v);
}

KeyValues to_key_values(const TrainConfig& c) {
  return {
      {"dim", std::to_string(c.model.dim)},
      {"head_dim", std::to_string(c.model.head_dim)},
      {"heads", std::to_string(c.model.heads)},
      {"layers", std::to_string(c.model.layers)},
      {"aggregator", to_string(c.model.aggregator)},
      {"encoder", to_string(c.model.encoder)},
      {"leaky_slope", fmt_double(c.model.leaky_slope)},
      {"norm", to_string(c.model.norm)},
      {"attention_form", to_string(c.model.attention)},
      {"use_attributes", fmt_bool(c.model.use_attributes)},
      {"margin", fmt_double(c.margin)},
      {"learning_rate", fmt_double(c.learning_rate)},
      {"batch_size", std::to_string(c.batch_size)},
      {"negatives", std::to_string(c.negatives)},
      {"epochs", std::to_string(c.epochs)},
      {"seed", std::to_string(c.seed)},
      {"task", to_string(c.task)},
      {"validate_every", std::to_string(c.validate_every)},
      {"patience", std::to_string(c.patience)},
      {"renormalize", fmt_bool(c.renormalize)},
      {"filter_negatives", fmt_bool(c.filter_negatives)},
      {"mean_reduction", fmt_bool(c.mean_reduction)},
  };
}

std::string format_key_values(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> train_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace kane
