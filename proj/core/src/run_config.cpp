// Copyright 2026 The hlmtc Authors.
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

#include "hlmtc/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hlmtc/error.hpp"
#include "hlmtc/exits.hpp"
#include "text_util.hpp"

namespace hlmtc {
namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string where(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

template <typename T>
T parse_integer(std::string_view section, std::string_view key, std::string_view text) {
  T value{};
  const auto t = text::trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    fail(Errc::kConfig, where(section, key) + ": expected an integer, got '" +
                            std::string(text) + "'");
  }
  return value;
}

double parse_double(std::string_view section, std::string_view key, std::string_view text) {
  const std::string t(text::trim(text));
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    fail(Errc::kConfig, where(section, key) + ": expected a number, got '" + t + "'");
  }
  return v;
}

std::vector<double> parse_list(std::string_view section, std::string_view key,
                               std::string_view text) {
  std::vector<double> out;
  for (auto item : text::split(text, ',')) out.push_back(parse_double(section, key, item));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += g17(xs[i]);
  }
  return out;
}

}  // namespace

void RunConfig::set(std::string_view section, std::string_view key, std::string_view value) {
  const std::string v(text::trim(value));
  auto integer = [&]<typename T>(T& field) { field = parse_integer<T>(section, key, v); };
  auto number = [&](double& field) { field = parse_double(section, key, v); };
  auto unknown = [&] { fail(Errc::kConfig, "unknown config key '" + where(section, key) + "'"); };

  if (section == "run") {
    if (key == "seed") integer(seed);
    else if (key == "scheme") scheme = v;
    else if (key == "threads") integer(train.threads);
    else unknown();
  } else if (section == "model") {
    if (key == "num_layers") integer(model.num_layers);
    else if (key == "hidden_size") integer(model.hidden_size);
    else if (key == "num_heads") integer(model.num_heads);
    else if (key == "feed_forward_size") integer(model.feed_forward_size);
    else if (key == "max_sequence_length") integer(model.max_sequence_length);
    else if (key == "dropout_rate") number(model.dropout_rate);
    else unknown();
  } else if (section == "train") {
    if (key == "learning_rate") number(train.learning_rate);
    else if (key == "batch_size") integer(train.batch_size);
    else if (key == "max_epochs") integer(train.max_epochs);
    else if (key == "patience") integer(train.patience);
    else unknown();
  } else if (section == "grid") {
    if (key == "learning_rates") grid.learning_rates = parse_list(section, key, v);
    else if (key == "dropout_rates") grid.dropout_rates = parse_list(section, key, v);
    else if (key == "jobs") integer(grid.jobs);
    else unknown();
  } else if (section == "data") {
    if (key == "drop_top") integer(drop_top);
    else if (key == "drop_bottom") integer(drop_bottom);
    else if (key == "min_frequency") integer(min_frequency);
    else if (key == "max_vocabulary") integer(max_vocabulary);
    else if (key == "stopwords") stopwords = v;
    else unknown();
  } else if (section == "paths") {
    if (key == "corpus") corpus = v;
    else if (key == "hierarchy") hierarchy = v;
    else unknown();
  } else if (section == "analysis") {
    if (key == "reduction") {
      try {
        reduction = parse_reduction(v);
      } catch (const Error& e) {
        fail(Errc::kConfig, where(section, key) + ": " + e.what());
      }
    } else {
      unknown();
    }
  } else {
    fail(Errc::kConfig, "unknown config section '" + std::string(section) + "'");
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIo, "cannot open config file '" + path.string() + "'");
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(Errc::kConfig, path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      fail(Errc::kConfig, path.string() + ": key '" + section + "' outside a section");
    }
    for (const auto& [key, node] : keys) set(section, key, node.data());
  }
}

void RunConfig::validate() const {
  WiringScheme::parse(scheme);
  ModelConfig m = model;
  if (m.vocabulary_size == 0) m.vocabulary_size = 5;  // checked again once built
  m.validate();
  train.validate();
  grid.validate();
  if (drop_top < 0 || drop_bottom < 0) fail(Errc::kConfig, "drop counts must be non-negative");
  if (min_frequency == 0) fail(Errc::kConfig, "min_frequency must be at least 1");
}

std::string RunConfig::to_ini() const {
  std::ostringstream s;
  s << "[run]\n"
    << "seed = " << seed << '\n'
    << "scheme = " << scheme << '\n'
    << "threads = " << train.threads << '\n'
    << "\n[model]\n"
    << "num_layers = " << model.num_layers << '\n'
    << "hidden_size = " << model.hidden_size << '\n'
    << "num_heads = " << model.num_heads << '\n'
    << "feed_forward_size = " << model.feed_forward_size << '\n'
    << "max_sequence_length = " << model.max_sequence_length << '\n'
    << "dropout_rate = " << g17(model.dropout_rate) << '\n'
    << "\n[train]\n"
    << "learning_rate = " << g17(train.learning_rate) << '\n'
    << "batch_size = " << train.batch_size << '\n'
    << "max_epochs = " << train.max_epochs << '\n'
    << "patience = " << train.patience << '\n'
    << "\n[grid]\n"
    << "learning_rates = " << join(grid.learning_rates) << '\n'
    << "dropout_rates = " << join(grid.dropout_rates) << '\n'
    << "jobs = " << grid.jobs << '\n'
    << "\n[data]\n"
    << "drop_top = " << drop_top << '\n'
    << "drop_bottom = " << drop_bottom << '\n'
    << "min_frequency = " << min_frequency << '\n'
    << "max_vocabulary = " << max_vocabulary << '\n'
    << "stopwords = " << stopwords << '\n'
    << "\n[paths]\n"
    << "corpus = " << corpus << '\n'
    << "hierarchy = " << hierarchy << '\n'
    << "\n[analysis]\n"
    << "reduction = " << reduction_name(reduction) << '\n';
  return s.str();
}

RunConfig RunConfig::from_ini(std::string_view text) {
  namespace pt = boost::property_tree;
  std::istringstream in{std::string(text)};
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(Errc::kConfig, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, keys] : tree) {
    for (const auto& [key, node] : keys) c.set(section, key, node.data());
  }
  return c;
}

}  // namespace hlmtc
