#pragma once

// Flat key = value configuration for hyperparameters, schedules and the
// baseline LDA. '#' starts a comment; unknown keys are errors.

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "pietl/baselines.hpp"
#include "pietl/corpus.hpp"
#include "pietl/dpm.hpp"
#include "pietl/errors.hpp"

namespace pietl::config {

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline KeyValues parse(std::istream& in) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw data_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw data_error("config line " + std::to_string(line_no) + ": empty key or value");
    kv[key] = value;
  }
  return kv;
}

inline KeyValues read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config " + path);
  return parse(in);
}

// Everything a fit depends on besides the corpus file and the seed.
struct FitConfig {
  dpm::Hyperparams hyper;
  dpm::Schedule schedule;
  baselines::LdaConfig lda;
  int min_count = 1;
  int epoch_days = 7;
  std::optional<std::int64_t> origin;  // default: earliest timestamp
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw data_error("config " + key + ": not a number: " + v);
  return out;
}

inline int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw data_error("config " + key + ": not an integer: " + v);
  return out;
}

inline std::int64_t to_int64(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw data_error("config " + key + ": not an integer: " + v);
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw data_error("config " + key + ": not a boolean: " + v);
}

}  // namespace detail

inline void apply(const KeyValues& kv, FitConfig& c) {
  using namespace detail;
  for (const auto& [k, v] : kv) {
    if (k == "alpha") c.hyper.alpha = to_double(k, v);
    else if (k == "gamma") c.hyper.gamma = to_double(k, v);
    else if (k == "mu") c.hyper.mu = to_double(k, v);
    else if (k == "kappa") c.hyper.kappa = to_double(k, v);
    else if (k == "eta_x") c.hyper.eta_x = c.lda.eta_x = to_double(k, v);
    else if (k == "eta_y") c.hyper.eta_y = c.lda.eta_y = to_double(k, v);
    else if (k == "lambda") c.hyper.lambda = c.lda.word_prior = to_double(k, v);
    else if (k == "concentration_shape") c.hyper.concentration_shape = to_double(k, v);
    else if (k == "concentration_rate") c.hyper.concentration_rate = to_double(k, v);
    else if (k == "resample_concentrations") c.hyper.resample_concentrations = to_bool(k, v);
    else if (k == "concentration_iterations") c.hyper.concentration_iterations = to_int(k, v);
    else if (k == "burn_in") c.schedule.burn_in = c.lda.schedule.burn_in = to_int(k, v);
    else if (k == "samples") c.schedule.samples = c.lda.schedule.samples = to_int(k, v);
    else if (k == "thin") c.schedule.thin = c.lda.schedule.thin = to_int(k, v);
    else if (k == "lda_background_topics") c.lda.background_topics = to_int(k, v);
    else if (k == "lda_epoch_topics") c.lda.epoch_topics = to_int(k, v);
    else if (k == "lda_user_topics") c.lda.user_topics = to_int(k, v);
    else if (k == "lda_cell_topics") c.lda.cell_topics = to_int(k, v);
    else if (k == "lda_topic_prior") c.lda.topic_prior = to_double(k, v);
    else if (k == "min_count") c.min_count = to_int(k, v);
    else if (k == "epoch_days") c.epoch_days = to_int(k, v);
    else if (k == "origin") c.origin = to_int64(k, v);
    else throw data_error("config: unknown key " + k);
  }
}

inline void validate(const FitConfig& c) {
  c.hyper.validate();
  c.schedule.validate();
  c.lda.validate();
  if (c.min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  if (c.epoch_days < 1) throw std::invalid_argument("epoch_days must be >= 1");
}

inline IngestConfig ingest_config(const FitConfig& c) {
  IngestConfig ic;
  ic.min_count = c.min_count;
  ic.epoch_length = static_cast<std::int64_t>(c.epoch_days) * kSecondsPerDay;
  ic.origin = c.origin;
  return ic;
}

// Round-trips through apply(); doubles are printed exactly.
inline nlohmann::ordered_json to_json(const FitConfig& c) {
  nlohmann::ordered_json j;
  j["alpha"] = c.hyper.alpha;
  j["gamma"] = c.hyper.gamma;
  j["mu"] = c.hyper.mu;
  j["kappa"] = c.hyper.kappa;
  j["eta_x"] = c.hyper.eta_x;
  j["eta_y"] = c.hyper.eta_y;
  j["lambda"] = c.hyper.lambda;
  j["concentration_shape"] = c.hyper.concentration_shape;
  j["concentration_rate"] = c.hyper.concentration_rate;
  j["resample_concentrations"] = c.hyper.resample_concentrations;
  j["concentration_iterations"] = c.hyper.concentration_iterations;
  j["burn_in"] = c.schedule.burn_in;
  j["samples"] = c.schedule.samples;
  j["thin"] = c.schedule.thin;
  j["lda_background_topics"] = c.lda.background_topics;
  j["lda_epoch_topics"] = c.lda.epoch_topics;
  j["lda_user_topics"] = c.lda.user_topics;
  j["lda_cell_topics"] = c.lda.cell_topics;
  j["lda_topic_prior"] = c.lda.topic_prior;
  j["min_count"] = c.min_count;
  j["epoch_days"] = c.epoch_days;
  if (c.origin) j["origin"] = *c.origin;
  return j;
}

inline std::string to_text(const FitConfig& c) {
  const auto j = to_json(c);
  std::string out;
  for (const auto& [k, v] : j.items()) out += k + " = " + v.dump() + "\n";
  return out;
}

inline KeyValues from_json(const nlohmann::ordered_json& j) {
  KeyValues kv;
  for (const auto& [k, v] : j.items()) kv[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return kv;
}

}  // namespace pietl::config
