#include "thzlab/system.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace thzlab {

void SystemConfig::validate() const {
  if (carrier_freq_hz <= 0) throw std::invalid_argument("carrier_freq_hz must be positive");
  if (bandwidth_hz <= 0) throw std::invalid_argument("bandwidth_hz must be positive");
  if (bandwidth_hz >= carrier_freq_hz)
    throw std::invalid_argument("bandwidth_hz must be smaller than carrier_freq_hz");
  if (num_subcarriers < 1) throw std::invalid_argument("num_subcarriers must be positive");
  if (num_tx_antennas < 1) throw std::invalid_argument("num_tx_antennas must be positive");
  if (num_rf_chains < 1) throw std::invalid_argument("num_rf_chains must be positive");
  if (num_rf_chains >= num_tx_antennas)
    throw std::invalid_argument("num_rf_chains must be smaller than num_tx_antennas");
  if (num_paths < 1) throw std::invalid_argument("num_paths must be positive");
  if (num_users < 1) throw std::invalid_argument("num_users must be positive");
  if (grid_size < num_tx_antennas)
    throw std::invalid_argument("grid_size must be at least num_tx_antennas");
}

double SystemConfig::noise_variance_for(double signal_power) const {
  return signal_power / std::pow(10.0, snr_db / 10.0);
}

SystemConfig paper_profile() { return SystemConfig{}; }

SystemConfig desk_profile() {
  SystemConfig cfg;
  cfg.carrier_freq_hz = 300e9;
  cfg.bandwidth_hz = 15e9;  // B/f_c = 0.05
  cfg.num_subcarriers = 16;
  cfg.num_tx_antennas = 64;
  cfg.num_rf_chains = 8;
  cfg.num_paths = 3;
  cfg.num_users = 4;
  cfg.grid_size = 320;
  return cfg;
}

double subcarrier_frequency(const SystemConfig& cfg, int m) {
  if (m < 1 || m > cfg.num_subcarriers)
    throw std::domain_error("subcarrier index m outside [1, M]");
  const double step = cfg.bandwidth_hz / cfg.num_subcarriers;
  return cfg.carrier_freq_hz + step * (m - 1 - (cfg.num_subcarriers - 1) / 2.0);
}

namespace {

using nlohmann::json;

void apply_json(SystemConfig& cfg, const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "carrier_freq_hz") cfg.carrier_freq_hz = value.get<double>();
    else if (key == "bandwidth_hz") cfg.bandwidth_hz = value.get<double>();
    else if (key == "num_subcarriers") cfg.num_subcarriers = value.get<int>();
    else if (key == "num_tx_antennas") cfg.num_tx_antennas = value.get<int>();
    else if (key == "num_rf_chains") cfg.num_rf_chains = value.get<int>();
    else if (key == "num_paths") cfg.num_paths = value.get<int>();
    else if (key == "num_users") cfg.num_users = value.get<int>();
    else if (key == "grid_size") cfg.grid_size = value.get<int>();
    else if (key == "snr_db") cfg.snr_db = value.get<double>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else throw std::invalid_argument("unknown config field: " + key);
  }
  cfg.validate();
}

}  // namespace

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  SystemConfig cfg;
  apply_json(cfg, j);
  return cfg;
}

void apply_json_overrides(SystemConfig& cfg, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("scenario override parse error: ") + e.what());
  }
  apply_json(cfg, j);
}

std::string config_to_json(const SystemConfig& cfg) {
  nlohmann::ordered_json j;
  j["carrier_freq_hz"] = cfg.carrier_freq_hz;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["num_subcarriers"] = cfg.num_subcarriers;
  j["num_tx_antennas"] = cfg.num_tx_antennas;
  j["num_rf_chains"] = cfg.num_rf_chains;
  j["num_paths"] = cfg.num_paths;
  j["num_users"] = cfg.num_users;
  j["grid_size"] = cfg.grid_size;
  j["snr_db"] = cfg.snr_db;
  j["seed"] = cfg.seed;
  return j.dump();
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(seed), engine_(splitmix64(seed)) {}

Rng Rng::child(std::string_view name) const {
  return Rng(splitmix64(key_ ^ fnv1a64(name)));
}

Rng Rng::child(std::string_view name, std::uint64_t index) const {
  return Rng(splitmix64(key_ ^ fnv1a64(name) ^ splitmix64(index + 1)));
}

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(engine_);
}

double Rng::normal() {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(engine_);
}

std::complex<double> Rng::complex_gaussian(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

std::uint64_t Rng::next_u64() { return engine_(); }

std::string Rng::serialize_state() const {
  std::ostringstream out;
  out << key_ << ' ' << engine_;
  return out.str();
}

Rng Rng::deserialize_state(const std::string& text) {
  std::istringstream in(text);
  Rng rng(0);
  in >> rng.key_ >> rng.engine_;
  if (!in) throw std::runtime_error("malformed rng state");
  return rng;
}

}  // namespace thzlab
