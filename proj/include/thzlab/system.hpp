#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace thzlab {

/// Scenario constants for one simulated THz multi-user downlink.
///
/// Defaults follow the wideband ultra-massive MIMO setup used throughout
/// the experiments (300 GHz carrier, 15 GHz bandwidth, 1024-antenna ULA,
/// 32 RF chains, 8 users, 5 paths, 5x overcomplete angle grid).
struct SystemConfig {
  double carrier_freq_hz = 300e9;  // f_c
  double bandwidth_hz = 15e9;      // B
  int num_subcarriers = 128;       // M
  int num_tx_antennas = 1024;      // N_T
  int num_rf_chains = 32;          // N_RF
  int num_paths = 5;               // L
  int num_users = 8;               // K
  int grid_size = 5120;            // N (angle grid, >= N_T)
  double snr_db = 20.0;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument when a field violates the scenario
  /// invariants (N_RF < N_T, N >= N_T, B < f_c, positive counts).
  void validate() const;

  /// Noise variance for a given empirical signal power:
  /// sigma_n^2 = P_signal / 10^(snr_db/10).
  double noise_variance_for(double signal_power) const;
};

/// Full-scale profile (the defaults of SystemConfig).
SystemConfig paper_profile();

/// Small profile sized so every experiment runs in seconds to minutes on a
/// workstation: N_T=64, N=320, N_RF=8, M=16, K=4, L=3.
SystemConfig desk_profile();

/// f_m = f_c + (B/M) * (m - 1 - (M-1)/2), 1-based m.
/// Throws std::domain_error for m outside [1, M].
double subcarrier_frequency(const SystemConfig& cfg, int m);

/// Reads a JSON config file whose keys map one-to-one onto SystemConfig
/// fields; absent keys keep their defaults. Throws std::runtime_error on
/// I/O or parse failure, std::invalid_argument on invalid values.
SystemConfig load_config_file(const std::string& path);

/// Applies the same one-to-one key mapping from a JSON object given as
/// text (used for scenario overrides inside experiment specs).
void apply_json_overrides(SystemConfig& cfg, const std::string& json_text);

/// Serializes a config to JSON text with every field present.
std::string config_to_json(const SystemConfig& cfg);

/// Deterministic random stream with named child-stream splitting.
///
/// All randomness in an experiment flows from one root seed; independent
/// axes (channel, noise, model init, transmission noise) draw from child
/// streams so that varying one axis never perturbs another. Children are
/// derived from the parent's key, not its draw position, so they may be
/// split before parallel fan-out.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng child(std::string_view name) const;
  Rng child(std::string_view name, std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::mt19937_64& engine() { return engine_; }

  double uniform(double lo, double hi);
  double normal();  // standard normal
  /// Circularly-symmetric complex Gaussian with the given total variance.
  std::complex<double> complex_gaussian(double variance);
  std::uint64_t next_u64();

  /// Engine + key state round-trip, used by training checkpoints.
  std::string serialize_state() const;
  static Rng deserialize_state(const std::string& text);

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace thzlab
