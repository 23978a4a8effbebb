#pragma once

#include <Eigen/Dense>
#include <vector>

#include "thzlab/channel.hpp"
#include "thzlab/system.hpp"

namespace thzlab {

/// Beamspace dictionary F (columns a(phi_n)), analog precoder B and the
/// compressed measurement matrix A = B F, built once per scenario and
/// shared read-only afterwards.
struct SensingEnsemble {
  CMat dictionary;            // N_T x N
  Eigen::VectorXd grid_angles;  // phi_n = (2n - N - 1)/N, strictly increasing
  CMat precoder;              // N_RF x N_T, entries (1/sqrt(N_T)) e^{j phi}
  CMat measurement;           // A = precoder * dictionary
  Eigen::VectorXd column_norms;  // ||A_n||_2, cached for matched filtering
  double grid_step = 0.0;     // rho = 2/N

  int grid_size() const { return static_cast<int>(grid_angles.size()); }

  /// Index of the grid cell nearest to `angle`, after wrapping into
  /// [-1, 1). The beamspace is 2-periodic, so the wrap is exact physics,
  /// not clamping.
  int nearest_grid_index(double angle) const;

  /// Spatial grid cell that the physical hypothesis cell `n` maps to at
  /// subcarrier frequency f_m: nearest cell of wrap(phi_n * f_m/f_c).
  /// `wrapped` (optional) is set when the mapped angle left [-1, 1).
  int beam_split_image(int n, double f_m, double f_c, bool* wrapped = nullptr) const;
};

/// Grid of steering columns phi_n = (2n - N - 1)/N, n = 1..N.
/// Throws std::domain_error when grid_size < n_antennas.
SensingEnsemble build_dictionary(int n_antennas, int grid_size);

/// Fills in precoder/measurement/column_norms for the ensemble:
/// B entries (1/sqrt(N_T)) e^{j phi}, phi ~ U[-pi/2, pi/2].
void build_precoder(SensingEnsemble& ensemble, const SystemConfig& cfg, Rng& rng);

/// Convenience: dictionary + precoder in one call.
SensingEnsemble build_ensemble(const SystemConfig& cfg, Rng& rng);

/// Dirichlet kernel Sigma(a) = sin(n pi a / 2) / sin(pi a / 2), the
/// beamspace leakage pattern of an n-element ULA; continuous at the
/// removable singularities, 4-periodic in a.
double dirichlet_sinc(double a, int n);

/// x = F^H h. Throws std::domain_error on dimension mismatch.
CVec angle_domain_transform(const CVec& h, const CMat& dictionary);

enum class PilotRegime { kOverdetermined, kCompressed };

/// Per-user, per-subcarrier pilot captures.
struct PilotObservation {
  std::vector<std::vector<CVec>> received;  // [k][m], length J or N_RF
  double noise_variance = 0.0;
  PilotRegime regime = PilotRegime::kCompressed;
};

/// Full-pilot observation ybar_k[m] = Fbar h_k[m] + n, with the pilot
/// symbols fixed to the identity. Noise is circular complex Gaussian with
/// per-element variance noise_variance.
PilotObservation observe_full_pilots(const ChannelRealization& channel,
                                     const CMat& pilot_beamformer, Rng& rng,
                                     double noise_variance);

/// Compressed observation y_k[m] = B h_k[m] + n with J = N_RF pilots.
/// Generated from the physical channel, so off-grid dictionary leakage is
/// present in the data.
PilotObservation observe_compressed(const ChannelRealization& channel,
                                    const SensingEnsemble& ensemble, Rng& rng,
                                    double noise_variance);

/// Mean per-element power of a noiseless observation set; the reference
/// signal power for SystemConfig::noise_variance_for.
double mean_observation_power(const PilotObservation& obs);

/// Copy of `clean` with fresh circular complex Gaussian noise of the given
/// per-element variance added to every received vector.
PilotObservation add_observation_noise(const PilotObservation& clean,
                                       double noise_variance, Rng& rng);

}  // namespace thzlab
