#include "thzlab/sensing.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace thzlab {

namespace {
constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  // into [-1, 1); the array response is 2-periodic in sine-space
  double w = std::fmod(a + 1.0, 2.0);
  if (w < 0) w += 2.0;
  return w - 1.0;
}
}  // namespace

int SensingEnsemble::nearest_grid_index(double angle) const {
  const int n = grid_size();
  const double a = wrap_angle(angle);
  // grid position of angle a: phi_n = (2(n+1) - N - 1)/N  (n 0-based)
  long idx = std::lround((n * a + n + 1.0) / 2.0) - 1;
  idx %= n;
  if (idx < 0) idx += n;
  return static_cast<int>(idx);
}

int SensingEnsemble::beam_split_image(int n, double f_m, double f_c,
                                      bool* wrapped) const {
  const double theta = grid_angles(n) * (f_m / f_c);
  if (wrapped) *wrapped = (theta < -1.0 || theta >= 1.0);
  return nearest_grid_index(theta);
}

SensingEnsemble build_dictionary(int n_antennas, int grid_size) {
  if (n_antennas < 1) throw std::domain_error("n_antennas must be positive");
  if (grid_size < n_antennas)
    throw std::domain_error("grid_size must be at least n_antennas");
  SensingEnsemble e;
  e.grid_angles.resize(grid_size);
  e.dictionary.resize(n_antennas, grid_size);
  for (int n = 1; n <= grid_size; ++n) {
    const double phi = (2.0 * n - grid_size - 1.0) / grid_size;
    e.grid_angles(n - 1) = phi;
    e.dictionary.col(n - 1) = steering_vector(phi, n_antennas);
  }
  e.grid_step = 2.0 / grid_size;
  return e;
}

void build_precoder(SensingEnsemble& ensemble, const SystemConfig& cfg, Rng& rng) {
  const int nrf = cfg.num_rf_chains;
  const int nt = cfg.num_tx_antennas;
  if (ensemble.dictionary.rows() != nt)
    throw std::domain_error("ensemble dictionary does not match cfg.num_tx_antennas");
  const double scale = 1.0 / std::sqrt(static_cast<double>(nt));
  ensemble.precoder.resize(nrf, nt);
  for (int i = 0; i < nrf; ++i)
    for (int j = 0; j < nt; ++j)
      ensemble.precoder(i, j) = std::polar(scale, rng.uniform(-kPi / 2, kPi / 2));
  ensemble.measurement = ensemble.precoder * ensemble.dictionary;
  ensemble.column_norms = ensemble.measurement.colwise().norm();
}

SensingEnsemble build_ensemble(const SystemConfig& cfg, Rng& rng) {
  SensingEnsemble e = build_dictionary(cfg.num_tx_antennas, cfg.grid_size);
  build_precoder(e, cfg, rng);
  return e;
}

double dirichlet_sinc(double a, int n) {
  const double denom = std::sin(kPi * a / 2.0);
  if (std::abs(denom) < 1e-9) {
    // removable singularity: limit n * cos(n pi a / 2) / cos(pi a / 2)
    return n * std::cos(n * kPi * a / 2.0) / std::cos(kPi * a / 2.0);
  }
  return std::sin(n * kPi * a / 2.0) / denom;
}

CVec angle_domain_transform(const CVec& h, const CMat& dictionary) {
  if (h.size() != dictionary.rows())
    throw std::domain_error("channel length does not match dictionary rows");
  return dictionary.adjoint() * h;
}

PilotObservation observe_full_pilots(const ChannelRealization& channel,
                                     const CMat& pilot_beamformer, Rng& rng,
                                     double noise_variance) {
  const int K = channel.num_users();
  const int M = channel.num_subcarriers();
  PilotObservation obs;
  obs.regime = PilotRegime::kOverdetermined;
  obs.noise_variance = noise_variance;
  obs.received.assign(K, std::vector<CVec>(M));
  for (int k = 0; k < K; ++k)
    for (int m = 0; m < M; ++m) {
      CVec y = pilot_beamformer * channel.channels[k][m];
      if (noise_variance > 0)
        for (Eigen::Index i = 0; i < y.size(); ++i)
          y(i) += rng.complex_gaussian(noise_variance);
      obs.received[k][m] = std::move(y);
    }
  return obs;
}

PilotObservation observe_compressed(const ChannelRealization& channel,
                                    const SensingEnsemble& ensemble, Rng& rng,
                                    double noise_variance) {
  const int K = channel.num_users();
  const int M = channel.num_subcarriers();
  PilotObservation obs;
  obs.regime = PilotRegime::kCompressed;
  obs.noise_variance = noise_variance;
  obs.received.assign(K, std::vector<CVec>(M));
  for (int k = 0; k < K; ++k)
    for (int m = 0; m < M; ++m) {
      CVec y = ensemble.precoder * channel.channels[k][m];
      if (noise_variance > 0)
        for (Eigen::Index i = 0; i < y.size(); ++i)
          y(i) += rng.complex_gaussian(noise_variance);
      obs.received[k][m] = std::move(y);
    }
  return obs;
}

PilotObservation add_observation_noise(const PilotObservation& clean,
                                       double noise_variance, Rng& rng) {
  PilotObservation noisy = clean;
  noisy.noise_variance = noise_variance;
  if (noise_variance > 0)
    for (auto& user : noisy.received)
      for (auto& y : user)
        for (Eigen::Index i = 0; i < y.size(); ++i)
          y(i) += rng.complex_gaussian(noise_variance);
  return noisy;
}

double mean_observation_power(const PilotObservation& obs) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& user : obs.received)
    for (const auto& y : user) {
      acc += y.squaredNorm();
      count += y.size();
    }
  return count ? acc / count : 0.0;
}

}  // namespace thzlab
