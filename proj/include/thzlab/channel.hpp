#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "thzlab/system.hpp"

namespace thzlab {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// One propagation path in frequency-independent (physical) terms.
struct PhysicalPath {
  double physical_doa = 0.0;        // sine-space direction, in [-1, 1)
  std::complex<double> gain{1, 0};  // base complex gain, frequency-flat
  double delay_s = 0.0;             // path delay, >= 0
};

/// Closed interval of sine-space directions used to sector users.
struct DoaSector {
  double lo = -1.0;
  double hi = 1.0;  // draws are uniform in [lo, hi)
};

/// Ground truth for one multi-user channel draw: the per-user,
/// per-subcarrier channel vectors plus the path parameters that
/// generated them.
struct ChannelRealization {
  // channels[k][m] is the length-N_T vector h_k[m], k and m 0-based.
  std::vector<std::vector<CVec>> channels;
  // paths[k][l], l 0-based; path 0 is the LoS path.
  std::vector<std::vector<PhysicalPath>> paths;
  // spatial_doas[k][m][l] = (f_m/f_c) * paths[k][l].physical_doa.
  std::vector<std::vector<std::vector<double>>> spatial_doas;

  int num_users() const { return static_cast<int>(channels.size()); }
  int num_subcarriers() const {
    return channels.empty() ? 0 : static_cast<int>(channels[0].size());
  }
};

/// Unit-norm ULA steering vector a(theta), half-wavelength spacing:
/// (1/sqrt(n)) [1, e^{-j pi theta}, ..., e^{-j pi (n-1) theta}]^T.
CVec steering_vector(double doa, int n_antennas);

/// Beam-split relation: theta = (f_m / f_c) * physical_doa.
double spatial_doa(double physical_doa, double f_m, double f_c);

/// Largest beam-split deviation over the band for a path at |physical_doa|:
/// max_m |theta_m - physical_doa| = B (M-1) / (2 M f_c) * |physical_doa|.
double max_beam_split(const SystemConfig& cfg, double physical_doa);

/// Draws a K-user L-path channel. Path DoAs are uniform over the sector
/// (whole sine-space when absent). Path 0 is LoS with unit-magnitude gain;
/// the others have |gain| ~ U[0.1, 0.4]. Delays are uniform in [0, 20 ns].
/// h_k[m] = sqrt(N_T/L) * sum_l gain_l a(theta_{k,m,l}) e^{-j 2 pi tau_l f_m}.
ChannelRealization generate_channel(const SystemConfig& cfg, Rng& rng,
                                    std::optional<DoaSector> doa_sector = {});

/// Dataset-cache serialization: a small header with dims followed by
/// row-major (re, im) doubles. Round-trips bit-exactly.
void save_channel(const ChannelRealization& ch, const std::string& path);
ChannelRealization load_channel(const std::string& path);

}  // namespace thzlab
