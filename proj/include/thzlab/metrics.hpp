#pragma once

#include <cstdint>
#include <vector>

#include "thzlab/channel.hpp"

namespace thzlab {

/// Symbols exchanged during training: federated (2 Q T K, parameter
/// up/downlink) vs centralized (sum_k D_k N_RF, raw pilot upload), and
/// the communication-efficiency ratio eta = T_CL / T_FL.
struct OverheadReport {
  std::uint64_t t_fl = 0;
  std::uint64_t t_cl = 0;
  double eta = 0.0;
};

/// Mean of ||h - hhat||^2 / ||h||^2 over the given pairs (trials, users
/// and subcarriers flattened by the caller). Pairs with a zero-norm true
/// channel are excluded and counted in *zero_norm_excluded when provided.
double nmse(const std::vector<CVec>& true_channels,
            const std::vector<CVec>& est_channels,
            int* zero_norm_excluded = nullptr);

/// 10 log10(x), with a -300 dB floor for x == 0.
double to_db(double linear);

/// Root-mean-square sine-space DoA error after sorted pairing (both lists
/// sorted ascending, matched in order). Throws std::domain_error when the
/// counts differ.
double doa_rmse(std::vector<double> true_doas, std::vector<double> est_doas);

/// Pooled variant: one matched list per trial, squared errors pooled
/// before the root.
double doa_rmse_pooled(const std::vector<std::vector<double>>& true_doas,
                       const std::vector<std::vector<double>>& est_doas);

/// Exact integer overhead accounting. Throws std::domain_error on any
/// non-positive argument.
OverheadReport overhead(std::uint64_t q, std::uint64_t t, std::uint64_t k,
                        const std::vector<std::uint64_t>& per_user_sample_counts,
                        std::uint64_t n_rf);

}  // namespace thzlab
