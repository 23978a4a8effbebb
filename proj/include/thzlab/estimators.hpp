#pragma once

#include <Eigen/Dense>
#include <vector>

#include "thzlab/sensing.hpp"

namespace thzlab {

/// Sparse recovery output for one user: per-subcarrier supports,
/// beamspace coefficients, reconstructed channels, and the DoA estimates.
struct SparseChannelEstimate {
  std::vector<std::vector<int>> support_sets;  // [m], each sorted, size <= L
  std::vector<CVec> coefficients;              // [m] length N, L-sparse
  std::vector<CVec> channels;                  // [m] length N_T, = F * coefficients[m]
  std::vector<double> physical_doas;           // one per recovered path
  std::vector<std::vector<double>> spatial_doas;  // [m][l], per-subcarrier peaks

  int num_subcarriers() const { return static_cast<int>(support_sets.size()); }
};

/// Diagnostic record of one path iteration of the support-alignment
/// estimator: raw per-subcarrier spectra, their aligned versions, and the
/// fused spectrum whose argmax is the physical-DoA cell.
struct BeamspaceSpectrum {
  Eigen::MatrixXd values;   // M x N, normalized residual correlation
  Eigen::MatrixXd shifted;  // M x N, aligned onto physical hypotheses
  Eigen::VectorXd fused;    // N, column sum of `shifted` over m
};

struct BsaUserResult {
  SparseChannelEstimate estimate;
  std::vector<BeamspaceSpectrum> spectra;  // one per path iteration
  // residual_norms(l, m) = ||r_{l,k}[m]||_2, row 0 holds ||y_k[m]||
  Eigen::MatrixXd residual_norms;
  int wrap_count = 0;  // aligned support indices that crossed the grid edge
};

/// LS channel estimates (F^H F)^{-1} F^H y per (user, subcarrier).
/// Requires the overdetermined regime and a full-column-rank pilot
/// beamformer; throws std::runtime_error otherwise.
std::vector<std::vector<CVec>> ls_estimate(const PilotObservation& obs,
                                           const CMat& pilot_beamformer);

/// Linear MMSE estimates R F^H (F R F^H + sigma^2 I)^{-1} y with per-(k,m)
/// channel covariance. Throws std::domain_error for a non-Hermitian or
/// indefinite covariance.
std::vector<std::vector<CVec>> mmse_estimate(
    const PilotObservation& obs, const CMat& pilot_beamformer,
    const std::vector<std::vector<CMat>>& channel_covariance,
    double noise_variance);

/// Empirical per-(k,m) covariance from independent channel draws; the MMSE
/// benchmark input. Sectors follow the given per-user DoA sectors when
/// present (matching how evaluation channels are drawn).
std::vector<std::vector<CMat>> estimate_channel_covariance(
    const SystemConfig& cfg, Rng rng, int num_draws,
    const std::vector<DoaSector>* sectors = nullptr);

/// Plain orthogonal matching pursuit on one compressed observation.
/// `sparsity` greedy rounds of correlate / argmax / LS / deflate, with
/// column-norm-normalized correlations and lowest-index tie breaks.
SparseChannelEstimate omp_estimate(const CVec& y, const SensingEnsemble& ensemble,
                                   int sparsity);

/// Beamspace support alignment for all users of a compressed observation.
///
/// Per user and path: the per-subcarrier residual spectra are aligned by
/// the beam-split index map (each physical hypothesis cell reads its
/// evidence at the subcarrier's shifted cell), fused across subcarriers,
/// and the fused argmax gives the physical DoA; the per-subcarrier
/// supports are the beam-split images of that cell. Residuals are
/// deflated by LS on the accumulated support, and the final coefficients
/// are LS on the union support.
std::vector<BsaUserResult> bsa_estimate(const PilotObservation& obs,
                                        const SensingEnsemble& ensemble,
                                        const SystemConfig& cfg);

struct DoaExtraction {
  std::vector<double> doas;  // sorted ascending, exactly num_paths entries
  bool padded = false;       // fewer peaks than requested; repeated strongest
};

/// The estimator's physical DoAs, sorted ascending and padded to
/// num_paths entries when the estimate holds fewer.
DoaExtraction extract_doas(const SparseChannelEstimate& estimate, int num_paths);

/// Rank-tolerant least squares min ||A x - b||_2 via column-pivoted QR
/// (pivot tolerance 1e-10 relative to the largest pivot).
CVec solve_least_squares(const CMat& a, const CVec& b);

}  // namespace thzlab
