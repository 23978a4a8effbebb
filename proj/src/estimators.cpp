#include "thzlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thzlab {

namespace {

constexpr double kRankTolerance = 1e-10;

// argmax with ties broken toward the lowest index
template <typename Derived>
int argmax_low(const Eigen::MatrixBase<Derived>& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

CMat select_columns(const CMat& a, const std::vector<int>& idx) {
  CMat out(a.rows(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(i) = a.col(idx[i]);
  return out;
}

void insert_sorted_unique(std::vector<int>& set, int value) {
  auto it = std::lower_bound(set.begin(), set.end(), value);
  if (it == set.end() || *it != value) set.insert(it, value);
}

}  // namespace

CVec solve_least_squares(const CMat& a, const CVec& b) {
  Eigen::ColPivHouseholderQR<CMat> qr(a);
  qr.setThreshold(kRankTolerance);
  return qr.solve(b);
}

std::vector<std::vector<CVec>> ls_estimate(const PilotObservation& obs,
                                           const CMat& pilot_beamformer) {
  if (obs.regime != PilotRegime::kOverdetermined)
    throw std::runtime_error("ls_estimate requires the overdetermined pilot regime");
  if (pilot_beamformer.rows() < pilot_beamformer.cols())
    throw std::runtime_error("ls_estimate requires J >= N_T pilots");
  Eigen::ColPivHouseholderQR<CMat> qr(pilot_beamformer);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < pilot_beamformer.cols())
    throw std::runtime_error("pilot beamformer is rank deficient");
  std::vector<std::vector<CVec>> out(obs.received.size());
  for (std::size_t k = 0; k < obs.received.size(); ++k) {
    out[k].reserve(obs.received[k].size());
    for (const CVec& y : obs.received[k]) out[k].push_back(qr.solve(y));
  }
  return out;
}

std::vector<std::vector<CVec>> mmse_estimate(
    const PilotObservation& obs, const CMat& pilot_beamformer,
    const std::vector<std::vector<CMat>>& channel_covariance,
    double noise_variance) {
  const auto j = pilot_beamformer.rows();
  std::vector<std::vector<CVec>> out(obs.received.size());
  for (std::size_t k = 0; k < obs.received.size(); ++k) {
    out[k].resize(obs.received[k].size());
    for (std::size_t m = 0; m < obs.received[k].size(); ++m) {
      const CMat& r = channel_covariance.at(k).at(m);
      if (r.rows() != r.cols() || r.rows() != pilot_beamformer.cols())
        throw std::domain_error("covariance dimensions do not match");
      if ((r - r.adjoint()).norm() > 1e-8 * std::max(1.0, r.norm()))
        throw std::domain_error("covariance must be Hermitian");
      Eigen::LDLT<CMat> psd_check(r);
      if (psd_check.info() != Eigen::Success || !psd_check.isPositive())
        throw std::domain_error("covariance must be positive semidefinite");
      CMat gram = pilot_beamformer * r * pilot_beamformer.adjoint();
      gram += noise_variance * CMat::Identity(j, j);
      out[k][m] = r * pilot_beamformer.adjoint() *
                  gram.ldlt().solve(obs.received[k][m]);
    }
  }
  return out;
}

std::vector<std::vector<CMat>> estimate_channel_covariance(
    const SystemConfig& cfg, Rng rng, int num_draws,
    const std::vector<DoaSector>* sectors) {
  if (num_draws < 1) throw std::domain_error("num_draws must be positive");
  const int nt = cfg.num_tx_antennas;
  std::vector<std::vector<CMat>> cov(
      cfg.num_users, std::vector<CMat>(cfg.num_subcarriers, CMat::Zero(nt, nt)));
  for (int d = 0; d < num_draws; ++d) {
    Rng draw = rng.child("cov-draw", d);
    for (int k = 0; k < cfg.num_users; ++k) {
      SystemConfig single = cfg;
      single.num_users = 1;
      Rng user_rng = draw.child("user", k);
      std::optional<DoaSector> sector;
      if (sectors) sector = sectors->at(k);
      ChannelRealization ch = generate_channel(single, user_rng, sector);
      for (int m = 0; m < cfg.num_subcarriers; ++m) {
        const CVec& h = ch.channels[0][m];
        cov[k][m].noalias() += h * h.adjoint();
      }
    }
  }
  for (auto& user : cov)
    for (auto& r : user) r /= static_cast<double>(num_draws);
  return cov;
}

SparseChannelEstimate omp_estimate(const CVec& y, const SensingEnsemble& ensemble,
                                   int sparsity) {
  const CMat& a = ensemble.measurement;
  if (sparsity < 1 || sparsity > a.rows())
    throw std::domain_error("sparsity must be in [1, N_RF]");
  if (y.size() != a.rows())
    throw std::domain_error("observation length does not match the measurement rows");
  std::vector<int> support;
  CVec residual = y;
  CVec coeff;
  for (int l = 0; l < sparsity; ++l) {
    Eigen::VectorXd corr =
        (a.adjoint() * residual).cwiseAbs().cwiseQuotient(ensemble.column_norms);
    insert_sorted_unique(support, argmax_low(corr));
    CMat as = select_columns(a, support);
    coeff = solve_least_squares(as, y);
    residual = y - as * coeff;
  }
  SparseChannelEstimate est;
  est.support_sets.push_back(support);
  CVec x = CVec::Zero(ensemble.grid_size());
  for (std::size_t i = 0; i < support.size(); ++i) x(support[i]) = coeff(i);
  est.coefficients.push_back(x);
  est.channels.push_back(select_columns(ensemble.dictionary, support) * coeff);
  est.spatial_doas.push_back({});
  for (int s : support) est.spatial_doas[0].push_back(ensemble.grid_angles(s));
  return est;
}

std::vector<BsaUserResult> bsa_estimate(const PilotObservation& obs,
                                        const SensingEnsemble& ensemble,
                                        const SystemConfig& cfg) {
  if (obs.regime != PilotRegime::kCompressed)
    throw std::runtime_error("bsa_estimate requires the compressed pilot regime");
  const int sparsity = cfg.num_paths;
  if (sparsity > cfg.num_rf_chains)
    throw std::runtime_error("bsa_estimate requires L <= N_RF");
  const int m_count = cfg.num_subcarriers;
  const int n = ensemble.grid_size();
  const CMat& a = ensemble.measurement;
  for (const auto& user : obs.received)
    for (const CVec& y : user)
      if (y.size() != a.rows())
        throw std::domain_error("observation length does not match the measurement rows");

  // Beam-split index maps: image[m][n] is the spatial grid cell where the
  // physical hypothesis cell n appears at subcarrier m.
  std::vector<std::vector<int>> image(m_count, std::vector<int>(n));
  std::vector<std::vector<bool>> image_wrapped(m_count, std::vector<bool>(n));
  for (int m = 0; m < m_count; ++m) {
    const double fm = subcarrier_frequency(cfg, m + 1);
    for (int i = 0; i < n; ++i) {
      bool wrapped = false;
      image[m][i] = ensemble.beam_split_image(i, fm, cfg.carrier_freq_hz, &wrapped);
      image_wrapped[m][i] = wrapped;
    }
  }

  std::vector<BsaUserResult> results(obs.received.size());
  for (std::size_t k = 0; k < obs.received.size(); ++k) {
    const auto& ys = obs.received[k];
    BsaUserResult& res = results[k];
    SparseChannelEstimate& est = res.estimate;
    est.support_sets.assign(m_count, {});
    est.spatial_doas.assign(m_count, {});
    est.coefficients.resize(m_count);
    est.channels.resize(m_count);

    std::vector<CVec> residual(ys.begin(), ys.end());
    res.residual_norms.resize(sparsity + 1, m_count);
    for (int m = 0; m < m_count; ++m) res.residual_norms(0, m) = ys[m].norm();
    for (int l = 0; l < sparsity; ++l) {
      BeamspaceSpectrum spec;
      spec.values.resize(m_count, n);
      spec.shifted.resize(m_count, n);
      for (int m = 0; m < m_count; ++m) {
        spec.values.row(m) = (a.adjoint() * residual[m])
                                 .cwiseAbs()
                                 .cwiseQuotient(ensemble.column_norms)
                                 .transpose();
        est.spatial_doas[m].push_back(
            ensemble.grid_angles(argmax_low(spec.values.row(m).transpose())));
        for (int i = 0; i < n; ++i) spec.shifted(m, i) = spec.values(m, image[m][i]);
      }
      spec.fused = spec.shifted.colwise().sum().transpose();
      const int nbar = argmax_low(spec.fused);
      est.physical_doas.push_back(ensemble.grid_angles(nbar));
      for (int m = 0; m < m_count; ++m) {
        const int s = image[m][nbar];
        if (image_wrapped[m][nbar]) ++res.wrap_count;
        insert_sorted_unique(est.support_sets[m], s);
        CMat as = select_columns(a, est.support_sets[m]);
        residual[m] = ys[m] - as * solve_least_squares(as, ys[m]);
        res.residual_norms(l + 1, m) = residual[m].norm();
      }
      res.spectra.push_back(std::move(spec));
    }

    for (int m = 0; m < m_count; ++m) {
      CMat as = select_columns(a, est.support_sets[m]);
      CVec coeff = solve_least_squares(as, ys[m]);
      CVec x = CVec::Zero(n);
      for (std::size_t i = 0; i < est.support_sets[m].size(); ++i)
        x(est.support_sets[m][i]) = coeff(i);
      est.coefficients[m] = std::move(x);
      est.channels[m] =
          select_columns(ensemble.dictionary, est.support_sets[m]) * coeff;
    }
  }
  return results;
}

DoaExtraction extract_doas(const SparseChannelEstimate& estimate, int num_paths) {
  if (num_paths < 1) throw std::domain_error("num_paths must be positive");
  DoaExtraction out;
  out.doas = estimate.physical_doas;
  if (out.doas.empty()) throw std::domain_error("estimate holds no DoA peaks");
  if (static_cast<int>(out.doas.size()) > num_paths) out.doas.resize(num_paths);
  while (static_cast<int>(out.doas.size()) < num_paths) {
    out.doas.push_back(estimate.physical_doas.front());  // strongest peak
    out.padded = true;
  }
  std::sort(out.doas.begin(), out.doas.end());
  return out;
}

}  // namespace thzlab
