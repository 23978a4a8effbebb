#include "thzlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thzlab {

double nmse(const std::vector<CVec>& true_channels,
            const std::vector<CVec>& est_channels,
            int* zero_norm_excluded) {
  if (true_channels.size() != est_channels.size())
    throw std::domain_error("nmse: collection sizes differ");
  double acc = 0.0;
  int used = 0, excluded = 0;
  for (std::size_t i = 0; i < true_channels.size(); ++i) {
    const double denom = true_channels[i].squaredNorm();
    if (denom == 0.0) {
      ++excluded;
      continue;
    }
    acc += (true_channels[i] - est_channels[i]).squaredNorm() / denom;
    ++used;
  }
  if (zero_norm_excluded) *zero_norm_excluded = excluded;
  return used ? acc / used : 0.0;
}

double to_db(double linear) {
  if (linear <= 0.0) return -300.0;
  return std::max(10.0 * std::log10(linear), -300.0);
}

double doa_rmse(std::vector<double> true_doas, std::vector<double> est_doas) {
  if (true_doas.size() != est_doas.size())
    throw std::domain_error("doa_rmse: counts differ");
  if (true_doas.empty()) return 0.0;
  std::sort(true_doas.begin(), true_doas.end());
  std::sort(est_doas.begin(), est_doas.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < true_doas.size(); ++i) {
    const double e = est_doas[i] - true_doas[i];
    acc += e * e;
  }
  return std::sqrt(acc / true_doas.size());
}

double doa_rmse_pooled(const std::vector<std::vector<double>>& true_doas,
                       const std::vector<std::vector<double>>& est_doas) {
  if (true_doas.size() != est_doas.size())
    throw std::domain_error("doa_rmse_pooled: trial counts differ");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < true_doas.size(); ++t) {
    std::vector<double> a = true_doas[t];
    std::vector<double> b = est_doas[t];
    if (a.size() != b.size())
      throw std::domain_error("doa_rmse_pooled: counts differ within a trial");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double e = b[i] - a[i];
      acc += e * e;
      ++count;
    }
  }
  return count ? std::sqrt(acc / count) : 0.0;
}

OverheadReport overhead(std::uint64_t q, std::uint64_t t, std::uint64_t k,
                        const std::vector<std::uint64_t>& per_user_sample_counts,
                        std::uint64_t n_rf) {
  if (q == 0 || t == 0 || k == 0 || n_rf == 0)
    throw std::domain_error("overhead: arguments must be positive");
  if (per_user_sample_counts.size() != k)
    throw std::domain_error("overhead: need one sample count per user");
  OverheadReport rep;
  rep.t_fl = 2 * q * t * k;
  rep.t_cl = 0;
  for (std::uint64_t d : per_user_sample_counts) {
    if (d == 0) throw std::domain_error("overhead: sample counts must be positive");
    rep.t_cl += d * n_rf;
  }
  rep.eta = static_cast<double>(rep.t_cl) / static_cast<double>(rep.t_fl);
  return rep;
}

}  // namespace thzlab
