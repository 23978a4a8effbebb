#include "thzlab/channel.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace thzlab {

CVec steering_vector(double doa, int n_antennas) {
  CVec a(n_antennas);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_antennas));
  for (int q = 0; q < n_antennas; ++q) {
    a(q) = std::polar(scale, -std::numbers::pi * q * doa);
  }
  return a;
}

double spatial_doa(double physical_doa, double f_m, double f_c) {
  return (f_m / f_c) * physical_doa;
}

double max_beam_split(const SystemConfig& cfg, double physical_doa) {
  const double m = cfg.num_subcarriers;
  return cfg.bandwidth_hz * (m - 1.0) / (2.0 * m * cfg.carrier_freq_hz) *
         std::abs(physical_doa);
}

ChannelRealization generate_channel(const SystemConfig& cfg, Rng& rng,
                                    std::optional<DoaSector> doa_sector) {
  DoaSector sector = doa_sector.value_or(DoaSector{});
  if (!(sector.lo < sector.hi) || sector.lo < -1.0 || sector.hi > 1.0)
    throw std::domain_error("doa_sector must be a nonempty subinterval of [-1, 1)");

  constexpr double kMaxDelayS = 20e-9;
  const int K = cfg.num_users;
  const int M = cfg.num_subcarriers;
  const int L = cfg.num_paths;
  const int NT = cfg.num_tx_antennas;
  const double gamma = std::sqrt(static_cast<double>(NT) / L);
  constexpr double kPi = std::numbers::pi;

  ChannelRealization ch;
  ch.channels.assign(K, std::vector<CVec>(M));
  ch.paths.assign(K, std::vector<PhysicalPath>(L));
  ch.spatial_doas.assign(K, std::vector<std::vector<double>>(M, std::vector<double>(L)));

  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      PhysicalPath& p = ch.paths[k][l];
      p.physical_doa = rng.uniform(sector.lo, sector.hi);
      const double mag = (l == 0) ? 1.0 : rng.uniform(0.1, 0.4);
      p.gain = std::polar(mag, rng.uniform(-kPi, kPi));
      p.delay_s = rng.uniform(0.0, kMaxDelayS);
    }
    for (int m = 0; m < M; ++m) {
      const double fm = subcarrier_frequency(cfg, m + 1);
      CVec h = CVec::Zero(NT);
      for (int l = 0; l < L; ++l) {
        const PhysicalPath& p = ch.paths[k][l];
        const double theta = spatial_doa(p.physical_doa, fm, cfg.carrier_freq_hz);
        ch.spatial_doas[k][m][l] = theta;
        h += p.gain * std::polar(1.0, -2.0 * kPi * p.delay_s * fm) *
             steering_vector(theta, NT);
      }
      ch.channels[k][m] = gamma * h;
    }
  }
  return ch;
}

namespace {

constexpr char kMagic[8] = {'T', 'H', 'Z', 'C', 'H', 'N', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated channel file");
  return v;
}

}  // namespace

void save_channel(const ChannelRealization& ch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::int64_t K = ch.num_users();
  const std::int64_t M = ch.num_subcarriers();
  const std::int64_t L = K ? static_cast<std::int64_t>(ch.paths[0].size()) : 0;
  const std::int64_t NT = (K && M) ? ch.channels[0][0].size() : 0;
  write_pod(out, K);
  write_pod(out, M);
  write_pod(out, L);
  write_pod(out, NT);
  for (const auto& user : ch.channels)
    for (const auto& h : user)
      for (Eigen::Index i = 0; i < h.size(); ++i) {
        write_pod(out, h(i).real());
        write_pod(out, h(i).imag());
      }
  for (const auto& user : ch.paths)
    for (const auto& p : user) {
      write_pod(out, p.physical_doa);
      write_pod(out, p.gain.real());
      write_pod(out, p.gain.imag());
      write_pod(out, p.delay_s);
    }
  for (const auto& user : ch.spatial_doas)
    for (const auto& per_m : user)
      for (double v : per_m) write_pod(out, v);
  if (!out) throw std::runtime_error("write failure: " + path);
}

ChannelRealization load_channel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open channel file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw std::runtime_error("not a channel cache file: " + path);
  const auto K = read_pod<std::int64_t>(in);
  const auto M = read_pod<std::int64_t>(in);
  const auto L = read_pod<std::int64_t>(in);
  const auto NT = read_pod<std::int64_t>(in);
  ChannelRealization ch;
  ch.channels.assign(K, std::vector<CVec>(M, CVec(NT)));
  ch.paths.assign(K, std::vector<PhysicalPath>(L));
  ch.spatial_doas.assign(K, std::vector<std::vector<double>>(M, std::vector<double>(L)));
  for (auto& user : ch.channels)
    for (auto& h : user)
      for (Eigen::Index i = 0; i < h.size(); ++i) {
        const double re = read_pod<double>(in);
        const double im = read_pod<double>(in);
        h(i) = {re, im};
      }
  for (auto& user : ch.paths)
    for (auto& p : user) {
      p.physical_doa = read_pod<double>(in);
      const double re = read_pod<double>(in);
      const double im = read_pod<double>(in);
      p.gain = {re, im};
      p.delay_s = read_pod<double>(in);
    }
  for (auto& user : ch.spatial_doas)
    for (auto& per_m : user)
      for (double& v : per_m) v = read_pod<double>(in);
  return ch;
}

}  // namespace thzlab
