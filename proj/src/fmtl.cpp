#include "thzlab/fmtl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace thzlab {

namespace {

struct LayerDims {
  int in = 0, out = 0;
  std::ptrdiff_t w_off = 0, b_off = 0;
};

struct ParamMap {
  std::vector<LayerDims> trunk;
  LayerDims head_channel, head_support;
  std::size_t total = 0;

  static ParamMap of(const NetworkShape& shape) {
    if (shape.input < 1 || shape.head_channel < 1 || shape.head_support < 1)
      throw std::invalid_argument("network shape has empty layers");
    ParamMap map;
    std::ptrdiff_t off = 0;
    int prev = shape.input;
    for (int width : shape.hidden) {
      if (width < 1) throw std::invalid_argument("hidden width must be positive");
      LayerDims d{prev, width, off, off + static_cast<std::ptrdiff_t>(prev) * width};
      off = d.b_off + width;
      map.trunk.push_back(d);
      prev = width;
    }
    map.head_channel = {prev, shape.head_channel, off,
                        off + static_cast<std::ptrdiff_t>(prev) * shape.head_channel};
    off = map.head_channel.b_off + shape.head_channel;
    map.head_support = {prev, shape.head_support, off,
                        off + static_cast<std::ptrdiff_t>(prev) * shape.head_support};
    off = map.head_support.b_off + shape.head_support;
    map.total = static_cast<std::size_t>(off);
    return map;
  }
};

using ConstW = Eigen::Map<const Eigen::MatrixXd>;
using ConstB = Eigen::Map<const Eigen::VectorXd>;
using MutW = Eigen::Map<Eigen::MatrixXd>;
using MutB = Eigen::Map<Eigen::VectorXd>;

ConstW weight(const Eigen::VectorXd& flat, const LayerDims& d) {
  return ConstW(flat.data() + d.w_off, d.out, d.in);
}
ConstB bias(const Eigen::VectorXd& flat, const LayerDims& d) {
  return ConstB(flat.data() + d.b_off, d.out);
}
MutW weight(Eigen::VectorXd& flat, const LayerDims& d) {
  return MutW(flat.data() + d.w_off, d.out, d.in);
}
MutB bias(Eigen::VectorXd& flat, const LayerDims& d) {
  return MutB(flat.data() + d.b_off, d.out);
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& x, ConstW w, ConstB b) {
  Eigen::MatrixXd z = x * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, then per trunk layer
  std::vector<Eigen::MatrixXd> preacts;      // trunk pre-activations
  std::vector<Eigen::MatrixXd> masks;        // dropout masks, empty when disabled
  Eigen::MatrixXd head_channel, head_support;
};

ForwardCache forward_batch(const ModelParameters& params, const Eigen::MatrixXd& x,
                           Rng* dropout_rng, bool keep_cache) {
  const ParamMap map = ParamMap::of(params.shape);
  const bool dropout = dropout_rng && params.dropout_prob > 0.0;
  const double keep = 1.0 - params.dropout_prob;
  ForwardCache cache;
  if (keep_cache) cache.activations.push_back(x);
  Eigen::MatrixXd a = x;
  for (const LayerDims& d : map.trunk) {
    Eigen::MatrixXd z = affine(a, weight(params.flat, d), bias(params.flat, d));
    if (keep_cache) cache.preacts.push_back(z);
    a = z.cwiseMax(0.0);
    if (dropout) {
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
          mask(r, c) = dropout_rng->uniform(0.0, 1.0) < keep ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(mask);
      if (keep_cache) cache.masks.push_back(std::move(mask));
    }
    if (keep_cache) cache.activations.push_back(a);
  }
  cache.head_channel = affine(a, weight(params.flat, map.head_channel),
                              bias(params.flat, map.head_channel));
  cache.head_support = affine(a, weight(params.flat, map.head_support),
                              bias(params.flat, map.head_support));
  if (!keep_cache) cache.activations.push_back(std::move(a));
  return cache;
}

// Gradient of w1*mean||H1-T1||^2 + w2*mean||H2-T2||^2; also reports the
// per-task losses of the same forward pass.
Eigen::VectorXd gradient_impl(const ModelParameters& params, const Batch& batch,
                              double w1, double w2, Rng* dropout_rng,
                              double* out_l1, double* out_l2) {
  const ParamMap map = ParamMap::of(params.shape);
  const double b = static_cast<double>(batch.size());
  ForwardCache cache = forward_batch(params, batch.features, dropout_rng, true);

  const Eigen::MatrixXd r1 = cache.head_channel - batch.label_channel;
  const Eigen::MatrixXd r2 = cache.head_support - batch.label_support;
  if (out_l1) *out_l1 = r1.squaredNorm() / b;
  if (out_l2) *out_l2 = r2.squaredNorm() / b;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.flat.size());
  const Eigen::MatrixXd d1 = (2.0 * w1 / b) * r1;
  const Eigen::MatrixXd d2 = (2.0 * w2 / b) * r2;
  const Eigen::MatrixXd& trunk_out = cache.activations.back();
  weight(grad, map.head_channel) = d1.transpose() * trunk_out;
  bias(grad, map.head_channel) = d1.colwise().sum().transpose();
  weight(grad, map.head_support) = d2.transpose() * trunk_out;
  bias(grad, map.head_support) = d2.colwise().sum().transpose();

  Eigen::MatrixXd da = d1 * weight(params.flat, map.head_channel) +
                       d2 * weight(params.flat, map.head_support);
  for (int i = static_cast<int>(map.trunk.size()) - 1; i >= 0; --i) {
    if (!cache.masks.empty()) da = da.cwiseProduct(cache.masks[i]);
    Eigen::MatrixXd dz =
        da.cwiseProduct((cache.preacts[i].array() > 0.0).cast<double>().matrix());
    weight(grad, map.trunk[i]) = dz.transpose() * cache.activations[i];
    bias(grad, map.trunk[i]) = dz.colwise().sum().transpose();
    if (i > 0) da = dz * weight(params.flat, map.trunk[i]);
  }
  return grad;
}

void check_dataset_consistency(const std::vector<LocalDataset>& datasets) {
  if (datasets.empty()) throw std::invalid_argument("no datasets given");
  for (const auto& d : datasets)
    if (d.sample_count() == 0) throw std::invalid_argument("empty dataset");
}

}  // namespace

std::size_t NetworkShape::param_count() const { return ParamMap::of(*this).total; }

ModelParameters ModelParameters::init(const NetworkShape& shape, Rng& rng,
                                      double dropout_prob) {
  const ParamMap map = ParamMap::of(shape);
  ModelParameters p;
  p.shape = shape;
  p.dropout_prob = dropout_prob;
  p.flat = Eigen::VectorXd::Zero(map.total);
  auto fill = [&](const LayerDims& d) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(d.in));
    MutW w = weight(p.flat, d);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        w(r, c) = rng.uniform(-limit, limit);
    // biases stay zero
  };
  for (const LayerDims& d : map.trunk) fill(d);
  fill(map.head_channel);
  fill(map.head_support);
  return p;
}

Sample LocalDataset::sample(int i) const {
  Sample s;
  s.features = features.row(i);
  s.label_channel = label_channel.row(i);
  s.label_support = label_support.row(i);
  return s;
}

Batch LocalDataset::batch(const std::vector<int>& rows) const {
  Batch b;
  b.features.resize(rows.size(), features.cols());
  b.label_channel.resize(rows.size(), label_channel.cols());
  b.label_support.resize(rows.size(), label_support.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.features.row(i) = features.row(rows[i]);
    b.label_channel.row(i) = label_channel.row(rows[i]);
    b.label_support.row(i) = label_support.row(rows[i]);
  }
  return b;
}

DoaSector sector_for_user(int user_id, int num_users) {
  if (user_id < 1 || user_id > num_users)
    throw std::domain_error("user_id outside [1, K]");
  const double width = 2.0 / num_users;
  return {-1.0 + width * (user_id - 1), -1.0 + width * user_id};
}

std::uint64_t dataset_sample_count(int num_subcarriers, int channel_draws,
                                   int noise_draws, int num_snr_levels) {
  return static_cast<std::uint64_t>(num_snr_levels) * num_subcarriers *
         channel_draws * noise_draws;
}

Eigen::VectorXd observation_features(const CVec& y) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd f(3 * n);
  constexpr double kPi = std::numbers::pi;
  for (Eigen::Index i = 0; i < n; ++i) {
    f(i) = y(i).real();
    f(n + i) = y(i).imag();
    double a = std::arg(y(i));
    if (a <= -kPi) a = kPi;  // angles live in (-pi, pi]
    f(2 * n + i) = a;
  }
  return f;
}

LocalDataset build_dataset(const SystemConfig& cfg, const SensingEnsemble& ensemble,
                           int user_id, int channel_draws, int noise_draws,
                           const std::vector<double>& snr_levels_db, Rng& rng,
                           std::optional<DoaSector> sector_override) {
  if (channel_draws < 1 || noise_draws < 1)
    throw std::domain_error("channel_draws and noise_draws must be positive");
  if (snr_levels_db.empty()) throw std::domain_error("snr_levels_db must be nonempty");

  const int m_count = cfg.num_subcarriers;
  const int snr_count = static_cast<int>(snr_levels_db.size());
  const int total = channel_draws * snr_count * noise_draws * m_count;

  LocalDataset ds;
  ds.user_id = user_id;
  ds.doa_sector = sector_override.value_or(sector_for_user(user_id, cfg.num_users));
  ds.features.resize(total, 3 * cfg.num_rf_chains);
  ds.label_channel.resize(total, 2 * cfg.num_tx_antennas);
  ds.label_support.resize(total, cfg.grid_size);

  SystemConfig single = cfg;
  single.num_users = 1;

  int row = 0;
  for (int v = 0; v < channel_draws; ++v) {
    Rng ch_rng = rng.child("channel", v);
    ChannelRealization ch = generate_channel(single, ch_rng, ds.doa_sector);
    Rng quiet = rng.child("unused");
    PilotObservation clean = observe_compressed(ch, ensemble, quiet, 0.0);
    const std::vector<BsaUserResult> bsa = bsa_estimate(clean, ensemble, single);
    const SparseChannelEstimate& est = bsa[0].estimate;
    const double signal_power = mean_observation_power(clean);

    for (int si = 0; si < snr_count; ++si) {
      const double sigma2 = signal_power / std::pow(10.0, snr_levels_db[si] / 10.0);
      for (int g = 0; g < noise_draws; ++g) {
        Rng noise_rng = rng.child("noise", (static_cast<std::uint64_t>(v) * snr_count + si) *
                                               noise_draws + g);
        for (int m = 0; m < m_count; ++m) {
          CVec y = clean.received[0][m];
          for (Eigen::Index i = 0; i < y.size(); ++i)
            y(i) += noise_rng.complex_gaussian(sigma2);
          ds.features.row(row) = observation_features(y);
          const CVec& h = est.channels[m];
          for (int i = 0; i < cfg.num_tx_antennas; ++i) {
            ds.label_channel(row, i) = h(i).real();
            ds.label_channel(row, cfg.num_tx_antennas + i) = h(i).imag();
          }
          ds.label_support.row(row) = est.coefficients[m].cwiseAbs().transpose();
          ++row;
        }
      }
    }
  }

  // deterministic stratified split: validation rows spread evenly, exact
  // counts via integer Bresenham
  const long val_count =
      total - std::lround(ds.train_fraction * static_cast<double>(total));
  for (long i = 0; i < total; ++i) {
    const bool is_val = (i + 1) * val_count / total > i * val_count / total;
    (is_val ? ds.val_indices : ds.train_indices).push_back(static_cast<int>(i));
  }
  return ds;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(const ModelParameters& params,
                                                    const Eigen::VectorXd& features) {
  if (!features.allFinite()) throw std::domain_error("non-finite features");
  Eigen::MatrixXd x = features.transpose();
  ForwardCache cache = forward_batch(params, x, nullptr, false);
  return {cache.head_channel.row(0), cache.head_support.row(0)};
}

std::pair<double, double> task_losses(const ModelParameters& params, const Batch& batch) {
  ForwardCache cache = forward_batch(params, batch.features, nullptr, false);
  const double b = static_cast<double>(batch.size());
  return {(cache.head_channel - batch.label_channel).squaredNorm() / b,
          (cache.head_support - batch.label_support).squaredNorm() / b};
}

double loss(const ModelParameters& params, const Batch& batch, double w1, double w2) {
  if (w1 < 0 || w2 < 0) throw std::domain_error("task weights must be nonnegative");
  auto [l1, l2] = task_losses(params, batch);
  return w1 * l1 + w2 * l2;
}

Eigen::VectorXd batch_gradient(const ModelParameters& params, const Batch& batch,
                               double w1, double w2, Rng* dropout_rng) {
  return gradient_impl(params, batch, w1, w2, dropout_rng, nullptr, nullptr);
}

Eigen::VectorXd local_gradient(const ModelParameters& params,
                               const LocalDataset& dataset, double w1, double w2,
                               int batch_size, Rng& rng, Rng* dropout_rng) {
  const int train_size = static_cast<int>(dataset.train_indices.size());
  if (train_size == 0) throw std::invalid_argument("dataset has no training rows");
  std::vector<int> rows;
  if (batch_size <= 0 || batch_size >= train_size) {
    rows = dataset.train_indices;
  } else {
    rows.reserve(batch_size);
    std::sample(dataset.train_indices.begin(), dataset.train_indices.end(),
                std::back_inserter(rows), batch_size, rng.engine());
  }
  return batch_gradient(params, dataset.batch(rows), w1, w2, dropout_rng);
}

Eigen::VectorXd noisy_transmit(const Eigen::VectorXd& v, double snr_delta_db,
                               Rng& rng) {
  if (std::isinf(snr_delta_db)) return v;
  const double power = v.squaredNorm();
  if (power == 0.0) return v;
  const double sigma =
      std::sqrt(power / (v.size() * std::pow(10.0, snr_delta_db / 10.0)));
  Eigen::VectorXd out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += sigma * rng.normal();
  return out;
}

namespace {

struct RoundStats {
  double train_l1 = 0.0, train_l2 = 0.0;
};

ModelParameters round_step(const ModelParameters& params,
                           const std::vector<LocalDataset>& datasets,
                           double learning_rate, double w1, double w2,
                           double snr_delta_db, Rng& rng, const TrainOptions& options,
                           RoundStats* stats) {
  const std::size_t k_count = datasets.size();
  Rng round_rng(rng.next_u64());
  Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(params.flat.size());
  double l1_sum = 0.0, l2_sum = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    ModelParameters local = params;
    if (!std::isinf(snr_delta_db)) {
      Rng noise_rng = round_rng.child("downlink", k);
      local.flat = noisy_transmit(params.flat, snr_delta_db, noise_rng);
    }
    Rng batch_rng = round_rng.child("batch", k);
    Rng dropout_rng = round_rng.child("dropout", k);
    Rng* dropout = local.dropout_prob > 0.0 ? &dropout_rng : nullptr;

    const int train_size = static_cast<int>(datasets[k].train_indices.size());
    std::vector<int> rows;
    if (options.batch_size <= 0 || options.batch_size >= train_size) {
      rows = datasets[k].train_indices;
    } else {
      rows.reserve(options.batch_size);
      std::sample(datasets[k].train_indices.begin(), datasets[k].train_indices.end(),
                  std::back_inserter(rows), options.batch_size, batch_rng.engine());
    }
    double l1 = 0.0, l2 = 0.0;
    grad_sum += gradient_impl(local, datasets[k].batch(rows), w1, w2, dropout, &l1, &l2);
    l1_sum += l1;
    l2_sum += l2;
  }
  ModelParameters next = params;
  next.flat -= (learning_rate / static_cast<double>(k_count)) * grad_sum;
  if (stats) {
    stats->train_l1 = l1_sum / static_cast<double>(k_count);
    stats->train_l2 = l2_sum / static_cast<double>(k_count);
  }
  return next;
}

}  // namespace

ModelParameters federated_round(const ModelParameters& params,
                                const std::vector<LocalDataset>& datasets,
                                double learning_rate, double w1, double w2,
                                double snr_delta_db, Rng& rng,
                                const TrainOptions& options) {
  check_dataset_consistency(datasets);
  return round_step(params, datasets, learning_rate, w1, w2, snr_delta_db, rng,
                    options, nullptr);
}

LocalDataset pool_datasets(const std::vector<LocalDataset>& datasets) {
  check_dataset_consistency(datasets);
  LocalDataset pooled;
  pooled.user_id = 0;
  pooled.doa_sector = DoaSector{};
  Eigen::Index total = 0;
  for (const auto& d : datasets) total += d.sample_count();
  pooled.features.resize(total, datasets[0].features.cols());
  pooled.label_channel.resize(total, datasets[0].label_channel.cols());
  pooled.label_support.resize(total, datasets[0].label_support.cols());
  Eigen::Index off = 0;
  for (const auto& d : datasets) {
    pooled.features.middleRows(off, d.sample_count()) = d.features;
    pooled.label_channel.middleRows(off, d.sample_count()) = d.label_channel;
    pooled.label_support.middleRows(off, d.sample_count()) = d.label_support;
    for (int i : d.train_indices) pooled.train_indices.push_back(static_cast<int>(off) + i);
    for (int i : d.val_indices) pooled.val_indices.push_back(static_cast<int>(off) + i);
    off += d.sample_count();
  }
  return pooled;
}

TrainingReport train(TrainMode mode, const std::vector<LocalDataset>& datasets,
                     const ModelParameters& initial, int iterations,
                     double learning_rate, double w1, double w2,
                     double snr_delta_db, Rng& rng, const TrainOptions& options) {
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  check_dataset_consistency(datasets);

  std::vector<LocalDataset> pooled_store;
  const std::vector<LocalDataset>* round_data = &datasets;
  double round_noise = snr_delta_db;
  if (mode == TrainMode::kCentralized) {
    pooled_store.push_back(pool_datasets(datasets));
    round_data = &pooled_store;
    round_noise = std::numeric_limits<double>::infinity();
  }

  // fixed deterministic validation rows for the per-iteration log: every
  // user's validation split, truncated evenly to the row cap
  Batch val_batch;
  {
    const int cap = options.val_loss_row_cap;
    std::vector<Batch> parts;
    Eigen::Index total = 0;
    for (const auto& d : datasets) {
      std::vector<int> rows = d.val_indices;
      if (cap > 0) {
        const int share = std::max(1, cap / static_cast<int>(datasets.size()));
        if (static_cast<int>(rows.size()) > share) rows.resize(share);
      }
      parts.push_back(d.batch(rows));
      total += parts.back().size();
    }
    val_batch.features.resize(total, datasets[0].features.cols());
    val_batch.label_channel.resize(total, datasets[0].label_channel.cols());
    val_batch.label_support.resize(total, datasets[0].label_support.cols());
    Eigen::Index off = 0;
    for (const Batch& p : parts) {
      val_batch.features.middleRows(off, p.size()) = p.features;
      val_batch.label_channel.middleRows(off, p.size()) = p.label_channel;
      val_batch.label_support.middleRows(off, p.size()) = p.label_support;
      off += p.size();
    }
  }

  TrainingReport report;
  report.learning_rate = learning_rate;
  report.w1 = w1;
  report.w2 = w2;
  ModelParameters params = initial;

  for (int t = 0; t < iterations; ++t) {
    RoundStats stats;
    params = round_step(params, *round_data, learning_rate, w1, w2, round_noise,
                        rng, options, &stats);
    report.train_task1.push_back(stats.train_l1);
    report.train_task2.push_back(stats.train_l2);
    report.train_total.push_back(w1 * stats.train_l1 + w2 * stats.train_l2);
    auto [v1, v2] = task_losses(params, val_batch);
    report.val_task1.push_back(v1);
    report.val_task2.push_back(v2);
    report.val_total.push_back(w1 * v1 + w2 * v2);
    report.iterations_run = t + 1;
    if (!std::isfinite(report.train_total.back()) ||
        !std::isfinite(report.val_total.back()) || !params.flat.allFinite()) {
      report.diverged = true;
      report.divergence_note =
          "loss became non-finite at iteration " + std::to_string(t + 1);
      break;
    }
  }
  report.final_params = std::move(params);
  return report;
}

ChannelDoaPrediction predict_channel_and_doa(const ModelParameters& params,
                                             const Eigen::VectorXd& features,
                                             int num_paths,
                                             const Eigen::VectorXd& grid_angles) {
  auto [head1, head2] = forward(params, features);
  if (head1.size() % 2 != 0)
    throw std::domain_error("channel head must have even length");
  if (head2.size() != grid_angles.size())
    throw std::domain_error("support head does not match grid size");
  const Eigen::Index nt = head1.size() / 2;
  ChannelDoaPrediction pred;
  pred.channel.resize(nt);
  for (Eigen::Index i = 0; i < nt; ++i)
    pred.channel(i) = {head1(i), head1(nt + i)};

  std::vector<int> order(head2.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return head2(a) > head2(b); });
  for (int l = 0; l < num_paths && l < static_cast<int>(order.size()); ++l)
    pred.doas.push_back(grid_angles(order[l]));
  std::sort(pred.doas.begin(), pred.doas.end());
  return pred;
}

double evaluate_channel_nmse(const ModelParameters& params,
                             const LocalDataset& dataset,
                             const std::vector<int>& rows) {
  if (rows.empty()) return 0.0;
  const Batch b = dataset.batch(rows);
  ForwardCache cache = forward_batch(params, b.features, nullptr, false);
  double acc = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double denom = b.label_channel.row(i).squaredNorm();
    if (denom == 0.0) continue;
    acc += (cache.head_channel.row(i) - b.label_channel.row(i)).squaredNorm() / denom;
    ++used;
  }
  return used ? acc / used : 0.0;
}

namespace {
constexpr char kCkptMagic[8] = {'T', 'H', 'Z', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void wr(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T rd(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const Rng& rng) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  wr(out, params.dropout_prob);
  wr<std::int32_t>(out, params.shape.input);
  wr<std::int32_t>(out, static_cast<std::int32_t>(params.shape.hidden.size()));
  for (int h : params.shape.hidden) wr<std::int32_t>(out, h);
  wr<std::int32_t>(out, params.shape.head_channel);
  wr<std::int32_t>(out, params.shape.head_support);
  wr<std::int64_t>(out, params.flat.size());
  out.write(reinterpret_cast<const char*>(params.flat.data()),
            params.flat.size() * sizeof(double));
  const std::string state = rng.serialize_state();
  wr<std::int64_t>(out, static_cast<std::int64_t>(state.size()));
  out.write(state.data(), state.size());
  if (!out) throw std::runtime_error("write failure: " + path);
}

std::pair<ModelParameters, Rng> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kCkptMagic))
    throw std::runtime_error("not a checkpoint file: " + path);
  ModelParameters params;
  params.dropout_prob = rd<double>(in);
  params.shape.input = rd<std::int32_t>(in);
  const auto hidden_count = rd<std::int32_t>(in);
  for (int i = 0; i < hidden_count; ++i)
    params.shape.hidden.push_back(rd<std::int32_t>(in));
  params.shape.head_channel = rd<std::int32_t>(in);
  params.shape.head_support = rd<std::int32_t>(in);
  const auto q = rd<std::int64_t>(in);
  if (static_cast<std::size_t>(q) != params.shape.param_count())
    throw std::runtime_error("checkpoint parameter count mismatch");
  params.flat.resize(q);
  in.read(reinterpret_cast<char*>(params.flat.data()), q * sizeof(double));
  const auto len = rd<std::int64_t>(in);
  std::string state(len, '\0');
  in.read(state.data(), len);
  if (!in) throw std::runtime_error("truncated checkpoint");
  return {std::move(params), Rng::deserialize_state(state)};
}

}  // namespace thzlab
