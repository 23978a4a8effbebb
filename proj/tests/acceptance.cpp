// Acceptance suite: runs every exit criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code is the number of
// failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "thzlab/experiments.hpp"

using namespace thzlab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
};

CMat random_phase_matrix(int rows, int cols, Rng& rng) {
  CMat f(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      f(r, c) = std::polar(1.0, rng.uniform(-std::numbers::pi, std::numbers::pi));
  return f;
}

std::vector<CVec> snapped_channel(const SystemConfig& cfg, const SensingEnsemble& e,
                                  int physical_cell) {
  const double root_nt = std::sqrt(static_cast<double>(cfg.num_tx_antennas));
  std::vector<CVec> per_m;
  for (int m = 1; m <= cfg.num_subcarriers; ++m) {
    const int cell = e.beam_split_image(physical_cell, subcarrier_frequency(cfg, m),
                                        cfg.carrier_freq_hz);
    per_m.push_back(root_nt * e.dictionary.col(cell));
  }
  return per_m;
}

// observation of prescribed per-subcarrier channel vectors through B
PilotObservation compressed_obs(const std::vector<CVec>& channels_per_m,
                                const SensingEnsemble& e) {
  PilotObservation obs;
  obs.regime = PilotRegime::kCompressed;
  obs.received.push_back({});
  for (const CVec& h : channels_per_m)
    obs.received[0].push_back(e.precoder * h);
  return obs;
}

// ---------------------------------------------------------------------------
// 1. Overhead exactness
bool criterion_overhead(std::string& detail) {
  std::vector<std::uint64_t> counts(8, 192'000'000ull);
  OverheadReport rep = overhead(1'196'928, 100, 8, counts, 32);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "T_FL=%llu T_CL=%llu eta=%.4f",
                static_cast<unsigned long long>(rep.t_fl),
                static_cast<unsigned long long>(rep.t_cl), rep.eta);
  detail = buf;
  return rep.t_fl == 1'915'084'800ull && rep.t_cl == 49'152'000'000ull &&
         std::abs(rep.eta - 49'152'000'000.0 / 1'915'084'800.0) < 1e-12 &&
         std::floor(rep.eta) == 25.0;
}

// ---------------------------------------------------------------------------
// 2. LS oracle: noiseless overdetermined LS on 100 random desk instances
bool criterion_ls(std::string& detail) {
  SystemConfig cfg = desk_profile();
  cfg.num_users = 1;
  cfg.num_subcarriers = 2;
  Rng root(2024);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    Rng inst_rng = root.child("instance", inst);
    Rng pilot_rng = inst_rng.child("pilot");
    CMat f = random_phase_matrix(64, 64, pilot_rng);
    Rng ch_rng = inst_rng.child("channel");
    ChannelRealization ch = generate_channel(cfg, ch_rng);
    Rng quiet(0);
    PilotObservation obs = observe_full_pilots(ch, f, quiet, 0.0);
    auto est = ls_estimate(obs, f);
    std::vector<CVec> truth, got;
    for (int m = 0; m < cfg.num_subcarriers; ++m) {
      truth.push_back(ch.channels[0][m]);
      got.push_back(est[0][m]);
    }
    worst = std::max(worst, nmse(truth, got));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst NMSE %.3e (tolerance 1e-20)", worst);
  detail = buf;
  return worst <= 1e-20;
}

// ---------------------------------------------------------------------------
// 3. BSA support alignment: exhaustive over all grid cells
bool criterion_bsa_alignment(std::string& detail) {
  SystemConfig cfg = desk_profile();
  cfg.num_users = 1;
  cfg.num_paths = 1;
  Rng root(17);
  Rng ens_rng = root.child("ensemble");
  SensingEnsemble e = build_ensemble(cfg, ens_rng);

  int exact = 0;
  double nmse_acc = 0.0;
  for (int j = 0; j < cfg.grid_size; ++j) {
    std::vector<CVec> per_m = snapped_channel(cfg, e, j);
    auto res = bsa_estimate(compressed_obs(per_m, e), e, cfg);
    const double got = e.grid_angles(j);
    if (res[0].estimate.physical_doas[0] == got) ++exact;
    std::vector<CVec> truth = per_m;
    nmse_acc += nmse(truth, res[0].estimate.channels);
  }
  const double mean_nmse_db = to_db(nmse_acc / cfg.grid_size);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "argmax exact %d/%d, mean NMSE %.1f dB (<= -35)",
                exact, cfg.grid_size, mean_nmse_db);
  detail = buf;
  return exact == cfg.grid_size && mean_nmse_db <= -35.0;
}

// ---------------------------------------------------------------------------
// 4. Beam-split benefit: BSA at least 5 dB below per-subcarrier OMP
bool criterion_beam_split_benefit(std::string& detail) {
  SystemConfig cfg = desk_profile();
  cfg.num_users = 1;
  cfg.num_paths = 3;
  Rng root(99);
  Rng ens_rng = root.child("ensemble");
  SensingEnsemble e = build_ensemble(cfg, ens_rng);

  double bsa_acc = 0.0, omp_acc = 0.0;
  long count = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng trial_rng = root.child("trial", trial);
    Rng ch_rng = trial_rng.child("channel");
    ChannelRealization ch = generate_channel(cfg, ch_rng);
    Rng quiet(0);
    PilotObservation clean = observe_compressed(ch, e, quiet, 0.0);
    const double sigma2 = mean_observation_power(clean) / 100.0;  // 20 dB
    Rng noise_rng = trial_rng.child("noise");
    PilotObservation obs = add_observation_noise(clean, sigma2, noise_rng);
    auto res = bsa_estimate(obs, e, cfg);
    for (int m = 0; m < cfg.num_subcarriers; ++m) {
      const CVec& h = ch.channels[0][m];
      bsa_acc += (h - res[0].estimate.channels[m]).squaredNorm() / h.squaredNorm();
      SparseChannelEstimate o = omp_estimate(obs.received[0][m], e, cfg.num_paths);
      omp_acc += (h - o.channels[0]).squaredNorm() / h.squaredNorm();
      ++count;
    }
  }
  const double bsa_db = to_db(bsa_acc / count);
  const double omp_db = to_db(omp_acc / count);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "BSA %.2f dB vs OMP %.2f dB, gap %.2f dB (>= 5)",
                bsa_db, omp_db, omp_db - bsa_db);
  detail = buf;
  return omp_db - bsa_db >= 5.0;
}

// ---------------------------------------------------------------------------
// 5. Gradient correctness on 20 random small networks
bool criterion_gradient(std::string& detail) {
  Rng root(5);
  double worst = 0.0;
  for (int net = 0; net < 20; ++net) {
    NetworkShape s;
    s.input = 12;
    s.hidden = {12, 10};
    s.head_channel = 11;
    s.head_support = 9;  // Q = 506
    Rng net_rng = root.child("net", net);
    ModelParameters p = ModelParameters::init(s, net_rng, 0.0);
    // generic parameter point: jittered biases keep preactivations off the
    // ReLU kinks that central differences cannot straddle
    for (Eigen::Index i = 0; i < p.flat.size(); ++i)
      p.flat(i) += 0.02 * net_rng.uniform(-1.0, 1.0);

    Batch b;
    b.features.resize(4, s.input);
    b.label_channel.resize(4, s.head_channel);
    b.label_support.resize(4, s.head_support);
    Rng data_rng = root.child("data", net);
    for (Eigen::Index i = 0; i < b.features.size(); ++i)
      b.features.data()[i] = data_rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < b.label_channel.size(); ++i)
      b.label_channel.data()[i] = data_rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < b.label_support.size(); ++i)
      b.label_support.data()[i] = data_rng.uniform(-1, 1);

    const double w1 = 0.8, w2 = 0.2, step = 1e-5;
    Eigen::VectorXd g = batch_gradient(p, b, w1, w2);
    Eigen::VectorXd fd(p.flat.size());
    for (Eigen::Index i = 0; i < p.flat.size(); ++i) {
      ModelParameters up = p, dn = p;
      up.flat(i) += step;
      dn.flat(i) -= step;
      fd(i) = (loss(up, b, w1, w2) - loss(dn, b, w1, w2)) / (2 * step);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), fd.norm()));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst relative error %.3e (< 1e-4)", worst);
  detail = buf;
  return worst < 1e-4;
}

// ---------------------------------------------------------------------------
// 6. Federation identity over 50 iterations
bool criterion_federation_identity(std::string& detail) {
  NetworkShape s;
  s.input = 10;
  s.hidden = {16, 16};
  s.head_channel = 8;
  s.head_support = 12;
  Rng root(6);
  Rng init_rng = root.child("init");
  ModelParameters pf = ModelParameters::init(s, init_rng, 0.0);
  ModelParameters pc = pf;

  LocalDataset ds;
  ds.user_id = 1;
  Rng data_rng = root.child("data");
  ds.features.resize(40, s.input);
  ds.label_channel.resize(40, s.head_channel);
  ds.label_support.resize(40, s.head_support);
  for (Eigen::Index i = 0; i < ds.features.size(); ++i)
    ds.features.data()[i] = data_rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < ds.label_channel.size(); ++i)
    ds.label_channel.data()[i] = data_rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < ds.label_support.size(); ++i)
    ds.label_support.data()[i] = data_rng.uniform(-1, 1);
  for (int r = 0; r < 40; ++r)
    (r % 5 == 4 ? ds.val_indices : ds.train_indices).push_back(r);

  std::vector<LocalDataset> users(4, ds);
  LocalDataset pooled = pool_datasets(users);

  Rng rf(7070), rc(7070);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    pf = federated_round(pf, users, 0.02, 0.8, 0.2, kInf, rf);
    pc = federated_round(pc, {pooled}, 0.02, 0.8, 0.2, kInf, rc);
    worst = std::max(worst, (pf.flat - pc.flat).cwiseAbs().maxCoeff());
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max per-parameter gap %.3e (<= 1e-10)", worst);
  detail = buf;
  return worst <= 1e-10;
}

// ---------------------------------------------------------------------------
// 7. FMTL vs CL gap on the desk profile
bool criterion_fmtl_vs_cl(std::string& detail) {
  ExperimentSpec spec = default_spec("desk");
  spec.experiment = "overhead";
  spec.sweep.axis = "dataset_size";
  spec.sweep.values = {static_cast<double>(spec.training.channel_draws)};
  spec.scenario.seed = 7;
  auto [table, report] = run_overhead_study(spec);

  double cl_db = 0, fmtl_db = 0, imb_db = 0;
  for (const ResultRow& r : table.rows) {
    if (r.metric != "final_val_nmse_db") continue;
    if (r.method == "CL") cl_db = r.value;
    if (r.method == "FMTL") fmtl_db = r.value;
    if (r.method == "FMTL-imbalanced") imb_db = r.value;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "CL %.2f dB, FMTL %.2f dB (gap %.2f, <= 3), imbalanced %.2f dB (>= FMTL)",
                cl_db, fmtl_db, std::abs(fmtl_db - cl_db), imb_db);
  detail = buf;
  return std::abs(fmtl_db - cl_db) <= 3.0 && imb_db >= fmtl_db;
}

// ---------------------------------------------------------------------------
// 8. DoA estimation: exact on-grid, bounded off-grid
bool criterion_doa(std::string& detail) {
  SystemConfig cfg = desk_profile();
  cfg.num_users = 1;
  cfg.num_paths = 1;
  Rng root(8);
  Rng ens_rng = root.child("ensemble");
  SensingEnsemble e = build_ensemble(cfg, ens_rng);

  // on-grid: RMSE must be exactly zero
  std::vector<std::vector<double>> truth_on, est_on;
  Rng pick = root.child("pick");
  for (int trial = 0; trial < 100; ++trial) {
    const int j = static_cast<int>(pick.next_u64() % cfg.grid_size);
    auto res = bsa_estimate(compressed_obs(snapped_channel(cfg, e, j), e), e, cfg);
    truth_on.push_back({e.grid_angles(j)});
    est_on.push_back(extract_doas(res[0].estimate, 1).doas);
  }
  const double rmse_on = doa_rmse_pooled(truth_on, est_on);

  // off-grid: RMSE within one grid step (2/N)
  std::vector<std::vector<double>> truth_off, est_off;
  Rng angle_rng = root.child("angles");
  for (int trial = 0; trial < 100; ++trial) {
    const double theta = angle_rng.uniform(-1.0, 1.0);
    std::vector<CVec> per_m;
    for (int m = 1; m <= cfg.num_subcarriers; ++m) {
      const double fm = subcarrier_frequency(cfg, m);
      per_m.push_back(std::sqrt(64.0) *
                      steering_vector(spatial_doa(theta, fm, cfg.carrier_freq_hz), 64));
    }
    auto res = bsa_estimate(compressed_obs(per_m, e), e, cfg);
    truth_off.push_back({theta});
    est_off.push_back(extract_doas(res[0].estimate, 1).doas);
  }
  const double rmse_off = doa_rmse_pooled(truth_off, est_off);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "on-grid RMSE %.3e (= 0), off-grid RMSE %.4e (<= %.4e)",
                rmse_on, rmse_off, e.grid_step);
  detail = buf;
  return rmse_on == 0.0 && rmse_off <= e.grid_step;
}

// ---------------------------------------------------------------------------
// 9. Determinism: byte-identical CSV on rerun
bool criterion_determinism(std::string& detail) {
  ExperimentSpec spec = default_spec("desk");
  spec.trials = 5;
  spec.sweep.values = {10.0, 20.0};
  spec.methods = {Method::kBsa, Method::kOmp};
  spec.scenario.seed = 12345;
  spec.scenario.num_users = 2;
  spec.scenario.num_subcarriers = 8;

  const std::string a = table_to_csv(run_nmse_sweep(spec));
  const std::string b = table_to_csv(run_nmse_sweep(spec));

  ExperimentSpec doa_spec = spec;
  doa_spec.experiment = "doa";
  doa_spec.trials = 4;
  const std::string c = table_to_csv(run_doa_sweep(doa_spec));
  const std::string d = table_to_csv(run_doa_sweep(doa_spec));

  detail = "nmse and doa sweeps rerun byte-identically";
  return a == b && c == d && !a.empty();
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"1 overhead exactness", criterion_overhead},
      {"2 LS oracle", criterion_ls},
      {"3 BSA support alignment", criterion_bsa_alignment},
      {"4 beam-split benefit", criterion_beam_split_benefit},
      {"5 gradient correctness", criterion_gradient},
      {"6 federation identity", criterion_federation_identity},
      {"7 FMTL vs CL gap", criterion_fmtl_vs_cl},
      {"8 DoA estimation", criterion_doa},
      {"9 determinism", criterion_determinism},
  };

  int failures = 0;
  for (Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %s: %s (%.1fs)\n", ok ? "PASS" : "FAIL",
                c.name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    failures += !ok;
  }
  if (failures == 0)
    std::printf("acceptance: all %zu criteria passed\n", criteria.size());
  else
    std::printf("acceptance: %d criteria FAILED\n", failures);
  return failures;
}
