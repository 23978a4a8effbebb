#include "thzlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace thzlab {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Method m) {
  switch (m) {
    case Method::kLs: return "LS";
    case Method::kMmse: return "MMSE";
    case Method::kOmp: return "OMP";
    case Method::kBsa: return "BSA";
    case Method::kFmtl: return "FMTL";
    case Method::kCl: return "CL";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "LS") return Method::kLs;
  if (name == "MMSE") return Method::kMmse;
  if (name == "OMP") return Method::kOmp;
  if (name == "BSA") return Method::kBsa;
  if (name == "FMTL") return Method::kFmtl;
  if (name == "CL") return Method::kCl;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Partition p) {
  switch (p) {
    case Partition::kIid: return "iid";
    case Partition::kSector: return "sector";
    case Partition::kImbalanced: return "imbalanced";
  }
  return "?";
}

Partition partition_from_string(const std::string& name) {
  if (name == "iid") return Partition::kIid;
  if (name == "sector") return Partition::kSector;
  if (name == "imbalanced") return Partition::kImbalanced;
  throw std::invalid_argument("unknown partition: " + name);
}

void ExperimentSpec::validate() const {
  scenario.validate();
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (methods.empty() && experiment != "overhead")
    throw std::invalid_argument("methods must be nonempty");
  if (experiment != "nmse" && experiment != "doa" && experiment != "overhead")
    throw std::invalid_argument("unknown experiment: " + experiment);
  if (sweep.values.empty()) throw std::invalid_argument("sweep.values must be nonempty");
  if (sweep.axis != "snr_db" && sweep.axis != "dataset_size" && sweep.axis != "omega2")
    throw std::invalid_argument("unknown sweep axis: " + sweep.axis);
  if (experiment == "overhead" && sweep.axis != "dataset_size")
    throw std::invalid_argument("overhead study requires the dataset_size axis");
  if (experiment != "overhead" && sweep.axis == "dataset_size")
    throw std::invalid_argument("dataset_size axis is only for the overhead study");
  if (sweep.axis == "omega2") {
    if (experiment != "doa")
      throw std::invalid_argument("omega2 axis is only for the doa experiment");
    for (double w : sweep.values)
      if (!(w > 0.0 && w < 1.0))
        throw std::invalid_argument("omega2 values must lie in (0, 1)");
  }
  if (experiment == "doa")
    for (Method m : methods)
      if (m == Method::kLs || m == Method::kMmse)
        throw std::invalid_argument(to_string(m) + " produces no DoA estimates");
  if (training.iterations < 1 || training.learning_rate <= 0)
    throw std::invalid_argument("invalid training setup");
}

ExperimentSpec default_spec(const std::string& profile) {
  ExperimentSpec spec;
  spec.profile = profile;
  if (profile == "desk") {
    spec.scenario = desk_profile();
    spec.training.hidden = {64, 64};
    spec.training.iterations = 200;
    spec.training.learning_rate = 0.01;
    spec.training.batch_size = 512;
    spec.training.channel_draws = 50;
    spec.training.noise_draws = 4;
    spec.trials = 50;
  } else if (profile == "paper") {
    spec.scenario = paper_profile();
    spec.training.hidden = {256, 256};
    spec.training.iterations = 100;
    spec.training.learning_rate = 0.001;
    spec.training.batch_size = 1024;
    spec.training.channel_draws = 1000;
    spec.training.noise_draws = 500;
    spec.trials = 500;
  } else {
    throw std::invalid_argument("unknown profile: " + profile);
  }
  spec.sweep.axis = "snr_db";
  spec.sweep.values = {0, 5, 10, 15, 20, 25};
  return spec;
}

namespace {

void apply_spec_json(ExperimentSpec& spec, const json& j) {
  for (const auto& [key, value] : j.items()) {
    if (key == "profile") continue;  // handled before field overrides
    if (key == "scenario") {
      apply_json_overrides(spec.scenario, value.dump());
    } else if (key == "experiment") {
      spec.experiment = value.get<std::string>();
    } else if (key == "sweep") {
      if (value.contains("axis")) spec.sweep.axis = value["axis"].get<std::string>();
      if (value.contains("values"))
        spec.sweep.values = value["values"].get<std::vector<double>>();
    } else if (key == "methods") {
      spec.methods.clear();
      for (const auto& name : value)
        spec.methods.push_back(method_from_string(name.get<std::string>()));
    } else if (key == "trials") {
      spec.trials = value.get<int>();
    } else if (key == "partition") {
      spec.partition = partition_from_string(value.get<std::string>());
    } else if (key == "output_path") {
      spec.output_path = value.get<std::string>();
    } else if (key == "format") {
      const std::string f = value.get<std::string>();
      if (f == "csv") spec.format = OutputFormat::kCsv;
      else if (f == "json") spec.format = OutputFormat::kJson;
      else throw std::invalid_argument("unknown format: " + f);
    } else if (key == "training") {
      TrainingSetup& t = spec.training;
      for (const auto& [tk, tv] : value.items()) {
        if (tk == "hidden") t.hidden = tv.get<std::vector<int>>();
        else if (tk == "iterations") t.iterations = tv.get<int>();
        else if (tk == "learning_rate") t.learning_rate = tv.get<double>();
        else if (tk == "w1") t.w1 = tv.get<double>();
        else if (tk == "w2") t.w2 = tv.get<double>();
        else if (tk == "snr_delta_db") t.snr_delta_db = tv.get<double>();
        else if (tk == "batch_size") t.batch_size = tv.get<int>();
        else if (tk == "dropout_prob") t.dropout_prob = tv.get<double>();
        else if (tk == "channel_draws") t.channel_draws = tv.get<int>();
        else if (tk == "noise_draws") t.noise_draws = tv.get<int>();
        else if (tk == "snr_levels_db") t.snr_levels_db = tv.get<std::vector<double>>();
        else if (tk == "val_loss_row_cap") t.val_loss_row_cap = tv.get<int>();
        else throw std::invalid_argument("unknown training field: " + tk);
      }
    } else {
      throw std::invalid_argument("unknown spec field: " + key);
    }
  }
}

}  // namespace

ExperimentSpec spec_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("spec parse error: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("spec must be a JSON object");
  if (j.contains("config")) j = j["config"];  // accept emitted manifests
  const std::string profile =
      j.contains("profile") ? j["profile"].get<std::string>() : "desk";
  ExperimentSpec spec = default_spec(profile);
  apply_spec_json(spec, j);
  return spec;
}

ExperimentSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return spec_from_json_text(buf.str());
}

std::string spec_to_json(const ExperimentSpec& spec) {
  ordered_json j;
  j["profile"] = spec.profile;
  j["scenario"] = json::parse(config_to_json(spec.scenario));
  j["experiment"] = spec.experiment;
  j["sweep"] = {{"axis", spec.sweep.axis}, {"values", spec.sweep.values}};
  std::vector<std::string> names;
  for (Method m : spec.methods) names.push_back(to_string(m));
  j["methods"] = names;
  j["trials"] = spec.trials;
  j["partition"] = to_string(spec.partition);
  j["training"] = {{"hidden", spec.training.hidden},
                   {"iterations", spec.training.iterations},
                   {"learning_rate", spec.training.learning_rate},
                   {"w1", spec.training.w1},
                   {"w2", spec.training.w2},
                   {"snr_delta_db", spec.training.snr_delta_db},
                   {"batch_size", spec.training.batch_size},
                   {"dropout_prob", spec.training.dropout_prob},
                   {"channel_draws", spec.training.channel_draws},
                   {"noise_draws", spec.training.noise_draws},
                   {"snr_levels_db", spec.training.snr_levels_db},
                   {"val_loss_row_cap", spec.training.val_loss_row_cap}};
  j["output_path"] = spec.output_path;
  j["format"] = spec.format == OutputFormat::kCsv ? "csv" : "json";
  return j.dump();
}

namespace {

std::vector<DoaSector> partition_sectors(const ExperimentSpec& spec) {
  std::vector<DoaSector> sectors;
  for (int k = 1; k <= spec.scenario.num_users; ++k) {
    if (spec.partition == Partition::kIid)
      sectors.push_back(DoaSector{});
    else
      sectors.push_back(sector_for_user(k, spec.scenario.num_users));
  }
  return sectors;
}

/// K-user channel with per-user DoA sectors.
ChannelRealization generate_partitioned_channel(const SystemConfig& cfg,
                                                const std::vector<DoaSector>& sectors,
                                                Rng& rng) {
  ChannelRealization out;
  out.channels.resize(cfg.num_users);
  out.paths.resize(cfg.num_users);
  out.spatial_doas.resize(cfg.num_users);
  SystemConfig single = cfg;
  single.num_users = 1;
  for (int k = 0; k < cfg.num_users; ++k) {
    Rng user_rng = rng.child("user", k);
    ChannelRealization one = generate_channel(single, user_rng, sectors[k]);
    out.channels[k] = std::move(one.channels[0]);
    out.paths[k] = std::move(one.paths[0]);
    out.spatial_doas[k] = std::move(one.spatial_doas[0]);
  }
  return out;
}

/// Unitary DFT pilot beamformer (J = N_T orthogonal pilots).
CMat dft_pilot_matrix(int n) {
  CMat f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      f(r, c) = std::polar(scale, -2.0 * std::numbers::pi * r * c / n);
  return f;
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

bool wants(const ExperimentSpec& spec, Method m) {
  return std::find(spec.methods.begin(), spec.methods.end(), m) != spec.methods.end();
}

struct TrainedModels {
  std::optional<ModelParameters> fmtl;
  std::optional<ModelParameters> cl;
  std::vector<LocalDataset> datasets;
};

std::vector<LocalDataset> build_all_datasets(const ExperimentSpec& spec,
                                             const SensingEnsemble& ensemble,
                                             Rng root, int channel_draws_base,
                                             bool imbalanced) {
  const SystemConfig& cfg = spec.scenario;
  std::vector<double> zeta(cfg.num_users, 1.0);
  if (imbalanced) {
    Rng imb = root.child("imbalance");
    double sum = 0.0;
    for (double& z : zeta) {
      z = imb.uniform(0.7, 1.3);
      sum += z;
    }
    for (double& z : zeta) z *= cfg.num_users / sum;  // sum(zeta) = K
  }
  std::vector<DoaSector> sectors = partition_sectors(spec);
  std::vector<LocalDataset> datasets;
  for (int k = 1; k <= cfg.num_users; ++k) {
    const int vk = std::max(1, static_cast<int>(std::lround(zeta[k - 1] * channel_draws_base)));
    Rng user_rng = root.child("dataset", k);
    datasets.push_back(build_dataset(cfg, ensemble, k, vk, spec.training.noise_draws,
                                     spec.training.snr_levels_db, user_rng,
                                     sectors[k - 1]));
  }
  return datasets;
}

ModelParameters train_model(const ExperimentSpec& spec,
                            const std::vector<LocalDataset>& datasets,
                            TrainMode mode, double w1, double w2, Rng root) {
  NetworkShape shape;
  shape.input = 3 * spec.scenario.num_rf_chains;
  shape.hidden = spec.training.hidden;
  shape.head_channel = 2 * spec.scenario.num_tx_antennas;
  shape.head_support = spec.scenario.grid_size;
  Rng init_rng = root.child("model-init");
  ModelParameters initial =
      ModelParameters::init(shape, init_rng, spec.training.dropout_prob);
  Rng train_rng = root.child(mode == TrainMode::kFederated ? "train-fmtl" : "train-cl");
  TrainOptions options;
  options.batch_size = spec.training.batch_size;
  options.val_loss_row_cap = spec.training.val_loss_row_cap;
  TrainingReport report =
      train(mode, datasets, initial, spec.training.iterations,
            spec.training.learning_rate, w1, w2,
            mode == TrainMode::kFederated
                ? spec.training.snr_delta_db
                : std::numeric_limits<double>::infinity(),
            train_rng, options);
  if (report.diverged)
    throw std::runtime_error("training diverged: " + report.divergence_note);
  return report.final_params;
}

TrainedModels prepare_models(const ExperimentSpec& spec,
                             const SensingEnsemble& ensemble, Rng root) {
  TrainedModels models;
  if (!wants(spec, Method::kFmtl) && !wants(spec, Method::kCl)) return models;
  models.datasets = build_all_datasets(spec, ensemble, root,
                                       spec.training.channel_draws,
                                       spec.partition == Partition::kImbalanced);
  if (wants(spec, Method::kFmtl))
    models.fmtl = train_model(spec, models.datasets, TrainMode::kFederated,
                              spec.training.w1, spec.training.w2, root);
  if (wants(spec, Method::kCl))
    models.cl = train_model(spec, models.datasets, TrainMode::kCentralized,
                            spec.training.w1, spec.training.w2, root);
  return models;
}

/// Per-user physical DoA estimate from a trained model: per-subcarrier
/// support-head peaks mapped back through the beam-split relation, then
/// averaged positionally over subcarriers.
std::vector<double> model_user_doas(const ModelParameters& params,
                                    const PilotObservation& obs, int user,
                                    const SensingEnsemble& ensemble,
                                    const SystemConfig& cfg) {
  const int m_count = cfg.num_subcarriers;
  const int l_count = cfg.num_paths;
  std::vector<double> acc(l_count, 0.0);
  for (int m = 0; m < m_count; ++m) {
    const double fm = subcarrier_frequency(cfg, m + 1);
    ChannelDoaPrediction pred = predict_channel_and_doa(
        params, observation_features(obs.received[user][m]), l_count,
        ensemble.grid_angles);
    std::vector<double> corrected;
    for (double ang : pred.doas)
      corrected.push_back(ang * cfg.carrier_freq_hz / fm);
    std::sort(corrected.begin(), corrected.end());
    for (int l = 0; l < l_count; ++l) acc[l] += corrected[l];
  }
  for (double& a : acc) a /= m_count;
  return acc;
}

std::vector<double> omp_user_doas(const PilotObservation& obs, int user,
                                  const SensingEnsemble& ensemble,
                                  const SystemConfig& cfg) {
  // beam-split-ignorant baseline: supports of the subcarrier closest to
  // the carrier, corrected only by that subcarrier's scale
  int mc = 0;
  double best = std::numeric_limits<double>::max();
  for (int m = 0; m < cfg.num_subcarriers; ++m) {
    const double d = std::abs(subcarrier_frequency(cfg, m + 1) - cfg.carrier_freq_hz);
    if (d < best) {
      best = d;
      mc = m;
    }
  }
  const double fm = subcarrier_frequency(cfg, mc + 1);
  SparseChannelEstimate est =
      omp_estimate(obs.received[user][mc], ensemble, cfg.num_paths);
  std::vector<double> doas;
  for (int s : est.support_sets[0])
    doas.push_back(ensemble.grid_angles(s) * cfg.carrier_freq_hz / fm);
  while (static_cast<int>(doas.size()) < cfg.num_paths && !doas.empty())
    doas.push_back(doas.front());
  std::sort(doas.begin(), doas.end());
  return doas;
}

struct TrialContext {
  const ExperimentSpec& spec;
  const SensingEnsemble& ensemble;
  const std::vector<DoaSector>& sectors;
  const CMat* full_pilots = nullptr;
  const std::vector<std::vector<CMat>>* covariance = nullptr;
  const TrainedModels* models = nullptr;
};

/// One Monte-Carlo trial of one (axis point, method): returns the trial's
/// NMSE (linear) or pooled DoA squared errors.
double trial_nmse(const TrialContext& ctx, Method method, double snr_db, Rng rng) {
  const SystemConfig& cfg = ctx.spec.scenario;
  Rng ch_rng = rng.child("channel");
  ChannelRealization channel = generate_partitioned_channel(cfg, ctx.sectors, ch_rng);
  Rng quiet = rng.child("quiet");

  std::vector<CVec> truth, est;
  auto collect = [&](const std::vector<std::vector<CVec>>& hhat) {
    for (int k = 0; k < cfg.num_users; ++k)
      for (int m = 0; m < cfg.num_subcarriers; ++m) {
        truth.push_back(channel.channels[k][m]);
        est.push_back(hhat[k][m]);
      }
  };

  if (method == Method::kLs || method == Method::kMmse) {
    PilotObservation clean = observe_full_pilots(channel, *ctx.full_pilots, quiet, 0.0);
    const double sigma2 =
        mean_observation_power(clean) / std::pow(10.0, snr_db / 10.0);
    Rng noise_rng = rng.child("noise-full");
    PilotObservation obs = add_observation_noise(clean, sigma2, noise_rng);
    if (method == Method::kLs) {
      collect(ls_estimate(obs, *ctx.full_pilots));
    } else {
      collect(mmse_estimate(obs, *ctx.full_pilots, *ctx.covariance, sigma2));
    }
  } else {
    PilotObservation clean = observe_compressed(channel, ctx.ensemble, quiet, 0.0);
    const double sigma2 =
        mean_observation_power(clean) / std::pow(10.0, snr_db / 10.0);
    Rng noise_rng = rng.child("noise-compressed");
    PilotObservation obs = add_observation_noise(clean, sigma2, noise_rng);
    if (method == Method::kOmp) {
      std::vector<std::vector<CVec>> hhat(cfg.num_users,
                                          std::vector<CVec>(cfg.num_subcarriers));
      for (int k = 0; k < cfg.num_users; ++k)
        for (int m = 0; m < cfg.num_subcarriers; ++m)
          hhat[k][m] =
              omp_estimate(obs.received[k][m], ctx.ensemble, cfg.num_paths).channels[0];
      collect(hhat);
    } else if (method == Method::kBsa) {
      std::vector<BsaUserResult> res = bsa_estimate(obs, ctx.ensemble, cfg);
      std::vector<std::vector<CVec>> hhat(cfg.num_users);
      for (int k = 0; k < cfg.num_users; ++k) hhat[k] = res[k].estimate.channels;
      collect(hhat);
    } else {
      const ModelParameters& params = method == Method::kFmtl
                                          ? ctx.models->fmtl.value()
                                          : ctx.models->cl.value();
      std::vector<std::vector<CVec>> hhat(cfg.num_users,
                                          std::vector<CVec>(cfg.num_subcarriers));
      for (int k = 0; k < cfg.num_users; ++k)
        for (int m = 0; m < cfg.num_subcarriers; ++m)
          hhat[k][m] = predict_channel_and_doa(
                           params, observation_features(obs.received[k][m]),
                           cfg.num_paths, ctx.ensemble.grid_angles)
                           .channel;
      collect(hhat);
    }
  }
  return nmse(truth, est);
}

double trial_doa_rmse(const TrialContext& ctx, Method method, double snr_db,
                      const ModelParameters* model_override, Rng rng) {
  const SystemConfig& cfg = ctx.spec.scenario;
  Rng ch_rng = rng.child("channel");
  ChannelRealization channel = generate_partitioned_channel(cfg, ctx.sectors, ch_rng);
  Rng quiet = rng.child("quiet");
  PilotObservation clean = observe_compressed(channel, ctx.ensemble, quiet, 0.0);
  const double sigma2 = mean_observation_power(clean) / std::pow(10.0, snr_db / 10.0);
  Rng noise_rng = rng.child("noise-compressed");
  PilotObservation obs = add_observation_noise(clean, sigma2, noise_rng);

  std::vector<std::vector<double>> truth(cfg.num_users), est(cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k)
    for (const PhysicalPath& p : channel.paths[k])
      truth[k].push_back(p.physical_doa);

  if (method == Method::kBsa) {
    std::vector<BsaUserResult> res = bsa_estimate(obs, ctx.ensemble, cfg);
    for (int k = 0; k < cfg.num_users; ++k)
      est[k] = extract_doas(res[k].estimate, cfg.num_paths).doas;
  } else if (method == Method::kOmp) {
    for (int k = 0; k < cfg.num_users; ++k)
      est[k] = omp_user_doas(obs, k, ctx.ensemble, cfg);
  } else {
    const ModelParameters& params =
        model_override ? *model_override
                       : (method == Method::kFmtl ? ctx.models->fmtl.value()
                                                  : ctx.models->cl.value());
    for (int k = 0; k < cfg.num_users; ++k)
      est[k] = model_user_doas(params, obs, k, ctx.ensemble, cfg);
  }
  return doa_rmse_pooled(truth, est);
}

template <typename TrialFn>
std::pair<double, double> run_trials(int trials, TrialFn&& fn) {
  std::vector<double> values(trials);
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) values[t] = fn(t);
  return {mean_of(values), sample_std(values)};
}

}  // namespace

ResultTable run_nmse_sweep(const ExperimentSpec& spec) {
  spec.validate();
  const SystemConfig& cfg = spec.scenario;
  Rng root(cfg.seed);
  Rng ens_rng = root.child("ensemble");
  const SensingEnsemble ensemble = build_ensemble(cfg, ens_rng);
  const std::vector<DoaSector> sectors = partition_sectors(spec);

  CMat full_pilots;
  std::vector<std::vector<CMat>> covariance;
  if (wants(spec, Method::kLs) || wants(spec, Method::kMmse))
    full_pilots = dft_pilot_matrix(cfg.num_tx_antennas);
  if (wants(spec, Method::kMmse))
    covariance =
        estimate_channel_covariance(cfg, root.child("covariance"), 1000, &sectors);
  const TrainedModels models = prepare_models(spec, ensemble, root.child("models"));

  TrialContext ctx{spec, ensemble, sectors, &full_pilots, &covariance, &models};
  ResultTable table;
  for (std::size_t ai = 0; ai < spec.sweep.values.size(); ++ai) {
    const double snr = spec.sweep.values[ai];
    for (Method method : spec.methods) {
      std::vector<double> per_trial(spec.trials);
#pragma omp parallel for schedule(dynamic)
      for (int t = 0; t < spec.trials; ++t)
        per_trial[t] =
            trial_nmse(ctx, method, snr, root.child("trial", ai * 1000003ull + t));
      std::vector<double> db_values;
      for (double v : per_trial) db_values.push_back(to_db(v));
      table.rows.push_back({spec.experiment, to_string(method), spec.sweep.axis, snr,
                            "nmse_db", to_db(mean_of(per_trial)),
                            sample_std(db_values), spec.trials, cfg.seed});
    }
  }
  return table;
}

ResultTable run_doa_sweep(const ExperimentSpec& spec) {
  spec.validate();
  const SystemConfig& cfg = spec.scenario;
  Rng root(cfg.seed);
  Rng ens_rng = root.child("ensemble");
  const SensingEnsemble ensemble = build_ensemble(cfg, ens_rng);
  const std::vector<DoaSector> sectors = partition_sectors(spec);
  ResultTable table;

  if (spec.sweep.axis == "omega2") {
    // retrain the federated model per task weight, evaluate at scenario SNR
    std::vector<LocalDataset> datasets;
    const bool needs_data = wants(spec, Method::kFmtl) || wants(spec, Method::kCl);
    if (needs_data)
      datasets = build_all_datasets(spec, ensemble, root.child("models"),
                                    spec.training.channel_draws,
                                    spec.partition == Partition::kImbalanced);
    TrialContext ctx{spec, ensemble, sectors, nullptr, nullptr, nullptr};
    for (std::size_t ai = 0; ai < spec.sweep.values.size(); ++ai) {
      const double w2 = spec.sweep.values[ai];
      const double w1 = 1.0 - w2;  // w1 + w2 = 1
      for (Method method : spec.methods) {
        std::optional<ModelParameters> model;
        if (method == Method::kFmtl || method == Method::kCl)
          model = train_model(spec, datasets,
                              method == Method::kFmtl ? TrainMode::kFederated
                                                      : TrainMode::kCentralized,
                              w1, w2, root.child("models"));
        std::vector<double> per_trial(spec.trials);
#pragma omp parallel for schedule(dynamic)
        for (int t = 0; t < spec.trials; ++t)
          per_trial[t] = trial_doa_rmse(ctx, method, cfg.snr_db,
                                        model ? &*model : nullptr,
                                        root.child("trial", ai * 1000003ull + t));
        table.rows.push_back({spec.experiment, to_string(method), spec.sweep.axis,
                              w2, "doa_rmse", mean_of(per_trial),
                              sample_std(per_trial), spec.trials, cfg.seed});
      }
    }
    return table;
  }

  const TrainedModels models = prepare_models(spec, ensemble, root.child("models"));
  TrialContext ctx{spec, ensemble, sectors, nullptr, nullptr, &models};
  for (std::size_t ai = 0; ai < spec.sweep.values.size(); ++ai) {
    const double snr = spec.sweep.values[ai];
    for (Method method : spec.methods) {
      std::vector<double> per_trial(spec.trials);
#pragma omp parallel for schedule(dynamic)
      for (int t = 0; t < spec.trials; ++t)
        per_trial[t] = trial_doa_rmse(ctx, method, snr, nullptr,
                                      root.child("trial", ai * 1000003ull + t));
      table.rows.push_back({spec.experiment, to_string(method), spec.sweep.axis, snr,
                            "doa_rmse", mean_of(per_trial), sample_std(per_trial),
                            spec.trials, cfg.seed});
    }
  }
  return table;
}

std::pair<ResultTable, OverheadReport> run_overhead_study(const ExperimentSpec& spec) {
  spec.validate();
  const SystemConfig& cfg = spec.scenario;
  Rng root(cfg.seed);
  Rng ens_rng = root.child("ensemble");
  const SensingEnsemble ensemble = build_ensemble(cfg, ens_rng);

  ResultTable table;
  OverheadReport last_report;
  for (std::size_t ai = 0; ai < spec.sweep.values.size(); ++ai) {
    const int v = static_cast<int>(spec.sweep.values[ai]);
    if (v < 1) throw std::invalid_argument("dataset_size values must be >= 1");
    Rng size_root = root.child("size", ai);

    std::vector<LocalDataset> balanced =
        build_all_datasets(spec, ensemble, size_root.child("balanced"), v, false);
    std::vector<LocalDataset> imbalanced =
        build_all_datasets(spec, ensemble, size_root.child("imbalanced"), v, true);

    std::uint64_t total_samples = 0;
    std::vector<std::uint64_t> counts;
    for (const auto& d : balanced) {
      counts.push_back(d.sample_count());
      total_samples += d.sample_count();
    }

    ModelParameters cl = train_model(spec, balanced, TrainMode::kCentralized,
                                     spec.training.w1, spec.training.w2,
                                     size_root.child("cl"));
    ModelParameters fmtl = train_model(spec, balanced, TrainMode::kFederated,
                                       spec.training.w1, spec.training.w2,
                                       size_root.child("fmtl"));
    ModelParameters fmtl_imb = train_model(spec, imbalanced, TrainMode::kFederated,
                                           spec.training.w1, spec.training.w2,
                                           size_root.child("fmtl-imb"));

    auto val_nmse = [](const ModelParameters& params,
                       const std::vector<LocalDataset>& datasets) {
      double acc = 0.0;
      int n = 0;
      for (const auto& d : datasets) {
        acc += evaluate_channel_nmse(params, d, d.val_indices) *
               static_cast<double>(d.val_indices.size());
        n += static_cast<int>(d.val_indices.size());
      }
      return n ? acc / n : 0.0;
    };

    const double axis_value = static_cast<double>(total_samples);
    table.rows.push_back({spec.experiment, "CL", "dataset_size", axis_value,
                          "final_val_nmse_db", to_db(val_nmse(cl, balanced)), 0.0, 1,
                          cfg.seed});
    table.rows.push_back({spec.experiment, "FMTL", "dataset_size", axis_value,
                          "final_val_nmse_db", to_db(val_nmse(fmtl, balanced)), 0.0,
                          1, cfg.seed});
    // imbalance is judged on the same balanced validation rows as the others
    table.rows.push_back({spec.experiment, "FMTL-imbalanced", "dataset_size",
                          axis_value, "final_val_nmse_db",
                          to_db(val_nmse(fmtl_imb, balanced)), 0.0, 1, cfg.seed});

    OverheadReport rep =
        overhead(fmtl.shape.param_count(), spec.training.iterations, cfg.num_users,
                 counts, cfg.num_rf_chains);
    table.rows.push_back({spec.experiment, "FMTL", "dataset_size", axis_value, "eta",
                          rep.eta, 0.0, 1, cfg.seed});
    last_report = rep;
  }
  return {table, last_report};
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  if (spec.experiment == "nmse") return run_nmse_sweep(spec);
  if (spec.experiment == "doa") return run_doa_sweep(spec);
  if (spec.experiment == "overhead") return run_overhead_study(spec).first;
  throw std::invalid_argument("unknown experiment: " + spec.experiment);
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string table_to_csv(const ResultTable& table) {
  std::ostringstream out;
  out << "experiment,method,axis_name,axis_value,metric,value,std,trials,seed\n";
  for (const ResultRow& r : table.rows) {
    out << r.experiment << ',' << r.method << ',' << r.axis_name << ','
        << format_double(r.axis_value) << ',' << r.metric << ','
        << format_double(r.value) << ',' << format_double(r.std_dev) << ','
        << r.trials << ',' << r.seed << '\n';
  }
  return out.str();
}

ResultTable table_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    ResultRow r;
    auto next = [&]() {
      if (!std::getline(row, field, ',')) throw std::runtime_error("short csv row");
      return field;
    };
    r.experiment = next();
    r.method = next();
    r.axis_name = next();
    r.axis_value = std::stod(next());
    r.metric = next();
    r.value = std::stod(next());
    r.std_dev = std::stod(next());
    r.trials = std::stoi(next());
    r.seed = std::stoull(next());
    table.rows.push_back(std::move(r));
  }
  return table;
}

void emit_results(const ResultTable& table, const ExperimentSpec& spec,
                  const std::string& path, OutputFormat format) {
  std::string payload;
  if (format == OutputFormat::kCsv) {
    payload = table_to_csv(table);
  } else {
    ordered_json j;
    j["config"] = json::parse(spec_to_json(spec));
    j["results"] = json::array();
    for (const ResultRow& r : table.rows) {
      ordered_json row;
      row["experiment"] = r.experiment;
      row["method"] = r.method;
      row["axis_name"] = r.axis_name;
      row["axis_value"] = r.axis_value;
      row["metric"] = r.metric;
      row["value"] = r.value;
      row["std"] = r.std_dev;
      row["trials"] = r.trials;
      row["seed"] = r.seed;
      j["results"].push_back(row);
    }
    payload = j.dump(2);
    payload.push_back('\n');
  }

  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << payload;
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("write failure: " + path);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move results into place: " + ec.message());
  }
}

}  // namespace thzlab
