#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thzlab/estimators.hpp"
#include "thzlab/sensing.hpp"
#include "thzlab/system.hpp"

namespace thzlab {

/// Parameter count of the reference CNN whose overhead figures the
/// communication study reproduces.
inline constexpr std::uint64_t kReferenceModelParamCount = 1'196'928;

/// Layer sizes of the two-head regression network: a fully connected ReLU
/// trunk shared by a channel head (2 N_T outputs) and a support head
/// (N outputs).
struct NetworkShape {
  int input = 0;
  std::vector<int> hidden;
  int head_channel = 0;
  int head_support = 0;

  std::size_t param_count() const;
  bool operator==(const NetworkShape&) const = default;
};

/// Flat learnable-parameter vector plus its architecture descriptor.
struct ModelParameters {
  NetworkShape shape;
  Eigen::VectorXd flat;  // length shape.param_count()
  double dropout_prob = 0.5;

  /// Fan-in-scaled symmetric uniform weights, zero biases.
  static ModelParameters init(const NetworkShape& shape, Rng& rng,
                              double dropout_prob = 0.5);
};

/// One input/label tuple: pilot features (Re, Im, angle of y, flattened
/// column-wise to 3 N_RF) and the two regression targets.
struct Sample {
  Eigen::VectorXd features;       // 3 * N_RF
  Eigen::VectorXd label_channel;  // [Re(h)^T, Im(h)^T]^T, 2 N_T
  Eigen::VectorXd label_support;  // |x|, N, at most L nonzeros
};

/// Row-per-sample batch view used by the batched network math.
struct Batch {
  Eigen::MatrixXd features;
  Eigen::MatrixXd label_channel;
  Eigen::MatrixXd label_support;
  Eigen::Index size() const { return features.rows(); }
};

/// Per-user dataset with a deterministic 80/20 train/validation split.
struct LocalDataset {
  int user_id = 0;  // 1-based
  double train_fraction = 0.8;
  DoaSector doa_sector;
  Eigen::MatrixXd features;       // D x 3N_RF
  Eigen::MatrixXd label_channel;  // D x 2N_T
  Eigen::MatrixXd label_support;  // D x N
  std::vector<int> train_indices;
  std::vector<int> val_indices;

  int sample_count() const { return static_cast<int>(features.rows()); }
  Sample sample(int i) const;
  Batch batch(const std::vector<int>& rows) const;
  Batch train_batch() const { return batch(train_indices); }
  Batch val_batch() const { return batch(val_indices); }
};

/// Sine-space sector of user k (1-based) out of K: width 2/K starting at
/// -1.
DoaSector sector_for_user(int user_id, int num_users);

/// D_k implied by the dataset pipeline: 3 (SNR levels) * M * V * G for the
/// default three training SNRs.
std::uint64_t dataset_sample_count(int num_subcarriers, int channel_draws,
                                   int noise_draws, int num_snr_levels);

/// Builds user `user_id`'s dataset: V channel draws in the user's sector,
/// labels from the support-alignment estimator on the clean compressed
/// observation, features from noisy observations at each SNR level and
/// noise draw, one sample per subcarrier.
LocalDataset build_dataset(const SystemConfig& cfg, const SensingEnsemble& ensemble,
                           int user_id, int channel_draws, int noise_draws,
                           const std::vector<double>& snr_levels_db, Rng& rng,
                           std::optional<DoaSector> sector_override = {});

/// Both heads for one input, evaluation mode (dropout disabled).
/// Throws std::domain_error on non-finite features.
std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(const ModelParameters& params,
                                                    const Eigen::VectorXd& features);

/// Weighted two-task mean squared error over a batch, evaluation mode:
/// w1 * mean ||head1 - label1||^2 + w2 * mean ||head2 - label2||^2.
double loss(const ModelParameters& params, const Batch& batch, double w1, double w2);

/// Per-task components (task1, task2), evaluation mode.
std::pair<double, double> task_losses(const ModelParameters& params, const Batch& batch);

/// Backpropagated gradient of the weighted loss over one batch.
/// `batch_size` <= 0 or >= D selects the whole training split; otherwise a
/// random subset drawn from `rng`. `dropout_rng`, when given, enables
/// inverted dropout on the trunk activations.
Eigen::VectorXd local_gradient(const ModelParameters& params,
                               const LocalDataset& dataset, double w1, double w2,
                               int batch_size, Rng& rng, Rng* dropout_rng = nullptr);

/// Gradient over an explicit batch (no sampling).
Eigen::VectorXd batch_gradient(const ModelParameters& params, const Batch& batch,
                               double w1, double w2, Rng* dropout_rng = nullptr);

/// Adds white Gaussian noise at the given SNR to a transmitted vector:
/// per-element variance ||v||^2 / (Q * 10^(snr/10)). Infinite SNR or a
/// zero vector returns the input unchanged.
Eigen::VectorXd noisy_transmit(const Eigen::VectorXd& v, double snr_delta_db,
                               Rng& rng);

enum class TrainMode { kFederated, kCentralized };

struct TrainOptions {
  int batch_size = 0;  // <= 0: full batch
  int val_loss_row_cap = 2048;  // deterministic cap for per-iteration val loss
};

struct TrainingReport {
  std::vector<double> train_total, train_task1, train_task2;
  std::vector<double> val_total, val_task1, val_task2;
  ModelParameters final_params;
  int iterations_run = 0;
  double learning_rate = 0.0;
  double w1 = 0.0, w2 = 0.0;
  bool diverged = false;
  std::string divergence_note;
};

/// One synchronous round: every user computes its gradient at a
/// noise-perturbed copy of the broadcast parameters, the K gradients are
/// averaged, and one descent step is taken.
ModelParameters federated_round(const ModelParameters& params,
                                const std::vector<LocalDataset>& datasets,
                                double learning_rate, double w1, double w2,
                                double snr_delta_db, Rng& rng,
                                const TrainOptions& options = {});

/// Gradient-averaging training. Federated mode runs T rounds over the
/// per-user datasets with optional transmission noise; centralized mode
/// pools every sample and takes T descent steps with the same step size
/// and task weights, noise-free. Aborts with a diagnostic report when the
/// loss becomes non-finite.
TrainingReport train(TrainMode mode, const std::vector<LocalDataset>& datasets,
                     const ModelParameters& initial, int iterations,
                     double learning_rate, double w1, double w2,
                     double snr_delta_db, Rng& rng, const TrainOptions& options = {});

/// Pools several local datasets into one (centralized-learning view).
LocalDataset pool_datasets(const std::vector<LocalDataset>& datasets);

struct ChannelDoaPrediction {
  CVec channel;               // N_T, reassembled from the channel head
  std::vector<double> doas;   // grid angles of the L largest support outputs
};

/// Decodes the two heads: complex channel from the stacked Re/Im halves,
/// DoAs from the L largest support entries (sorted ascending).
ChannelDoaPrediction predict_channel_and_doa(const ModelParameters& params,
                                             const Eigen::VectorXd& features,
                                             int num_paths,
                                             const Eigen::VectorXd& grid_angles);

/// Mean ||hhat - h_label||^2 / ||h_label||^2 of the channel head over the
/// given dataset rows.
double evaluate_channel_nmse(const ModelParameters& params,
                             const LocalDataset& dataset,
                             const std::vector<int>& rows);

/// Versioned checkpoint blob: shape, dropout, flat parameters and RNG
/// state; loading resumes training exactly.
void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const Rng& rng);
std::pair<ModelParameters, Rng> load_checkpoint(const std::string& path);

/// Builds pilot features [Re(y); Im(y); angle(y)] with angles in (-pi, pi].
Eigen::VectorXd observation_features(const CVec& y);

}  // namespace thzlab
