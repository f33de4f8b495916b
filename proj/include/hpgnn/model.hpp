#pragma once

#include "hpgnn/graph.hpp"

#include <filesystem>
#include <vector>

namespace hpgnn {

/// Propagation operators per order, p = 1..P. Views into caller-owned matrices.
using OperatorSet = std::vector<const Eigen::SparseMatrix<double>*>;

/// Linear polynomial filter over per-order propagation operators:
///   Z_p = sum_k beta(p,k) * Pi_p^k * (X theta_p),  Y = [Z_1 | ... | Z_P] W.
/// Logits are returned raw; softmax lives inside the loss.
struct HpgnnModel {
    int P = 1;
    int K = 10;
    std::int64_t feat_dim = 0;
    std::int64_t hidden = 64;
    std::int64_t classes = 0;
    Eigen::MatrixXd beta;               // P x (K+1)
    std::vector<Eigen::MatrixXd> theta; // P matrices, feat_dim x hidden
    Eigen::MatrixXd W;                  // (P*hidden) x classes
    double dropout_rate = 0;
    std::uint64_t init_seed = 0;

    /// beta(p,k) = alpha (1-alpha)^k; theta/W Glorot-uniform from `seed`.
    static HpgnnModel init(int P, int K, std::int64_t feat_dim, std::int64_t hidden,
                           std::int64_t classes, double alpha, std::uint64_t seed,
                           double dropout_rate = 0);

    void check_shapes(std::int64_t n, const OperatorSet& operators) const;
};

/// Hidden states kept by the forward pass: stages[p-1][k] = Pi_p^k (X theta_p).
struct PropagationStack {
    std::vector<std::vector<Eigen::MatrixXd>> stages;
};

Eigen::MatrixXd forward(const HpgnnModel& model, const Eigen::MatrixXd& features,
                        const OperatorSet& operators,
                        const Eigen::MatrixXd* dropout_mask = nullptr);

Eigen::MatrixXd forward_with_stack(const HpgnnModel& model, const Eigen::MatrixXd& features,
                                   const OperatorSet& operators, PropagationStack& stack,
                                   const Eigen::MatrixXd* dropout_mask = nullptr);

struct ModelGradients {
    Eigen::MatrixXd beta;
    std::vector<Eigen::MatrixXd> theta;
    Eigen::MatrixXd W;
};

struct LossGrads {
    double loss = 0;
    ModelGradients grads;
};

/// Mean softmax cross-entropy over `train_mask` rows plus 0.5*wd*||params||^2,
/// with exact gradients for beta, theta, W. Throws NumericError naming the
/// offending group when a non-finite value appears.
LossGrads loss_and_grads(const HpgnnModel& model, const Eigen::MatrixXd& features,
                         const OperatorSet& operators, const std::vector<int>& labels,
                         const std::vector<NodeId>& train_mask, double weight_decay,
                         const Eigen::MatrixXd* dropout_mask = nullptr);

struct SplitMasks {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;
};

struct TrainConfig {
    double lr = 0.05;
    double weight_decay = 0.001;
    double momentum = 0.9;
    int max_epochs = 1000;
    int patience = 200;
    std::uint64_t seed = 0; // drives dropout masks
};

struct EpochRecord {
    int epoch;
    double train_loss;
    double train_acc;
    double val_acc;
    double test_acc;
};

struct TrainResult {
    HpgnnModel model; // best-validation snapshot
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_val_acc = 0;
    double test_acc = 0; // at the best-validation epoch
};

/// Full-batch gradient descent with momentum and early stopping on validation
/// accuracy. Deterministic for a fixed seed. Throws DivergenceError when the
/// loss stays above 10*ln(C) for 50 consecutive epochs.
TrainResult train(HpgnnModel model, const Eigen::MatrixXd& features, const OperatorSet& operators,
                  const std::vector<int>& labels, const SplitMasks& splits,
                  const TrainConfig& config);

/// Argmax over logits, ties broken toward the smaller class id.
std::vector<int> predict(const HpgnnModel& model, const Eigen::MatrixXd& features,
                         const OperatorSet& operators);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                const std::vector<NodeId>& mask);

/// Versioned JSON checkpoint carrying shapes, parameters, and the init seed.
void save_checkpoint(const HpgnnModel& model, const std::filesystem::path& path);
HpgnnModel load_checkpoint(const std::filesystem::path& path);

void save_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

} // namespace hpgnn
