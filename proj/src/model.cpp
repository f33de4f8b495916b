#include "hpgnn/model.hpp"
#include "hpgnn/errors.hpp"
#include "hpgnn/graph_io.hpp"
#include "hpgnn/util.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hpgnn {

using nlohmann::json;

HpgnnModel HpgnnModel::init(int P, int K, std::int64_t feat_dim, std::int64_t hidden,
                            std::int64_t classes, double alpha, std::uint64_t seed,
                            double dropout_rate) {
    if (P < 1) throw InvalidArgumentError("P must be >= 1");
    if (K < 0) throw InvalidArgumentError("K must be >= 0");
    if (feat_dim < 1 || hidden < 1 || classes < 1)
        throw InvalidArgumentError("feat_dim, hidden and classes must be >= 1");
    if (!(alpha > 0.0) || alpha > 1.0) throw InvalidArgumentError("alpha must lie in (0, 1]");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw InvalidArgumentError("dropout_rate must lie in [0, 1)");

    HpgnnModel m;
    m.P = P;
    m.K = K;
    m.feat_dim = feat_dim;
    m.hidden = hidden;
    m.classes = classes;
    m.dropout_rate = dropout_rate;
    m.init_seed = seed;

    m.beta.resize(P, K + 1);
    for (int p = 0; p < P; ++p)
        for (int k = 0; k <= K; ++k) m.beta(p, k) = alpha * std::pow(1.0 - alpha, k);

    std::mt19937_64 rng(seed);
    auto glorot = [&rng](Eigen::MatrixXd& w) {
        double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::int64_t i = 0; i < w.rows(); ++i)
            for (std::int64_t j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    };
    m.theta.resize(P);
    for (int p = 0; p < P; ++p) {
        m.theta[p].resize(feat_dim, hidden);
        glorot(m.theta[p]);
    }
    m.W.resize(static_cast<std::int64_t>(P) * hidden, classes);
    glorot(m.W);
    return m;
}

void HpgnnModel::check_shapes(std::int64_t n, const OperatorSet& operators) const {
    if (static_cast<int>(operators.size()) != P)
        throw DimensionError("expected " + std::to_string(P) + " operators, got " +
                             std::to_string(operators.size()));
    for (const auto* op : operators) {
        if (!op) throw InvalidArgumentError("null propagation operator");
        if (op->rows() != n || op->cols() != n)
            throw DimensionError("propagation operator is not n x n");
    }
    if (beta.rows() != P || beta.cols() != K + 1) throw DimensionError("beta shape mismatch");
    if (static_cast<int>(theta.size()) != P) throw DimensionError("theta count mismatch");
    for (const auto& t : theta)
        if (t.rows() != feat_dim || t.cols() != hidden)
            throw DimensionError("theta shape mismatch");
    if (W.rows() != static_cast<std::int64_t>(P) * hidden || W.cols() != classes)
        throw DimensionError("W shape mismatch");
}

namespace {

Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& features, const Eigen::MatrixXd* mask) {
    if (!mask) return features;
    if (mask->rows() != features.rows() || mask->cols() != features.cols())
        throw DimensionError("dropout mask shape does not match features");
    return features.cwiseProduct(*mask);
}

} // namespace

Eigen::MatrixXd forward_with_stack(const HpgnnModel& model, const Eigen::MatrixXd& features,
                                   const OperatorSet& operators, PropagationStack& stack,
                                   const Eigen::MatrixXd* dropout_mask) {
    const std::int64_t n = features.rows();
    model.check_shapes(n, operators);
    if (features.cols() != model.feat_dim)
        throw DimensionError("feature width does not match model feat_dim");

    Eigen::MatrixXd x = apply_dropout(features, dropout_mask);
    stack.stages.assign(model.P, {});
    Eigen::MatrixXd concat(n, static_cast<std::int64_t>(model.P) * model.hidden);
    for (int p = 0; p < model.P; ++p) {
        auto& stages = stack.stages[p];
        stages.reserve(model.K + 1);
        stages.push_back(x * model.theta[p]);
        for (int k = 1; k <= model.K; ++k) stages.push_back(*operators[p] * stages.back());
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, model.hidden);
        for (int k = 0; k <= model.K; ++k) z += model.beta(p, k) * stages[k];
        concat.middleCols(static_cast<std::int64_t>(p) * model.hidden, model.hidden) = z;
    }
    return concat * model.W;
}

Eigen::MatrixXd forward(const HpgnnModel& model, const Eigen::MatrixXd& features,
                        const OperatorSet& operators, const Eigen::MatrixXd* dropout_mask) {
    PropagationStack stack;
    return forward_with_stack(model, features, operators, stack, dropout_mask);
}

LossGrads loss_and_grads(const HpgnnModel& model, const Eigen::MatrixXd& features,
                         const OperatorSet& operators, const std::vector<int>& labels,
                         const std::vector<NodeId>& train_mask, double weight_decay,
                         const Eigen::MatrixXd* dropout_mask) {
    const std::int64_t n = features.rows();
    if (train_mask.empty()) throw InvalidArgumentError("empty training mask");
    if (static_cast<std::int64_t>(labels.size()) != n)
        throw DimensionError("label count does not match feature rows");
    for (NodeId i : train_mask) {
        if (i < 0 || i >= n) throw BoundsError("training mask index out of range");
        if (labels[i] < 0 || labels[i] >= model.classes)
            throw BoundsError("label id outside model classes");
    }

    PropagationStack stack;
    Eigen::MatrixXd logits = forward_with_stack(model, features, operators, stack, dropout_mask);

    // Softmax cross-entropy over the masked rows; G holds d(loss)/d(logits).
    const double inv_count = 1.0 / static_cast<double>(train_mask.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, model.classes);
    double data_loss = 0;
    for (NodeId i : train_mask) {
        Eigen::RowVectorXd row = logits.row(i);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd ex = (row.array() - mx).exp();
        double denom = ex.sum();
        data_loss -= std::log(ex[labels[i]] / denom);
        g.row(i) = (ex / denom) * inv_count;
        g(i, labels[i]) -= inv_count;
    }
    data_loss *= inv_count;

    double penalty = model.beta.squaredNorm() + model.W.squaredNorm();
    for (const auto& t : model.theta) penalty += t.squaredNorm();

    LossGrads out;
    out.loss = data_loss + 0.5 * weight_decay * penalty;
    if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");

    // Rebuild the concat layer from the stored stages for the W gradient.
    Eigen::MatrixXd concat(n, static_cast<std::int64_t>(model.P) * model.hidden);
    for (int p = 0; p < model.P; ++p) {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, model.hidden);
        for (int k = 0; k <= model.K; ++k) z += model.beta(p, k) * stack.stages[p][k];
        concat.middleCols(static_cast<std::int64_t>(p) * model.hidden, model.hidden) = z;
    }
    out.grads.W = concat.transpose() * g + weight_decay * model.W;

    Eigen::MatrixXd d_concat = g * model.W.transpose();
    Eigen::MatrixXd x = apply_dropout(features, dropout_mask);
    out.grads.beta.resize(model.P, model.K + 1);
    out.grads.theta.resize(model.P);
    for (int p = 0; p < model.P; ++p) {
        Eigen::MatrixXd dz =
            d_concat.middleCols(static_cast<std::int64_t>(p) * model.hidden, model.hidden);
        for (int k = 0; k <= model.K; ++k)
            out.grads.beta(p, k) =
                stack.stages[p][k].cwiseProduct(dz).sum() + weight_decay * model.beta(p, k);
        // Reverse-mode through S_k = Pi S_{k-1}: back-propagate with Pi^T,
        // which differs from Pi because the symmetrized PPR operator is not
        // symmetric in general.
        Eigen::MatrixXd u = model.beta(p, model.K) * dz;
        for (int k = model.K - 1; k >= 0; --k)
            u = model.beta(p, k) * dz + operators[p]->transpose() * u;
        out.grads.theta[p] = x.transpose() * u + weight_decay * model.theta[p];
    }

    if (!out.grads.W.allFinite()) throw NumericError("non-finite gradient for W");
    if (!out.grads.beta.allFinite()) throw NumericError("non-finite gradient for beta");
    for (const auto& t : out.grads.theta)
        if (!t.allFinite()) throw NumericError("non-finite gradient for theta");
    return out;
}

std::vector<int> predict(const HpgnnModel& model, const Eigen::MatrixXd& features,
                         const OperatorSet& operators) {
    Eigen::MatrixXd logits = forward(model, features, operators);
    std::vector<int> pred(static_cast<std::size_t>(logits.rows()));
    for (std::int64_t i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < model.classes; ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        pred[i] = best;
    }
    return pred;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                const std::vector<NodeId>& mask) {
    if (mask.empty()) return 0.0;
    std::int64_t correct = 0;
    for (NodeId i : mask) {
        if (i < 0 || i >= static_cast<NodeId>(predictions.size()))
            throw BoundsError("mask index out of range");
        if (predictions[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(mask.size());
}

TrainResult train(HpgnnModel model, const Eigen::MatrixXd& features, const OperatorSet& operators,
                  const std::vector<int>& labels, const SplitMasks& splits,
                  const TrainConfig& config) {
    if (config.lr <= 0) throw InvalidArgumentError("learning rate must be positive");
    if (config.momentum < 0 || config.momentum >= 1)
        throw InvalidArgumentError("momentum must lie in [0, 1)");
    if (config.max_epochs < 1) throw InvalidArgumentError("max_epochs must be >= 1");
    if (splits.train.empty()) throw InvalidArgumentError("empty training split");

    ModelGradients velocity;
    velocity.beta = Eigen::MatrixXd::Zero(model.beta.rows(), model.beta.cols());
    velocity.W = Eigen::MatrixXd::Zero(model.W.rows(), model.W.cols());
    velocity.theta.resize(model.theta.size());
    for (std::size_t p = 0; p < model.theta.size(); ++p)
        velocity.theta[p] = Eigen::MatrixXd::Zero(model.theta[p].rows(), model.theta[p].cols());

    const double divergence_level = 10.0 * std::log(static_cast<double>(std::max<std::int64_t>(
                                               model.classes, 2)));
    int diverged_streak = 0;

    TrainResult result;
    result.best_val_acc = -1.0;
    HpgnnModel best = model;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Eigen::MatrixXd mask;
        const Eigen::MatrixXd* mask_ptr = nullptr;
        if (model.dropout_rate > 0) {
            std::mt19937_64 rng(split_seed(config.seed, static_cast<std::uint64_t>(epoch)));
            std::bernoulli_distribution keep(1.0 - model.dropout_rate);
            double scale = 1.0 / (1.0 - model.dropout_rate);
            mask.resize(features.rows(), features.cols());
            for (std::int64_t i = 0; i < mask.rows(); ++i)
                for (std::int64_t j = 0; j < mask.cols(); ++j)
                    mask(i, j) = keep(rng) ? scale : 0.0;
            mask_ptr = &mask;
        }

        LossGrads lg = loss_and_grads(model, features, operators, labels, splits.train,
                                      config.weight_decay, mask_ptr);

        velocity.beta = config.momentum * velocity.beta - config.lr * lg.grads.beta;
        model.beta += velocity.beta;
        velocity.W = config.momentum * velocity.W - config.lr * lg.grads.W;
        model.W += velocity.W;
        for (std::size_t p = 0; p < model.theta.size(); ++p) {
            velocity.theta[p] =
                config.momentum * velocity.theta[p] - config.lr * lg.grads.theta[p];
            model.theta[p] += velocity.theta[p];
        }

        std::vector<int> pred = predict(model, features, operators);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = lg.loss;
        rec.train_acc = accuracy(pred, labels, splits.train);
        rec.val_acc = accuracy(pred, labels, splits.val);
        rec.test_acc = accuracy(pred, labels, splits.test);
        result.history.push_back(rec);

        if (rec.val_acc > result.best_val_acc) {
            result.best_val_acc = rec.val_acc;
            result.best_epoch = epoch;
            result.test_acc = rec.test_acc;
            best = model;
        }

        if (lg.loss > divergence_level) {
            if (++diverged_streak >= 50)
                throw DivergenceError("training loss stayed above " +
                                      format_double(divergence_level) + " for 50 epochs");
        } else {
            diverged_streak = 0;
        }

        if (epoch - result.best_epoch >= config.patience) break;
    }

    result.model = std::move(best);
    return result;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (std::int64_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::int64_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, std::int64_t expect_rows,
                                 std::int64_t expect_cols, const char* what) {
    if (!rows.is_array() || static_cast<std::int64_t>(rows.size()) != expect_rows)
        throw ParseError(std::string("checkpoint field ") + what + " has wrong row count");
    Eigen::MatrixXd m(expect_rows, expect_cols);
    for (std::int64_t i = 0; i < expect_rows; ++i) {
        const json& row = rows[i];
        if (!row.is_array() || static_cast<std::int64_t>(row.size()) != expect_cols)
            throw ParseError(std::string("checkpoint field ") + what + " has wrong column count");
        for (std::int64_t j = 0; j < expect_cols; ++j) m(i, j) = row[j].get<double>();
    }
    return m;
}

} // namespace

void save_checkpoint(const HpgnnModel& model, const std::filesystem::path& path) {
    json j;
    j["format"] = "hpgnn-checkpoint";
    j["version"] = 1;
    j["P"] = model.P;
    j["K"] = model.K;
    j["feat_dim"] = model.feat_dim;
    j["hidden"] = model.hidden;
    j["classes"] = model.classes;
    j["dropout_rate"] = model.dropout_rate;
    j["init_seed"] = model.init_seed;
    j["beta"] = matrix_to_json(model.beta);
    json thetas = json::array();
    for (const auto& t : model.theta) thetas.push_back(matrix_to_json(t));
    j["theta"] = thetas;
    j["W"] = matrix_to_json(model.W);
    atomic_write_file(path, j.dump() + "\n");
}

HpgnnModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "hpgnn-checkpoint")
            throw ParseError(path.string() + ": not a checkpoint file");
        if (j.at("version").get<int>() != 1)
            throw ParseError(path.string() + ": unsupported checkpoint version");
        HpgnnModel m;
        m.P = j.at("P").get<int>();
        m.K = j.at("K").get<int>();
        m.feat_dim = j.at("feat_dim").get<std::int64_t>();
        m.hidden = j.at("hidden").get<std::int64_t>();
        m.classes = j.at("classes").get<std::int64_t>();
        m.dropout_rate = j.at("dropout_rate").get<double>();
        m.init_seed = j.at("init_seed").get<std::uint64_t>();
        m.beta = matrix_from_json(j.at("beta"), m.P, m.K + 1, "beta");
        const json& thetas = j.at("theta");
        if (static_cast<int>(thetas.size()) != m.P)
            throw ParseError(path.string() + ": theta count mismatch");
        m.theta.resize(m.P);
        for (int p = 0; p < m.P; ++p)
            m.theta[p] = matrix_from_json(thetas[p], m.feat_dim, m.hidden, "theta");
        m.W = matrix_from_json(j.at("W"), static_cast<std::int64_t>(m.P) * m.hidden, m.classes,
                               "W");
        return m;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_history_csv(const std::vector<EpochRecord>& history,
                      const std::filesystem::path& path) {
    std::ostringstream out;
    out << "epoch,train_loss,train_acc,val_acc,test_acc\n";
    for (const auto& r : history)
        out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_acc)
            << ',' << format_double(r.val_acc) << ',' << format_double(r.test_acc) << '\n';
    atomic_write_file(path, out.str());
}

} // namespace hpgnn
