#pragma once

#include "dga/domain.hpp"
#include "dga/random.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dga {

/// All trainable tensors of the character LSTM classifier. Gate blocks in
/// the stacked input/recurrent weights and bias are ordered input, forget,
/// candidate, output (each `hidden` rows).
template <typename Scalar>
struct LstmParameters {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using FlatView = Eigen::Map<Vector>;
    using ConstFlatView = Eigen::Map<const Vector>;

    Matrix embedding;          // V x d
    Matrix input_weights;      // 4h x d
    Matrix recurrent_weights;  // 4h x h
    Vector gate_bias;          // 4h
    Matrix output_weights;     // R x h
    Vector output_bias;        // R

    static constexpr std::size_t kTensorCount = 6;

    LstmParameters zeros_like() const;
    std::array<FlatView, kTensorCount> flat();
    std::array<ConstFlatView, kTensorCount> flat() const;
    static const std::array<std::string, kTensorCount>& tensor_names();
    Scalar squared_norm() const;
};

/// Character embedding -> single LSTM layer -> dropout on the final emission
/// -> affine head. One output unit means a sigmoid (binary) head; two or more
/// means softmax.
template <typename Scalar>
class LstmModel {
public:
    using Matrix = typename LstmParameters<Scalar>::Matrix;
    using Vector = typename LstmParameters<Scalar>::Vector;

    LstmModel(int vocab_size, int embedding_dim, int hidden_dim, int output_size, double dropout,
              LstmParameters<Scalar> params);

    int vocab_size() const noexcept { return vocab_size_; }
    int embedding_dim() const noexcept { return embedding_dim_; }
    int hidden_dim() const noexcept { return hidden_dim_; }
    int output_size() const noexcept { return output_size_; }
    int class_count() const noexcept { return output_size_ == 1 ? 2 : output_size_; }
    bool is_binary() const noexcept { return output_size_ == 1; }
    double dropout() const noexcept { return dropout_; }

    LstmParameters<Scalar>& params() noexcept { return params_; }
    const LstmParameters<Scalar>& params() const noexcept { return params_; }

    nlohmann::json to_json() const;
    static LstmModel from_json(const nlohmann::json& j);

private:
    int vocab_size_;
    int embedding_dim_;
    int hidden_dim_;
    int output_size_;
    double dropout_;
    LstmParameters<Scalar> params_;
};

/// Uniform(-s, s) weights with s = sqrt(6 / (rows + cols)) per matrix, forget
/// gate bias 1, every other bias 0.
template <typename Scalar>
LstmModel<Scalar> init_lstm(int vocab_size, int embedding_dim, int hidden_dim, int output_size, std::uint64_t seed,
                            double dropout = 0.5);

double glorot_bound(Eigen::Index rows, Eigen::Index cols);

enum class ForwardMode { train, eval };

/// Probabilities for one sequence: length 1 (P(class 1)) for a sigmoid head,
/// otherwise one entry per class. `rng` is only drawn from in train mode.
template <typename Scalar>
Eigen::VectorXd forward(const LstmModel<Scalar>& model, std::span<const int> sequence, ForwardMode mode, Rng* rng = nullptr);

/// Eval-mode class probabilities (one column per sequence, class_count rows).
/// Sequences are bucketed by length internally; column order follows input.
template <typename Scalar>
Eigen::MatrixXd predict_probabilities(const LstmModel<Scalar>& model, std::span<const Sequence> sequences);

struct LstmTrainingConfig {
    int embedding_dim = 128;
    int hidden_dim = 128;
    double dropout = 0.5;
    int epochs = 25;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int max_length = 75;
    double clip_norm = 5.0;
    /// Fraction of the training examples held back for early stopping; 0 disables it.
    double validation_fraction = 0.1;
    int patience = 3;
    std::uint64_t seed = 42;

    void validate() const;
};

void to_json(nlohmann::json& j, const LstmTrainingConfig& cfg);
void from_json(const nlohmann::json& j, LstmTrainingConfig& cfg);

struct SequenceExample {
    Sequence sequence;
    int class_id = 0;
};

struct LstmEpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double validation_loss = 0;  // NaN without a validation split
};

struct LstmTrainingLog {
    std::vector<LstmEpochRecord> epochs;
    int best_epoch = 0;
};

/// Mean cross-entropy loss over the examples and, when `gradient` is given,
/// its gradient (dropout disabled).
template <typename Scalar>
Scalar loss_and_gradient(const LstmModel<Scalar>& model, std::span<const SequenceExample> examples,
                         LstmParameters<Scalar>* gradient);

/// Backpropagation through time with Adam, global-norm clipping and shuffled
/// length-bucketed mini-batches. Two classes train a sigmoid head.
/// Throws SingleClassDataset or EmptySequence.
template <typename Scalar>
LstmModel<Scalar> train_lstm(std::span<const SequenceExample> examples, int class_count, const LstmTrainingConfig& cfg,
                             LstmTrainingLog* log = nullptr);

/// Largest relative difference between the analytic gradient and central
/// finite differences with step `epsilon`, over every parameter. Relative
/// error is |a - n| / max(|a| + |n|, 1e-4); the floor sits
/// above the ~1e-11 round-off of the difference quotient.
double gradient_check(const LstmModel<double>& model, const SequenceExample& example, double epsilon = 1e-5);

struct CellTrace {
    std::string characters;  // the input, one char per step after step 0
    Eigen::MatrixXd values;  // (T + 1) x h, row t = tanh(c_t), row 0 the zero state
};

template <typename Scalar>
CellTrace cell_trace(const LstmModel<Scalar>& model, std::span<const int> sequence,
                     const CharVocabulary& vocab = CharVocabulary::standard());

struct EmbeddingProjection {
    Eigen::MatrixXd coordinates;       // V x 2
    Eigen::Vector2d explained_variance;
    bool degenerate = false;           // rank < 2; second axis zero-padded
};

/// PCA of the mean-centred embedding rows onto the top two principal axes.
/// Each axis is signed so its largest-magnitude loading is positive.
template <typename Scalar>
EmbeddingProjection embedding_pca(const LstmModel<Scalar>& model);

}  // namespace dga
