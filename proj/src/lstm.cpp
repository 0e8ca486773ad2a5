#include "dga/lstm.hpp"

#include "dga/error.hpp"
#include "dga/serialization.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace dga {

template <typename Scalar>
LstmParameters<Scalar> LstmParameters<Scalar>::zeros_like() const {
    return {Matrix::Zero(embedding.rows(), embedding.cols()),
            Matrix::Zero(input_weights.rows(), input_weights.cols()),
            Matrix::Zero(recurrent_weights.rows(), recurrent_weights.cols()),
            Vector::Zero(gate_bias.size()),
            Matrix::Zero(output_weights.rows(), output_weights.cols()),
            Vector::Zero(output_bias.size())};
}

template <typename Scalar>
auto LstmParameters<Scalar>::flat() -> std::array<FlatView, kTensorCount> {
    return {FlatView(embedding.data(), embedding.size()),
            FlatView(input_weights.data(), input_weights.size()),
            FlatView(recurrent_weights.data(), recurrent_weights.size()),
            FlatView(gate_bias.data(), gate_bias.size()),
            FlatView(output_weights.data(), output_weights.size()),
            FlatView(output_bias.data(), output_bias.size())};
}

template <typename Scalar>
auto LstmParameters<Scalar>::flat() const -> std::array<ConstFlatView, kTensorCount> {
    return {ConstFlatView(embedding.data(), embedding.size()),
            ConstFlatView(input_weights.data(), input_weights.size()),
            ConstFlatView(recurrent_weights.data(), recurrent_weights.size()),
            ConstFlatView(gate_bias.data(), gate_bias.size()),
            ConstFlatView(output_weights.data(), output_weights.size()),
            ConstFlatView(output_bias.data(), output_bias.size())};
}

template <typename Scalar>
const std::array<std::string, LstmParameters<Scalar>::kTensorCount>& LstmParameters<Scalar>::tensor_names() {
    static const std::array<std::string, kTensorCount> names = {"embedding",      "input_weights",  "recurrent_weights",
                                                                "gate_bias",      "output_weights", "output_bias"};
    return names;
}

template <typename Scalar>
Scalar LstmParameters<Scalar>::squared_norm() const {
    Scalar sum = 0;
    for (const auto& view : flat()) sum += view.squaredNorm();
    return sum;
}

template <typename Scalar>
LstmModel<Scalar>::LstmModel(int vocab_size, int embedding_dim, int hidden_dim, int output_size, double dropout,
                             LstmParameters<Scalar> params)
    : vocab_size_(vocab_size),
      embedding_dim_(embedding_dim),
      hidden_dim_(hidden_dim),
      output_size_(output_size),
      dropout_(dropout),
      params_(std::move(params)) {
    if (vocab_size < 1 || embedding_dim < 1 || hidden_dim < 1 || output_size < 1) {
        throw Error(ErrorCode::InvalidArgument, "LSTM dimensions must be >= 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout must be in [0, 1)");
    const auto& p = params_;
    const Eigen::Index gates = 4 * static_cast<Eigen::Index>(hidden_dim);
    if (p.embedding.rows() != vocab_size || p.embedding.cols() != embedding_dim || p.input_weights.rows() != gates ||
        p.input_weights.cols() != embedding_dim || p.recurrent_weights.rows() != gates ||
        p.recurrent_weights.cols() != hidden_dim || p.gate_bias.size() != gates || p.output_weights.rows() != output_size ||
        p.output_weights.cols() != hidden_dim || p.output_bias.size() != output_size) {
        throw Error(ErrorCode::DimensionMismatch, "LSTM parameter shapes disagree with dimensions");
    }
    for (const auto& view : p.flat()) {
        if (!view.allFinite()) throw Error(ErrorCode::InvalidArgument, "LSTM parameters must be finite");
    }
}

template <typename Scalar>
nlohmann::json LstmModel<Scalar>::to_json() const {
    nlohmann::json j = {{"format_version", kFormatVersion},
                        {"kind", "lstm"},
                        {"vocab_size", vocab_size_},
                        {"embedding_dim", embedding_dim_},
                        {"hidden_dim", hidden_dim_},
                        {"output_size", output_size_},
                        {"dropout", dropout_}};
    j["embedding"] = flatten_row_major(params_.embedding);
    j["input_weights"] = flatten_row_major(params_.input_weights);
    j["recurrent_weights"] = flatten_row_major(params_.recurrent_weights);
    j["gate_bias"] = flatten(params_.gate_bias);
    j["output_weights"] = flatten_row_major(params_.output_weights);
    j["output_bias"] = flatten(params_.output_bias);
    return j;
}

template <typename Scalar>
LstmModel<Scalar> LstmModel<Scalar>::from_json(const nlohmann::json& j) {
    check_format(j, "lstm");
    const int v = j.at("vocab_size").get<int>();
    const int d = j.at("embedding_dim").get<int>();
    const int h = j.at("hidden_dim").get<int>();
    const int r = j.at("output_size").get<int>();
    if (v < 1 || d < 1 || h < 1 || r < 1) throw Error(ErrorCode::ModelUnreadable, "LSTM dimensions must be positive");
    LstmParameters<Scalar> p{unflatten_row_major<Scalar>(j.at("embedding"), v, d),
                             unflatten_row_major<Scalar>(j.at("input_weights"), 4 * h, d),
                             unflatten_row_major<Scalar>(j.at("recurrent_weights"), 4 * h, h),
                             unflatten<Scalar>(j.at("gate_bias"), 4 * h),
                             unflatten_row_major<Scalar>(j.at("output_weights"), r, h),
                             unflatten<Scalar>(j.at("output_bias"), r)};
    return LstmModel(v, d, h, r, j.at("dropout").get<double>(), std::move(p));
}

double glorot_bound(Eigen::Index rows, Eigen::Index cols) {
    return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

template <typename Scalar>
LstmModel<Scalar> init_lstm(int vocab_size, int embedding_dim, int hidden_dim, int output_size, std::uint64_t seed,
                            double dropout) {
    if (vocab_size < 1 || embedding_dim < 1 || hidden_dim < 1 || output_size < 1) {
        throw Error(ErrorCode::InvalidArgument, "LSTM dimensions must be >= 1");
    }
    using Matrix = typename LstmParameters<Scalar>::Matrix;
    using Vector = typename LstmParameters<Scalar>::Vector;
    Rng rng(seed);
    auto uniform = [&rng](Eigen::Index rows, Eigen::Index cols) {
        const double s = glorot_bound(rows, cols);
        Matrix m(rows, cols);
        // row-major fill keeps the draw order aligned with the serialized layout
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(rng.uniform(-s, s));
        }
        return m;
    };
    const Eigen::Index h = hidden_dim;
    LstmParameters<Scalar> p;
    p.embedding = uniform(vocab_size, embedding_dim);
    p.input_weights = uniform(4 * h, embedding_dim);
    p.recurrent_weights = uniform(4 * h, h);
    p.gate_bias = Vector::Zero(4 * h);
    p.gate_bias.segment(h, h).setOnes();
    p.output_weights = uniform(output_size, h);
    p.output_bias = Vector::Zero(output_size);
    return LstmModel<Scalar>(vocab_size, embedding_dim, hidden_dim, output_size, dropout, std::move(p));
}

namespace {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct Workspace {
    std::vector<MatrixT<Scalar>> inputs;     // d x B per step
    std::vector<MatrixT<Scalar>> gates;      // 4h x B activated, per step
    std::vector<MatrixT<Scalar>> cell;       // h x B, index 0 is the zero state
    std::vector<MatrixT<Scalar>> tanh_cell;  // h x B
    std::vector<MatrixT<Scalar>> hidden;     // h x B
    MatrixT<Scalar> mask;                    // empty unless dropout was applied
    MatrixT<Scalar> dropped;                 // h x B
    MatrixT<Scalar> probabilities;           // R x B
};

template <typename Scalar, typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
    return (Scalar(1) + (-x).exp()).inverse();
}

template <typename Scalar>
void check_sequence(const LstmModel<Scalar>& model, std::span<const int> sequence) {
    if (sequence.empty()) throw Error(ErrorCode::EmptySequence, "LSTM input is empty");
    for (int c : sequence) {
        if (c < 0 || c >= model.vocab_size()) {
            throw Error(ErrorCode::IndexOutOfVocabulary, "character index " + std::to_string(c));
        }
    }
}

// Runs the recurrence for a batch of equal-length sequences, caching every step in ws.
template <typename Scalar>
void forward_batch(const LstmModel<Scalar>& model, std::span<const std::span<const int>> batch, ForwardMode mode, Rng* rng,
                   Workspace<Scalar>& ws) {
    const auto& p = model.params();
    const Eigen::Index h = model.hidden_dim();
    const Eigen::Index d = model.embedding_dim();
    const auto b_count = static_cast<Eigen::Index>(batch.size());
    const std::size_t steps = batch.front().size();

    ws.inputs.resize(steps);
    ws.gates.resize(steps);
    ws.cell.resize(steps + 1);
    ws.tanh_cell.resize(steps + 1);
    ws.hidden.resize(steps + 1);
    ws.cell[0].setZero(h, b_count);
    ws.tanh_cell[0].setZero(h, b_count);
    ws.hidden[0].setZero(h, b_count);

    for (std::size_t t = 0; t < steps; ++t) {
        auto& x = ws.inputs[t];
        x.resize(d, b_count);
        for (Eigen::Index b = 0; b < b_count; ++b) x.col(b) = p.embedding.row(batch[static_cast<std::size_t>(b)][t]).transpose();

        auto& z = ws.gates[t];
        z.noalias() = p.input_weights * x;
        if (t > 0) z.noalias() += p.recurrent_weights * ws.hidden[t];
        z.colwise() += p.gate_bias;
        z.topRows(2 * h) = sigmoid<Scalar>(z.topRows(2 * h).array()).matrix();
        z.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
        z.bottomRows(h) = sigmoid<Scalar>(z.bottomRows(h).array()).matrix();

        ws.cell[t + 1] = (z.middleRows(h, h).array() * ws.cell[t].array() +
                          z.topRows(h).array() * z.middleRows(2 * h, h).array())
                             .matrix();
        ws.tanh_cell[t + 1] = ws.cell[t + 1].array().tanh().matrix();
        ws.hidden[t + 1] = (z.bottomRows(h).array() * ws.tanh_cell[t + 1].array()).matrix();
    }

    const auto& last = ws.hidden[steps];
    if (mode == ForwardMode::train && model.dropout() > 0.0) {
        if (rng == nullptr) throw Error(ErrorCode::InvalidArgument, "train-mode forward needs an RNG");
        const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - model.dropout()));
        ws.mask.resize(h, b_count);
        for (Eigen::Index b = 0; b < b_count; ++b) {
            for (Eigen::Index i = 0; i < h; ++i) ws.mask(i, b) = rng->uniform() < model.dropout() ? Scalar(0) : keep_scale;
        }
        ws.dropped = (last.array() * ws.mask.array()).matrix();
    } else {
        ws.mask.resize(0, 0);
        ws.dropped = last;
    }

    MatrixT<Scalar> logits = p.output_weights * ws.dropped;
    logits.colwise() += p.output_bias;
    if (model.is_binary()) {
        ws.probabilities = sigmoid<Scalar>(logits.array()).matrix();
    } else {
        ws.probabilities.resize(logits.rows(), logits.cols());
        for (Eigen::Index b = 0; b < b_count; ++b) {
            auto e = (logits.col(b).array() - logits.col(b).maxCoeff()).exp();
            ws.probabilities.col(b) = (e / e.sum()).matrix();
        }
    }
}

// Summed cross-entropy of the batch, recomputed from probabilities with clamping.
template <typename Scalar>
double batch_loss(const LstmModel<Scalar>& model, const Workspace<Scalar>& ws, std::span<const int> labels) {
    double loss = 0;
    constexpr double tiny = std::numeric_limits<double>::min();
    for (std::size_t b = 0; b < labels.size(); ++b) {
        const auto col = static_cast<Eigen::Index>(b);
        double p = model.is_binary()
                       ? (labels[b] == 1 ? static_cast<double>(ws.probabilities(0, col))
                                         : 1.0 - static_cast<double>(ws.probabilities(0, col)))
                       : static_cast<double>(ws.probabilities(labels[b], col));
        loss -= std::log(std::max(p, tiny));
    }
    return loss;
}

// Accumulates scale * d(summed loss)/d(params) into grad.
template <typename Scalar>
void backward_batch(const LstmModel<Scalar>& model, std::span<const std::span<const int>> batch, const Workspace<Scalar>& ws,
                    std::span<const int> labels, Scalar scale, LstmParameters<Scalar>& grad) {
    const auto& p = model.params();
    const Eigen::Index h = model.hidden_dim();
    const auto b_count = static_cast<Eigen::Index>(batch.size());
    const std::size_t steps = batch.front().size();

    MatrixT<Scalar> d_logits = ws.probabilities;
    for (Eigen::Index b = 0; b < b_count; ++b) {
        const int y = labels[static_cast<std::size_t>(b)];
        if (model.is_binary()) {
            d_logits(0, b) -= static_cast<Scalar>(y == 1 ? 1 : 0);
        } else {
            d_logits(y, b) -= Scalar(1);
        }
    }
    d_logits *= scale;
    grad.output_weights.noalias() += d_logits * ws.dropped.transpose();
    grad.output_bias += d_logits.rowwise().sum();

    MatrixT<Scalar> d_hidden = p.output_weights.transpose() * d_logits;
    if (ws.mask.size() != 0) d_hidden = (d_hidden.array() * ws.mask.array()).matrix();
    MatrixT<Scalar> d_cell = MatrixT<Scalar>::Zero(h, b_count);
    MatrixT<Scalar> d_gates(4 * h, b_count);
    MatrixT<Scalar> d_input;

    for (std::size_t t = steps; t-- > 0;) {
        const auto& z = ws.gates[t];
        const auto gi = z.topRows(h).array();
        const auto gf = z.middleRows(h, h).array();
        const auto gg = z.middleRows(2 * h, h).array();
        const auto go = z.bottomRows(h).array();
        const auto tc = ws.tanh_cell[t + 1].array();

        d_cell.array() += d_hidden.array() * go * (Scalar(1) - tc.square());
        d_gates.topRows(h) = (d_cell.array() * gg * gi * (Scalar(1) - gi)).matrix();
        d_gates.middleRows(h, h) = (d_cell.array() * ws.cell[t].array() * gf * (Scalar(1) - gf)).matrix();
        d_gates.middleRows(2 * h, h) = (d_cell.array() * gi * (Scalar(1) - gg.square())).matrix();
        d_gates.bottomRows(h) = (d_hidden.array() * tc * go * (Scalar(1) - go)).matrix();

        grad.input_weights.noalias() += d_gates * ws.inputs[t].transpose();
        grad.gate_bias += d_gates.rowwise().sum();
        if (t > 0) {
            grad.recurrent_weights.noalias() += d_gates * ws.hidden[t].transpose();
            d_hidden.noalias() = p.recurrent_weights.transpose() * d_gates;
        }
        d_input.noalias() = p.input_weights.transpose() * d_gates;
        for (Eigen::Index b = 0; b < b_count; ++b) {
            grad.embedding.row(batch[static_cast<std::size_t>(b)][t]) += d_input.col(b).transpose();
        }
        d_cell = (d_cell.array() * gf).matrix();
    }
}

struct Batch {
    std::vector<std::size_t> members;
};

// Groups example indices by sequence length, then chunks each group.
std::vector<Batch> length_buckets(std::span<const std::size_t> indices, const std::vector<std::size_t>& lengths,
                                  std::size_t batch_size, Rng* rng) {
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i : indices) groups[lengths[i]].push_back(i);
    std::vector<Batch> batches;
    for (auto& [length, members] : groups) {
        if (rng != nullptr) rng->shuffle(std::span<std::size_t>(members));
        for (std::size_t start = 0; start < members.size(); start += batch_size) {
            const std::size_t end = std::min(members.size(), start + batch_size);
            batches.push_back(Batch{std::vector<std::size_t>(members.begin() + static_cast<std::ptrdiff_t>(start),
                                                             members.begin() + static_cast<std::ptrdiff_t>(end))});
        }
    }
    if (rng != nullptr) rng->shuffle(std::span<Batch>(batches));
    return batches;
}

template <typename Scalar>
Eigen::VectorXd class_probabilities(const LstmModel<Scalar>& model, const MatrixT<Scalar>& probs, Eigen::Index col) {
    if (model.is_binary()) {
        Eigen::VectorXd out(2);
        const double p = static_cast<double>(probs(0, col));
        out << 1.0 - p, p;
        return out;
    }
    return probs.col(col).template cast<double>();
}

}  // namespace

template <typename Scalar>
Eigen::VectorXd forward(const LstmModel<Scalar>& model, std::span<const int> sequence, ForwardMode mode, Rng* rng) {
    check_sequence(model, sequence);
    Workspace<Scalar> ws;
    std::array<std::span<const int>, 1> batch = {sequence};
    forward_batch<Scalar>(model, batch, mode, rng, ws);
    return ws.probabilities.col(0).template cast<double>();
}

template <typename Scalar>
Eigen::MatrixXd predict_probabilities(const LstmModel<Scalar>& model, std::span<const Sequence> sequences) {
    std::vector<std::size_t> lengths(sequences.size());
    std::vector<std::size_t> indices(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        check_sequence(model, sequences[i]);
        lengths[i] = sequences[i].size();
        indices[i] = i;
    }
    Eigen::MatrixXd out(model.class_count(), static_cast<Eigen::Index>(sequences.size()));
    Workspace<Scalar> ws;
    for (const auto& batch : length_buckets(indices, lengths, 256, nullptr)) {
        std::vector<std::span<const int>> views;
        for (std::size_t i : batch.members) views.emplace_back(sequences[i]);
        forward_batch<Scalar>(model, views, ForwardMode::eval, nullptr, ws);
        for (std::size_t k = 0; k < batch.members.size(); ++k) {
            out.col(static_cast<Eigen::Index>(batch.members[k])) =
                class_probabilities(model, ws.probabilities, static_cast<Eigen::Index>(k));
        }
    }
    return out;
}

void LstmTrainingConfig::validate() const {
    if (embedding_dim < 1 || hidden_dim < 1 || epochs < 1 || batch_size < 1 || learning_rate <= 0 || max_length < 1 ||
        clip_norm <= 0 || patience < 1 || !(dropout >= 0 && dropout < 1) ||
        !(validation_fraction >= 0 && validation_fraction < 1) || !(beta1 >= 0 && beta1 < 1) ||
        !(beta2 >= 0 && beta2 < 1) || epsilon <= 0) {
        throw Error(ErrorCode::InvalidArgument, "LSTM training configuration out of range");
    }
}

void to_json(nlohmann::json& j, const LstmTrainingConfig& cfg) {
    j = nlohmann::json{{"embedding_dim", cfg.embedding_dim},
                       {"hidden_dim", cfg.hidden_dim},
                       {"dropout", cfg.dropout},
                       {"epochs", cfg.epochs},
                       {"batch_size", cfg.batch_size},
                       {"learning_rate", cfg.learning_rate},
                       {"beta1", cfg.beta1},
                       {"beta2", cfg.beta2},
                       {"epsilon", cfg.epsilon},
                       {"max_length", cfg.max_length},
                       {"clip_norm", cfg.clip_norm},
                       {"validation_fraction", cfg.validation_fraction},
                       {"patience", cfg.patience},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, LstmTrainingConfig& cfg) {
    cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
    cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.max_length = j.value("max_length", cfg.max_length);
    cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
    cfg.validation_fraction = j.value("validation_fraction", cfg.validation_fraction);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.seed = j.value("seed", cfg.seed);
}

template <typename Scalar>
Scalar loss_and_gradient(const LstmModel<Scalar>& model, std::span<const SequenceExample> examples,
                         LstmParameters<Scalar>* gradient) {
    if (examples.empty()) return Scalar(0);
    std::vector<std::size_t> lengths(examples.size());
    std::vector<std::size_t> indices(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        check_sequence(model, examples[i].sequence);
        if (examples[i].class_id < 0 || examples[i].class_id >= model.class_count()) {
            throw Error(ErrorCode::InvalidArgument, "class id outside the model's classes");
        }
        lengths[i] = examples[i].sequence.size();
        indices[i] = i;
    }
    if (gradient != nullptr) *gradient = model.params().zeros_like();
    const Scalar scale = Scalar(1) / static_cast<Scalar>(examples.size());
    double loss = 0;
    Workspace<Scalar> ws;
    for (const auto& batch : length_buckets(indices, lengths, 256, nullptr)) {
        std::vector<std::span<const int>> views;
        std::vector<int> labels;
        for (std::size_t i : batch.members) {
            views.emplace_back(examples[i].sequence);
            labels.push_back(examples[i].class_id);
        }
        forward_batch<Scalar>(model, views, ForwardMode::eval, nullptr, ws);
        loss += batch_loss(model, ws, labels);
        if (gradient != nullptr) backward_batch(model, views, ws, labels, scale, *gradient);
    }
    return static_cast<Scalar>(loss / static_cast<double>(examples.size()));
}

template <typename Scalar>
LstmModel<Scalar> train_lstm(std::span<const SequenceExample> examples, int class_count, const LstmTrainingConfig& cfg,
                             LstmTrainingLog* log) {
    cfg.validate();
    if (class_count < 2) throw Error(ErrorCode::SingleClassDataset, "LSTM needs >= 2 classes");
    std::vector<Sequence> sequences;
    std::vector<int> labels;
    std::vector<bool> seen(static_cast<std::size_t>(class_count), false);
    const auto max_length = static_cast<std::size_t>(cfg.max_length);
    for (const auto& ex : examples) {
        if (ex.sequence.empty()) throw Error(ErrorCode::EmptySequence, "training sequence is empty");
        if (ex.class_id < 0 || ex.class_id >= class_count) throw Error(ErrorCode::InvalidArgument, "class id out of range");
        const std::size_t skip = ex.sequence.size() > max_length ? ex.sequence.size() - max_length : 0;
        sequences.emplace_back(ex.sequence.begin() + static_cast<std::ptrdiff_t>(skip), ex.sequence.end());
        labels.push_back(ex.class_id);
        seen[static_cast<std::size_t>(ex.class_id)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) {
        throw Error(ErrorCode::SingleClassDataset, "LSTM training data covers fewer than two classes");
    }

    const int output_size = class_count == 2 ? 1 : class_count;
    Rng rng(cfg.seed);
    LstmModel<Scalar> model =
        init_lstm<Scalar>(kVocabularySize, cfg.embedding_dim, cfg.hidden_dim, output_size, rng.next(), cfg.dropout);
    for (const auto& s : sequences) check_sequence(model, s);

    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t validation_count = 0;
    if (cfg.validation_fraction > 0 && sequences.size() >= 10) {
        validation_count = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(sequences.size()))));
    }
    std::vector<std::size_t> validation(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(validation_count));
    std::vector<std::size_t> training(order.begin() + static_cast<std::ptrdiff_t>(validation_count), order.end());
    std::sort(validation.begin(), validation.end());
    std::sort(training.begin(), training.end());

    std::vector<std::size_t> lengths(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) lengths[i] = sequences[i].size();

    auto evaluate = [&](std::span<const std::size_t> subset) {
        double loss = 0;
        Workspace<Scalar> ws;
        for (const auto& batch : length_buckets(subset, lengths, 256, nullptr)) {
            std::vector<std::span<const int>> views;
            std::vector<int> ys;
            for (std::size_t i : batch.members) {
                views.emplace_back(sequences[i]);
                ys.push_back(labels[i]);
            }
            forward_batch<Scalar>(model, views, ForwardMode::eval, nullptr, ws);
            loss += batch_loss(model, ws, ys);
        }
        return loss / static_cast<double>(std::max<std::size_t>(subset.size(), 1));
    };

    LstmParameters<Scalar> first_moment = model.params().zeros_like();
    LstmParameters<Scalar> second_moment = model.params().zeros_like();
    LstmParameters<Scalar> grad = model.params().zeros_like();
    LstmParameters<Scalar> best = model.params();
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stale = 0;
    long long step = 0;
    Workspace<Scalar> ws;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0;
        for (const auto& batch : length_buckets(training, lengths, static_cast<std::size_t>(cfg.batch_size), &rng)) {
            std::vector<std::span<const int>> views;
            std::vector<int> ys;
            for (std::size_t i : batch.members) {
                views.emplace_back(sequences[i]);
                ys.push_back(labels[i]);
            }
            forward_batch<Scalar>(model, views, ForwardMode::train, &rng, ws);
            epoch_loss += batch_loss(model, ws, ys);
            for (auto view : grad.flat()) view.setZero();
            backward_batch(model, views, ws, ys, Scalar(1) / static_cast<Scalar>(views.size()), grad);

            const double norm = std::sqrt(static_cast<double>(grad.squared_norm()));
            const Scalar clip = norm > cfg.clip_norm ? static_cast<Scalar>(cfg.clip_norm / norm) : Scalar(1);
            ++step;
            const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            const auto step_size = static_cast<Scalar>(cfg.learning_rate * std::sqrt(correction2) / correction1);
            const auto b1 = static_cast<Scalar>(cfg.beta1);
            const auto b2 = static_cast<Scalar>(cfg.beta2);
            const auto eps = static_cast<Scalar>(cfg.epsilon * std::sqrt(correction2));
            auto params = model.params().flat();
            auto grads = grad.flat();
            auto m = first_moment.flat();
            auto v = second_moment.flat();
            for (std::size_t k = 0; k < params.size(); ++k) {
                auto g = (grads[k].array() * clip).eval();
                m[k].array() = b1 * m[k].array() + (Scalar(1) - b1) * g;
                v[k].array() = b2 * v[k].array() + (Scalar(1) - b2) * g.square();
                params[k].array() -= step_size * m[k].array() / (v[k].array().sqrt() + eps);
            }
        }
        LstmEpochRecord record{epoch, epoch_loss / static_cast<double>(std::max<std::size_t>(training.size(), 1)),
                               std::numeric_limits<double>::quiet_NaN()};
        if (!validation.empty()) {
            record.validation_loss = evaluate(validation);
            if (record.validation_loss < best_loss) {
                best_loss = record.validation_loss;
                best = model.params();
                best_epoch = epoch;
                stale = 0;
            } else {
                ++stale;
            }
        } else {
            best_epoch = epoch;
        }
        if (log != nullptr) log->epochs.push_back(record);
        if (!validation.empty() && stale >= cfg.patience) break;
    }
    if (!validation.empty()) model.params() = best;
    if (log != nullptr) log->best_epoch = best_epoch;
    return model;
}

double gradient_check(const LstmModel<double>& model, const SequenceExample& example, double epsilon) {
    std::array<SequenceExample, 1> batch = {example};
    LstmParameters<double> analytic;
    loss_and_gradient<double>(model, batch, &analytic);
    LstmModel<double> probe = model;
    double worst = 0;
    auto params = probe.params().flat();
    auto grads = std::as_const(analytic).flat();
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (Eigen::Index i = 0; i < params[k].size(); ++i) {
            const double original = params[k][i];
            params[k][i] = original + epsilon;
            const double plus = loss_and_gradient<double>(probe, batch, nullptr);
            params[k][i] = original - epsilon;
            const double minus = loss_and_gradient<double>(probe, batch, nullptr);
            params[k][i] = original;
            const double numeric = (plus - minus) / (2 * epsilon);
            const double a = grads[k][i];
            const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-4);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

template <typename Scalar>
CellTrace cell_trace(const LstmModel<Scalar>& model, std::span<const int> sequence, const CharVocabulary& vocab) {
    check_sequence(model, sequence);
    Workspace<Scalar> ws;
    std::array<std::span<const int>, 1> batch = {sequence};
    forward_batch<Scalar>(model, batch, ForwardMode::eval, nullptr, ws);
    CellTrace trace;
    trace.characters = decode(sequence, vocab);
    trace.values.resize(static_cast<Eigen::Index>(sequence.size() + 1), model.hidden_dim());
    for (std::size_t t = 0; t <= sequence.size(); ++t) {
        trace.values.row(static_cast<Eigen::Index>(t)) = ws.tanh_cell[t].col(0).transpose().template cast<double>();
    }
    return trace;
}

template <typename Scalar>
EmbeddingProjection embedding_pca(const LstmModel<Scalar>& model) {
    const Eigen::MatrixXd e = model.params().embedding.template cast<double>();
    const Eigen::MatrixXd centered = e.rowwise() - e.colwise().mean();
    const double denom = std::max<double>(static_cast<double>(e.rows()) - 1.0, 1.0);
    const Eigen::MatrixXd covariance = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);

    EmbeddingProjection out;
    out.coordinates = Eigen::MatrixXd::Zero(e.rows(), 2);
    out.explained_variance.setZero();
    const Eigen::Index dims = covariance.rows();
    const double largest = solver.eigenvalues()[dims - 1];
    const double rank_tol = std::max(largest, 1.0) * 1e-12 * static_cast<double>(dims);
    for (int k = 0; k < 2; ++k) {
        const Eigen::Index col = dims - 1 - k;
        if (col < 0 || solver.eigenvalues()[col] <= rank_tol) {
            out.degenerate = true;
            continue;
        }
        Eigen::VectorXd axis = solver.eigenvectors().col(col);
        Eigen::Index pivot = 0;
        axis.cwiseAbs().maxCoeff(&pivot);
        if (axis[pivot] < 0) axis = -axis;
        out.coordinates.col(k) = centered * axis;
        out.explained_variance[k] = solver.eigenvalues()[col];
    }
    return out;
}

#define DGA_INSTANTIATE_LSTM(S)                                                                                         \
    template struct LstmParameters<S>;                                                                                  \
    template class LstmModel<S>;                                                                                        \
    template LstmModel<S> init_lstm<S>(int, int, int, int, std::uint64_t, double);                                      \
    template Eigen::VectorXd forward<S>(const LstmModel<S>&, std::span<const int>, ForwardMode, Rng*);                  \
    template Eigen::MatrixXd predict_probabilities<S>(const LstmModel<S>&, std::span<const Sequence>);                  \
    template S loss_and_gradient<S>(const LstmModel<S>&, std::span<const SequenceExample>, LstmParameters<S>*);         \
    template LstmModel<S> train_lstm<S>(std::span<const SequenceExample>, int, const LstmTrainingConfig&,               \
                                        LstmTrainingLog*);                                                              \
    template CellTrace cell_trace<S>(const LstmModel<S>&, std::span<const int>, const CharVocabulary&);                 \
    template EmbeddingProjection embedding_pca<S>(const LstmModel<S>&);

DGA_INSTANTIATE_LSTM(double)
DGA_INSTANTIATE_LSTM(float)

#undef DGA_INSTANTIATE_LSTM

}  // namespace dga
