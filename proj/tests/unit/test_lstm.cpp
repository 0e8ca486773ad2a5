#include "dga/error.hpp"
#include "dga/lstm.hpp"
#include "dga/random.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace dga;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::IoError;
}

std::vector<SequenceExample> separable(int copies) {
    std::vector<SequenceExample> out;
    for (int i = 0; i < copies; ++i) {
        out.push_back({encode("aaaa"), 0});
        out.push_back({encode("zzzz"), 1});
    }
    return out;
}

SequenceExample random_example(Rng& rng, int length, int classes) {
    SequenceExample ex;
    for (int t = 0; t < length; ++t) ex.sequence.push_back(static_cast<int>(rng.below(kVocabularySize)));
    ex.class_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    return ex;
}

}  // namespace

TEST_CASE("initialization") {
    const auto a = init_lstm<double>(39, 16, 12, 1, 5), b = init_lstm<double>(39, 16, 12, 1, 5);
    CHECK(a.to_json() == b.to_json());
    const auto& p = a.params();
    CHECK(p.embedding.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (39 + 16)));
    CHECK(p.input_weights.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (48 + 16)));
    CHECK(p.recurrent_weights.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (48 + 12)));
    CHECK(p.output_weights.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (1 + 12)));
    CHECK(p.gate_bias.segment(12, 12).isOnes());
    CHECK(p.gate_bias.head(12).isZero());
    CHECK(p.gate_bias.tail(24).isZero());
    CHECK(init_lstm<double>(39, 16, 12, 1, 6).to_json() != a.to_json());
}

TEST_CASE("forward") {
    auto m = init_lstm<double>(39, 8, 8, 1, 1);
    m.params().output_weights.setZero();
    m.params().output_bias.setZero();
    const auto seq = encode("example");
    CHECK(forward(m, seq, ForwardMode::eval)(0) == 0.5);

    const auto n = init_lstm<double>(39, 8, 8, 3, 2, 0.5);
    const auto p1 = forward(n, seq, ForwardMode::eval), p2 = forward(n, seq, ForwardMode::eval);
    CHECK(p1 == p2);
    CHECK(p1.sum() == doctest::Approx(1.0));
    Rng rng(1);
    CHECK(forward(n, seq, ForwardMode::train, &rng).size() == 3);

    std::vector<Sequence> batch{encode("ab"), encode("longer-name"), encode("c")};
    const auto probs = predict_probabilities(n, batch);
    CHECK(probs.cols() == 3);
    for (int i = 0; i < 3; ++i) CHECK((probs.col(i) - forward(n, batch[i], ForwardMode::eval)).norm() < 1e-12);

    std::vector<int> empty, bad{39};
    CHECK(code_of([&] { forward(n, empty, ForwardMode::eval); }) == ErrorCode::EmptySequence);
    CHECK(code_of([&] { forward(n, bad, ForwardMode::eval); }) == ErrorCode::IndexOutOfVocabulary);
}

TEST_CASE("training separates a trivial task") {
    const auto data = separable(200);
    LstmTrainingConfig cfg;
    cfg.embedding_dim = 16;
    cfg.hidden_dim = 16;
    cfg.epochs = 5;
    cfg.validation_fraction = 0;
    LstmTrainingLog log;
    const auto m = train_lstm<double>(data, 2, cfg, &log);
    int correct = 0;
    for (const auto& ex : data) correct += (forward(m, ex.sequence, ForwardMode::eval)(0) >= 0.5) == (ex.class_id == 1);
    CHECK(correct == static_cast<int>(data.size()));
    REQUIRE(log.epochs.size() == 5);
    CHECK(log.epochs.back().train_loss < log.epochs.front().train_loss);

    const auto again = train_lstm<double>(data, 2, cfg);
    CHECK(again.to_json() == m.to_json());
    CHECK(LstmModel<double>::from_json(m.to_json()).to_json() == m.to_json());

    std::vector<SequenceExample> one{{encode("abc"), 1}, {encode("abd"), 1}};
    CHECK(code_of([&] { train_lstm<double>(one, 2, cfg); }) == ErrorCode::SingleClassDataset);
}

TEST_CASE("single precision training tracks double precision") {
    const auto data = separable(50);
    LstmTrainingConfig cfg;
    cfg.embedding_dim = 8;
    cfg.hidden_dim = 8;
    cfg.epochs = 2;
    cfg.dropout = 0;
    cfg.validation_fraction = 0;
    const auto d = train_lstm<double>(data, 2, cfg);
    const auto f = train_lstm<float>(data, 2, cfg);
    const auto seq = encode("azaz");
    CHECK(forward(f, seq, ForwardMode::eval)(0) == doctest::Approx(forward(d, seq, ForwardMode::eval)(0)).epsilon(1e-3));
}

TEST_CASE("early stopping keeps the best epoch") {
    auto data = separable(60);
    LstmTrainingConfig cfg;
    cfg.embedding_dim = 8;
    cfg.hidden_dim = 8;
    cfg.epochs = 12;
    cfg.patience = 2;
    LstmTrainingLog log;
    train_lstm<double>(data, 2, cfg, &log);
    CHECK(log.best_epoch >= 1);
    CHECK(log.best_epoch <= static_cast<int>(log.epochs.size()));
    double best = INFINITY;
    for (const auto& e : log.epochs) best = std::min(best, e.validation_loss);
    CHECK(log.epochs[static_cast<std::size_t>(log.best_epoch - 1)].validation_loss == best);
}

TEST_CASE("analytic gradients match finite differences") {
    Rng rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const int outputs = trial % 2 == 0 ? 1 : 4;
        const auto m = init_lstm<double>(39, 8, 8, outputs, static_cast<std::uint64_t>(trial), 0.0);
        const auto ex = random_example(rng, 12, outputs == 1 ? 2 : 4);
        CHECK(gradient_check(m, ex) < 1e-5);
    }
}

TEST_CASE("finite-difference error shrinks with the step") {
    Rng rng(2);
    const auto m = init_lstm<double>(39, 6, 6, 1, 3, 0.0);
    const auto ex = random_example(rng, 8, 2);
    const double coarse = gradient_check(m, ex, 1e-2), mid = gradient_check(m, ex, 1e-3), fine = gradient_check(m, ex, 1e-5);
    CHECK(mid < coarse);
    CHECK(fine < mid);
}

TEST_CASE("cell trace") {
    const auto m = init_lstm<double>(39, 8, 5, 1, 4);
    const auto tr = cell_trace(m, encode("abc"));
    CHECK(tr.characters == "abc");
    CHECK(tr.values.rows() == 4);
    CHECK(tr.values.cols() == 5);
    CHECK(tr.values.row(0).isZero());
    CHECK(tr.values.cwiseAbs().maxCoeff() < 1.0);
    std::vector<int> empty;
    CHECK(code_of([&] { cell_trace(m, empty); }) == ErrorCode::EmptySequence);
}

TEST_CASE("embedding projection captures the most variance") {
    const auto m = init_lstm<double>(39, 10, 4, 1, 9);
    const auto proj = embedding_pca(m);
    REQUIRE(proj.coordinates.rows() == 39);
    REQUIRE(proj.coordinates.cols() == 2);
    CHECK_FALSE(proj.degenerate);
    CHECK(proj.explained_variance(0) >= proj.explained_variance(1));
    const Eigen::MatrixXd x = m.params().embedding.rowwise() - m.params().embedding.colwise().mean();
    const double kept = proj.coordinates.squaredNorm();
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        Eigen::MatrixXd q(10, 2);
        for (int r = 0; r < 10; ++r) q(r, 0) = rng.uniform(-1, 1), q(r, 1) = rng.uniform(-1, 1);
        const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(10, 2);
        CHECK(kept >= (x * basis).squaredNorm() - 1e-9);
    }

    auto flat = init_lstm<double>(39, 3, 4, 1, 9);
    flat.params().embedding.setZero();
    flat.params().embedding.col(0).setLinSpaced(39, -1, 1);
    const auto one = embedding_pca(flat);
    CHECK(one.degenerate);
    CHECK(one.coordinates.col(1).isZero());
}
