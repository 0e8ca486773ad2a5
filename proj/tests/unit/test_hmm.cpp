#include "dga/error.hpp"
#include "dga/hmm.hpp"
#include "dga/random.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace dga;

namespace {

Eigen::MatrixXd stochastic(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = rng.exponential() + 1e-3;
        m.row(r) /= m.row(r).sum();
    }
    return m;
}

HmmModel random_model(Rng& rng, int s, int v) {
    return HmmModel(stochastic(rng, 1, s).row(0).transpose(), stochastic(rng, s, s), stochastic(rng, s, v));
}

HmmModel single_state(const Eigen::RowVectorXd& emission) {
    return HmmModel(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1), emission);
}

double brute_force(const HmmModel& m, const std::vector<int>& seq) {
    const int s = m.states(), len = static_cast<int>(seq.size());
    int paths = 1;
    for (int i = 0; i < len; ++i) paths *= s;
    double total = 0;
    for (int code = 0; code < paths; ++code) {
        int c = code, prev = -1;
        double p = 1;
        for (int t = 0; t < len; ++t, c /= s) {
            const int st = c % s;
            p *= (prev < 0 ? m.initial()(st) : m.transition()(prev, st)) * m.emission()(st, seq[t]);
            prev = st;
        }
        total += p;
    }
    return total;
}

}  // namespace

TEST_CASE("uniform single-state likelihood") {
    const auto m = single_state(Eigen::RowVectorXd::Constant(39, 1.0 / 39));
    std::vector<int> seq{0, 5, 38};
    CHECK(log_likelihood(m, seq) == doctest::Approx(3 * std::log(1.0 / 39)));
    std::vector<int> bad{39};
    CHECK_THROWS_AS(log_likelihood(m, bad), Error);
}

TEST_CASE("forward recursion equals path enumeration") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int s = 1 + static_cast<int>(rng.below(3)), v = 1 + static_cast<int>(rng.below(5));
        const auto m = random_model(rng, s, v);
        std::vector<int> seq(1 + rng.below(6));
        for (auto& x : seq) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
        const double brute = brute_force(m, seq);
        REQUIRE(std::exp(log_likelihood(m, seq)) == doctest::Approx(brute).epsilon(1e-9));
    }
}

TEST_CASE("sequence probabilities of a fixed length sum to one") {
    Rng rng(3);
    const auto m = random_model(rng, 2, 3);
    double mass = 0;
    std::vector<int> seq(4);
    for (int code = 0; code < 81; ++code) {
        int c = code;
        for (auto& x : seq) x = c % 3, c /= 3;
        mass += std::exp(log_likelihood(m, seq));
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("single-state EM recovers the unigram distribution") {
    std::vector<Sequence> data{{0, 1, 1, 2}, {1, 1}, {2, 0, 1}};
    HmmTrainingConfig cfg;
    const auto m = train_hmm(data, 1, 4, cfg);
    CHECK(m.transition()(0, 0) == doctest::Approx(1.0));
    // counts: 0 x2, 1 x5, 2 x2, 3 x0 over 9 symbols
    CHECK(m.emission()(0, 0) == doctest::Approx(2.0 / 9).epsilon(1e-6));
    CHECK(m.emission()(0, 1) == doctest::Approx(5.0 / 9).epsilon(1e-6));
    CHECK(m.emission()(0, 3) < 1e-6);
}

TEST_CASE("Baum-Welch never lowers the likelihood") {
    Rng rng(8);
    for (int start = 0; start < 20; ++start) {
        std::vector<Sequence> data;
        for (int n = 0; n < 30; ++n) {
            Sequence s(2 + rng.below(7));
            for (auto& x : s) x = static_cast<int>(rng.below(2) == 0 ? rng.below(2) : rng.below(5));
            data.push_back(s);
        }
        HmmTrainingConfig cfg;
        cfg.max_iterations = 50;
        cfg.tolerance = -std::numeric_limits<double>::infinity();
        cfg.seed = static_cast<std::uint64_t>(start);
        HmmTrainingLog log;
        train_hmm(data, 3, 5, cfg, &log);
        REQUIRE(log.mean_log_likelihood.size() == 51);
        for (std::size_t i = 1; i < log.mean_log_likelihood.size(); ++i)
            REQUIRE(log.mean_log_likelihood[i] >= log.mean_log_likelihood[i - 1] - 1e-8);
    }
}

TEST_CASE("training is deterministic and validates input") {
    std::vector<Sequence> data{{0, 1, 2}, {2, 2, 1, 0}};
    HmmTrainingConfig cfg;
    const auto a = train_hmm(data, 2, 3, cfg), b = train_hmm(data, 2, 3, cfg);
    CHECK(a.to_json() == b.to_json());
    CHECK(HmmModel::from_json(a.to_json()).emission() == a.emission());
    std::vector<Sequence> none;
    CHECK_THROWS_AS(train_hmm(none, 2, 3, cfg), Error);
    std::vector<Sequence> empty{{}};
    CHECK_THROWS_AS(train_hmm(empty, 2, 3, cfg), Error);
    std::vector<Sequence> wide{{5}};
    CHECK_THROWS_AS(train_hmm(wide, 2, 3, cfg), Error);
}

TEST_CASE("default state count") {
    CHECK(default_state_count(std::vector<Sequence>{{0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}}) == 5);
    CHECK(default_state_count(std::vector<Sequence>{Sequence(7, 0)}) == 7);
    CHECK(default_state_count(std::vector<Sequence>{{0}, {0, 0}}) == 2);
    CHECK_THROWS_AS(default_state_count(std::vector<Sequence>{}), Error);
}

TEST_CASE("Neyman-Pearson decisions") {
    Eigen::RowVectorXd u = Eigen::RowVectorXd::Constant(39, 1.0 / 39);
    HmmEnsemble same{single_state(u), {{"x", single_state(u)}}, 0.0};
    const auto d = parse_domain("abc.com");
    auto r = np_classify(same, d);
    CHECK(r.ratio == 0.0);
    CHECK(r.is_dga);
    same.eta = 1e18;
    CHECK_FALSE(np_classify(same, d).is_dga);

    Eigen::RowVectorXd skew = u;
    skew(0) += 0.5;
    skew /= skew.sum();
    HmmEnsemble e{single_state(u), {{"b", single_state(skew)}, {"a", single_state(skew)}}, 0.0};
    std::vector<int> seq{0, 0, 7};
    r = np_classify(e, seq);
    CHECK(r.best_family == "a");
    CHECK(r.ratio == doctest::Approx(2 * std::log(skew(0) / u(0)) + std::log(skew(7) / u(7))));
    CHECK(HmmEnsemble::from_json(e.to_json()).dga.size() == 2);
}
