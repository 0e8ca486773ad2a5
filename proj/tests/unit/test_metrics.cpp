#include "dga/error.hpp"
#include "dga/metrics.hpp"
#include "dga/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

using namespace dga;

namespace {

struct Labels {
    std::unique_ptr<bool[]> data;
    std::size_t n;
    std::span<const bool> span() const { return {data.get(), n}; }
};

Labels labels(const std::vector<int>& v) {
    Labels l{std::unique_ptr<bool[]>(new bool[v.size()]), v.size()};
    for (std::size_t i = 0; i < v.size(); ++i) l.data[i] = v[i] != 0;
    return l;
}

double rank_statistic(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] && !y[j]) {
                pairs += 1;
                wins += s[i] > s[j] ? 1 : s[i] == s[j] ? 0.5 : 0;
            }
    return wins / pairs;
}

}  // namespace

TEST_CASE("precision recall f1") {
    auto r = precision_recall_f1(2, 1, 0);
    CHECK(r.precision == doctest::Approx(2.0 / 3));
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == doctest::Approx(0.8));
    r = precision_recall_f1(0, 0, 0);
    CHECK((r.precision == 0 && r.recall == 0 && r.f1 == 0));
    r = precision_recall_f1(3, 1, 1);
    CHECK(r.precision == r.recall);
    CHECK(r.f1 == doctest::Approx(r.precision));
}

TEST_CASE("perfect confusion matrix scores 1") {
    ConfusionMatrix m(3);
    for (int c = 0; c < 3; ++c) m.add(c, c, 4);
    const auto rep = report(m);
    for (const auto& c : rep.per_class) CHECK((c.scores.precision == 1 && c.scores.recall == 1 && c.scores.f1 == 1));
    CHECK(rep.micro.f1 == 1);
    CHECK(rep.macro.f1 == 1);
}

TEST_CASE("three-class report against hand computation") {
    ConfusionMatrix::Counts counts(3, 3);
    counts << 5, 1, 0, 0, 4, 2, 1, 0, 7;
    const auto rep = report(ConfusionMatrix(counts));
    // column sums 6, 5, 9; row sums 6, 6, 8
    const double p[3] = {5.0 / 6, 4.0 / 5, 7.0 / 9}, r[3] = {5.0 / 6, 4.0 / 6, 7.0 / 8};
    for (int c = 0; c < 3; ++c) {
        CHECK(rep.per_class[c].scores.precision == doctest::Approx(p[c]).epsilon(1e-12));
        CHECK(rep.per_class[c].scores.recall == doctest::Approx(r[c]).epsilon(1e-12));
        CHECK(rep.per_class[c].scores.f1 == doctest::Approx(2 * p[c] * r[c] / (p[c] + r[c])).epsilon(1e-12));
    }
    CHECK(rep.per_class[2].support == 8);
    CHECK(rep.micro.precision == doctest::Approx(16.0 / 20).epsilon(1e-12));
    CHECK(rep.macro.recall == doctest::Approx((5.0 / 6 + 4.0 / 6 + 7.0 / 8) / 3).epsilon(1e-12));
    CHECK(rep.total == 20);
}

TEST_CASE("zero-support classes are left out of the macro mean") {
    ConfusionMatrix m(3);
    m.add(0, 0, 3);
    m.add(1, 1, 1);
    m.add(1, 0, 1);
    const auto rep = report(m);
    CHECK(rep.macro_excluded == std::vector<int>{2});
    CHECK(rep.macro.recall == doctest::Approx((1.0 + 0.5) / 2));
}

TEST_CASE("confusion matrix from predictions and CSV") {
    std::vector<int> t{0, 1, 1, 2}, p{0, 1, 2, 2};
    const auto m = ConfusionMatrix::from_predictions(t, p, 3);
    CHECK(m(1, 2) == 1);
    CHECK(m.total() == 4);
    std::ostringstream out;
    std::vector<std::string> names{"benign", "a", "b"};
    m.write_csv(out, names);
    CHECK(out.str().rfind("true\\predicted,benign,a,b\n", 0) == 0);
    CHECK_THROWS_AS(ConfusionMatrix::from_predictions(t, std::vector<int>{0}, 3), Error);
}

TEST_CASE("roc curve shape") {
    std::vector<double> s{0.9, 0.8, 0.2, 0.1};
    auto y = labels({1, 1, 0, 0});
    auto c = roc_curve(s, y.span());
    CHECK(std::any_of(c.points.begin(), c.points.end(), [](const RocPoint& p) { return p.fpr == 0 && p.tpr == 1; }));
    CHECK(auc(c) == 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
        CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
    }
    CHECK_THROWS_AS(roc_curve(s, labels({1, 1, 1, 1}).span()), Error);

    std::vector<double> same(10, 0.3);
    auto coin = labels({1, 0, 1, 1, 0, 0, 1, 0, 1, 0});
    c = roc_curve(same, coin.span());
    for (const auto& p : c.points) CHECK(((p.fpr == 0 && p.tpr == 0) || (p.fpr == 1 && p.tpr == 1)));
    CHECK(auc(c) == doctest::Approx(0.5));
}

TEST_CASE("roc points match a brute-force threshold sweep") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(30));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) s[i] = static_cast<double>(rng.below(8)), y[i] = static_cast<int>(rng.below(2));
        y[0] = 1, y[1] = 0;
        const auto l = labels(y);
        const auto c = roc_curve(s, l.span());
        std::set<double> distinct(s.begin(), s.end());
        REQUIRE(c.points.size() == distinct.size() + 2);
        const double pos = std::count(y.begin(), y.end(), 1), neg = n - pos;
        for (const auto& p : c.points) {
            double tp = 0, fp = 0;
            for (int i = 0; i < n; ++i)
                if (s[i] >= p.threshold) (y[i] ? tp : fp) += 1;
            REQUIRE(p.tpr == doctest::Approx(tp / pos));
            REQUIRE(p.fpr == doctest::Approx(fp / neg));
        }
    }
}

TEST_CASE("auc equals the rank statistic") {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> s(50);
        std::vector<int> y(50);
        for (int i = 0; i < 50; ++i) {
            s[i] = rng.bernoulli(0.3) ? static_cast<double>(rng.below(4)) : rng.uniform();
            y[i] = rng.bernoulli(0.5);
        }
        y[0] = 1, y[1] = 0;
        const auto l = labels(y);
        REQUIRE(auc(roc_curve(s, l.span())) == doctest::Approx(rank_statistic(s, y)).epsilon(1e-9));
    }
}

TEST_CASE("random scores give auc near one half") {
    Rng rng(1);
    std::vector<double> s(10000);
    std::vector<int> y(10000);
    for (int i = 0; i < 10000; ++i) s[i] = rng.uniform(), y[i] = i % 2;
    CHECK(auc(roc_curve(s, labels(y).span())) == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("tpr at fpr") {
    RocCurve c{{{INFINITY, 0, 0}, {0.9, 0, 0.3}, {0.5, 0.5, 0.8}, {0.1, 1, 1}, {-INFINITY, 1, 1}}};
    CHECK(tpr_at_fpr(c, 1.0) == 1.0);
    CHECK(tpr_at_fpr(c, 0.0) == 0.3);
    CHECK(threshold_at_fpr(c, 0.0) == 0.9);
    double last = 0;
    for (double t = 0; t <= 1.0; t += 0.01) {
        const double v = tpr_at_fpr(c, t);
        CHECK(v >= last);
        last = v;
    }
}

TEST_CASE("roc svg is self-contained") {
    std::vector<double> s{0.9, 0.1};
    const auto c = roc_curve(s, labels({1, 0}).span());
    std::vector<RocSeries> series{{"lstm", &c}};
    const auto svg = roc_svg(series);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("lstm") != std::string::npos);
}
