#include "dga/metrics.hpp"

#include "dga/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dga {

namespace {

std::string fixed(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.8f", value);
    return buf;
}

std::string number(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

double ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(Counts counts) : counts_(std::move(counts)) {
    if (counts_.rows() != counts_.cols()) throw Error(ErrorCode::DimensionMismatch, "confusion matrix must be square");
    if ((counts_.array() < 0).any()) throw Error(ErrorCode::InvalidArgument, "confusion counts must be nonnegative");
}

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> truth, std::span<const int> predicted, int classes) {
    if (truth.size() != predicted.size()) throw Error(ErrorCode::DimensionMismatch, "truth and predictions differ in length");
    ConfusionMatrix m(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
    return m;
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
    if (truth < 0 || truth >= classes() || predicted < 0 || predicted >= classes()) {
        throw Error(ErrorCode::InvalidArgument, "class index outside confusion matrix");
    }
    counts_(truth, predicted) += count;
}

void ConfusionMatrix::write_csv(std::ostream& out, std::span<const std::string> class_names) const {
    out << "true\\predicted";
    for (const auto& name : class_names) out << ',' << name;
    out << '\n';
    for (int r = 0; r < classes(); ++r) {
        out << class_names[static_cast<std::size_t>(r)];
        for (int c = 0; c < classes(); ++c) out << ',' << counts_(r, c);
        out << '\n';
    }
}

PrecisionRecallF1 precision_recall_f1(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    if (tp < 0 || fp < 0 || fn < 0) throw Error(ErrorCode::InvalidArgument, "counts must be nonnegative");
    PrecisionRecallF1 out;
    out.precision = ratio(tp, tp + fp);
    out.recall = ratio(tp, tp + fn);
    const double sum = out.precision + out.recall;
    out.f1 = sum == 0 ? 0.0 : 2 * out.precision * out.recall / sum;
    return out;
}

ClassificationReport report(const ConfusionMatrix& matrix) {
    const auto& m = matrix.counts();
    const int classes = matrix.classes();
    if (classes < 2) throw Error(ErrorCode::InvalidArgument, "report needs >= 2 classes");
    ClassificationReport out;
    out.total = matrix.total();
    std::int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
    double p_sum = 0, r_sum = 0, f_sum = 0;
    int included = 0;
    for (int c = 0; c < classes; ++c) {
        const std::int64_t tp = m(c, c);
        const std::int64_t fp = m.col(c).sum() - tp;
        const std::int64_t fn = m.row(c).sum() - tp;
        ClassScores scores{precision_recall_f1(tp, fp, fn), m.row(c).sum()};
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn;
        if (scores.support > 0) {
            p_sum += scores.scores.precision;
            r_sum += scores.scores.recall;
            f_sum += scores.scores.f1;
            ++included;
        } else {
            out.macro_excluded.push_back(c);
        }
        out.per_class.push_back(scores);
    }
    out.micro = precision_recall_f1(tp_sum, fp_sum, fn_sum);
    if (included > 0) out.macro = {p_sum / included, r_sum / included, f_sum / included};
    return out;
}

void ClassificationReport::write_csv(std::ostream& out, std::span<const std::string> class_names) const {
    out << "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto& s = per_class[c];
        out << class_names[c] << ',' << fixed(s.scores.precision) << ',' << fixed(s.scores.recall) << ','
            << fixed(s.scores.f1) << ',' << s.support << '\n';
    }
    out << "micro avg," << fixed(micro.precision) << ',' << fixed(micro.recall) << ',' << fixed(micro.f1) << ',' << total
        << '\n';
    out << "macro avg," << fixed(macro.precision) << ',' << fixed(macro.recall) << ',' << fixed(macro.f1) << ','
        << total << '\n';
}

nlohmann::json ClassificationReport::to_json(std::span<const std::string> class_names) const {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto& s = per_class[c];
        classes.push_back({{"class", class_names[c]},
                           {"precision", s.scores.precision},
                           {"recall", s.scores.recall},
                           {"f1", s.scores.f1},
                           {"support", s.support}});
    }
    nlohmann::json excluded = nlohmann::json::array();
    for (int c : macro_excluded) excluded.push_back(class_names[static_cast<std::size_t>(c)]);
    return {{"classes", classes},
            {"micro", {{"precision", micro.precision}, {"recall", micro.recall}, {"f1", micro.f1}}},
            {"macro", {{"precision", macro.precision}, {"recall", macro.recall}, {"f1", macro.f1}}},
            {"macro_excludes_zero_support", excluded},
            {"total", total}};
}

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::DimensionMismatch, "scores and labels differ in length");
    std::int64_t positives = 0;
    for (bool l : labels) positives += l ? 1 : 0;
    const auto negatives = static_cast<std::int64_t>(labels.size()) - positives;
    if (positives == 0 || negatives == 0) throw Error(ErrorCode::SingleClassLabels, "ROC needs both classes");
    for (double s : scores) {
        if (std::isnan(s)) throw Error(ErrorCode::InvalidArgument, "NaN score");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    const double inf = std::numeric_limits<double>::infinity();
    curve.points.push_back({inf, 0.0, 0.0});
    std::int64_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double threshold = scores[order[k]];
        while (k < order.size() && scores[order[k]] == threshold) {
            if (labels[order[k]]) {
                ++tp;
            } else {
                ++fp;
            }
            ++k;
        }
        curve.points.push_back({threshold, ratio(fp, negatives), ratio(tp, positives)});
    }
    curve.points.push_back({-inf, 1.0, 1.0});
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2;
    }
    return area;
}

double tpr_at_fpr(const RocCurve& curve, double target_fpr) {
    double best = 0;
    for (const auto& p : curve.points) {
        if (p.fpr <= target_fpr) best = std::max(best, p.tpr);
    }
    return best;
}

double threshold_at_fpr(const RocCurve& curve, double target_fpr) {
    double threshold = std::numeric_limits<double>::infinity();
    double best = -1;
    for (const auto& p : curve.points) {
        if (p.fpr <= target_fpr && p.tpr > best) {
            best = p.tpr;
            threshold = p.threshold;
        }
    }
    return threshold;
}

void RocCurve::write_csv(std::ostream& out) const {
    out << "threshold,fpr,tpr\n";
    for (const auto& p : points) out << number(p.threshold) << ',' << number(p.fpr) << ',' << number(p.tpr) << '\n';
}

std::string roc_svg(std::span<const RocSeries> series, double min_fpr) {
    constexpr double width = 640, height = 480, left = 70, right = 20, top = 20, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const double log_min = std::log10(min_fpr);
    auto x_of = [&](double fpr) {
        const double v = std::log10(std::max(fpr, min_fpr));
        return left + plot_w * (v - log_min) / (0.0 - log_min);
    };
    auto y_of = [&](double tpr) { return top + plot_h * (1.0 - tpr); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(std::floor(log_min)); e <= 0; ++e) {
        const double x = x_of(std::pow(10.0, e));
        svg << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << top + plot_h
            << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 18 << "\" font-size=\"12\" text-anchor=\"middle\">1e"
            << e << "</text>\n";
    }
    for (int k = 0; k <= 10; k += 2) {
        const double y = y_of(k / 10.0);
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" font-size=\"12\" text-anchor=\"end\">" << k / 10.0
            << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15
        << "\" font-size=\"14\" text-anchor=\"middle\">false positive rate (log scale)</text>\n";
    svg << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << top + plot_h / 2 << ")\">true positive rate</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % std::size(colors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : series[s].curve->points) svg << x_of(p.fpr) << ',' << y_of(p.tpr) << ' ';
        svg << "\"/>\n";
        const double ly = top + plot_h - 20.0 * static_cast<double>(series.size() - s);
        svg << "<text x=\"" << left + plot_w - 10 << "\" y=\"" << ly << "\" font-size=\"12\" text-anchor=\"end\" fill=\""
            << color << "\">" << series[s].name << " (AUC " << fixed(auc(*series[s].curve)).substr(0, 6)
            << ")</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace dga
