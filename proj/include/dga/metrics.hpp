#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dga {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

    explicit ConfusionMatrix(int classes) : counts_(Counts::Zero(classes, classes)) {}
    explicit ConfusionMatrix(Counts counts);

    static ConfusionMatrix from_predictions(std::span<const int> truth, std::span<const int> predicted, int classes);

    void add(int truth, int predicted, std::int64_t count = 1);
    int classes() const noexcept { return static_cast<int>(counts_.rows()); }
    std::int64_t total() const { return counts_.sum(); }
    std::int64_t operator()(int truth, int predicted) const { return counts_(truth, predicted); }
    const Counts& counts() const noexcept { return counts_; }

    /// CSV with a header row of class names; first column is the true class.
    void write_csv(std::ostream& out, std::span<const std::string> class_names) const;

private:
    Counts counts_;
};

struct PrecisionRecallF1 {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

/// 0/0 is defined as 0 for every ratio.
PrecisionRecallF1 precision_recall_f1(std::int64_t tp, std::int64_t fp, std::int64_t fn);

struct ClassScores {
    PrecisionRecallF1 scores;
    std::int64_t support = 0;
};

struct ClassificationReport {
    std::vector<ClassScores> per_class;
    PrecisionRecallF1 micro;
    /// Mean of per-class values over classes with nonzero support.
    PrecisionRecallF1 macro;
    std::vector<int> macro_excluded;  // zero-support classes left out of the macro mean
    std::int64_t total = 0;

    /// `class,precision,recall,f1,support` rows, then `micro avg` and `macro avg`.
    void write_csv(std::ostream& out, std::span<const std::string> class_names) const;
    nlohmann::json to_json(std::span<const std::string> class_names) const;
};

ClassificationReport report(const ConfusionMatrix& matrix);

struct RocPoint {
    double threshold = 0;
    double fpr = 0;
    double tpr = 0;
};

/// Points for every distinct score plus +inf/-inf sentinels, ordered by
/// decreasing threshold (so fpr and tpr never decrease). A score counts as
/// positive when score >= threshold.
struct RocCurve {
    std::vector<RocPoint> points;

    void write_csv(std::ostream& out) const;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> labels);
double auc(const RocCurve& curve);
/// Largest tpr among points with fpr <= target.
double tpr_at_fpr(const RocCurve& curve, double target_fpr);
/// Lowest threshold whose fpr stays within target (the operating point behind tpr_at_fpr).
double threshold_at_fpr(const RocCurve& curve, double target_fpr);

struct RocSeries {
    std::string name;
    const RocCurve* curve = nullptr;
};

/// Standalone SVG line plot; fpr on a log10 axis from `min_fpr` to 1.
std::string roc_svg(std::span<const RocSeries> series, double min_fpr = 1e-4);

}  // namespace dga
