#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vitkit/error.hpp"

namespace vitkit::metrics {

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::size_t> counts;  // row-major, rows = true class, cols = predicted

    std::size_t at(std::size_t true_class, std::size_t predicted) const {
        return counts[true_class * num_classes + predicted];
    }
    std::size_t total() const;
};

ConfusionMatrix confusion(const std::vector<int> &true_labels,
                          const std::vector<int> &predicted_labels, std::size_t num_classes);

// One-vs-rest statistics; recall and sensitivity are the same number.
// A zero denominator yields value 0 with the matching undefined flag set.
struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;  // == sensitivity
    double specificity = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool specificity_undefined = false;
};

struct EvalReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_specificity = 0.0;
    // One-vs-rest AUC per class; filled by evaluation flows that have
    // probabilities. NaN-free: undefined entries flagged instead.
    std::vector<double> auc;
    std::vector<bool> auc_defined;
};

EvalReport report(const ConfusionMatrix &cm);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::size_t class_index = 0;
    std::vector<RocPoint> points;  // starts at (+inf, 0, 0), ends at (_, 1, 1)
    double auc = 0.0;
    bool defined = true;  // false for a degenerate one-vs-rest class
};

// Thresholds sweep the descending unique scores after a +inf sentinel; tied
// scores enter together as one step.
RocCurve roc_curve(const std::vector<double> &scores, const std::vector<bool> &is_positive);

// Rank statistic: (#{pos > neg} + 0.5 * ties) / (P * N). Equals the
// trapezoidal area under the tie-aware ROC curve.
double auc_score(const std::vector<double> &scores, const std::vector<bool> &is_positive);

double trapezoid_area(const RocCurve &curve);

// One-vs-rest curves, class c scored by probability column c. Rows must sum
// to 1 within 1e-6. A class with no members yields a curve with
// defined = false; the others are computed.
std::vector<RocCurve> multiclass_roc(const std::vector<std::vector<double>> &probabilities,
                                     const std::vector<int> &labels);

// "class,threshold,fpr,tpr" rows, %.17g floats, "inf" for the sentinel.
void write_roc_csv(const std::vector<RocCurve> &curves, const std::string &path);

// Fixed key order: accuracy, per_class[], macro, auc[].
void write_metrics_json(const EvalReport &report, const std::string &path);
std::string metrics_json(const EvalReport &report);

}  // namespace vitkit::metrics
