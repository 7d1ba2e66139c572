#include "vitkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace vitkit::metrics {

namespace {

std::string fmt_g17(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ConfusionMatrix confusion(const std::vector<int> &true_labels,
                          const std::vector<int> &predicted_labels, std::size_t num_classes) {
    if (true_labels.size() != predicted_labels.size()) {
        throw ShapeError("confusion: " + std::to_string(true_labels.size()) + " true labels vs " +
                         std::to_string(predicted_labels.size()) + " predictions");
    }
    if (num_classes == 0) throw ValueError("confusion: num_classes must be positive");
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(num_classes * num_classes, 0);
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i];
        const int p = predicted_labels[i];
        if (t < 0 || static_cast<std::size_t>(t) >= num_classes || p < 0 ||
            static_cast<std::size_t>(p) >= num_classes) {
            throw ValueError("confusion: label out of range at index " + std::to_string(i));
        }
        ++cm.counts[static_cast<std::size_t>(t) * num_classes + static_cast<std::size_t>(p)];
    }
    return cm;
}

EvalReport report(const ConfusionMatrix &cm) {
    const std::size_t c = cm.num_classes;
    const std::size_t total = cm.total();
    if (c == 0 || total == 0) throw ValueError("report: empty confusion matrix");
    EvalReport rep;
    rep.confusion = cm;
    std::size_t trace = 0;
    for (std::size_t i = 0; i < c; ++i) trace += cm.at(i, i);
    rep.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    rep.per_class.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        std::size_t tp = cm.at(k, k);
        std::size_t fn = 0, fp = 0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j != k) {
                fn += cm.at(k, j);
                fp += cm.at(j, k);
            }
        }
        const std::size_t tn = total - tp - fn - fp;
        ClassMetrics &m = rep.per_class[k];
        if (tp + fp == 0) {
            m.precision_undefined = true;
        } else {
            m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        }
        if (tp + fn == 0) {
            m.recall_undefined = true;
        } else {
            m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        if (tn + fp == 0) {
            m.specificity_undefined = true;
        } else {
            m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
        }
        rep.macro_precision += m.precision;
        rep.macro_recall += m.recall;
        rep.macro_specificity += m.specificity;
    }
    rep.macro_precision /= static_cast<double>(c);
    rep.macro_recall /= static_cast<double>(c);
    rep.macro_specificity /= static_cast<double>(c);
    return rep;
}

namespace {

struct ScoreCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

void check_binary(const std::vector<double> &scores, const std::vector<bool> &is_positive,
                  std::size_t &pos, std::size_t &neg) {
    if (scores.size() != is_positive.size()) {
        throw ShapeError("roc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(is_positive.size()) + " flags");
    }
    pos = 0;
    for (bool b : is_positive) pos += b ? 1 : 0;
    neg = scores.size() - pos;
    if (pos == 0 || neg == 0) {
        throw ValueError("roc: need at least one positive and one negative sample");
    }
}

}  // namespace

double auc_score(const std::vector<double> &scores, const std::vector<bool> &is_positive) {
    std::size_t pos = 0, neg = 0;
    check_binary(scores, is_positive, pos, neg);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pairs = 0.0;
    std::size_t neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        ScoreCounts group;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (is_positive[order[j]]) {
                ++group.positives;
            } else {
                ++group.negatives;
            }
            ++j;
        }
        pairs += static_cast<double>(group.positives) * static_cast<double>(neg_below);
        pairs += 0.5 * static_cast<double>(group.positives) * static_cast<double>(group.negatives);
        neg_below += group.negatives;
        i = j;
    }
    return pairs / (static_cast<double>(pos) * static_cast<double>(neg));
}

RocCurve roc_curve(const std::vector<double> &scores, const std::vector<bool> &is_positive) {
    std::size_t pos = 0, neg = 0;
    check_binary(scores, is_positive, pos, neg);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == s) {  // ties enter together
            if (is_positive[order[j]]) {
                ++tp;
            } else {
                ++fp;
            }
            ++j;
        }
        curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos)});
        i = j;
    }
    curve.auc = auc_score(scores, is_positive);
    return curve;
}

double trapezoid_area(const RocCurve &curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const RocPoint &a = curve.points[i - 1];
        const RocPoint &b = curve.points[i];
        area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
    }
    return area;
}

std::vector<RocCurve> multiclass_roc(const std::vector<std::vector<double>> &probabilities,
                                     const std::vector<int> &labels) {
    if (probabilities.size() != labels.size()) {
        throw ShapeError("multiclass_roc: " + std::to_string(probabilities.size()) +
                         " rows vs " + std::to_string(labels.size()) + " labels");
    }
    if (probabilities.empty()) throw ValueError("multiclass_roc: no samples");
    const std::size_t c = probabilities[0].size();
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i].size() != c) {
            throw ShapeError("multiclass_roc: ragged probability row " + std::to_string(i));
        }
        double s = 0.0;
        for (double v : probabilities[i]) s += v;
        if (std::abs(s - 1.0) > 1e-6) {
            throw ValueError("multiclass_roc: row " + std::to_string(i) + " sums to " +
                             fmt_g17(s) + ", expected 1");
        }
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            throw ValueError("multiclass_roc: label out of range at index " + std::to_string(i));
        }
    }
    std::vector<RocCurve> curves;
    for (std::size_t k = 0; k < c; ++k) {
        std::vector<double> scores(probabilities.size());
        std::vector<bool> is_pos(probabilities.size());
        std::size_t members = 0;
        for (std::size_t i = 0; i < probabilities.size(); ++i) {
            scores[i] = probabilities[i][k];
            is_pos[i] = labels[i] == static_cast<int>(k);
            members += is_pos[i] ? 1 : 0;
        }
        RocCurve curve;
        if (members == 0 || members == probabilities.size()) {
            curve.defined = false;  // degenerate one-vs-rest class
        } else {
            curve = roc_curve(scores, is_pos);
        }
        curve.class_index = k;
        curves.push_back(std::move(curve));
    }
    return curves;
}

void write_roc_csv(const std::vector<RocCurve> &curves, const std::string &path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("roc csv: cannot open " + path + " for writing");
    f << "class,threshold,fpr,tpr\n";
    for (const RocCurve &curve : curves) {
        if (!curve.defined) continue;
        for (const RocPoint &p : curve.points) {
            f << curve.class_index << "," << fmt_g17(p.threshold) << "," << fmt_g17(p.fpr) << ","
              << fmt_g17(p.tpr) << "\n";
        }
    }
    if (!f) throw IoError("roc csv: write failed for " + path);
}

std::string metrics_json(const EvalReport &rep) {
    nlohmann::ordered_json j;
    j["accuracy"] = rep.accuracy;
    j["per_class"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < rep.per_class.size(); ++k) {
        const ClassMetrics &m = rep.per_class[k];
        nlohmann::ordered_json e;
        e["class"] = k;
        e["precision"] = m.precision;
        e["recall"] = m.recall;
        e["sensitivity"] = m.recall;  // same statistic, spelled out for readers
        e["specificity"] = m.specificity;
        auto undefined = nlohmann::ordered_json::array();
        if (m.precision_undefined) undefined.push_back("precision");
        if (m.recall_undefined) undefined.push_back("recall");
        if (m.specificity_undefined) undefined.push_back("specificity");
        if (k < rep.auc_defined.size() && !rep.auc_defined[k]) undefined.push_back("auc");
        e["undefined"] = undefined;
        j["per_class"].push_back(e);
    }
    j["macro"] = {{"precision", rep.macro_precision},
                  {"recall", rep.macro_recall},
                  {"specificity", rep.macro_specificity}};
    j["auc"] = rep.auc;
    return j.dump(2) + "\n";
}

void write_metrics_json(const EvalReport &rep, const std::string &path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("metrics json: cannot open " + path + " for writing");
    f << metrics_json(rep);
    if (!f) throw IoError("metrics json: write failed for " + path);
}

}  // namespace vitkit::metrics
