#include "vitkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace vitkit::pipeline {

void TrainConfig::validate() const {
    if (epochs < 1) throw ValueError("train config: epochs must be >= 1");
    if (batch_size < 1) throw ValueError("train config: batch_size must be >= 1");
    // learning_rate 0 is allowed as the degenerate no-update run
    if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
        throw ValueError("train config: learning_rate must be finite and >= 0");
    }
}

namespace {

std::vector<int> predict_labels(const ViTParams &params,
                                const std::vector<data::LabeledImage> &items) {
    NoGradGuard no_grad;
    std::vector<int> out(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Tensor input = data::to_model_input(items[i]);
        const ForwardTrace trace = vit_forward(params, input);
        const auto &logits = trace.logits.data();
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.size(); ++j) {
            if (logits[j] > logits[best]) best = j;  // ties keep the lowest index
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

// Adam / SGD-momentum over a fixed list of parameter tensors.
class Optimizer {
   public:
    Optimizer(std::vector<Tensor> params, const TrainConfig &cfg)
        : params_(std::move(params)), cfg_(cfg) {
        if (cfg_.optimizer == OptimizerKind::adam) {
            m_.resize(params_.size());
            v_.resize(params_.size());
            for (std::size_t i = 0; i < params_.size(); ++i) {
                m_[i].assign(params_[i].numel(), 0.0);
                v_[i].assign(params_[i].numel(), 0.0);
            }
        } else {
            vel_.resize(params_.size());
            for (std::size_t i = 0; i < params_.size(); ++i) {
                vel_[i].assign(params_[i].numel(), 0.0);
            }
        }
    }

    void step() {
        ++t_;
        if (cfg_.optimizer == OptimizerKind::adam) {
            const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
            const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
            for (std::size_t i = 0; i < params_.size(); ++i) {
                auto &w = params_[i].data();
                const auto &g = params_[i].grad();
                for (std::size_t k = 0; k < w.size(); ++k) {
                    m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g[k];
                    v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g[k] * g[k];
                    const double mhat = m_[i][k] / bc1;
                    const double vhat = v_[i][k] / bc2;
                    w[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
                }
            }
        } else {
            for (std::size_t i = 0; i < params_.size(); ++i) {
                auto &w = params_[i].data();
                const auto &g = params_[i].grad();
                for (std::size_t k = 0; k < w.size(); ++k) {
                    vel_[i][k] = cfg_.momentum * vel_[i][k] + g[k];
                    w[k] -= cfg_.learning_rate * vel_[i][k];
                }
            }
        }
    }

   private:
    std::vector<Tensor> params_;
    TrainConfig cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;  // adam
    std::vector<std::vector<double>> vel_;    // sgd-momentum
};

}  // namespace

double accuracy_on(const ViTParams &params, const std::vector<data::LabeledImage> &items) {
    if (items.empty()) throw DataError("accuracy_on: no items");
    const std::vector<int> predicted = predict_labels(params, items);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        correct += predicted[i] == items[i].label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

std::vector<std::vector<double>> predict_probabilities(
    const ViTParams &params, const std::vector<data::LabeledImage> &items) {
    NoGradGuard no_grad;
    std::vector<std::vector<double>> out;
    out.reserve(items.size());
    for (const data::LabeledImage &item : items) {
        const Tensor input = data::to_model_input(item);
        const Tensor probs = softmax(vit_forward(params, input).logits);
        out.push_back(probs.data());
    }
    return out;
}

metrics::EvalReport evaluate(const ViTParams &params,
                             const std::vector<data::LabeledImage> &items) {
    if (items.empty()) throw DataError("evaluate: no items");
    const std::size_t classes = params.config.num_classes;
    const std::vector<int> predicted = predict_labels(params, items);
    std::vector<int> truth(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) truth[i] = items[i].label;
    metrics::EvalReport rep = metrics::report(metrics::confusion(truth, predicted, classes));
    const auto probs = predict_probabilities(params, items);
    const auto curves = metrics::multiclass_roc(probs, truth);
    rep.auc.resize(classes, 0.0);
    rep.auc_defined.assign(classes, true);
    for (const metrics::RocCurve &curve : curves) {
        rep.auc[curve.class_index] = curve.defined ? curve.auc : 0.0;
        rep.auc_defined[curve.class_index] = curve.defined;
    }
    return rep;
}

metrics::EvalReport zero_shot_eval(const ViTParams &params, const data::SplitDataset &split) {
    if (split.test.empty()) throw DataError("zero_shot_eval: empty test split");
    const std::uint64_t before = params_checksum(params);
    metrics::EvalReport rep = evaluate(params, split.test);
    const std::uint64_t after = params_checksum(params);
    if (before != after) {
        throw Error("zero_shot_eval: parameters changed during frozen evaluation");
    }
    return rep;
}

FineTuneResult fine_tune(const ViTParams &params, const data::SplitDataset &split,
                         const TrainConfig &cfg) {
    cfg.validate();
    if (split.train.empty()) throw DataError("fine_tune: empty training split");
    if (split.validation.empty() || split.test.empty()) {
        throw DataError("fine_tune: validation and test splits must be nonempty");
    }

    ViTParams work = clone_params(params);
    work.set_requires_grad(false);
    std::vector<Tensor> trainable = cfg.freeze_backbone ? work.head_tensors() : work.all_tensors();
    for (Tensor &t : trainable) t.set_requires_grad(true);

    Optimizer optimizer(trainable, cfg);
    SplitMix64 shuffle_rng(cfg.seed);
    SplitMix64 dropout_rng(cfg.seed + 1);

    FineTuneResult result;
    double best_val = -1.0;
    std::size_t global_step = 0;

    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        fisher_yates_shuffle(order, shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            ++global_step;
            Tensor batch_logits;
            std::vector<int> labels;
            labels.reserve(end - start);
            Tensor loss;
            try {
                for (std::size_t i = start; i < end; ++i) {
                    const data::LabeledImage &item = split.train[order[i]];
                    ForwardOptions opts;
                    opts.train_mode = true;
                    opts.dropout_rng = &dropout_rng;
                    const Tensor input = data::to_model_input(item);
                    Tensor logits = vit_forward(work, input, opts).logits;
                    batch_logits =
                        batch_logits.defined() ? concat_rows(batch_logits, logits) : logits;
                    labels.push_back(item.label);
                }
                loss = cross_entropy(batch_logits, labels);
            } catch (const ValueError &e) {
                // exploded weights surface as non-finite activations mid-forward
                throw DivergedError("fine_tune: training diverged at step " +
                                        std::to_string(global_step) + " (epoch " +
                                        std::to_string(epoch) + "): " + e.what(),
                                    static_cast<long>(global_step));
            }
            const double loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                throw DivergedError("fine_tune: training loss became non-finite at step " +
                                        std::to_string(global_step) + " (epoch " +
                                        std::to_string(epoch) + ")",
                                    static_cast<long>(global_step));
            }
            loss_sum += loss_value * static_cast<double>(end - start);
            backward(loss);
            optimizer.step();
            work.zero_grads();
            for (const Tensor &t : trainable) {
                for (double v : t.data()) {
                    if (!std::isfinite(v)) {
                        throw DivergedError(
                            "fine_tune: parameters became non-finite at step " +
                                std::to_string(global_step) + " (epoch " + std::to_string(epoch) +
                                ")",
                            static_cast<long>(global_step));
                    }
                }
            }
        }
        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(order.size());
        try {
            record.validation_accuracy = accuracy_on(work, split.validation);
            record.test_accuracy = accuracy_on(work, split.test);
        } catch (const ValueError &e) {
            throw DivergedError("fine_tune: training diverged at step " +
                                    std::to_string(global_step) + " (epoch " +
                                    std::to_string(epoch) + "): " + e.what(),
                                static_cast<long>(global_step));
        }
        result.records.push_back(record);
        if (record.validation_accuracy >= best_val) {  // ties -> later epoch
            best_val = record.validation_accuracy;
            result.best_epoch = epoch;
            result.best_params = clone_params(work);
        }
    }
    return result;
}

void write_epoch_log_csv(const std::vector<EpochRecord> &records, const std::string &path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("epoch log: cannot open " + path + " for writing");
    f << "epoch,train_loss,val_acc,test_acc\n";
    char buf[160];
    for (const EpochRecord &r : records) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                      r.validation_accuracy, r.test_accuracy);
        f << buf;
    }
    if (!f) throw IoError("epoch log: write failed for " + path);
}

}  // namespace vitkit::pipeline
