#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitkit/data.hpp"
#include "vitkit/metrics.hpp"
#include "vitkit/vit.hpp"

namespace vitkit::pipeline {

enum class OptimizerKind { adam, sgd_momentum };

struct TrainConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    double learning_rate = 3e-4;
    OptimizerKind optimizer = OptimizerKind::adam;
    double momentum = 0.9;  // sgd-momentum
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;  // shuffles use seed, dropout uses seed + 1
    bool freeze_backbone = false;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double validation_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct FineTuneResult {
    ViTParams best_params;  // highest validation accuracy, later epoch on ties
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> records;
};

// Argmax evaluation with frozen weights on D_test; the input params are
// guaranteed untouched (checksummed before and after).
metrics::EvalReport zero_shot_eval(const ViTParams &params, const data::SplitDataset &split);

// Seeded shuffle + minibatch steps per epoch, then validation/test accuracy.
// The input params are not modified; training runs on a private copy.
// Throws DivergedError when the training loss stops being finite.
FineTuneResult fine_tune(const ViTParams &params, const data::SplitDataset &split,
                         const TrainConfig &cfg);

// Argmax accuracy over a list of items.
double accuracy_on(const ViTParams &params, const std::vector<data::LabeledImage> &items);

// Full report (confusion metrics + one-vs-rest AUC from softmax scores).
metrics::EvalReport evaluate(const ViTParams &params,
                             const std::vector<data::LabeledImage> &items);

// Softmax probability rows, one per item, class count from the config.
std::vector<std::vector<double>> predict_probabilities(
    const ViTParams &params, const std::vector<data::LabeledImage> &items);

// "epoch,train_loss,val_acc,test_acc" rows, %.17g floats.
void write_epoch_log_csv(const std::vector<EpochRecord> &records, const std::string &path);

}  // namespace vitkit::pipeline
