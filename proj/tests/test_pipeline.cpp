#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vitkit/data.hpp"
#include "vitkit/pipeline.hpp"
#include "vitkit/vit.hpp"

using namespace vitkit;

namespace {

data::SplitDataset small_split(std::size_t per_class, std::uint64_t seed) {
    return data::split_dataset(data::gen_synthetic(per_class, 32, seed), seed + 1);
}

bool tensors_equal(const std::vector<Tensor> &a, const std::vector<Tensor> &b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].data() != b[i].data()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("zero_shot_eval leaves parameters bit-identical") {
    const auto split = small_split(10, 31);
    const ViTParams params = init_params(vit_tiny_config(), 32);
    const std::uint64_t before = params_checksum(params);
    const auto rep = pipeline::zero_shot_eval(params, split);
    CHECK(params_checksum(params) == before);
    CHECK(rep.accuracy >= 0.0);
    CHECK(rep.accuracy <= 1.0);
    CHECK(rep.confusion.total() == split.test.size());
    CHECK(rep.per_class.size() == 3);
    CHECK(rep.auc.size() == 3);
}

TEST_CASE("zero_shot mean accuracy sits near chance on synthetic data") {
    const auto split = small_split(40, 33);
    double mean = 0.0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        const ViTParams params = init_params(vit_tiny_config(), 100 + s);
        mean += pipeline::zero_shot_eval(params, split).accuracy / seeds;
    }
    CHECK(mean > 0.10);  // untrained models hover around 1/3 on seed average
    CHECK(mean < 0.60);
}

TEST_CASE("learning rate zero leaves the model untouched across epochs") {
    const auto split = small_split(8, 34);
    const ViTParams params = init_params(vit_tiny_config(), 35);
    pipeline::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.0;
    cfg.seed = 36;
    const auto result = pipeline::fine_tune(params, split, cfg);
    REQUIRE(result.records.size() == 3);
    for (const auto &r : result.records) {
        CHECK(r.validation_accuracy == result.records[0].validation_accuracy);
        CHECK(r.test_accuracy == result.records[0].test_accuracy);
    }
    CHECK(params_checksum(result.best_params) == params_checksum(params));
    CHECK(result.best_epoch == 3);  // ties resolve to the later epoch
}

TEST_CASE("fine_tune is deterministic and does not mutate its input") {
    const auto split = small_split(10, 37);
    const ViTParams params = init_params(vit_tiny_config(), 38);
    const std::uint64_t input_checksum = params_checksum(params);
    pipeline::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 39;
    const auto a = pipeline::fine_tune(params, split, cfg);
    const auto b = pipeline::fine_tune(params, split, cfg);
    CHECK(params_checksum(params) == input_checksum);
    CHECK(params_checksum(a.best_params) == params_checksum(b.best_params));
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].train_loss == b.records[i].train_loss);
        CHECK(a.records[i].validation_accuracy == b.records[i].validation_accuracy);
        CHECK(a.records[i].test_accuracy == b.records[i].test_accuracy);
    }
    CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("training reaches high accuracy on separable synthetic data") {
    const auto split = small_split(40, 40);
    const ViTParams params = init_params(vit_tiny_config(), 41);
    pipeline::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 1e-3;
    cfg.seed = 42;
    const auto result = pipeline::fine_tune(params, split, cfg);
    CHECK(result.records.back().validation_accuracy >= 0.9);
    CHECK(result.records.back().test_accuracy >= 0.9);
}

TEST_CASE("a single small sgd step does not increase the batch loss") {
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint64_t seed = 500 + static_cast<std::uint64_t>(trial);
        auto items = data::gen_synthetic(3, 32, seed);  // 9 items
        data::SplitDataset split;
        split.train.assign(items.begin(), items.begin() + 5);
        split.validation.assign(items.begin() + 5, items.begin() + 7);
        split.test.assign(items.begin() + 7, items.end());
        const ViTParams params = init_params(vit_tiny_config(), seed + 1);

        auto batch_loss = [&](const ViTParams &p) {
            NoGradGuard no_grad;
            Tensor logits;
            std::vector<int> labels;
            for (const auto &item : split.train) {
                Tensor l = vit_forward(p, data::to_model_input(item)).logits;
                logits = logits.defined() ? concat_rows(logits, l) : l;
                labels.push_back(item.label);
            }
            return cross_entropy(logits, labels).item();
        };

        pipeline::TrainConfig cfg;
        cfg.epochs = 1;
        cfg.batch_size = split.train.size();  // exactly one optimizer step
        cfg.optimizer = pipeline::OptimizerKind::sgd_momentum;
        cfg.learning_rate = 1e-4;
        cfg.seed = seed + 2;
        const double before = batch_loss(params);
        const auto result = pipeline::fine_tune(params, split, cfg);
        const double after = batch_loss(result.best_params);
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("divergent training aborts with the failing step") {
    const auto split = small_split(8, 43);
    const ViTParams params = init_params(vit_tiny_config(), 44);
    pipeline::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.optimizer = pipeline::OptimizerKind::sgd_momentum;
    cfg.learning_rate = 1e18;
    cfg.seed = 45;
    try {
        pipeline::fine_tune(params, split, cfg);
        FAIL("expected DivergedError");
    } catch (const DivergedError &e) {
        CHECK(e.step() >= 1);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("freeze_backbone trains only the projector head") {
    const auto split = small_split(100, 46);
    const ViTParams params = init_params(vit_tiny_config(), 47);
    pipeline::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 48;
    cfg.freeze_backbone = true;
    cfg.learning_rate = 3e-3;
    const auto result = pipeline::fine_tune(params, split, cfg);
    CHECK(tensors_equal(result.best_params.backbone_tensors(), params.backbone_tensors()));
    CHECK_FALSE(tensors_equal(result.best_params.head_tensors(), params.head_tensors()));
    // separable data: a linear-probe-style run clears chance by a wide margin
    CHECK(result.records.back().validation_accuracy >= 1.0 / 3.0 + 0.20);
}

TEST_CASE("epoch log csv has one row per epoch") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "vitkit_pipeline_log";
    fs::create_directories(dir);
    std::vector<pipeline::EpochRecord> records;
    for (std::size_t e = 1; e <= 5; ++e) {
        records.push_back({e, 1.0 / static_cast<double>(e), 0.5, 0.6});
    }
    const std::string path = (dir / "log.csv").string();
    pipeline::write_epoch_log_csv(records, path);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "epoch,train_loss,val_acc,test_acc");
    std::size_t rows = 0;
    while (std::getline(f, line)) rows += line.empty() ? 0 : 1;
    CHECK(rows == 5);
    fs::remove_all(dir);
}

TEST_CASE("evaluate produces aucs consistent with the report") {
    const auto split = small_split(10, 49);
    const ViTParams params = init_params(vit_tiny_config(), 50);
    const auto rep = pipeline::evaluate(params, split.test);
    REQUIRE(rep.auc.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) {
        if (rep.auc_defined[c]) {
            CHECK(rep.auc[c] >= 0.0);
            CHECK(rep.auc[c] <= 1.0);
        }
    }
}
