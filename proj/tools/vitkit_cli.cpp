// Command-line front end: synth, split, train, eval, zeroshot, roc, explain.
//
// Seed discipline: every command takes one --seed S and derives fixed
// sub-seeds from it (documented per command): data shuffling uses S, weight
// initialization uses S + 1, the training loop uses S + 2 (its dropout
// stream S + 3). Identical inputs and seeds reproduce identical outputs
// byte for byte.
//
// Exit codes: 0 success, 2 usage or I/O failure, 3 numerical failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vitkit/data.hpp"
#include "vitkit/interpret.hpp"
#include "vitkit/metrics.hpp"
#include "vitkit/pipeline.hpp"
#include "vitkit/vit.hpp"

namespace fs = std::filesystem;
using namespace vitkit;

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level() {
    const char *env = std::getenv("VIT_LOG_LEVEL");
    if (env == nullptr) return LogLevel::info;
    const std::string v = env;
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    std::cerr << "warning: unknown VIT_LOG_LEVEL \"" << v << "\", using info\n";
    return LogLevel::info;
}

void log_info(const std::string &msg) {
    if (log_level() >= LogLevel::info) std::cerr << msg << "\n";
}

void log_debug(const std::string &msg) {
    if (log_level() >= LogLevel::debug) std::cerr << msg << "\n";
}

// Merged settings: defaults <- config file <- command-line flags.
struct RunConfig {
    ViTConfig model = vit_tiny_config();
    bool tiny = true;
    pipeline::TrainConfig train;
    std::uint64_t seed = 0;
    bool stratified = false;
    std::string optimizer_name = "adam";
};

void apply_config_entry(RunConfig &cfg, const std::string &key, const std::string &value,
                        const std::string &path) {
    auto to_u64 = [&](const std::string &s) -> std::uint64_t {
        try {
            return std::stoull(s);
        } catch (...) {
            throw ValueError("config " + path + ": bad integer for " + key + ": \"" + s + "\"");
        }
    };
    auto to_f64 = [&](const std::string &s) -> double {
        try {
            return std::stod(s);
        } catch (...) {
            throw ValueError("config " + path + ": bad number for " + key + ": \"" + s + "\"");
        }
    };
    auto to_bool = [&](const std::string &s) -> bool {
        if (s == "0" || s == "false") return false;
        if (s == "1" || s == "true") return true;
        throw ValueError("config " + path + ": bad boolean for " + key + ": \"" + s + "\"");
    };
    if (key == "tiny") {
        cfg.tiny = to_bool(value);
        cfg.model = cfg.tiny ? vit_tiny_config() : vit_base_config();
    } else if (key == "image_size") {
        cfg.model.image_size = to_u64(value);
    } else if (key == "patch_size") {
        cfg.model.patch_size = to_u64(value);
    } else if (key == "channels") {
        cfg.model.channels = to_u64(value);
    } else if (key == "embed_dim") {
        cfg.model.embed_dim = to_u64(value);
    } else if (key == "depth") {
        cfg.model.depth = to_u64(value);
    } else if (key == "heads") {
        cfg.model.heads = to_u64(value);
    } else if (key == "mlp_ratio") {
        cfg.model.mlp_ratio = to_f64(value);
    } else if (key == "head_hidden") {
        cfg.model.head_hidden = to_u64(value);
    } else if (key == "num_classes") {
        cfg.model.num_classes = to_u64(value);
    } else if (key == "drop_rate") {
        cfg.model.drop_rate = to_f64(value);
    } else if (key == "epochs") {
        cfg.train.epochs = to_u64(value);
    } else if (key == "batch_size") {
        cfg.train.batch_size = to_u64(value);
    } else if (key == "lr") {
        cfg.train.learning_rate = to_f64(value);
    } else if (key == "optimizer") {
        cfg.optimizer_name = value;
    } else if (key == "momentum") {
        cfg.train.momentum = to_f64(value);
    } else if (key == "beta1") {
        cfg.train.beta1 = to_f64(value);
    } else if (key == "beta2") {
        cfg.train.beta2 = to_f64(value);
    } else if (key == "adam_eps") {
        cfg.train.adam_eps = to_f64(value);
    } else if (key == "seed") {
        cfg.seed = to_u64(value);
    } else if (key == "freeze_backbone") {
        cfg.train.freeze_backbone = to_bool(value);
    } else if (key == "stratified") {
        cfg.stratified = to_bool(value);
    } else {
        throw ValueError("config " + path + ": unknown key \"" + key + "\"");
    }
}

void load_config_file(RunConfig &cfg, const std::string &path) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValueError("config " + path + ": line " + std::to_string(line_no) +
                             " is not key=value");
        }
        apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1), path);
    }
}

pipeline::OptimizerKind parse_optimizer(const std::string &name) {
    if (name == "adam") return pipeline::OptimizerKind::adam;
    if (name == "sgd") return pipeline::OptimizerKind::sgd_momentum;
    throw ValueError("optimizer must be adam or sgd, got \"" + name + "\"");
}

// Items resized to the model geometry when needed (the LC25000 flow resizes
// 768x768 scans down to 224x224).
std::vector<data::LabeledImage> load_for_model(const std::string &dir, const ViTConfig &model) {
    std::vector<data::LabeledImage> items = data::load_image_dir(dir);
    for (auto &item : items) {
        if (item.pixels.dim(1) != model.image_size || item.pixels.dim(2) != model.image_size) {
            log_debug("resizing " + item.source_id + " to " + std::to_string(model.image_size));
            item = data::resize_to_input(item, model.image_size);
        }
    }
    return items;
}

data::SplitDataset load_split(const std::string &dir, const std::string &manifest,
                              const ViTConfig &model) {
    return data::apply_manifest(load_for_model(dir, model), data::read_manifest_csv(manifest));
}

const std::vector<data::LabeledImage> &pick_split(const data::SplitDataset &split,
                                                  const std::string &name) {
    if (name == "train") return split.train;
    if (name == "validation") return split.validation;
    if (name == "test") return split.test;
    throw ValueError("--split must be train, validation or test, got \"" + name + "\"");
}

// Geometry and training flags shared by train/zeroshot.
struct ModelFlags {
    std::string config_file;
    bool tiny = false;
    bool base = false;
    std::vector<std::pair<std::string, std::string>> overrides;  // key, value (applied in order)

    void add_to(CLI::App *cmd, RunConfig & /*cfg*/) {
        cmd->add_option("--config", config_file, "flat key=value config file");
        cmd->add_flag("--tiny", tiny, "desk-scale geometry (32px, patch 8, embed 32; default)");
        cmd->add_flag("--base", base, "full-scale geometry (224px, patch 16, embed 768)");
        auto stage = [this, cmd](const std::string &flag, const std::string &key) {
            auto opt = cmd->add_option(
                "--" + flag, [this, key](const std::vector<std::string> &vals) {
                    overrides.emplace_back(key, vals.at(0));
                    return true;
                },
                "override " + key);
            opt->expected(1);
        };
        stage("image-size", "image_size");
        stage("patch-size", "patch_size");
        stage("embed-dim", "embed_dim");
        stage("depth", "depth");
        stage("heads", "heads");
        stage("mlp-ratio", "mlp_ratio");
        stage("head-hidden", "head_hidden");
        stage("num-classes", "num_classes");
        stage("drop-rate", "drop_rate");
        stage("epochs", "epochs");
        stage("batch-size", "batch_size");
        stage("lr", "lr");
        stage("optimizer", "optimizer");
        stage("momentum", "momentum");
        stage("beta1", "beta1");
        stage("beta2", "beta2");
        stage("adam-eps", "adam_eps");
    }

    // defaults <- config file <- flags, in that order
    void resolve(RunConfig &cfg) const {
        if (!config_file.empty()) load_config_file(cfg, config_file);
        if (tiny && base) throw ValueError("--tiny and --base are mutually exclusive");
        if (tiny) apply_config_entry(cfg, "tiny", "1", "<flags>");
        if (base) apply_config_entry(cfg, "tiny", "0", "<flags>");
        for (const auto &[key, value] : overrides) {
            apply_config_entry(cfg, key, value, "<flags>");
        }
        cfg.train.optimizer = parse_optimizer(cfg.optimizer_name);
        cfg.model.validate();
    }
};

int cmd_synth(std::size_t per_class, std::size_t size, std::uint64_t seed,
              const std::string &out_dir) {
    const auto items = data::gen_synthetic(per_class, size, seed);
    for (const char *cls : data::kClassNames) {
        fs::create_directories(fs::path(out_dir) / cls);
    }
    for (const auto &item : items) {
        data::write_ppm((fs::path(out_dir) / item.source_id).string(),
                        data::tensor_to_image(item.pixels));
    }
    log_info("synth: wrote " + std::to_string(items.size()) + " images under " + out_dir);
    return 0;
}

int cmd_split(const std::string &dir, std::uint64_t seed, const std::string &out,
              bool stratified) {
    const auto items = data::load_image_dir(dir);
    const auto split = data::split_dataset(items, seed, stratified);
    data::write_manifest_csv(split, out);
    log_info("split: " + std::to_string(split.train.size()) + "/" +
             std::to_string(split.validation.size()) + "/" + std::to_string(split.test.size()) +
             " train/validation/test -> " + out);
    return 0;
}

int cmd_train(const RunConfig &cfg, const std::string &dir, const std::string &manifest,
              const std::string &out_ckpt, const std::string &out_log) {
    const auto split = load_split(dir, manifest, cfg.model);
    ViTParams params = init_params(cfg.model, cfg.seed + 1);
    pipeline::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + 2;
    const auto result = pipeline::fine_tune(params, split, tc);
    save_checkpoint(result.best_params, out_ckpt);
    pipeline::write_epoch_log_csv(result.records, out_log);
    log_info("train: best epoch " + std::to_string(result.best_epoch) + ", val_acc " +
             std::to_string(result.records[result.best_epoch - 1].validation_accuracy) +
             " -> " + out_ckpt);
    return 0;
}

int cmd_eval(const std::string &ckpt, const std::string &dir, const std::string &manifest,
             const std::string &split_name, const std::string &out) {
    const ViTParams params = load_checkpoint(ckpt);
    const auto split = load_split(dir, manifest, params.config);
    const auto rep = pipeline::evaluate(params, pick_split(split, split_name));
    metrics::write_metrics_json(rep, out);
    log_info("eval: accuracy " + std::to_string(rep.accuracy) + " on " + split_name + " -> " +
             out);
    return 0;
}

int cmd_zeroshot(const RunConfig &cfg, const std::string &dir, const std::string &manifest,
                 const std::string &split_name, const std::string &out) {
    const auto split = load_split(dir, manifest, cfg.model);
    const ViTParams params = init_params(cfg.model, cfg.seed + 1);
    metrics::EvalReport rep;
    if (split_name == "test") {
        rep = pipeline::zero_shot_eval(params, split);
    } else {
        rep = pipeline::evaluate(params, pick_split(split, split_name));
    }
    // the validation column the frozen protocol leaves blank, for reference
    if (!split.validation.empty()) {
        log_info("zeroshot: validation accuracy " +
                 std::to_string(pipeline::accuracy_on(params, split.validation)));
    }
    metrics::write_metrics_json(rep, out);
    log_info("zeroshot: accuracy " + std::to_string(rep.accuracy) + " on " + split_name +
             " -> " + out);
    return 0;
}

int cmd_roc(const std::string &ckpt, const std::string &dir, const std::string &manifest,
            const std::string &split_name, const std::string &out) {
    const ViTParams params = load_checkpoint(ckpt);
    const auto split = load_split(dir, manifest, params.config);
    const auto &items = pick_split(split, split_name);
    if (items.empty()) throw DataError("roc: split " + split_name + " is empty");
    std::vector<int> labels(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) labels[i] = items[i].label;
    const auto probs = pipeline::predict_probabilities(params, items);
    const auto curves = metrics::multiclass_roc(probs, labels);
    metrics::write_roc_csv(curves, out);
    std::string aucs;
    for (const auto &c : curves) {
        aucs += (aucs.empty() ? "" : ", ") + std::string(data::kClassNames[c.class_index]) + "=" +
                (c.defined ? std::to_string(c.auc) : "undefined");
    }
    log_info("roc: auc " + aucs + " -> " + out);
    return 0;
}

int cmd_explain(const std::string &ckpt, const std::string &image_path, int target_class,
                const std::string &out) {
    const ViTParams params = load_checkpoint(ckpt);
    const std::string ext = fs::path(image_path).extension().string();
    data::LabeledImage item;
    item.pixels = data::image_to_tensor(ext == ".bmp" ? data::read_bmp(image_path)
                                                      : data::read_ppm(image_path));
    item.source_id = fs::path(image_path).filename().string();
    if (item.pixels.dim(1) != params.config.image_size ||
        item.pixels.dim(2) != params.config.image_size) {
        item = data::resize_to_input(item, params.config.image_size);
    }
    const auto map = interpret::relevancy(params, item.pixels, target_class, item.source_id);
    interpret::render_heatmap(map, item, out);
    log_info("explain: class " + std::to_string(target_class) + " overlay -> " + out +
             " (raw map " + out + ".csv)");
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"vision-transformer transfer-learning toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;

    // synth
    auto *synth = app.add_subcommand("synth", "generate the synthetic 3-class dataset");
    std::size_t per_class = 10, synth_size = 32;
    std::string synth_out;
    synth->add_option("--per-class", per_class, "images per class")->required();
    synth->add_option("--size", synth_size, "image side length");
    synth->add_option("--seed", cfg.seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory")->required();

    // split
    auto *split = app.add_subcommand("split", "write a 60/20/20 split manifest");
    std::string split_data, split_out;
    split->add_option("--data", split_data, "dataset root directory")->required();
    split->add_option("--seed", cfg.seed, "shuffle seed");
    split->add_option("--out", split_out, "manifest csv path")->required();
    split->add_flag("--stratified", cfg.stratified, "shuffle and split each class separately");

    // train
    auto *train = app.add_subcommand("train", "fine-tune from scratch-initialized weights");
    std::string train_data, train_manifest, train_ckpt, train_log;
    ModelFlags train_flags;
    train->add_option("--data", train_data, "dataset root directory")->required();
    train->add_option("--manifest", train_manifest, "split manifest csv")->required();
    train->add_option("--seed", cfg.seed, "master seed (init uses seed+1, training seed+2)");
    train->add_option("--out", train_ckpt, "best-checkpoint output path")->required();
    train->add_option("--log", train_log, "epoch log csv output path")->required();
    train->add_flag("--freeze-backbone", cfg.train.freeze_backbone,
                    "update only the projector head");
    train_flags.add_to(train, cfg);

    // eval
    auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    std::string eval_ckpt, eval_data, eval_manifest, eval_split = "test", eval_out;
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--data", eval_data, "dataset root directory")->required();
    eval->add_option("--manifest", eval_manifest, "split manifest csv")->required();
    eval->add_option("--split", eval_split, "train | validation | test");
    eval->add_option("--out", eval_out, "metrics json output path")->required();

    // zeroshot
    auto *zeroshot =
        app.add_subcommand("zeroshot", "frozen evaluation of freshly initialized weights");
    std::string zs_data, zs_manifest, zs_split = "test", zs_out;
    ModelFlags zs_flags;
    zeroshot->add_option("--data", zs_data, "dataset root directory")->required();
    zeroshot->add_option("--manifest", zs_manifest, "split manifest csv")->required();
    zeroshot->add_option("--split", zs_split, "train | validation | test");
    zeroshot->add_option("--seed", cfg.seed, "master seed (init uses seed+1)");
    zeroshot->add_option("--out", zs_out, "metrics json output path")->required();
    zs_flags.add_to(zeroshot, cfg);

    // roc
    auto *roc = app.add_subcommand("roc", "export one-vs-rest roc curves");
    std::string roc_ckpt, roc_data, roc_manifest, roc_split = "test", roc_out;
    roc->add_option("--ckpt", roc_ckpt, "checkpoint path")->required();
    roc->add_option("--data", roc_data, "dataset root directory")->required();
    roc->add_option("--manifest", roc_manifest, "split manifest csv")->required();
    roc->add_option("--split", roc_split, "train | validation | test");
    roc->add_option("--out", roc_out, "roc csv output path")->required();

    // explain
    auto *explain = app.add_subcommand("explain", "render a relevancy heatmap overlay");
    std::string ex_ckpt, ex_image, ex_out;
    int ex_class = 0;
    explain->add_option("--ckpt", ex_ckpt, "checkpoint path")->required();
    explain->add_option("--image", ex_image, "input image (ppm or bmp)")->required();
    explain->add_option("--class", ex_class, "target class index")->required();
    explain->add_option("--out", ex_out, "overlay ppm output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(per_class, synth_size, cfg.seed, synth_out);
        if (split->parsed()) return cmd_split(split_data, cfg.seed, split_out, cfg.stratified);
        if (train->parsed()) {
            train_flags.resolve(cfg);
            return cmd_train(cfg, train_data, train_manifest, train_ckpt, train_log);
        }
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_manifest, eval_split,
                                            eval_out);
        if (zeroshot->parsed()) {
            zs_flags.resolve(cfg);
            return cmd_zeroshot(cfg, zs_data, zs_manifest, zs_split, zs_out);
        }
        if (roc->parsed()) return cmd_roc(roc_ckpt, roc_data, roc_manifest, roc_split, roc_out);
        if (explain->parsed()) return cmd_explain(ex_ckpt, ex_image, ex_class, ex_out);
    } catch (const DivergedError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
