#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "vitkit/interpret.hpp"
#include "vitkit/rng.hpp"

using namespace vitkit;
namespace fs = std::filesystem;

namespace {

Tensor random_pixels(std::size_t size, SplitMix64 &rng) {
    Tensor t = Tensor::zeros({3, size, size});
    for (double &v : t.data()) v = rng.next_double();
    return t;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string slurp(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("zeroed head yields the identity propagation and an all-zero map") {
    SplitMix64 rng(901);
    ViTParams params = init_params(vit_tiny_config(), 90);
    for (double &v : params.head_fc2_weight.data()) v = 0.0;
    for (double &v : params.head_fc2_bias.data()) v = 0.0;
    const Tensor image = random_pixels(32, rng);
    const auto map = interpret::relevancy(params, image, 1, "zero-head");
    CHECK(map.grid == 4);
    REQUIRE(map.values.size() == 16);
    for (double v : map.values) CHECK(v == 0.0);
}

TEST_CASE("relevancy entries are nonnegative on randomized inputs") {
    const ViTConfig cfg = vit_tiny_config();
    for (int trial = 0; trial < 100; ++trial) {
        SplitMix64 rng(1000 + trial);
        const ViTParams params = init_params(cfg, 2000 + static_cast<std::uint64_t>(trial));
        const Tensor image = random_pixels(32, rng);
        const int target = static_cast<int>(rng.next_below(3));
        const auto map = interpret::relevancy(params, image, target);
        for (double v : map.values) {
            CHECK(v >= 0.0);
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("single-block map matches the re-composition oracle") {
    ViTConfig cfg = vit_tiny_config();
    cfg.depth = 1;
    for (int trial = 0; trial < 5; ++trial) {
        SplitMix64 rng(1100 + trial);
        const ViTParams params = init_params(cfg, 60 + static_cast<std::uint64_t>(trial));
        const Tensor image = random_pixels(32, rng);
        const int target = static_cast<int>(rng.next_below(3));
        const auto map = interpret::relevancy(params, image, target);

        // Re-derive Abar from a fresh traced forward/backward, then compose
        // R = I + Abar * I by hand; the map is row 0 over the patch columns.
        Tensor input = image.clone();
        for (double &v : input.data()) v = (v - 0.5) / 0.5;
        input.set_requires_grad(true);
        ForwardOptions opts;
        opts.retain_attention = true;
        const ForwardTrace trace = vit_forward(params, input, opts);
        backward(sum(slice_cols(trace.logits, static_cast<std::size_t>(target), 1)));
        const std::size_t t = cfg.tokens();
        std::vector<double> abar(t * t, 0.0);
        for (const Tensor &head : trace.attention.at(0)) {
            for (std::size_t k = 0; k < t * t; ++k) {
                abar[k] += std::max(0.0, head.data()[k] * head.grad()[k]) /
                           static_cast<double>(cfg.heads);
            }
        }
        for (std::size_t j = 0; j < cfg.num_patches(); ++j) {
            CHECK(close(map.values[j], abar[0 * t + (j + 1)], 1e-10));
        }
    }
}

TEST_CASE("relevancy is deterministic and validates the class index") {
    SplitMix64 rng(902);
    const ViTParams params = init_params(vit_tiny_config(), 91);
    const Tensor image = random_pixels(32, rng);
    const auto a = interpret::relevancy(params, image, 2);
    const auto b = interpret::relevancy(params, image, 2);
    CHECK(a.values == b.values);
    CHECK_THROWS_AS(interpret::relevancy(params, image, 7), ValueError);
    CHECK_THROWS_AS(interpret::relevancy(params, image, -1), ValueError);
}

TEST_CASE("min-max normalization keeps the argmax patch") {
    SplitMix64 rng(903);
    const ViTParams params = init_params(vit_tiny_config(), 92);
    const Tensor image = random_pixels(32, rng);
    const auto map = interpret::relevancy(params, image, 0);
    const auto argmax =
        std::max_element(map.values.begin(), map.values.end()) - map.values.begin();
    double lo = map.values[0], hi = map.values[0];
    for (double v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    REQUIRE(hi > lo);
    std::vector<double> norm(map.values.size());
    for (std::size_t i = 0; i < norm.size(); ++i) norm[i] = (map.values[i] - lo) / (hi - lo);
    const auto argmax_norm = std::max_element(norm.begin(), norm.end()) - norm.begin();
    CHECK(argmax == argmax_norm);
}

TEST_CASE("render blends a flat map into a uniform blue tint") {
    const fs::path dir = fs::temp_directory_path() / "vitkit_render_flat";
    fs::create_directories(dir);
    interpret::RelevancyMap map;
    map.grid = 4;
    map.values.assign(16, 0.0);
    data::LabeledImage image;
    image.pixels = Tensor::full({3, 32, 32}, 0.5);
    const std::string out = (dir / "flat.ppm").string();
    interpret::render_heatmap(map, image, out);
    const data::ImageU8 ppm = data::read_ppm(out);
    REQUIRE(ppm.width == 32);
    // overlay = 0.5 * 0.5 + 0.5 * colormap(0) = (0.25, 0.25, 0.75)
    for (std::size_t i = 0; i < ppm.rgb.size(); i += 3) {
        CHECK(ppm.rgb[i + 0] == std::lround(0.25 * 255));
        CHECK(ppm.rgb[i + 1] == std::lround(0.25 * 255));
        CHECK(ppm.rgb[i + 2] == std::lround(0.75 * 255));
    }
    CHECK(fs::exists(out + ".csv"));
    fs::remove_all(dir);
}

TEST_CASE("a single hot patch renders most red inside its footprint") {
    const fs::path dir = fs::temp_directory_path() / "vitkit_render_hot";
    fs::create_directories(dir);
    interpret::RelevancyMap map;
    map.grid = 4;
    map.values.assign(16, 0.0);
    map.values[2 * 4 + 1] = 5.0;  // patch row 2, col 1
    data::LabeledImage image;
    image.pixels = Tensor::full({3, 32, 32}, 0.5);
    const std::string out = (dir / "hot.ppm").string();
    interpret::render_heatmap(map, image, out);
    const data::ImageU8 ppm = data::read_ppm(out);
    unsigned best_red = 0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < ppm.rgb.size(); i += 3) {
        if (ppm.rgb[i] > best_red) {
            best_red = ppm.rgb[i];
            best_idx = i / 3;
        }
    }
    const std::size_t y = best_idx / 32, x = best_idx % 32;
    CHECK(y >= 2 * 8);
    CHECK(y < 3 * 8);
    CHECK(x >= 1 * 8);
    CHECK(x < 2 * 8);
    fs::remove_all(dir);
}

TEST_CASE("render is deterministic and checks geometry") {
    SplitMix64 rng(904);
    const fs::path dir = fs::temp_directory_path() / "vitkit_render_det";
    fs::create_directories(dir);
    const ViTParams params = init_params(vit_tiny_config(), 93);
    data::LabeledImage image;
    image.pixels = random_pixels(32, rng);
    const auto map = interpret::relevancy(params, image.pixels, 1, "det");
    const std::string p1 = (dir / "a.ppm").string();
    const std::string p2 = (dir / "b.ppm").string();
    interpret::render_heatmap(map, image, p1);
    interpret::render_heatmap(map, image, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(slurp(p1 + ".csv") == slurp(p2 + ".csv"));

    // csv layout: grid rows x grid comma-separated columns
    std::ifstream csv(p1 + ".csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        CHECK(std::count(line.begin(), line.end(), ',') == 3);
        ++rows;
    }
    CHECK(rows == 4);

    data::LabeledImage wrong;
    wrong.pixels = Tensor::full({3, 30, 30}, 0.1);  // 4 does not tile 30
    CHECK_THROWS_AS(interpret::render_heatmap(map, wrong, (dir / "c.ppm").string()), ShapeError);
    fs::remove_all(dir);
}
