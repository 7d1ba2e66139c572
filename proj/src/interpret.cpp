#include "vitkit/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "vitkit/kernels.hpp"

namespace vitkit::interpret {

RelevancyMap relevancy(const ViTParams &params, const Tensor &image, int target_class,
                       const std::string &source_id) {
    const ViTConfig &cfg = params.config;
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= cfg.num_classes) {
        throw ValueError("relevancy: class " + std::to_string(target_class) + " outside [0, " +
                         std::to_string(cfg.num_classes) + ")");
    }

    // The image is the differentiable leaf; attention tensors pick up their
    // gradients as intermediates of the recorded graph.
    Tensor input = image.clone();
    for (double &v : input.data()) v = (v - 0.5) / 0.5;
    input.set_requires_grad(true);

    ForwardOptions opts;
    opts.retain_attention = true;
    ForwardTrace trace = vit_forward(params, input, opts);
    if (trace.attention.empty()) {
        throw Error("relevancy: forward trace did not retain attention");
    }
    Tensor target_logit = sum(slice_cols(trace.logits, static_cast<std::size_t>(target_class), 1));
    backward(target_logit);

    const std::size_t t = cfg.tokens();
    std::vector<double> r(t * t, 0.0);
    for (std::size_t i = 0; i < t; ++i) r[i * t + i] = 1.0;

    std::vector<double> abar(t * t);
    std::vector<double> next(t * t);
    const double head_weight = 1.0 / static_cast<double>(cfg.heads);
    for (const std::vector<Tensor> &heads : trace.attention) {
        std::fill(abar.begin(), abar.end(), 0.0);
        for (const Tensor &attn : heads) {
            const auto &a = attn.data();
            const auto &g = attn.grad();
            for (std::size_t k = 0; k < t * t; ++k) {
                abar[k] += head_weight * std::max(0.0, a[k] * g[k]);
            }
        }
        // R <- R + Abar * R
        next = r;
        kernels::gemm(false, false, t, t, t, abar.data(), r.data(), next.data(), true);
        r.swap(next);
    }

    RelevancyMap map;
    map.grid = cfg.grid();
    map.target_class = target_class;
    map.source_id = source_id;
    map.values.resize(cfg.num_patches());
    for (std::size_t j = 0; j < cfg.num_patches(); ++j) {
        map.values[j] = r[0 * t + (j + 1)];  // class-token row, patch columns
    }
    for (double v : map.values) {
        if (!std::isfinite(v)) throw ValueError("relevancy: non-finite map entry");
    }
    return map;
}

std::array<unsigned char, 3> colormap_blue_red(double value01) {
    const double v = std::clamp(value01, 0.0, 1.0);
    const auto idx = static_cast<unsigned>(std::lround(v * 255.0));
    return {static_cast<unsigned char>(idx), 0, static_cast<unsigned char>(255 - idx)};
}

void write_map_csv(const RelevancyMap &map, const std::string &path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("relevancy csv: cannot open " + path + " for writing");
    char buf[64];
    for (std::size_t row = 0; row < map.grid; ++row) {
        for (std::size_t col = 0; col < map.grid; ++col) {
            std::snprintf(buf, sizeof(buf), "%.17g", map.at(row, col));
            f << (col ? "," : "") << buf;
        }
        f << "\n";
    }
    if (!f) throw IoError("relevancy csv: write failed for " + path);
}

void render_heatmap(const RelevancyMap &map, const data::LabeledImage &image,
                    const std::string &out_path) {
    const Tensor &pixels = image.pixels;
    if (pixels.rank() != 3 || pixels.dim(1) != pixels.dim(2)) {
        throw ShapeError("render_heatmap: image must be square [C x S x S], got " +
                         shape_str(pixels.shape()));
    }
    const std::size_t size = pixels.dim(1);
    if (map.grid == 0 || size % map.grid != 0) {
        throw ShapeError("render_heatmap: grid " + std::to_string(map.grid) +
                         " does not tile image size " + std::to_string(size));
    }

    // Min-max normalize; a flat map renders as all zeros.
    double lo = map.values[0], hi = map.values[0];
    for (double v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor norm = Tensor::zeros({1, map.grid, map.grid});
    if (hi > lo) {
        for (std::size_t i = 0; i < map.values.size(); ++i) {
            norm.data()[i] = (map.values[i] - lo) / (hi - lo);
        }
    }
    const Tensor up = data::resize_bilinear(norm, size);

    data::ImageU8 out;
    out.width = size;
    out.height = size;
    out.rgb.resize(3 * size * size);
    const std::size_t plane = size * size;
    for (std::size_t i = 0; i < plane; ++i) {
        const auto heat = colormap_blue_red(up.data()[i]);
        for (std::size_t c = 0; c < 3; ++c) {
            const double blended =
                0.5 * std::clamp(pixels.data()[c * plane + i], 0.0, 1.0) + 0.5 * heat[c] / 255.0;
            out.rgb[3 * i + c] = static_cast<unsigned char>(std::lround(blended * 255.0));
        }
    }
    data::write_ppm(out_path, out);
    write_map_csv(map, out_path + ".csv");
}

}  // namespace vitkit::interpret
