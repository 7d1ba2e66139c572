#pragma once

#include <array>
#include <string>
#include <vector>

#include "vitkit/data.hpp"
#include "vitkit/vit.hpp"

namespace vitkit::interpret {

// Per-patch nonnegative attribution grid for one image and one target class.
struct RelevancyMap {
    std::size_t grid = 0;        // P = image_size / patch_size
    std::vector<double> values;  // P*P, row-major, all >= 0
    int target_class = -1;
    std::string source_id;

    double at(std::size_t row, std::size_t col) const { return values[row * grid + col]; }
};

// Gradient-weighted attention composition: starting from R = I over tokens,
// each block contributes R += Abar * R where Abar is the head-mean of the
// positive part of (attention (*) d logit_target / d attention). The map is
// the class-token row of R over the patch tokens, reshaped to P x P.
// `image` is the [3 x H x W] pixel tensor in [0, 1].
RelevancyMap relevancy(const ViTParams &params, const Tensor &image, int target_class,
                       const std::string &source_id = "");

// 256-entry blue-to-red colormap: index i maps to (i, 0, 255 - i).
std::array<unsigned char, 3> colormap_blue_red(double value01);

// Min-max normalizes the map (all-equal maps become all zeros), bilinearly
// upsamples it to the image size and blends 0.5 * image + 0.5 * colormap.
// Writes the overlay as binary PPM to `out_path` and the raw map values as
// CSV (17 significant digits) to `out_path` + ".csv".
void render_heatmap(const RelevancyMap &map, const data::LabeledImage &image,
                    const std::string &out_path);

void write_map_csv(const RelevancyMap &map, const std::string &path);

}  // namespace vitkit::interpret
