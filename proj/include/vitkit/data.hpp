#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vitkit/tensor.hpp"

namespace vitkit::data {

// Fixed class mapping: lung_aca -> 0, lung_scc -> 1, lung_n -> 2.
inline constexpr std::array<const char *, 3> kClassNames = {"lung_aca", "lung_scc", "lung_n"};

int class_index(const std::string &name);  // -1 when unknown

struct LabeledImage {
    Tensor pixels;  // [3 x H x W], values in [0, 1]
    int label = -1;
    std::string class_name;
    std::string source_id;
};

struct ManifestRow {
    std::string source_id;
    std::string class_name;
    std::string split;  // train | validation | test
};

struct SplitDataset {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> validation;
    std::vector<LabeledImage> test;
    std::uint64_t seed = 0;
    std::vector<ManifestRow> manifest;  // sorted by source_id
};

// 8-bit interleaved RGB buffer, the unit the codecs speak.
struct ImageU8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> rgb;  // 3 * width * height
};

ImageU8 read_ppm(const std::string &path);         // binary P6, maxval <= 255
void write_ppm(const std::string &path, const ImageU8 &img);
ImageU8 read_bmp(const std::string &path);         // uncompressed 24-bit

Tensor image_to_tensor(const ImageU8 &img);        // [3 x H x W], bytes / 255
ImageU8 tensor_to_image(const Tensor &chw);        // round(clamp(v) * 255)

// Decodes root/{lung_aca,lung_scc,lung_n}/*.{ppm,bmp}; items sorted by
// (label, filename). Unknown subdirectories are ignored with a warning.
std::vector<LabeledImage> load_image_dir(const std::string &root);

// Bilinear, pixel-center sampling; preserves constant images exactly.
Tensor resize_bilinear(const Tensor &chw, std::size_t target);
LabeledImage resize_to_input(const LabeledImage &img, std::size_t target);

// Fisher-Yates shuffle (SplitMix64 stream), then floor(0.6 N) / floor(0.2 N) /
// remainder. Stratified variant shuffles and splits each class separately.
SplitDataset split_dataset(const std::vector<LabeledImage> &items, std::uint64_t seed,
                           bool stratified = false);

// Three textured classes: dominant color channel + class-specific stripe
// frequency + seeded uniform noise; linearly separable in patch statistics.
std::vector<LabeledImage> gen_synthetic(std::size_t per_class, std::size_t image_size,
                                        std::uint64_t seed, double noise_amplitude = 0.1);

void write_manifest_csv(const SplitDataset &split, const std::string &path);
std::vector<ManifestRow> read_manifest_csv(const std::string &path);

// Reassembles a SplitDataset from loaded items plus a manifest; every item
// must be listed and every listed id must exist.
SplitDataset apply_manifest(const std::vector<LabeledImage> &items,
                            const std::vector<ManifestRow> &manifest);

// Standardizes [0,1] pixels with mean 0.5, std 0.5 per channel: the tensor
// the model consumes.
Tensor to_model_input(const LabeledImage &img);

}  // namespace vitkit::data
