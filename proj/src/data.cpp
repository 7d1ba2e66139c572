#include "vitkit/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace vitkit::data {

int class_index(const std::string &name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (name == kClassNames[i]) return static_cast<int>(i);
    }
    return -1;
}

// --- codecs -------------------------------------------------------------------

namespace {

int next_header_token(std::istream &in, const std::string &path) {
    // Skips whitespace and '#' comments, then reads one unsigned integer.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw DataError("ppm: malformed header in " + path);
    long value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        if (value > 1'000'000'000L) throw DataError("ppm: header value too large in " + path);
        c = in.get();
    }
    if (c != EOF) in.unget();
    return static_cast<int>(value);
}

}  // namespace

ImageU8 read_ppm(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("ppm: cannot open " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '6') throw DataError("ppm: not a binary P6 file: " + path);
    const int width = next_header_token(f, path);
    const int height = next_header_token(f, path);
    const int maxval = next_header_token(f, path);
    if (width <= 0 || height <= 0) throw DataError("ppm: bad dimensions in " + path);
    if (maxval <= 0 || maxval > 255) {
        throw DataError("ppm: unsupported maxval " + std::to_string(maxval) + " in " + path);
    }
    f.get();  // single whitespace byte after maxval
    ImageU8 img;
    img.width = static_cast<std::size_t>(width);
    img.height = static_cast<std::size_t>(height);
    img.rgb.resize(3 * img.width * img.height);
    f.read(reinterpret_cast<char *>(img.rgb.data()),
           static_cast<std::streamsize>(img.rgb.size()));
    if (static_cast<std::size_t>(f.gcount()) != img.rgb.size()) {
        throw DataError("ppm: truncated pixel data in " + path);
    }
    if (maxval != 255) {
        for (unsigned char &b : img.rgb) {
            b = static_cast<unsigned char>(std::lround(b * 255.0 / maxval));
        }
    }
    return img;
}

void write_ppm(const std::string &path, const ImageU8 &img) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("ppm: cannot open " + path + " for writing");
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char *>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    if (!f) throw IoError("ppm: write failed for " + path);
}

ImageU8 read_bmp(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("bmp: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M') {
        throw DataError("bmp: not an uncompressed BMP file: " + path);
    }
    auto u16 = [&](std::size_t off) -> std::uint32_t {
        return bytes[off] | (static_cast<std::uint32_t>(bytes[off + 1]) << 8);
    };
    auto u32 = [&](std::size_t off) -> std::uint32_t {
        return bytes[off] | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
               (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
               (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
    };
    const std::uint32_t pixel_offset = u32(10);
    const std::uint32_t header_size = u32(14);
    if (header_size < 40) throw DataError("bmp: unsupported header in " + path);
    const auto width = static_cast<std::int32_t>(u32(18));
    const auto raw_height = static_cast<std::int32_t>(u32(22));
    const std::uint32_t planes = u16(26);
    const std::uint32_t bpp = u16(28);
    const std::uint32_t compression = u32(30);
    if (planes != 1 || bpp != 24 || compression != 0) {
        throw DataError("bmp: only uncompressed 24-bit supported: " + path);
    }
    if (width <= 0 || raw_height == 0) throw DataError("bmp: bad dimensions in " + path);
    const bool top_down = raw_height < 0;
    const std::int32_t height = top_down ? -raw_height : raw_height;
    const std::size_t row_stride = (static_cast<std::size_t>(width) * 3 + 3) / 4 * 4;
    if (bytes.size() < pixel_offset + row_stride * static_cast<std::size_t>(height)) {
        throw DataError("bmp: truncated pixel data in " + path);
    }
    ImageU8 img;
    img.width = static_cast<std::size_t>(width);
    img.height = static_cast<std::size_t>(height);
    img.rgb.resize(3 * img.width * img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        const std::size_t src_row = top_down ? y : img.height - 1 - y;
        const unsigned char *src = bytes.data() + pixel_offset + src_row * row_stride;
        for (std::size_t x = 0; x < img.width; ++x) {
            img.rgb[3 * (y * img.width + x) + 0] = src[3 * x + 2];  // BGR -> RGB
            img.rgb[3 * (y * img.width + x) + 1] = src[3 * x + 1];
            img.rgb[3 * (y * img.width + x) + 2] = src[3 * x + 0];
        }
    }
    return img;
}

Tensor image_to_tensor(const ImageU8 &img) {
    Tensor t = Tensor::zeros({3, img.height, img.width});
    auto &d = t.data();
    const std::size_t plane = img.width * img.height;
    for (std::size_t i = 0; i < plane; ++i) {
        d[0 * plane + i] = img.rgb[3 * i + 0] / 255.0;
        d[1 * plane + i] = img.rgb[3 * i + 1] / 255.0;
        d[2 * plane + i] = img.rgb[3 * i + 2] / 255.0;
    }
    return t;
}

ImageU8 tensor_to_image(const Tensor &chw) {
    if (chw.rank() != 3 || chw.dim(0) != 3) {
        throw ShapeError("tensor_to_image: expected [3 x H x W], got " + shape_str(chw.shape()));
    }
    ImageU8 img;
    img.height = chw.dim(1);
    img.width = chw.dim(2);
    img.rgb.resize(3 * img.width * img.height);
    const std::size_t plane = img.width * img.height;
    const auto &d = chw.data();
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::clamp(d[c * plane + i], 0.0, 1.0);
            img.rgb[3 * i + c] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
    }
    return img;
}

// --- loading ------------------------------------------------------------------

namespace {

std::string lower_ext(const fs::path &p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

}  // namespace

std::vector<LabeledImage> load_image_dir(const std::string &root) {
    if (!fs::is_directory(root)) throw IoError("load_image_dir: " + root + " is not a directory");
    for (const auto &entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && class_index(entry.path().filename().string()) < 0) {
            std::cerr << "warning: ignoring unknown subdirectory "
                      << entry.path().filename().string() << "\n";
        }
    }
    std::vector<LabeledImage> items;
    for (std::size_t label = 0; label < kClassNames.size(); ++label) {
        const std::string class_name = kClassNames[label];
        const fs::path dir = fs::path(root) / class_name;
        std::vector<fs::path> files;
        if (fs::is_directory(dir)) {
            for (const auto &entry : fs::directory_iterator(dir)) {
                if (!entry.is_regular_file()) continue;
                const std::string ext = lower_ext(entry.path());
                if (ext == ".ppm" || ext == ".bmp") files.push_back(entry.path());
            }
        }
        if (files.empty()) {
            throw DataError("class " + class_name + " has zero images");
        }
        std::sort(files.begin(), files.end(),
                  [](const fs::path &a, const fs::path &b) { return a.filename() < b.filename(); });
        for (const fs::path &file : files) {
            ImageU8 raw;
            try {
                raw = lower_ext(file) == ".bmp" ? read_bmp(file.string()) : read_ppm(file.string());
            } catch (const IoError &) {
                throw;
            } catch (const Error &e) {
                throw DataError("undecodable file " + file.string() + ": " + e.what());
            }
            LabeledImage item;
            item.pixels = image_to_tensor(raw);
            item.label = static_cast<int>(label);
            item.class_name = class_name;
            item.source_id = class_name + "/" + file.filename().string();
            items.push_back(std::move(item));
        }
    }
    return items;
}

// --- resize -------------------------------------------------------------------

Tensor resize_bilinear(const Tensor &chw, std::size_t target) {
    if (chw.rank() != 3) {
        throw ShapeError("resize: expected [C x H x W], got " + shape_str(chw.shape()));
    }
    const std::size_t channels = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    if (h != w) throw ShapeError("resize: non-square input " + shape_str(chw.shape()));
    if (target == 0) throw ShapeError("resize: zero target size");
    const std::size_t n = h;
    Tensor out = Tensor::zeros({channels, target, target});
    const auto &src = chw.data();
    auto &dst = out.data();
    const double ratio = static_cast<double>(n) / static_cast<double>(target);
    // lerp written as a + t*(b-a) so constant inputs survive bit-exactly
    auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
    for (std::size_t oy = 0; oy < target; ++oy) {
        const double sy = (static_cast<double>(oy) + 0.5) * ratio - 0.5;
        const auto y0 =
            static_cast<std::size_t>(std::clamp(std::floor(sy), 0.0, static_cast<double>(n - 1)));
        const std::size_t y1 = std::min(y0 + 1, n - 1);
        const double ty = (sy < 0.0) ? 0.0 : sy - std::floor(sy);
        for (std::size_t ox = 0; ox < target; ++ox) {
            const double sx = (static_cast<double>(ox) + 0.5) * ratio - 0.5;
            const auto x0 = static_cast<std::size_t>(
                std::clamp(std::floor(sx), 0.0, static_cast<double>(n - 1)));
            const std::size_t x1 = std::min(x0 + 1, n - 1);
            const double tx = (sx < 0.0) ? 0.0 : sx - std::floor(sx);
            for (std::size_t c = 0; c < channels; ++c) {
                const double *plane = src.data() + c * n * n;
                const double top = lerp(plane[y0 * n + x0], plane[y0 * n + x1], tx);
                const double bottom = lerp(plane[y1 * n + x0], plane[y1 * n + x1], tx);
                dst[c * target * target + oy * target + ox] = lerp(top, bottom, ty);
            }
        }
    }
    return out;
}

LabeledImage resize_to_input(const LabeledImage &img, std::size_t target) {
    LabeledImage out = img;
    out.pixels = resize_bilinear(img.pixels, target);
    return out;
}

// --- splitting ----------------------------------------------------------------

namespace {

void append_split(SplitDataset &out, const std::vector<LabeledImage> &shuffled) {
    const std::size_t n = shuffled.size();
    const std::size_t n_train = n * 6 / 10;  // floor(0.6 N) in exact integer math
    const std::size_t n_val = n * 2 / 10;    // floor(0.2 N)
    for (std::size_t i = 0; i < n; ++i) {
        const LabeledImage &item = shuffled[i];
        const char *split_name = i < n_train           ? "train"
                                 : i < n_train + n_val ? "validation"
                                                       : "test";
        if (i < n_train) {
            out.train.push_back(item);
        } else if (i < n_train + n_val) {
            out.validation.push_back(item);
        } else {
            out.test.push_back(item);
        }
        out.manifest.push_back({item.source_id, item.class_name, split_name});
    }
}

}  // namespace

SplitDataset split_dataset(const std::vector<LabeledImage> &items, std::uint64_t seed,
                           bool stratified) {
    if (items.size() < 5) {
        throw DataError("split_dataset: need at least 5 items, got " +
                        std::to_string(items.size()));
    }
    SplitDataset out;
    out.seed = seed;
    SplitMix64 rng(seed);
    if (stratified) {
        for (std::size_t label = 0; label < kClassNames.size(); ++label) {
            std::vector<LabeledImage> group;
            for (const LabeledImage &item : items) {
                if (item.label == static_cast<int>(label)) group.push_back(item);
            }
            fisher_yates_shuffle(group, rng);
            append_split(out, group);
        }
    } else {
        std::vector<LabeledImage> shuffled = items;
        fisher_yates_shuffle(shuffled, rng);
        append_split(out, shuffled);
    }
    std::sort(out.manifest.begin(), out.manifest.end(),
              [](const ManifestRow &a, const ManifestRow &b) { return a.source_id < b.source_id; });
    return out;
}

// --- synthetic generator --------------------------------------------------------

std::vector<LabeledImage> gen_synthetic(std::size_t per_class, std::size_t image_size,
                                        std::uint64_t seed, double noise_amplitude) {
    if (per_class == 0) throw DataError("gen_synthetic: per_class must be >= 1");
    if (image_size == 0) throw DataError("gen_synthetic: image_size must be >= 1");
    std::vector<LabeledImage> items;
    items.reserve(3 * per_class);
    SplitMix64 rng(seed);
    const std::size_t plane = image_size * image_size;
    for (std::size_t label = 0; label < 3; ++label) {
        const double stripe_freq = 2.0 * static_cast<double>(label + 1);
        for (std::size_t idx = 0; idx < per_class; ++idx) {
            Tensor pixels = Tensor::zeros({3, image_size, image_size});
            auto &d = pixels.data();
            for (std::size_t y = 0; y < image_size; ++y) {
                const double stripe =
                    0.15 * std::sin(6.283185307179586 * stripe_freq * static_cast<double>(y) /
                                    static_cast<double>(image_size));
                for (std::size_t x = 0; x < image_size; ++x) {
                    const double noise = noise_amplitude * (2.0 * rng.next_double() - 1.0);
                    for (std::size_t c = 0; c < 3; ++c) {
                        const double base = (c == label) ? 0.7 : 0.2;
                        d[c * plane + y * image_size + x] =
                            std::clamp(base + stripe + noise, 0.0, 1.0);
                    }
                }
            }
            char name[64];
            std::snprintf(name, sizeof(name), "synth_%04zu.ppm", idx);
            LabeledImage item;
            item.pixels = std::move(pixels);
            item.label = static_cast<int>(label);
            item.class_name = kClassNames[label];
            item.source_id = item.class_name + std::string("/") + name;
            items.push_back(std::move(item));
        }
    }
    return items;
}

// --- manifest -------------------------------------------------------------------

void write_manifest_csv(const SplitDataset &split, const std::string &path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("manifest: cannot open " + path + " for writing");
    f << "source_id,class_name,split\n";
    for (const ManifestRow &row : split.manifest) {
        f << row.source_id << "," << row.class_name << "," << row.split << "\n";
    }
    if (!f) throw IoError("manifest: write failed for " + path);
}

std::vector<ManifestRow> read_manifest_csv(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw IoError("manifest: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "source_id,class_name,split") {
        throw DataError("manifest: bad header in " + path);
    }
    std::vector<ManifestRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw DataError("manifest: malformed row \"" + line + "\" in " + path);
        }
        ManifestRow row;
        row.source_id = line.substr(0, c1);
        row.class_name = line.substr(c1 + 1, c2 - c1 - 1);
        row.split = line.substr(c2 + 1);
        if (row.split != "train" && row.split != "validation" && row.split != "test") {
            throw DataError("manifest: unknown split \"" + row.split + "\" in " + path);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

SplitDataset apply_manifest(const std::vector<LabeledImage> &items,
                            const std::vector<ManifestRow> &manifest) {
    SplitDataset out;
    out.manifest = manifest;
    std::vector<std::pair<std::string, std::size_t>> index;
    index.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) index.emplace_back(items[i].source_id, i);
    std::sort(index.begin(), index.end());
    auto find_item = [&](const std::string &id) -> const LabeledImage & {
        auto it = std::lower_bound(index.begin(), index.end(), id,
                                   [](const auto &p, const std::string &v) { return p.first < v; });
        if (it == index.end() || it->first != id) {
            throw DataError("manifest: source_id " + id + " not found in the data directory");
        }
        return items[it->second];
    };
    std::size_t listed = 0;
    for (const ManifestRow &row : manifest) {
        const LabeledImage &item = find_item(row.source_id);
        ++listed;
        if (row.split == "train") {
            out.train.push_back(item);
        } else if (row.split == "validation") {
            out.validation.push_back(item);
        } else {
            out.test.push_back(item);
        }
    }
    if (listed != items.size()) {
        throw DataError("manifest: lists " + std::to_string(listed) + " items, directory has " +
                        std::to_string(items.size()));
    }
    return out;
}

Tensor to_model_input(const LabeledImage &img) {
    Tensor out = img.pixels.clone();
    for (double &v : out.data()) v = (v - 0.5) / 0.5;
    return out;
}

}  // namespace vitkit::data
