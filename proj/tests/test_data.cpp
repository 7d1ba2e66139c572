#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "vitkit/data.hpp"
#include "vitkit/rng.hpp"

using namespace vitkit;
namespace fs = std::filesystem;

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

data::LabeledImage tiny_item(int label, const std::string &id) {
    data::LabeledImage item;
    item.pixels = Tensor::zeros({3, 1, 1});
    item.label = label;
    item.class_name = data::kClassNames[static_cast<std::size_t>(label)];
    item.source_id = id;
    return item;
}

std::vector<data::LabeledImage> numbered_items(std::size_t n) {
    std::vector<data::LabeledImage> items;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "item_%06zu", i);
        items.push_back(tiny_item(static_cast<int>(i % 3), buf));
    }
    return items;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string &name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("ppm round-trips and rejects malformed files") {
    TempDir dir("vitkit_ppm_test");
    data::ImageU8 img;
    img.width = 3;
    img.height = 2;
    img.rgb = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 250, 251, 252, 253, 254, 255};
    const std::string path = (dir.path / "img.ppm").string();
    data::write_ppm(path, img);
    const data::ImageU8 back = data::read_ppm(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.rgb == img.rgb);

    const std::string bad = (dir.path / "bad.ppm").string();
    std::ofstream(bad) << "P5\n1 1\n255\nx";
    CHECK_THROWS_AS(data::read_ppm(bad), DataError);
    const std::string trunc = (dir.path / "trunc.ppm").string();
    std::ofstream(trunc) << "P6\n4 4\n255\nxy";
    CHECK_THROWS_AS(data::read_ppm(trunc), DataError);
}

TEST_CASE("ppm header comments are skipped") {
    TempDir dir("vitkit_ppm_comment");
    const std::string path = (dir.path / "c.ppm").string();
    std::ofstream f(path, std::ios::binary);
    f << "P6\n# a comment line\n2 1\n# another\n255\n";
    const unsigned char px[6] = {10, 20, 30, 40, 50, 60};
    f.write(reinterpret_cast<const char *>(px), 6);
    f.close();
    const data::ImageU8 img = data::read_ppm(path);
    CHECK(img.width == 2);
    CHECK(img.height == 1);
    CHECK(img.rgb == std::vector<unsigned char>{10, 20, 30, 40, 50, 60});
}

TEST_CASE("bmp decodes uncompressed 24-bit bottom-up data") {
    TempDir dir("vitkit_bmp_test");
    const std::string path = (dir.path / "img.bmp").string();
    std::vector<unsigned char> bytes(54 + 16, 0);
    bytes[0] = 'B';
    bytes[1] = 'M';
    bytes[10] = 54;  // pixel offset
    bytes[14] = 40;  // info header size
    bytes[18] = 2;   // width
    bytes[22] = 2;   // height (bottom-up)
    bytes[26] = 1;   // planes
    bytes[28] = 24;  // bpp
    // bottom row: blue pixel, white pixel (BGR order, 2 pad bytes)
    const unsigned char bottom[8] = {255, 0, 0, 255, 255, 255, 0, 0};
    // top row: red pixel, green pixel
    const unsigned char top[8] = {0, 0, 255, 0, 255, 0, 0, 0};
    std::copy(bottom, bottom + 8, bytes.begin() + 54);
    std::copy(top, top + 8, bytes.begin() + 62);
    std::ofstream(path, std::ios::binary)
        .write(reinterpret_cast<const char *>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));

    const data::ImageU8 img = data::read_bmp(path);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    const std::vector<unsigned char> expect = {255, 0,   0,   0,   255, 0,
                                               0,   0,   255, 255, 255, 255};
    CHECK(img.rgb == expect);

    std::vector<unsigned char> rle = bytes;
    rle[30] = 1;  // compression flag
    const std::string bad = (dir.path / "rle.bmp").string();
    std::ofstream(bad, std::ios::binary)
        .write(reinterpret_cast<const char *>(rle.data()), static_cast<std::streamsize>(rle.size()));
    CHECK_THROWS_AS(data::read_bmp(bad), DataError);
}

TEST_CASE("load_image_dir labels and orders a 2+2+2 layout") {
    TempDir dir("vitkit_load_test");
    data::ImageU8 img;
    img.width = 2;
    img.height = 2;
    img.rgb.assign(12, 128);
    for (const char *cls : data::kClassNames) {
        fs::create_directories(dir.path / cls);
        data::write_ppm((dir.path / cls / "b.ppm").string(), img);
        data::write_ppm((dir.path / cls / "a.ppm").string(), img);
    }
    fs::create_directories(dir.path / "colon_aca");  // ignored with a warning

    const auto items = data::load_image_dir(dir.path.string());
    REQUIRE(items.size() == 6);
    const std::vector<int> labels = {items[0].label, items[1].label, items[2].label,
                                     items[3].label, items[4].label, items[5].label};
    CHECK(labels == std::vector<int>{0, 0, 1, 1, 2, 2});
    CHECK(items[0].source_id == "lung_aca/a.ppm");  // filename-sorted inside a class
    CHECK(items[1].source_id == "lung_aca/b.ppm");
    CHECK(items[0].pixels.shape() == std::vector<std::size_t>{3, 2, 2});
    for (double v : items[0].pixels.data()) CHECK(close(v, 128.0 / 255.0, 1e-12));
}

TEST_CASE("load_image_dir reports empty classes and undecodable files") {
    TempDir dir("vitkit_load_err");
    data::ImageU8 img;
    img.width = 1;
    img.height = 1;
    img.rgb.assign(3, 10);
    fs::create_directories(dir.path / "lung_aca");
    fs::create_directories(dir.path / "lung_scc");
    fs::create_directories(dir.path / "lung_n");
    data::write_ppm((dir.path / "lung_aca" / "a.ppm").string(), img);
    data::write_ppm((dir.path / "lung_scc" / "a.ppm").string(), img);
    try {
        data::load_image_dir(dir.path.string());
        FAIL("expected DataError");
    } catch (const DataError &e) {
        CHECK(std::string(e.what()) == "class lung_n has zero images");
    }
    data::write_ppm((dir.path / "lung_n" / "a.ppm").string(), img);
    std::ofstream(dir.path / "lung_n" / "broken.ppm") << "not a ppm";
    try {
        data::load_image_dir(dir.path.string());
        FAIL("expected DataError");
    } catch (const DataError &e) {
        CHECK(std::string(e.what()).find("broken.ppm") != std::string::npos);
    }
}

TEST_CASE("resize keeps constants exact and matches hand-computed averages") {
    Tensor constant = Tensor::full({3, 768, 768}, 0.37);
    const Tensor small = data::resize_bilinear(constant, 224);
    CHECK(small.shape() == std::vector<std::size_t>{3, 224, 224});
    for (double v : small.data()) CHECK(v == 0.37);

    SplitMix64 rng(501);
    Tensor same = Tensor::zeros({3, 224, 224});
    for (double &v : same.data()) v = rng.next_double();
    const Tensor identity = data::resize_bilinear(same, 224);
    CHECK(identity.data() == same.data());

    // 4x4 checkerboard and a 0..15 ramp down to 2x2: each output pixel is the
    // mean of its 2x2 block under center-aligned bilinear weights.
    Tensor checker = Tensor::zeros({1, 4, 4});
    Tensor ramp = Tensor::zeros({1, 4, 4});
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 0; x < 4; ++x) {
            checker.data()[y * 4 + x] = static_cast<double>((x + y) % 2);
            ramp.data()[y * 4 + x] = static_cast<double>(y * 4 + x);
        }
    }
    const Tensor c2 = data::resize_bilinear(checker, 2);
    for (double v : c2.data()) CHECK(close(v, 0.5, 1e-12));
    const Tensor r2 = data::resize_bilinear(ramp, 2);
    CHECK(close(r2.data()[0], 2.5, 1e-12));
    CHECK(close(r2.data()[1], 4.5, 1e-12));
    CHECK(close(r2.data()[2], 10.5, 1e-12));
    CHECK(close(r2.data()[3], 12.5, 1e-12));

    CHECK_THROWS_AS(data::resize_bilinear(Tensor::zeros({3, 4, 6}), 2), ShapeError);
}

TEST_CASE("resize stays within [0,1] on random inputs") {
    for (int seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(600 + seed);
        Tensor img = Tensor::zeros({3, 17, 17});
        for (double &v : img.data()) v = rng.next_double();
        const std::size_t target = 1 + rng.next_below(40);
        const Tensor out = data::resize_bilinear(img, target);
        for (double v : out.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("split honors the 60/20/20 floor rule") {
    {
        const auto split = data::split_dataset(numbered_items(15000), 42);
        CHECK(split.train.size() == 9000);
        CHECK(split.validation.size() == 3000);
        CHECK(split.test.size() == 3000);
    }
    {
        const auto split = data::split_dataset(numbered_items(5), 42);
        CHECK(split.train.size() == 3);
        CHECK(split.validation.size() == 1);
        CHECK(split.test.size() == 1);
    }
    CHECK_THROWS_AS(data::split_dataset(numbered_items(4), 42), DataError);
}

TEST_CASE("split manifests are deterministic per seed") {
    const auto items = numbered_items(100);
    const auto a = data::split_dataset(items, 7);
    const auto b = data::split_dataset(items, 7);
    REQUIRE(a.manifest.size() == b.manifest.size());
    for (std::size_t i = 0; i < a.manifest.size(); ++i) {
        CHECK(a.manifest[i].source_id == b.manifest[i].source_id);
        CHECK(a.manifest[i].split == b.manifest[i].split);
    }
    int differing = 0;
    for (int seed = 1; seed <= 10; ++seed) {
        const auto c = data::split_dataset(items, 7 + static_cast<std::uint64_t>(seed));
        bool same = true;
        for (std::size_t i = 0; i < a.manifest.size(); ++i) {
            same = same && a.manifest[i].split == c.manifest[i].split;
        }
        differing += same ? 0 : 1;
    }
    CHECK(differing == 10);
}

TEST_CASE("splits are disjoint and exhaustive for random sizes") {
    SplitMix64 rng(603);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 5 + rng.next_below(496);
        const auto split = data::split_dataset(numbered_items(n), rng.next_u64());
        CHECK(split.train.size() + split.validation.size() + split.test.size() == n);
        std::set<std::string> seen;
        for (const auto *part : {&split.train, &split.validation, &split.test}) {
            for (const auto &item : *part) {
                CHECK(seen.insert(item.source_id).second);  // disjoint
            }
        }
        CHECK(seen.size() == n);  // exhaustive
        CHECK(split.train.size() == n * 6 / 10);
        CHECK(split.validation.size() == n * 2 / 10);
    }
}

TEST_CASE("class proportions stay near one third in expectation") {
    // Expected (seed-averaged) class fractions per split; single 60-item
    // splits fluctuate by design of the plain shuffle.
    const auto items = numbered_items(300);
    double mean_frac[3][3] = {};  // [split role][class]
    const int seeds = 50;
    for (int seed = 0; seed < seeds; ++seed) {
        const auto split = data::split_dataset(items, 9000 + static_cast<std::uint64_t>(seed));
        const std::vector<data::LabeledImage> *parts[3] = {&split.train, &split.validation,
                                                           &split.test};
        for (std::size_t s = 0; s < 3; ++s) {
            std::size_t counts[3] = {0, 0, 0};
            for (const auto &item : *parts[s]) ++counts[item.label];
            for (std::size_t c = 0; c < 3; ++c) {
                mean_frac[s][c] += static_cast<double>(counts[c]) /
                                   static_cast<double>(parts[s]->size()) / seeds;
            }
        }
    }
    for (auto &split_fracs : mean_frac) {
        for (double frac : split_fracs) {
            CHECK(std::abs(frac - 1.0 / 3.0) <= 0.10);
        }
    }
}

TEST_CASE("stratified split keeps classes exactly balanced") {
    const auto split = data::split_dataset(numbered_items(300), 11, true);
    for (const auto *part : {&split.train, &split.validation, &split.test}) {
        std::size_t counts[3] = {0, 0, 0};
        for (const auto &item : *part) ++counts[item.label];
        CHECK(counts[0] == counts[1]);
        CHECK(counts[1] == counts[2]);
    }
    CHECK(split.train.size() == 180);
    CHECK(split.validation.size() == 60);
    CHECK(split.test.size() == 60);
}

TEST_CASE("synthetic data is labeled, separable and deterministic") {
    const auto items = data::gen_synthetic(10, 16, 77);
    REQUIRE(items.size() == 30);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto &item : items) {
        ++counts[item.label];
        for (double v : item.pixels.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK(counts[0] == 10);
    CHECK(counts[1] == 10);
    CHECK(counts[2] == 10);

    const auto again = data::gen_synthetic(10, 16, 77);
    for (std::size_t i = 0; i < items.size(); ++i) {
        CHECK(items[i].pixels.data() == again[i].pixels.data());
        CHECK(items[i].source_id == again[i].source_id);
    }

    // noiseless per-class means are pairwise far apart
    const auto clean = data::gen_synthetic(5, 16, 78, 0.0);
    std::vector<std::vector<double>> mean(3, std::vector<double>(3 * 16 * 16, 0.0));
    for (const auto &item : clean) {
        for (std::size_t i = 0; i < item.pixels.numel(); ++i) {
            mean[item.label][i] += item.pixels.data()[i] / 5.0;
        }
    }
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b) {
            double l2 = 0.0;
            for (std::size_t i = 0; i < mean[a].size(); ++i) {
                const double d = mean[a][i] - mean[b][i];
                l2 += d * d;
            }
            CHECK(std::sqrt(l2) > 0.1);
        }
    }
}

TEST_CASE("manifest csv round-trips and rebuilds the split") {
    TempDir dir("vitkit_manifest_test");
    const auto items = numbered_items(50);
    const auto split = data::split_dataset(items, 13);
    const std::string path = (dir.path / "manifest.csv").string();
    data::write_manifest_csv(split, path);

    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "source_id,class_name,split");

    const auto rows = data::read_manifest_csv(path);
    REQUIRE(rows.size() == split.manifest.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i - 1].source_id < rows[i].source_id);  // sorted by source_id
    }
    const auto rebuilt = data::apply_manifest(items, rows);
    CHECK(rebuilt.train.size() == split.train.size());
    CHECK(rebuilt.validation.size() == split.validation.size());
    CHECK(rebuilt.test.size() == split.test.size());

    auto missing = rows;
    missing.pop_back();
    CHECK_THROWS_AS(data::apply_manifest(items, missing), DataError);
}

TEST_CASE("model input standardization maps [0,1] to [-1,1]") {
    data::LabeledImage item = tiny_item(0, "x");
    item.pixels.data() = {0.0, 0.5, 1.0};
    const Tensor input = data::to_model_input(item);
    CHECK(input.data() == std::vector<double>{-1.0, 0.0, 1.0});
}
