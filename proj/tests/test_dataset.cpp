#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "sinet/dataset.hpp"
#include "sinet/image_io.hpp"
#include "sinet/init.hpp"
#include "sinet/metrics.hpp"

using namespace sinet;
namespace fs = std::filesystem;

namespace {

// Scratch directory cleaned up on scope exit.
struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("sinet_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

BinaryMask block_mask(int h, int w, int r0, int r1, int c0, int c1) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w, 0);
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) v[static_cast<std::size_t>(r) * w + c] = 1;
    return BinaryMask::from_values(h, w, std::move(v));
}

// mask with exactly `count` foreground pixels, filled row-major from (0,0)
BinaryMask counted_mask(int h, int w, int count) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w, 0);
    for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = 1;
    return BinaryMask::from_values(h, w, std::move(v));
}

std::vector<std::uint8_t> mask_bytes(const BinaryMask& m) {
    std::vector<std::uint8_t> bytes(m.numel());
    for (std::size_t i = 0; i < m.numel(); ++i) bytes[i] = m.values[i] ? 255 : 0;
    return bytes;
}

void write_mask_png(const std::string& path, const BinaryMask& m) {
    write_png(path, m.height, m.width, 1, mask_bytes(m));
}

ImageU8 solid_image(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    ImageU8 img;
    img.height = h;
    img.width = w;
    img.channels = 3;
    img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
        img.pixels[i * 3 + 0] = r;
        img.pixels[i * 3 + 1] = g;
        img.pixels[i * 3 + 2] = b;
    }
    return img;
}

// image colored `fg` where the mask is set and `bg` elsewhere
ImageU8 two_tone_image(const BinaryMask& m, std::array<std::uint8_t, 3> fg,
                       std::array<std::uint8_t, 3> bg) {
    ImageU8 img = solid_image(m.height, m.width, bg[0], bg[1], bg[2]);
    for (std::size_t i = 0; i < m.numel(); ++i)
        if (m.values[i])
            for (int ch = 0; ch < 3; ++ch) img.pixels[i * 3 + ch] = fg[static_cast<std::size_t>(ch)];
    return img;
}

} // namespace

TEST_CASE("png files round-trip through write and read") {
    TmpDir tmp("png");
    Rng rng(404);

    ImageU8 rgb;
    rgb.height = 13;
    rgb.width = 9;
    rgb.channels = 3;
    rgb.pixels.resize(13 * 9 * 3);
    for (auto& p : rgb.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_png(tmp.file("rgb.png"), rgb.height, rgb.width, 3, rgb.pixels);
    const ImageU8 rgb_back = read_png(tmp.file("rgb.png"));
    REQUIRE(rgb_back.height == 13);
    REQUIRE(rgb_back.width == 9);
    REQUIRE(rgb_back.channels == 3);
    REQUIRE(rgb_back.pixels == rgb.pixels);

    std::vector<std::uint8_t> gray(7 * 11);
    for (auto& p : gray) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_png(tmp.file("gray.png"), 7, 11, 1, gray);
    const ImageU8 gray_back = read_png(tmp.file("gray.png"));
    REQUIRE(gray_back.channels == 1);
    REQUIRE(gray_back.pixels == gray);

    const auto [h, w] = read_png_dims(tmp.file("rgb.png"));
    REQUIRE(h == 13);
    REQUIRE(w == 9);

    REQUIRE_THROWS_AS(read_png(tmp.file("missing.png")), Error);
    std::ofstream junk(tmp.file("junk.png"), std::ios::binary);
    junk << "not a png";
    junk.close();
    REQUIRE_THROWS_AS(read_png(tmp.file("junk.png")), Error);
    REQUIRE_THROWS_AS(read_png_dims(tmp.file("junk.png")), Error);
}

TEST_CASE("image conversions: gray map, mask threshold, byte quantization") {
    ImageU8 img;
    img.height = 1;
    img.width = 5;
    img.channels = 1;
    img.pixels = {0, 127, 128, 200, 255};

    const GrayMap g = gray_from_image(img);
    REQUIRE(g.at(0, 0) == Real(0));
    REQUIRE(g.at(0, 1) == Catch::Approx(127.0 / 255).epsilon(1e-12));
    REQUIRE(g.at(0, 4) == Real(1));

    // binarization threshold sits between 127 and 128
    const BinaryMask m = mask_from_image(img);
    REQUIRE(m.values == std::vector<std::uint8_t>{0, 0, 1, 1, 1});

    const std::vector<std::uint8_t> bytes = bytes_from_gray(g);
    REQUIRE(bytes == img.pixels);

    const Tensor t = tensor_from_image(img);
    REQUIRE(t.shape() == Shape{1, 3, 1, 5});
    REQUIRE(t.at(0, 0, 0, 3) == t.at(0, 2, 0, 3));
    const ImageU8 back = image_from_tensor(t);
    REQUIRE(back.channels == 3);
    REQUIRE(back.pixels[3 * 3] == 200);
}

TEST_CASE("class tokens parse from COD10K-style stems") {
    const ParsedName bird = parse_class_tokens("COD10K-CAM-3-Flying-53-Bird-3024");
    REQUIRE(bird.super_class == "Flying");
    REQUIRE(bird.sub_class == "Bird");

    REQUIRE(parse_class_tokens("random-name").super_class == "other");
    REQUIRE(parse_class_tokens("random-name").sub_class == "other");
    // non-numeric index token breaks the pattern
    REQUIRE(parse_class_tokens("COD10K-CAM-x-Flying-53-Bird-3024").super_class == "other");
    REQUIRE(parse_class_tokens("camourflage_00012").sub_class == "other");
    REQUIRE(parse_class_tokens("").super_class == "other");
}

TEST_CASE("directory manifests pair images and masks by stem") {
    TmpDir tmp("dir_manifest");
    fs::create_directories(tmp.path / "images");
    fs::create_directories(tmp.path / "masks");

    const BinaryMask m = block_mask(20, 20, 5, 15, 5, 15);
    for (const std::string stem :
         {"COD10K-CAM-1-Aquatic-13-BatFish-18", "COD10K-CAM-3-Flying-53-Bird-3024", "plain"}) {
        write_png((tmp.path / "images" / (stem + ".png")).string(), 20, 20, 3,
                  two_tone_image(m, {200, 40, 40}, {40, 40, 200}).pixels);
        write_mask_png((tmp.path / "masks" / (stem + ".png")).string(), m);
    }

    const DatasetManifest manifest = load_manifest_dir(tmp.str(), "fixture");
    REQUIRE(manifest.name == "fixture");
    REQUIRE(manifest.records.size() == 3);
    for (const auto& rec : manifest.records) {
        REQUIRE_FALSE(rec.image_path.empty());
        REQUIRE_FALSE(rec.mask_path.empty());
    }
    const auto& batfish = manifest.records[0];
    REQUIRE(batfish.stem == "COD10K-CAM-1-Aquatic-13-BatFish-18");
    REQUIRE(batfish.super_class == "Aquatic");
    REQUIRE(batfish.sub_class == "BatFish");
    const auto plain =
        std::find_if(manifest.records.begin(), manifest.records.end(),
                     [](const ManifestRecord& r) { return r.stem == "plain"; });
    REQUIRE(plain != manifest.records.end());
    REQUIRE(plain->super_class == "other");

    // the dispatcher routes directories here
    REQUIRE(load_manifest(tmp.str(), "fixture").records.size() == 3);
}

TEST_CASE("directory manifest validates dims and tolerates empty dirs") {
    TmpDir tmp("dir_errors");
    fs::create_directories(tmp.path / "images");
    fs::create_directories(tmp.path / "masks");
    REQUIRE(load_manifest_dir(tmp.str(), "empty").records.empty());

    write_png((tmp.path / "images" / "a.png").string(), 8, 8, 3,
              solid_image(8, 8, 10, 10, 10).pixels);
    write_mask_png((tmp.path / "masks" / "a.png").string(), block_mask(6, 8, 0, 3, 0, 3));
    REQUIRE_THROWS_AS(load_manifest_dir(tmp.str(), "bad"), Error);

    REQUIRE_THROWS_AS(load_manifest_dir(tmp.file("nosuch"), "x"), Error);
    REQUIRE_THROWS_AS(load_manifest(tmp.file("nosuch.txt"), "x"), Error);
}

TEST_CASE("csv manifests parse rows and annotated attribute flags") {
    TmpDir tmp("csv_manifest");
    const std::string csv = tmp.file("set.csv");
    std::ofstream out(csv);
    out << "image,mask,super,sub,attributes\n";
    out << "imgs/a.png,gts/a.png,Aquatic,Fish,MO|OC\n";
    out << "imgs/b.png,gts/b.png,,,\n";
    out.close();

    const DatasetManifest manifest = load_manifest(csv, "csvset");
    REQUIRE(manifest.records.size() == 2);
    const auto& a = manifest.records[0];
    REQUIRE(a.image_path == "imgs/a.png");
    REQUIRE(a.mask_path == "gts/a.png");
    REQUIRE(a.stem == "a");
    REQUIRE(a.super_class == "Aquatic");
    REQUIRE(a.sub_class == "Fish");
    REQUIRE(a.annotated.get(Attribute::MO));
    REQUIRE(a.annotated.source[static_cast<int>(Attribute::MO)] == AttrSource::Annotated);
    REQUIRE(a.annotated.get(Attribute::OC));
    REQUIRE_FALSE(a.annotated.known(Attribute::SC));
    REQUIRE(manifest.records[1].super_class == "other");
    REQUIRE(manifest.records[1].sub_class == "other");

    std::ofstream bad_flag(tmp.file("bad_flag.csv"));
    bad_flag << "image,mask,super,sub,attributes\n";
    bad_flag << "i.png,m.png,A,B,XX\n";
    bad_flag.close();
    REQUIRE_THROWS_AS(load_manifest_csv(tmp.file("bad_flag.csv"), "x"), Error);

    std::ofstream bad_header(tmp.file("bad_header.csv"));
    bad_header << "mask,image\n";
    bad_header.close();
    REQUIRE_THROWS_AS(load_manifest_csv(tmp.file("bad_header.csv"), "x"), Error);

    REQUIRE_THROWS_AS(load_manifest_csv(tmp.file("missing.csv"), "x"), Error);
}

TEST_CASE("json manifests parse both document shapes") {
    TmpDir tmp("json_manifest");
    const std::string path = tmp.file("set.json");
    std::ofstream out(path);
    out << R"({"name":"jsonset","records":[
        {"image":"i/a.png","mask":"g/a.png","super":"Amphibian","sub":"Frog",
         "attributes":["SC","BO"]},
        {"mask":"g/b.png"}]})";
    out.close();

    const DatasetManifest manifest = load_manifest(path, "");
    REQUIRE(manifest.name == "jsonset");
    REQUIRE(manifest.records.size() == 2);
    REQUIRE(manifest.records[0].sub_class == "Frog");
    REQUIRE(manifest.records[0].annotated.get(Attribute::SC));
    REQUIRE(manifest.records[0].annotated.get(Attribute::BO));
    REQUIRE(manifest.records[1].image_path.empty());
    REQUIRE(manifest.records[1].stem == "b");
    REQUIRE(manifest.records[1].super_class == "other");

    std::ofstream arr(tmp.file("arr.json"));
    arr << R"([{"mask":"m.png"}])";
    arr.close();
    REQUIRE(load_manifest_json(tmp.file("arr.json"), "arr").records.size() == 1);

    std::ofstream bad(tmp.file("bad.json"));
    bad << R"({"records":[{"mask":"m.png","attributes":["nope"]}]})";
    bad.close();
    REQUIRE_THROWS_AS(load_manifest_json(tmp.file("bad.json"), "x"), Error);

    std::ofstream notjson(tmp.file("notjson.json"));
    notjson << "{{{";
    notjson.close();
    REQUIRE_THROWS_AS(load_manifest_json(tmp.file("notjson.json"), "x"), Error);
}

TEST_CASE("connected components, border contact, and foreground ratio") {
    REQUIRE(count_components(block_mask(10, 10, 2, 5, 2, 5)) == 1);

    // two disjoint 5x5 blocks
    BinaryMask two = block_mask(20, 20, 1, 6, 1, 6);
    for (int r = 12; r < 17; ++r)
        for (int c = 12; c < 17; ++c)
            two.values[static_cast<std::size_t>(r) * 20 + c] = 1;
    REQUIRE(count_components(two) == 2);

    // diagonal contact does not join 4-connected components
    BinaryMask diag = BinaryMask::from_values(2, 2, {1, 0, 0, 1});
    REQUIRE(count_components(diag) == 2);

    REQUIRE(count_components(counted_mask(4, 4, 0)) == 0);
    REQUIRE(foreground_ratio(counted_mask(10, 10, 50)) == Real(0.5));
    REQUIRE(foreground_ratio(counted_mask(4, 4, 0)) == Real(0));
    REQUIRE(touches_border(block_mask(8, 8, 0, 3, 2, 5)));
    REQUIRE_FALSE(touches_border(block_mask(8, 8, 2, 6, 2, 6)));
}

TEST_CASE("contrast bands follow euclidean distance from the region edge") {
    // lone center pixel, radius 2: the 12 neighbors with distance <= 2
    BinaryMask center = block_mask(11, 11, 5, 6, 5, 6);
    const auto outer = outer_band(center, 2);
    std::size_t outer_px = 0;
    for (auto b : outer) outer_px += b;
    REQUIRE(outer_px == 12);
    REQUIRE(outer[5 * 11 + 5] == 0);   // fg itself excluded
    REQUIRE(outer[5 * 11 + 7] == 1);   // distance 2
    REQUIRE(outer[5 * 11 + 8] == 0);   // distance 3

    // 5x5 block, radius 1: inner band = its 16-pixel boundary ring
    BinaryMask block = block_mask(11, 11, 3, 8, 3, 8);
    const auto inner = inner_band(block, 1);
    std::size_t inner_px = 0;
    for (auto b : inner) inner_px += b;
    REQUIRE(inner_px == 16);
    REQUIRE(inner[5 * 11 + 5] == 0);   // interior pixel is farther than 1 from bg
    REQUIRE(inner[3 * 11 + 3] == 1);
}

TEST_CASE("chi-square histogram distance matches its definition") {
    const BinaryMask half = block_mask(10, 10, 0, 10, 0, 5);
    std::vector<std::uint8_t> fg(half.values.begin(), half.values.end());
    std::vector<std::uint8_t> bg(half.numel());
    for (std::size_t i = 0; i < half.numel(); ++i) bg[i] = half.values[i] ? 0 : 1;

    // identical solid colors -> 0
    const ImageU8 flat = solid_image(10, 10, 77, 77, 77);
    REQUIRE(chi_square(rgb_histogram(flat, fg), rgb_histogram(flat, bg)) ==
            Catch::Approx(0).margin(1e-12));

    // disjoint support (pure red vs pure blue) -> 1
    const ImageU8 split = two_tone_image(half, {255, 0, 0}, {0, 0, 255});
    REQUIRE(chi_square(rgb_histogram(split, fg), rgb_histogram(split, bg)) ==
            Catch::Approx(1).margin(1e-9));

    // textured fixture vs a direct double-loop oracle
    Rng rng(99);
    ImageU8 tex = solid_image(10, 10, 0, 0, 0);
    for (auto& p : tex.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const std::vector<Real> h1 = rgb_histogram(tex, fg);
    const std::vector<Real> h2 = rgb_histogram(tex, bg);
    std::vector<Real> o1(512, 0), o2(512, 0);
    std::size_t n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < fg.size(); ++i) {
        const int bin = ((tex.pixels[i * 3] >> 5) * 8 + (tex.pixels[i * 3 + 1] >> 5)) * 8 +
                        (tex.pixels[i * 3 + 2] >> 5);
        if (fg[i]) {
            o1[static_cast<std::size_t>(bin)] += 1;
            ++n1;
        } else {
            o2[static_cast<std::size_t>(bin)] += 1;
            ++n2;
        }
    }
    Real chi_oracle = 0;
    for (int b = 0; b < 512; ++b) {
        const Real a = o1[static_cast<std::size_t>(b)] / Real(n1);
        const Real c = o2[static_cast<std::size_t>(b)] / Real(n2);
        chi_oracle += (a - c) * (a - c) / (a + c + Real(1e-10));
        REQUIRE(h1[static_cast<std::size_t>(b)] == Catch::Approx(a).margin(1e-12));
    }
    chi_oracle /= 2;
    REQUIRE(chi_square(h1, h2) == Catch::Approx(chi_oracle).margin(1e-12));
    REQUIRE(chi_square(h1, h1) == 0);
    REQUIRE_THROWS_AS(chi_square(h1, std::vector<Real>(4, 0)), Error);
}

TEST_CASE("attribute flags classify per the documented thresholds") {
    // full frame: big object, touches every border
    const AttributeSet full = compute_attributes(counted_mask(10, 10, 100));
    REQUIRE(full.get(Attribute::BO));
    REQUIRE_FALSE(full.get(Attribute::SO));
    REQUIRE(full.get(Attribute::OV));
    REQUIRE_FALSE(full.get(Attribute::MO));

    // single pixel in 100x100: small, single object
    const AttributeSet tiny = compute_attributes(block_mask(100, 100, 50, 51, 50, 51));
    REQUIRE(tiny.get(Attribute::SO));
    REQUIRE_FALSE(tiny.get(Attribute::MO));
    REQUIRE_FALSE(tiny.get(Attribute::BO));
    REQUIRE_FALSE(tiny.get(Attribute::OV));

    // inclusive boundaries: 0.5 -> BO, 0.49 -> not; 0.1 -> SO, 0.11 -> not
    REQUIRE(compute_attributes(counted_mask(10, 10, 50)).get(Attribute::BO));
    REQUIRE_FALSE(compute_attributes(counted_mask(10, 10, 49)).get(Attribute::BO));
    REQUIRE(compute_attributes(counted_mask(10, 10, 10)).get(Attribute::SO));
    REQUIRE_FALSE(compute_attributes(counted_mask(10, 10, 11)).get(Attribute::SO));

    // two disjoint 5x5 blocks -> multiple objects
    BinaryMask two = block_mask(20, 20, 1, 6, 1, 6);
    for (int r = 12; r < 17; ++r)
        for (int c = 12; c < 17; ++c)
            two.values[static_cast<std::size_t>(r) * 20 + c] = 1;
    REQUIRE(compute_attributes(two).get(Attribute::MO));

    // empty mask: every computed flag false, even with an image attached
    const ImageU8 img = solid_image(10, 10, 5, 5, 5);
    const AttributeSet empty = compute_attributes(counted_mask(10, 10, 0), &img);
    for (Attribute a : {Attribute::MO, Attribute::BO, Attribute::SO, Attribute::OV,
                        Attribute::IB}) {
        REQUIRE(empty.known(a));
        REQUIRE_FALSE(empty.get(a));
    }

    // OC and SC are never computed
    REQUIRE_FALSE(full.known(Attribute::OC));
    REQUIRE_FALSE(full.known(Attribute::SC));
    // IB needs an image
    REQUIRE_FALSE(full.known(Attribute::IB));
}

TEST_CASE("indefinable boundaries track foreground-vs-band color similarity") {
    const BinaryMask m = block_mask(30, 30, 10, 20, 10, 20);

    // fg indistinguishable from its surrounding band -> IB
    const ImageU8 same = solid_image(30, 30, 90, 120, 60);
    REQUIRE(compute_attributes(m, &same).get(Attribute::IB));

    // fg pure red on pure blue -> chi2 = 1 >= 0.9 -> definable
    const ImageU8 contrast = two_tone_image(m, {255, 0, 0}, {0, 0, 255});
    REQUIRE_FALSE(compute_attributes(m, &contrast).get(Attribute::IB));
}

TEST_CASE("contrast measures cover global and band-local statistics") {
    const BinaryMask m = block_mask(30, 30, 10, 20, 10, 20);
    const ImageU8 contrast = two_tone_image(m, {255, 0, 0}, {0, 0, 255});
    const ContrastPair pair = contrast_measures(m, contrast);
    REQUIRE(pair.valid);
    REQUIRE(pair.global_chi2 == Catch::Approx(1).margin(1e-9));
    REQUIRE(pair.local_chi2 == Catch::Approx(1).margin(1e-9));

    const ImageU8 flat = solid_image(30, 30, 90, 90, 90);
    const ContrastPair zero = contrast_measures(m, flat);
    REQUIRE(zero.valid);
    REQUIRE(zero.global_chi2 == Catch::Approx(0).margin(1e-12));
    REQUIRE(zero.local_chi2 == Catch::Approx(0).margin(1e-12));

    REQUIRE_FALSE(contrast_measures(counted_mask(30, 30, 0), flat).valid);
    REQUIRE_FALSE(contrast_measures(counted_mask(30, 30, 900), flat).valid);
}

TEST_CASE("centroid distance is 0 at center and 1 at a corner") {
    // 11x11 with center pixel (5,5): centroid == image center
    REQUIRE(centroid_center_distance(block_mask(11, 11, 5, 6, 5, 6)) ==
            Catch::Approx(0).margin(1e-12));
    // centered even-sized block: centroid (4.5, 4.5) == center of 10x10
    REQUIRE(centroid_center_distance(block_mask(10, 10, 4, 6, 4, 6)) ==
            Catch::Approx(0).margin(1e-12));
    // single corner pixel: normalized distance exactly 1
    REQUIRE(centroid_center_distance(block_mask(10, 10, 0, 1, 0, 1)) ==
            Catch::Approx(1).margin(1e-12));
    REQUIRE(centroid_center_distance(block_mask(7, 9, 6, 7, 8, 9)) ==
            Catch::Approx(1).margin(1e-12));
    REQUIRE_THROWS_AS(centroid_center_distance(counted_mask(5, 5, 0)), Error);
}

namespace {

// fixture: four masks with ratios {0.5, 0.0, 0.19, 1.0} on mixed resolutions
struct StatsFixture {
    TmpDir tmp{"stats"};
    DatasetManifest manifest;

    StatsFixture() {
        fs::create_directories(tmp.path / "images");
        fs::create_directories(tmp.path / "masks");
        const BinaryMask half = counted_mask(10, 10, 50);
        const BinaryMask none = counted_mask(10, 10, 0);
        const BinaryMask blob = block_mask(20, 20, 6, 14, 6, 14);   // 64/400 = 0.16
        const BinaryMask full = counted_mask(10, 10, 100);
        write_mask_png((tmp.path / "masks" / "a_half.png").string(), half);
        write_mask_png((tmp.path / "masks" / "b_none.png").string(), none);
        write_mask_png((tmp.path / "masks" / "c_blob.png").string(), blob);
        write_mask_png((tmp.path / "masks" / "d_full.png").string(), full);
        write_png((tmp.path / "images" / "c_blob.png").string(), 20, 20, 3,
                  two_tone_image(blob, {255, 0, 0}, {0, 0, 255}).pixels);
        manifest = load_manifest_dir(tmp.str(), "statsfix");
        REQUIRE(manifest.records.size() == 4);
    }
};

} // namespace

TEST_CASE("dataset statistics aggregate sizes, contrast, and center bias") {
    StatsFixture fix;
    const DatasetStats stats = dataset_stats(fix.manifest, 10);

    REQUIRE(stats.image_count == 4);
    std::vector<Real> ratios = stats.size_ratios;
    std::sort(ratios.begin(), ratios.end());
    REQUIRE(ratios[0] == Real(0));
    REQUIRE(ratios[1] == Real(0.16));
    REQUIRE(ratios[2] == Real(0.5));
    REQUIRE(ratios[3] == Real(1));
    REQUIRE(stats.size_min == Real(0));
    REQUIRE(stats.size_max == Real(1));
    REQUIRE(stats.size_mean == Catch::Approx(0.415).margin(1e-12));

    // histogram: 0 -> bin 0, 0.16 -> bin 3, 0.5 -> bin 10, 1.0 -> clamped to bin 19
    std::size_t total = 0;
    for (std::size_t c : stats.size_histogram) total += c;
    REQUIRE(total == 4);
    REQUIRE(stats.size_histogram[0] == 1);
    REQUIRE(stats.size_histogram[3] == 1);
    REQUIRE(stats.size_histogram[10] == 1);
    REQUIRE(stats.size_histogram[19] == 1);

    // only c_blob has an RGB image; its two-tone contrast is maximal
    REQUIRE(stats.global_contrast.size() == 1);
    REQUIRE(stats.local_contrast.size() == 1);
    REQUIRE(stats.global_contrast[0] == Catch::Approx(1).margin(1e-9));
    REQUIRE(stats.contrast_skipped == 3);

    // the empty mask is skipped by centroid stats
    REQUIRE(stats.center_distances.size() == 3);
    REQUIRE(stats.center_skipped == 1);

    REQUIRE(stats.resolution_histogram.at({10, 10}) == 3);
    REQUIRE(stats.resolution_histogram.at({20, 20}) == 1);

    // attribute counts: BO for {half, full}, OV for {half, full}, SO for {none? no}
    REQUIRE(stats.attribute_counts[static_cast<int>(Attribute::BO)] == 2);
    REQUIRE(stats.attribute_counts[static_cast<int>(Attribute::SO)] == 0);
    REQUIRE(stats.attribute_counts[static_cast<int>(Attribute::MO)] == 0);
    REQUIRE(stats.attribute_known[static_cast<int>(Attribute::BO)] == 4);
    // IB known only for the one image-carrying record
    REQUIRE(stats.attribute_known[static_cast<int>(Attribute::IB)] == 1);
    REQUIRE(stats.attribute_known[static_cast<int>(Attribute::OC)] == 0);
    // co-occurrence diagonal equals the counts
    REQUIRE(stats.cooccurrence[static_cast<int>(Attribute::BO)][static_cast<int>(Attribute::BO)] ==
            2);
    REQUIRE(stats.cooccurrence[static_cast<int>(Attribute::BO)][static_cast<int>(Attribute::OV)] ==
            2);

    REQUIRE_THROWS_AS(dataset_stats(fix.manifest, 0), Error);
}

TEST_CASE("heatmap is the pixelwise average of masks on the common grid") {
    TmpDir tmp("heatmap");
    const BinaryMask left = block_mask(16, 16, 0, 16, 0, 8);
    const BinaryMask all = counted_mask(16, 16, 256);
    write_mask_png(tmp.file("left.png"), left);
    write_mask_png(tmp.file("all.png"), all);
    const DatasetManifest manifest = load_manifest_dir(tmp.str(), "heat");
    REQUIRE(manifest.records.size() == 2);

    // grid equals mask dims, so resize is the identity and the average exact
    const DatasetStats stats = dataset_stats(manifest, 16);
    REQUIRE(stats.heatmap_grid == 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            const Real expect = c < 8 ? Real(1) : Real(0.5);
            REQUIRE(stats.heatmap[static_cast<std::size_t>(r) * 16 + c] ==
                    Catch::Approx(expect).margin(1e-12));
        }
    for (Real v : stats.heatmap) {
        REQUIRE(v >= Real(0));
        REQUIRE(v <= Real(1));
    }
}

TEST_CASE("statistics are invariant under manifest permutation") {
    StatsFixture fix;
    const DatasetStats base = dataset_stats(fix.manifest, 8);

    DatasetManifest shuffled = fix.manifest;
    std::reverse(shuffled.records.begin(), shuffled.records.end());
    std::swap(shuffled.records[0], shuffled.records[1]);
    const DatasetStats perm = dataset_stats(shuffled, 8);

    REQUIRE(perm.image_count == base.image_count);
    REQUIRE(perm.size_histogram == base.size_histogram);
    REQUIRE(perm.size_min == base.size_min);
    REQUIRE(perm.size_mean == Catch::Approx(base.size_mean).margin(1e-12));
    REQUIRE(perm.size_max == base.size_max);
    REQUIRE(perm.heatmap == base.heatmap);
    REQUIRE(perm.resolution_histogram == base.resolution_histogram);
    REQUIRE(perm.attribute_counts == base.attribute_counts);
    REQUIRE(perm.attribute_known == base.attribute_known);
    REQUIRE(perm.cooccurrence == base.cooccurrence);
    REQUIRE(perm.contrast_skipped == base.contrast_skipped);
    auto sorted = [](std::vector<Real> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    REQUIRE(sorted(perm.size_ratios) == sorted(base.size_ratios));
    REQUIRE(sorted(perm.center_distances) == sorted(base.center_distances));
}

TEST_CASE("annotated manifest flags extend and override computed attributes") {
    TmpDir tmp("annotated");
    write_mask_png(tmp.file("a.png"), block_mask(10, 10, 2, 7, 2, 7));
    const std::string csv = tmp.file("set.csv");
    std::ofstream out(csv);
    out << "image,mask,super,sub,attributes\n";
    out << "," << tmp.file("a.png") << ",A,B,OC|BO\n";
    out.close();

    const DatasetStats stats = dataset_stats(load_manifest(csv, "ann"), 4);
    // OC is annotation-only and arrives via the manifest
    REQUIRE(stats.attribute_counts[static_cast<int>(Attribute::OC)] == 1);
    REQUIRE(stats.attribute_known[static_cast<int>(Attribute::OC)] == 1);
    // the computed BO=false (ratio 0.25) is overridden by the annotation
    REQUIRE(stats.attribute_counts[static_cast<int>(Attribute::BO)] == 1);
    REQUIRE(stats.cooccurrence[static_cast<int>(Attribute::OC)][static_cast<int>(Attribute::BO)] ==
            1);
}

TEST_CASE("evaluate_dataset scores stem-matched predictions") {
    TmpDir tmp("eval");
    fs::create_directories(tmp.path / "masks");
    fs::create_directories(tmp.path / "preds");
    const BinaryMask m1 = block_mask(12, 12, 3, 9, 3, 9);
    const BinaryMask m2 = block_mask(12, 12, 0, 6, 0, 12);
    write_mask_png((tmp.path / "masks" / "COD10K-CAM-1-Aquatic-13-BatFish-1.png").string(), m1);
    write_mask_png((tmp.path / "masks" / "COD10K-CAM-3-Flying-53-Bird-2.png").string(), m2);

    SECTION("perfect predictions score perfectly") {
        write_mask_png((tmp.path / "preds" / "COD10K-CAM-1-Aquatic-13-BatFish-1.png").string(),
                       m1);
        write_mask_png((tmp.path / "preds" / "COD10K-CAM-3-Flying-53-Bird-2.png").string(), m2);
        const DatasetManifest manifest = load_manifest_dir(tmp.str(), "eval");
        const EvalResult r = evaluate_dataset(manifest, (tmp.path / "preds").string());
        REQUIRE(r.overall.image_count == 2);
        REQUIRE(r.overall.mae_v == Real(0));
        REQUIRE(r.overall.s_alpha == Catch::Approx(1).margin(1e-9));
        REQUIRE(r.overall.f_beta_w == Catch::Approx(1).margin(1e-9));
        REQUIRE(r.overall.e_phi_mean > Real(0.99));
        REQUIRE(r.per_super.size() == 2);
        REQUIRE(r.per_super.count("Aquatic") == 1);
        REQUIRE(r.per_sub.count("Bird") == 1);
        REQUIRE(r.per_sub.at("Bird").image_count == 1);
        REQUIRE(r.per_image.size() == 2);
    }

    SECTION("aggregation is the mean of per-image scores") {
        // pred for m1 equals GT (MAE 0); pred for m2 is the complement (MAE 1)
        write_mask_png((tmp.path / "preds" / "COD10K-CAM-1-Aquatic-13-BatFish-1.png").string(),
                       m1);
        BinaryMask inv = m2;
        for (auto& v : inv.values) v ^= 1;
        write_mask_png((tmp.path / "preds" / "COD10K-CAM-3-Flying-53-Bird-2.png").string(), inv);
        const DatasetManifest manifest = load_manifest_dir(tmp.str(), "eval");
        const EvalResult r = evaluate_dataset(manifest, (tmp.path / "preds").string());
        REQUIRE(r.overall.mae_v == Catch::Approx(0.5).margin(1e-12));
    }

    SECTION("missing predictions are enumerated unless skipped") {
        write_mask_png((tmp.path / "preds" / "COD10K-CAM-1-Aquatic-13-BatFish-1.png").string(),
                       m1);
        const DatasetManifest manifest = load_manifest_dir(tmp.str(), "eval");
        const std::string preds = (tmp.path / "preds").string();
        REQUIRE_THROWS_WITH(evaluate_dataset(manifest, preds),
                            Catch::Matchers::ContainsSubstring("Bird-2"));
        const EvalResult r = evaluate_dataset(manifest, preds, true);
        REQUIRE(r.overall.image_count == 1);
        REQUIRE(r.per_sub.count("Bird") == 0);
    }

    SECTION("predictions at foreign resolution are resized to the GT dims") {
        // upscale m1's prediction to 24x24; resize back must stay near-perfect
        GrayMap big = GrayMap::constant(24, 24, 0);
        for (int r = 0; r < 24; ++r)
            for (int c = 0; c < 24; ++c)
                big.values[static_cast<std::size_t>(r) * 24 + c] =
                    m1.at(std::min(11, r / 2), std::min(11, c / 2)) ? Real(1) : Real(0);
        write_png((tmp.path / "preds" / "COD10K-CAM-1-Aquatic-13-BatFish-1.png").string(), 24,
                  24, 1, bytes_from_gray(big));
        write_mask_png((tmp.path / "preds" / "COD10K-CAM-3-Flying-53-Bird-2.png").string(), m2);
        const DatasetManifest manifest = load_manifest_dir(tmp.str(), "eval");
        const EvalResult r = evaluate_dataset(manifest, (tmp.path / "preds").string());
        REQUIRE(r.per_image[0].mae_v < Real(0.1));
    }

    SECTION("empty manifests and prediction sets are rejected") {
        DatasetManifest empty;
        REQUIRE_THROWS_AS(evaluate_dataset(empty, (tmp.path / "preds").string()), Error);
        const DatasetManifest manifest = load_manifest_dir(tmp.str(), "eval");
        REQUIRE_THROWS_AS(
            evaluate_dataset(manifest, (tmp.path / "nopreds").string(), true), Error);
    }
}
