#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sinet/common.hpp"
#include "sinet/edt.hpp"
#include "sinet/image_io.hpp"
#include "sinet/metrics.hpp"
#include "sinet/parallel.hpp"

namespace sinet {

// ---------------------------------------------------------------------------
// attributes
// ---------------------------------------------------------------------------

enum class Attribute { MO = 0, BO, SO, OV, OC, SC, IB };
inline constexpr int kAttributeCount = 7;
inline constexpr std::array<const char*, kAttributeCount> kAttributeNames{
    "MO", "BO", "SO", "OV", "OC", "SC", "IB"};

inline constexpr Real kBigObjectRatio = Real(0.5);     // BO: ratio >= 0.5
inline constexpr Real kSmallObjectRatio = Real(0.1);   // SO: ratio <= 0.1
inline constexpr Real kIndefinableChi2 = Real(0.9);    // IB: chi^2 < 0.9
inline constexpr Real kContrastBandRadius = Real(15);  // band width in pixels

enum class AttrSource { Missing = 0, Computed, Annotated };

struct AttributeSet {
    std::array<bool, kAttributeCount> value{};
    std::array<AttrSource, kAttributeCount> source{};

    bool known(Attribute a) const { return source[static_cast<int>(a)] != AttrSource::Missing; }
    bool get(Attribute a) const { return value[static_cast<int>(a)]; }
    void set(Attribute a, bool v, AttrSource s) {
        value[static_cast<int>(a)] = v;
        source[static_cast<int>(a)] = s;
    }
};

inline std::optional<Attribute> attribute_from_name(const std::string& name) {
    for (int i = 0; i < kAttributeCount; ++i)
        if (name == kAttributeNames[i]) return static_cast<Attribute>(i);
    return std::nullopt;
}

// 4-connected foreground components
inline int count_components(const BinaryMask& m) {
    std::vector<std::uint8_t> seen(m.numel(), 0);
    std::vector<int> stack;
    int components = 0;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            const int start = r * m.width + c;
            if (!m.values[start] || seen[start]) continue;
            ++components;
            stack.push_back(start);
            seen[start] = 1;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int cr = cur / m.width, cc = cur % m.width;
                const int nr[4] = {cr - 1, cr + 1, cr, cr};
                const int nc[4] = {cc, cc, cc - 1, cc + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nr[k] < 0 || nr[k] >= m.height || nc[k] < 0 || nc[k] >= m.width)
                        continue;
                    const int nxt = nr[k] * m.width + nc[k];
                    if (m.values[nxt] && !seen[nxt]) {
                        seen[nxt] = 1;
                        stack.push_back(nxt);
                    }
                }
            }
        }
    return components;
}

inline Real foreground_ratio(const BinaryMask& m) {
    return Real(m.fg_count()) / Real(m.numel());
}

inline bool touches_border(const BinaryMask& m) {
    for (int c = 0; c < m.width; ++c)
        if (m.at(0, c) || m.at(m.height - 1, c)) return true;
    for (int r = 0; r < m.height; ++r)
        if (m.at(r, 0) || m.at(r, m.width - 1)) return true;
    return false;
}

// background pixels within `radius` of the foreground (outer band), and
// foreground pixels within `radius` of the background (inner band)
inline std::vector<std::uint8_t> outer_band(const BinaryMask& m, Real radius) {
    const EdtResult e = distance_transform(m.values, m.height, m.width);
    std::vector<std::uint8_t> band(m.numel(), 0);
    for (std::size_t i = 0; i < m.numel(); ++i)
        band[i] = !m.values[i] && e.dist[i] <= radius ? 1 : 0;
    return band;
}

inline std::vector<std::uint8_t> inner_band(const BinaryMask& m, Real radius) {
    std::vector<std::uint8_t> inv(m.numel());
    for (std::size_t i = 0; i < m.numel(); ++i) inv[i] = m.values[i] ? 0 : 1;
    const EdtResult e = distance_transform(inv, m.height, m.width);
    std::vector<std::uint8_t> band(m.numel(), 0);
    for (std::size_t i = 0; i < m.numel(); ++i)
        band[i] = m.values[i] && e.dist[i] <= radius ? 1 : 0;
    return band;
}

// joint RGB histogram over selected pixels, 8 bins per channel, normalized
inline std::vector<Real> rgb_histogram(const ImageU8& img,
                                       const std::vector<std::uint8_t>& select) {
    require(img.channels == 3, ErrorKind::Validation, "rgb_histogram: need RGB image");
    require(select.size() == static_cast<std::size_t>(img.height) * img.width,
            ErrorKind::Shape, "rgb_histogram: selection size mismatch");
    std::vector<Real> hist(512, 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < select.size(); ++i) {
        if (!select[i]) continue;
        const std::uint8_t* px = img.pixels.data() + i * 3;
        const int bin = ((px[0] >> 5) * 8 + (px[1] >> 5)) * 8 + (px[2] >> 5);
        hist[bin] += 1;
        ++count;
    }
    if (count > 0)
        for (Real& h : hist) h /= Real(count);
    return hist;
}

// 0.5 * sum (h1-h2)^2 / (h1+h2+eps); in [0,1] for normalized histograms
inline Real chi_square(const std::vector<Real>& h1, const std::vector<Real>& h2) {
    require(h1.size() == h2.size(), ErrorKind::Shape, "chi_square: size mismatch");
    Real acc = 0;
    for (std::size_t i = 0; i < h1.size(); ++i) {
        const Real d = h1[i] - h2[i];
        acc += d * d / (h1[i] + h2[i] + Real(1e-10));
    }
    return acc / 2;
}

// MO/BO/SO/OV from the mask alone, IB when an RGB image is supplied; OC and
// SC are annotation-only. An empty mask leaves every computed flag false.
inline AttributeSet compute_attributes(const BinaryMask& mask, const ImageU8* image = nullptr) {
    AttributeSet out;
    const bool empty = mask.fg_count() == 0;
    out.set(Attribute::MO, !empty && count_components(mask) >= 2, AttrSource::Computed);
    const Real ratio = foreground_ratio(mask);
    out.set(Attribute::BO, !empty && ratio >= kBigObjectRatio, AttrSource::Computed);
    out.set(Attribute::SO, !empty && ratio <= kSmallObjectRatio, AttrSource::Computed);
    out.set(Attribute::OV, !empty && touches_border(mask), AttrSource::Computed);
    if (image != nullptr && image->channels == 3) {
        require(image->height == mask.height && image->width == mask.width, ErrorKind::Shape,
                "compute_attributes: image and mask dims differ");
        bool ib = false;
        if (!empty) {
            const auto band = outer_band(mask, kContrastBandRadius);
            std::size_t band_px = 0;
            for (std::uint8_t b : band) band_px += b;
            if (band_px > 0) {
                const Real chi2 = chi_square(rgb_histogram(*image, mask.values),
                                             rgb_histogram(*image, band));
                ib = chi2 < kIndefinableChi2;
            }
        }
        out.set(Attribute::IB, ib, AttrSource::Computed);
    }
    return out;
}

// per-image contrast measures; invalid when a region or band is empty
struct ContrastPair {
    Real global_chi2 = 0;
    Real local_chi2 = 0;
    bool valid = false;
};

inline ContrastPair contrast_measures(const BinaryMask& mask, const ImageU8& image) {
    require(image.height == mask.height && image.width == mask.width, ErrorKind::Shape,
            "contrast_measures: image and mask dims differ");
    ContrastPair out;
    const std::size_t m = mask.fg_count();
    if (m == 0 || m == mask.numel()) return out;

    std::vector<std::uint8_t> bg(mask.numel());
    for (std::size_t i = 0; i < mask.numel(); ++i) bg[i] = mask.values[i] ? 0 : 1;
    out.global_chi2 =
        chi_square(rgb_histogram(image, mask.values), rgb_histogram(image, bg));

    const auto inner = inner_band(mask, kContrastBandRadius);
    const auto outer = outer_band(mask, kContrastBandRadius);
    std::size_t ni = 0, no = 0;
    for (std::size_t i = 0; i < mask.numel(); ++i) {
        ni += inner[i];
        no += outer[i];
    }
    if (ni == 0 || no == 0) return out;
    out.local_chi2 = chi_square(rgb_histogram(image, inner), rgb_histogram(image, outer));
    out.valid = true;
    return out;
}

// normalized distance from mask centroid to image center: 0 at the center,
// 1 when the centroid sits on a corner pixel
inline Real centroid_center_distance(const BinaryMask& m) {
    const std::size_t fg = m.fg_count();
    require(fg > 0, ErrorKind::Validation, "centroid_center_distance: empty mask");
    Real cx = 0, cy = 0;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m.at(r, c)) {
                cx += Real(c);
                cy += Real(r);
            }
    cx /= Real(fg);
    cy /= Real(fg);
    const Real mx = Real(m.width - 1) / 2, my = Real(m.height - 1) / 2;
    const Real half_diag = std::sqrt(mx * mx + my * my);
    if (half_diag == 0) return 0;
    const Real dx = cx - mx, dy = cy - my;
    return std::sqrt(dx * dx + dy * dy) / half_diag;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

struct ManifestRecord {
    std::string stem;
    std::string image_path;   // may be empty when the dataset is mask-only
    std::string mask_path;
    std::string super_class = "other";
    std::string sub_class = "other";
    AttributeSet annotated;   // flags carried by an explicit manifest
};

struct DatasetManifest {
    std::string name;
    std::vector<ManifestRecord> records;
};

// COD10K file stems carry class labels as hyphen-delimited tokens:
// "COD10K-CAM-3-Flying-53-Bird-3024" -> super "Flying", sub "Bird"
struct ParsedName {
    std::string super_class = "other";
    std::string sub_class = "other";
};

inline ParsedName parse_class_tokens(const std::string& stem) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : stem) {
        if (ch == '-') {
            tokens.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    tokens.push_back(cur);
    const auto numeric = [](const std::string& s) {
        if (s.empty()) return false;
        return std::all_of(s.begin(), s.end(),
                           [](unsigned char c) { return std::isdigit(c) != 0; });
    };
    ParsedName out;
    if (tokens.size() >= 7 && tokens[0] == "COD10K" && numeric(tokens[2]) &&
        numeric(tokens[4]) && numeric(tokens[6]) && !tokens[3].empty() && !tokens[5].empty()) {
        out.super_class = tokens[3];
        out.sub_class = tokens[5];
    }
    return out;
}

namespace detail {

inline bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

inline std::map<std::string, std::string> stem_index(const std::string& dir) {
    namespace fs = std::filesystem;
    std::map<std::string, std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
        out[entry.path().stem().string()] = entry.path().string();
    }
    return out;
}

inline bool is_png(const std::string& path) {
    return std::filesystem::path(path).extension() == ".png";
}

} // namespace detail

// directory layout: <root>/images + <root>/masks (COD10K's Imgs/GT aliases
// accepted), paired by filename stem; mask-only datasets take masks from the
// root itself when no subdirectory matches
inline DatasetManifest load_manifest_dir(const std::string& root, const std::string& name) {
    namespace fs = std::filesystem;
    require(fs::is_directory(root), ErrorKind::Io, "dataset root is not a directory: " + root);

    const auto first_dir = [&](std::initializer_list<const char*> names) -> std::string {
        for (const char* n : names) {
            const fs::path p = fs::path(root) / n;
            if (fs::is_directory(p)) return p.string();
        }
        return {};
    };
    const std::string image_dir = first_dir({"images", "Imgs", "Image", "Images"});
    std::string mask_dir = first_dir({"masks", "GT", "Masks", "GT_Object"});
    if (mask_dir.empty() && image_dir.empty()) mask_dir = root;

    const auto images = detail::stem_index(image_dir);
    const auto masks = detail::stem_index(mask_dir);

    DatasetManifest out;
    out.name = name;
    for (const auto& [stem, mask_path] : masks) {
        ManifestRecord rec;
        rec.stem = stem;
        rec.mask_path = mask_path;
        const auto it = images.find(stem);
        if (it != images.end()) rec.image_path = it->second;
        const ParsedName parsed = parse_class_tokens(stem);
        rec.super_class = parsed.super_class;
        rec.sub_class = parsed.sub_class;
        out.records.push_back(std::move(rec));
    }

    // cheap structural validation where both sides are PNG
    for (const ManifestRecord& rec : out.records) {
        if (rec.image_path.empty()) continue;
        if (!detail::is_png(rec.image_path) || !detail::is_png(rec.mask_path)) continue;
        const auto [ih, iw] = read_png_dims(rec.image_path);
        const auto [mh, mw] = read_png_dims(rec.mask_path);
        require(ih == mh && iw == mw, ErrorKind::Validation,
                "image and mask dims differ for stem " + rec.stem);
    }
    return out;
}

// flat CSV manifest: image,mask,super,sub[,attributes]; the attributes cell
// lists annotated flags separated by '|' (e.g. "MO|OC")
inline DatasetManifest load_manifest_csv(const std::string& csv_path, const std::string& name) {
    std::ifstream in(csv_path);
    require(in.good(), ErrorKind::Io, "cannot open manifest " + csv_path);
    DatasetManifest out;
    out.name = name;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        cells.push_back(cur);
        if (first) {
            first = false;
            require(cells.size() >= 4 && cells[0] == "image" && cells[1] == "mask" &&
                        cells[2] == "super" && cells[3] == "sub",
                    ErrorKind::Validation,
                    "manifest header must be image,mask,super,sub[,attributes]");
            continue;
        }
        require(cells.size() >= 4, ErrorKind::Validation,
                "manifest row needs at least 4 cells: " + line);
        ManifestRecord rec;
        rec.image_path = cells[0];
        rec.mask_path = cells[1];
        rec.super_class = cells[2].empty() ? "other" : cells[2];
        rec.sub_class = cells[3].empty() ? "other" : cells[3];
        rec.stem = std::filesystem::path(rec.mask_path).stem().string();
        if (cells.size() >= 5 && !cells[4].empty()) {
            std::string flag;
            auto commit = [&]() {
                if (flag.empty()) return;
                const auto attr = attribute_from_name(flag);
                require(attr.has_value(), ErrorKind::Validation,
                        "unknown attribute flag '" + flag + "' in manifest");
                rec.annotated.set(*attr, true, AttrSource::Annotated);
                flag.clear();
            };
            for (char ch : cells[4]) {
                if (ch == '|')
                    commit();
                else
                    flag.push_back(ch);
            }
            commit();
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

// JSON manifest: either a bare array of records or {"name": ..., "records":
// [...]}; records carry {"image", "mask", "super", "sub", "attributes": []}
inline DatasetManifest load_manifest_json(const std::string& json_path,
                                          const std::string& name) {
    std::ifstream in(json_path);
    require(in.good(), ErrorKind::Io, "cannot open manifest " + json_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, std::string("bad JSON manifest: ") + e.what());
    }
    DatasetManifest out;
    out.name = name;
    const nlohmann::json* records = &doc;
    if (doc.is_object()) {
        if (doc.contains("name") && doc["name"].is_string() && out.name.empty())
            out.name = doc["name"].get<std::string>();
        require(doc.contains("records"), ErrorKind::Validation,
                "JSON manifest object needs a 'records' array");
        records = &doc["records"];
    }
    require(records->is_array(), ErrorKind::Validation, "JSON manifest records must be an array");
    for (const auto& row : *records) {
        require(row.is_object() && row.contains("mask") && row["mask"].is_string(),
                ErrorKind::Validation, "JSON manifest record needs a 'mask' string");
        ManifestRecord rec;
        rec.mask_path = row["mask"].get<std::string>();
        rec.stem = std::filesystem::path(rec.mask_path).stem().string();
        if (row.contains("image") && row["image"].is_string())
            rec.image_path = row["image"].get<std::string>();
        if (row.contains("super") && row["super"].is_string() && !row["super"].empty())
            rec.super_class = row["super"].get<std::string>();
        if (row.contains("sub") && row["sub"].is_string() && !row["sub"].empty())
            rec.sub_class = row["sub"].get<std::string>();
        if (row.contains("attributes")) {
            require(row["attributes"].is_array(), ErrorKind::Validation,
                    "JSON manifest attributes must be an array of flag names");
            for (const auto& flag : row["attributes"]) {
                require(flag.is_string(), ErrorKind::Validation,
                        "JSON manifest attribute flags must be strings");
                const auto attr = attribute_from_name(flag.get<std::string>());
                require(attr.has_value(), ErrorKind::Validation,
                        "unknown attribute flag '" + flag.get<std::string>() + "' in manifest");
                rec.annotated.set(*attr, true, AttrSource::Annotated);
            }
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

// dispatch on the path: directory layout, .csv file, or .json file
inline DatasetManifest load_manifest(const std::string& path, const std::string& name) {
    namespace fs = std::filesystem;
    if (fs::is_directory(path)) return load_manifest_dir(path, name);
    std::string ext = fs::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".csv") return load_manifest_csv(path, name);
    if (ext == ".json") return load_manifest_json(path, name);
    fail(ErrorKind::Io, "manifest path is neither a directory nor a .csv/.json file: " + path);
}

// ---------------------------------------------------------------------------
// dataset statistics
// ---------------------------------------------------------------------------

inline constexpr int kSizeHistogramBins = 20;

struct DatasetStats {
    std::vector<Real> size_ratios;
    std::array<std::size_t, kSizeHistogramBins> size_histogram{};
    Real size_min = 0, size_mean = 0, size_max = 0;

    std::vector<Real> global_contrast;
    std::vector<Real> local_contrast;
    std::size_t contrast_skipped = 0;

    std::vector<Real> center_distances;
    std::size_t center_skipped = 0;
    std::vector<Real> heatmap;   // grid*grid mean of masks, values in [0,1]
    int heatmap_grid = 0;

    std::map<std::pair<int, int>, std::size_t> resolution_histogram;   // (w,h) -> count

    std::array<std::size_t, kAttributeCount> attribute_counts{};
    std::array<std::size_t, kAttributeCount> attribute_known{};   // coverage per flag
    std::array<std::array<std::size_t, kAttributeCount>, kAttributeCount> cooccurrence{};
    std::size_t image_count = 0;
};

inline DatasetStats dataset_stats(const DatasetManifest& manifest, int heatmap_grid = 256) {
    require(heatmap_grid > 0, ErrorKind::Validation, "heatmap grid must be positive");
    DatasetStats stats;
    stats.heatmap_grid = heatmap_grid;
    stats.heatmap.assign(static_cast<std::size_t>(heatmap_grid) * heatmap_grid, 0);
    stats.image_count = manifest.records.size();
    if (manifest.records.empty()) return stats;

    struct PerImage {
        Real ratio = 0;
        ContrastPair contrast;
        bool has_image = false;
        Real center_dist = 0;
        bool center_valid = false;
        std::vector<Real> heat;
        int w = 0, h = 0;
        AttributeSet attrs;
    };
    std::vector<PerImage> rows(manifest.records.size());

    parallel_for(manifest.records.size(), [&](std::size_t i) {
        const ManifestRecord& rec = manifest.records[i];
        PerImage& row = rows[i];
        const BinaryMask mask = mask_from_image(read_png(rec.mask_path));
        row.ratio = foreground_ratio(mask);
        row.w = mask.width;
        row.h = mask.height;
        if (mask.fg_count() > 0) {
            row.center_dist = centroid_center_distance(mask);
            row.center_valid = true;
        }
        GrayMap asgray = GrayMap::from_values(
            mask.height, mask.width, std::vector<Real>(mask.values.begin(), mask.values.end()));
        row.heat = resize_gray(asgray, heatmap_grid, heatmap_grid).values;

        ImageU8 image;
        if (!rec.image_path.empty() && detail::is_png(rec.image_path)) {
            image = read_png(rec.image_path);
            if (image.channels == 3) {
                row.contrast = contrast_measures(mask, image);
                row.has_image = true;
            }
        }
        row.attrs = compute_attributes(mask, row.has_image ? &image : nullptr);
        // annotated flags override or extend computed ones
        for (int a = 0; a < kAttributeCount; ++a)
            if (rec.annotated.source[a] == AttrSource::Annotated)
                row.attrs.set(static_cast<Attribute>(a), rec.annotated.value[a],
                              AttrSource::Annotated);
    });

    Real sum = 0;
    stats.size_min = rows[0].ratio;
    stats.size_max = rows[0].ratio;
    for (const PerImage& row : rows) {
        stats.size_ratios.push_back(row.ratio);
        const int bin = std::min(kSizeHistogramBins - 1,
                                 static_cast<int>(row.ratio * kSizeHistogramBins));
        stats.size_histogram[bin] += 1;
        sum += row.ratio;
        stats.size_min = std::min(stats.size_min, row.ratio);
        stats.size_max = std::max(stats.size_max, row.ratio);

        if (row.has_image && row.contrast.valid) {
            stats.global_contrast.push_back(row.contrast.global_chi2);
            stats.local_contrast.push_back(row.contrast.local_chi2);
        } else {
            stats.contrast_skipped += 1;
        }
        if (row.center_valid)
            stats.center_distances.push_back(row.center_dist);
        else
            stats.center_skipped += 1;
        for (std::size_t i = 0; i < stats.heatmap.size(); ++i) stats.heatmap[i] += row.heat[i];
        stats.resolution_histogram[{row.w, row.h}] += 1;

        for (int a = 0; a < kAttributeCount; ++a) {
            if (row.attrs.source[a] == AttrSource::Missing) continue;
            stats.attribute_known[a] += 1;
            if (!row.attrs.value[a]) continue;
            stats.attribute_counts[a] += 1;
            for (int b = 0; b < kAttributeCount; ++b)
                if (row.attrs.source[b] != AttrSource::Missing && row.attrs.value[b])
                    stats.cooccurrence[a][b] += 1;
        }
    }
    for (Real& v : stats.heatmap) v /= Real(rows.size());
    stats.size_mean = sum / Real(rows.size());
    return stats;
}

// ---------------------------------------------------------------------------
// dataset evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
    MetricReport overall;
    std::map<std::string, MetricReport> per_super;
    std::map<std::string, MetricReport> per_sub;
    std::vector<MetricScores> per_image;   // manifest order
};

// predictions matched to GT by filename stem, resized to GT dims when needed
inline EvalResult evaluate_dataset(const DatasetManifest& manifest,
                                   const std::string& pred_dir, bool skip_missing = false) {
    require(!manifest.records.empty(), ErrorKind::Validation,
            "evaluate_dataset: empty manifest");
    const auto preds = detail::stem_index(pred_dir);

    std::vector<const ManifestRecord*> used;
    std::string missing;
    std::size_t missing_count = 0;
    std::vector<std::string> pred_paths;
    for (const ManifestRecord& rec : manifest.records) {
        const auto it = preds.find(rec.stem);
        if (it == preds.end()) {
            ++missing_count;
            missing += missing.empty() ? rec.stem : ", " + rec.stem;
            continue;
        }
        used.push_back(&rec);
        pred_paths.push_back(it->second);
    }
    if (!skip_missing)
        require(missing_count == 0, ErrorKind::Io,
                "missing predictions for " + std::to_string(missing_count) + " image(s): " +
                    missing);
    require(!used.empty(), ErrorKind::Validation, "evaluate_dataset: no usable pairs");

    std::vector<MetricScores> scores(used.size());
    parallel_for(used.size(), [&](std::size_t i) {
        const BinaryMask gt = mask_from_image(read_png(used[i]->mask_path));
        GrayMap pred = gray_from_image(read_png(pred_paths[i]));
        if (pred.height != gt.height || pred.width != gt.width)
            pred = resize_gray(pred, gt.height, gt.width);
        scores[i] = evaluate_pair(pred, gt);
    });

    EvalResult out;
    out.per_image = scores;
    out.overall = aggregate_scores(scores);
    std::map<std::string, std::vector<MetricScores>> by_super, by_sub;
    for (std::size_t i = 0; i < used.size(); ++i) {
        by_super[used[i]->super_class].push_back(scores[i]);
        by_sub[used[i]->sub_class].push_back(scores[i]);
    }
    for (const auto& [k, v] : by_super) out.per_super[k] = aggregate_scores(v);
    for (const auto& [k, v] : by_sub) out.per_sub[k] = aggregate_scores(v);
    return out;
}

} // namespace sinet
