#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sinet/dataset.hpp"
#include "sinet/image_io.hpp"
#include "sinet/loss.hpp"
#include "sinet/metrics.hpp"
#include "sinet/model.hpp"
#include "sinet/report.hpp"
#include "sinet/train.hpp"
#include "sinet/weights_io.hpp"

namespace sinet {

inline constexpr int kDefaultInputSize = 352;

// ---------------------------------------------------------------------------
// inference
// ---------------------------------------------------------------------------

// Forward at the configured square size, sigmoid of the finest side output,
// resized back to the source dims. Pure function of (image, params, config).
inline GrayMap infer_image(const ImageU8& img, const SinetParams& params,
                           const SinetConfig& cfg, int input_size = kDefaultInputSize) {
    require(input_size >= 32 && input_size % 32 == 0, ErrorKind::Config,
            "inference size must be a positive multiple of 32");
    Tensor x = tensor_from_image(img);
    if (img.height != input_size || img.width != input_size)
        x = detail::resize_bilinear(x, input_size, input_size);
    const SideOutputs side = sinet_forward(x, params, cfg);
    GrayMap map = GrayMap::from_tensor(sigmoid(side.c3_up));
    if (map.height != img.height || map.width != img.width)
        map = resize_gray(map, img.height, img.width);
    return map;
}

// Runs every PNG in image_dir through the model and writes <stem>.png
// prediction maps into out_dir. Returns the number of images processed.
// Images are handled sequentially; the convolutions inside the forward pass
// already use the worker pool.
inline std::size_t infer_dir(const std::string& image_dir, const std::string& out_dir,
                             const SinetParams& params, const SinetConfig& cfg,
                             int input_size = kDefaultInputSize) {
    const auto stems = detail::stem_index(image_dir);
    std::filesystem::create_directories(out_dir);
    for (const auto& [stem, path] : stems) {
        if (!detail::is_png(path)) continue;
        const ImageU8 img = read_png(path);
        const GrayMap pred = infer_image(img, params, cfg, input_size);
        const std::string out_path = (std::filesystem::path(out_dir) / (stem + ".png")).string();
        write_png(out_path, pred.height, pred.width, 1, bytes_from_gray(pred));
    }
    return stems.size();
}

// ---------------------------------------------------------------------------
// statistics artifacts
// ---------------------------------------------------------------------------

inline void write_heatmap_png(const DatasetStats& stats, const std::string& path) {
    require(stats.heatmap_grid > 0, ErrorKind::Validation, "stats carry no heatmap");
    const GrayMap map =
        GrayMap::from_values(stats.heatmap_grid, stats.heatmap_grid, stats.heatmap);
    write_png(path, map.height, map.width, 1, bytes_from_gray(map));
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot open for writing: " + path);
    out << content;
    out.flush();
    require(out.good(), ErrorKind::Io, "failed writing: " + path);
}

inline std::string loss_curve_csv(const std::vector<Real>& curve) {
    std::string out = "step,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i + 1, static_cast<double>(curve[i]));
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// ablation grid
// ---------------------------------------------------------------------------

struct AblationSpec {
    std::string name;
    SinetConfig config;
};

// One row per setting along each studied axis: decoder, convolution style,
// reverse-guidance pattern, group sizes. Every row differs from the base
// configuration along exactly one axis.
inline std::vector<AblationSpec> default_ablation_grid(const SinetConfig& base) {
    std::vector<AblationSpec> grid;
    for (DecoderStyle d : {DecoderStyle::Pd, DecoderStyle::Ncd}) {
        SinetConfig cfg = base;
        cfg.decoder = d;
        grid.push_back({std::string("decoder=") + (d == DecoderStyle::Pd ? "pd" : "ncd"), cfg});
    }
    for (ConvStyle s : {ConvStyle::Symmetric, ConvStyle::Asymmetric}) {
        SinetConfig cfg = base;
        cfg.conv_style = s;
        grid.push_back(
            {std::string("conv=") + (s == ConvStyle::Symmetric ? "sym" : "asym"), cfg});
    }
    for (const auto& pattern :
         {std::array<int, 3>{0, 0, 0}, std::array<int, 3>{1, 0, 0},
          std::array<int, 3>{1, 1, 0}, std::array<int, 3>{1, 1, 1}}) {
        SinetConfig cfg = base;
        cfg.reverse_pattern = pattern;
        std::string name = "reverse=";
        for (int f : pattern) name += std::to_string(f);
        grid.push_back({name, cfg});
    }
    for (const auto& groups :
         {std::array<int, 3>{1, 1, 1}, std::array<int, 3>{8, 8, 8},
          std::array<int, 3>{32, 32, 32}, std::array<int, 3>{1, 8, 32},
          std::array<int, 3>{32, 8, 1}}) {
        SinetConfig cfg = base;
        cfg.group_sizes = groups;
        std::string name = "groups=";
        for (std::size_t i = 0; i < groups.size(); ++i)
            name += (i ? ";" : "") + std::to_string(groups[i]);
        grid.push_back({name, cfg});
    }
    return grid;
}

struct AblationOptions {
    int images = 8;
    int image_size = 64;
    long steps = 30;
    int batch_size = 4;
    Real learning_rate = Real(1e-4);
    std::uint64_t seed = 42;
};

// Mean metric scores of a trained model over its own training images.
inline MetricScores score_on_dataset(const std::vector<Sample>& data,
                                     const SinetParams& params, const SinetConfig& cfg) {
    require(!data.empty(), ErrorKind::Validation, "score_on_dataset: empty dataset");
    std::vector<MetricScores> scores;
    scores.reserve(data.size());
    for (const auto& [image, gt] : data) {
        const SideOutputs side = sinet_forward(image, params, cfg);
        const GrayMap pred = GrayMap::from_tensor(sigmoid(side.c3_up));
        scores.push_back(evaluate_pair(pred, BinaryMask::from_tensor(gt)));
    }
    const MetricReport rep = aggregate_scores(scores);
    return {rep.s_alpha, rep.e_phi_mean, rep.f_beta_w, rep.mae_v};
}

// Trains each grid entry on the same seeded toy dataset and evaluates the
// four metrics on it.
inline BenchmarkTable run_ablation(const std::vector<AblationSpec>& grid,
                                   const AblationOptions& opt) {
    require(!grid.empty(), ErrorKind::Validation, "ablation grid is empty");
    for (const AblationSpec& spec : grid) spec.config.validate();
    const std::vector<Sample> data =
        make_toy_dataset(opt.images, opt.image_size, opt.seed);

    BenchmarkTable table;
    table.title = "Ablation (toy dataset)";
    table.datasets = {"toy"};
    for (const AblationSpec& spec : grid) {
        TrainConfig tc;
        tc.batch_size = opt.batch_size;
        tc.learning_rate = opt.learning_rate;
        tc.max_steps = opt.steps;
        tc.epochs = 1 << 20;   // step cap terminates
        tc.seed = opt.seed;
        const TrainResult result = train(data, spec.config, tc);
        table.rows.push_back({spec.name, {score_on_dataset(data, result.params, spec.config)}});
    }
    return table;
}

// ---------------------------------------------------------------------------
// cross-dataset runs
// ---------------------------------------------------------------------------

// Spec document, two accepted shapes:
//   {"datasets": [...], "matrix": [[...]]}                  scores given directly
//   {"datasets": [...], "manifests": {name: path},
//    "predictions": {trained: {tested: pred_dir}}}          scores computed (S_alpha)
inline CrossdataReport crossdata_from_spec(const nlohmann::json& spec) {
    require(spec.is_object() && spec.contains("datasets"), ErrorKind::Validation,
            "crossdata spec needs a 'datasets' array");
    std::vector<std::string> datasets;
    for (const auto& d : spec.at("datasets")) datasets.push_back(d.get<std::string>());
    require(!datasets.empty(), ErrorKind::Validation, "crossdata spec has no datasets");

    if (spec.contains("matrix")) {
        std::vector<std::vector<Real>> matrix;
        for (const auto& row : spec.at("matrix"))
            matrix.push_back(row.get<std::vector<Real>>());
        return make_crossdata_report(std::move(datasets), std::move(matrix));
    }

    require(spec.contains("manifests") && spec.contains("predictions"), ErrorKind::Validation,
            "crossdata spec needs either 'matrix' or 'manifests' + 'predictions'");
    std::map<std::string, DatasetManifest> manifests;
    for (const auto& name : datasets) {
        require(spec.at("manifests").contains(name), ErrorKind::Validation,
                "crossdata spec missing manifest for dataset '" + name + "'");
        manifests.emplace(name,
                          load_manifest(spec.at("manifests").at(name).get<std::string>(), name));
    }
    std::vector<std::vector<Real>> matrix(datasets.size(),
                                          std::vector<Real>(datasets.size(), 0));
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        require(spec.at("predictions").contains(datasets[i]), ErrorKind::Validation,
                "crossdata spec missing predictions for run trained on '" + datasets[i] + "'");
        const auto& row = spec.at("predictions").at(datasets[i]);
        for (std::size_t j = 0; j < datasets.size(); ++j) {
            require(row.contains(datasets[j]), ErrorKind::Validation,
                    "crossdata spec is not square: run '" + datasets[i] +
                        "' has no predictions on '" + datasets[j] + "'");
            const EvalResult r =
                evaluate_dataset(manifests.at(datasets[j]), row.at(datasets[j]).get<std::string>());
            matrix[i][j] = r.overall.s_alpha;
        }
    }
    return make_crossdata_report(std::move(datasets), std::move(matrix));
}

} // namespace sinet
