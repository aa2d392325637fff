// Command-line front end: inference, toy training, evaluation, dataset
// statistics, the ablation grid, and cross-dataset tables.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 validation
// failure, 1 unexpected internal error.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sinet/bench.hpp"
#include "sinet/dataset.hpp"
#include "sinet/image_io.hpp"
#include "sinet/model.hpp"
#include "sinet/report.hpp"
#include "sinet/train.hpp"
#include "sinet/weights_io.hpp"

namespace {

using namespace sinet;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitValidation = 4;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Config: return kExitConfig;
        case ErrorKind::Io: return kExitIo;
        default: return kExitValidation;
    }
}

// --- model configuration flags shared by infer / train-toy / ablate --------

struct ModelFlags {
    int channels = 32;
    std::string conv = "asym";
    std::string decoder = "ncd";
    std::string reverse = "100";
    std::string groups = "32;8;1";
    std::string widths = "16,24,32,48,64";
    std::uint64_t seed = 42;
};

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    std::string cur;
    const auto commit = [&]() {
        require(!cur.empty(), ErrorKind::Config, what + ": empty element in '" + text + "'");
        try {
            std::size_t used = 0;
            const int v = std::stoi(cur, &used);
            require(used == cur.size(), ErrorKind::Config,
                    what + ": bad integer '" + cur + "'");
            out.push_back(v);
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            fail(ErrorKind::Config, what + ": bad integer '" + cur + "'");
        }
        cur.clear();
    };
    for (char ch : text) {
        if (ch == ';' || ch == ',')
            commit();
        else
            cur.push_back(ch);
    }
    commit();
    return out;
}

SinetConfig to_config(const ModelFlags& flags) {
    SinetConfig cfg;
    cfg.channels = flags.channels;

    if (flags.conv == "sym") cfg.conv_style = ConvStyle::Symmetric;
    else if (flags.conv == "asym") cfg.conv_style = ConvStyle::Asymmetric;
    else fail(ErrorKind::Config, "conv style must be 'sym' or 'asym', got '" + flags.conv + "'");

    if (flags.decoder == "pd") cfg.decoder = DecoderStyle::Pd;
    else if (flags.decoder == "ncd") cfg.decoder = DecoderStyle::Ncd;
    else fail(ErrorKind::Config, "decoder must be 'ncd' or 'pd', got '" + flags.decoder + "'");

    require(flags.reverse.size() == 3, ErrorKind::Config,
            "reverse pattern must be three 0/1 flags, e.g. 100");
    for (int i = 0; i < 3; ++i) {
        const char c = flags.reverse[static_cast<std::size_t>(i)];
        require(c == '0' || c == '1', ErrorKind::Config,
                "reverse pattern must be three 0/1 flags, e.g. 100");
        cfg.reverse_pattern[static_cast<std::size_t>(i)] = c - '0';
    }

    const std::vector<int> groups = parse_int_list(flags.groups, "group sizes");
    require(groups.size() == 3, ErrorKind::Config, "group sizes need exactly 3 entries");
    for (int i = 0; i < 3; ++i) cfg.group_sizes[static_cast<std::size_t>(i)] = groups[i];

    const std::vector<int> widths = parse_int_list(flags.widths, "backbone widths");
    require(widths.size() == 5, ErrorKind::Config, "backbone widths need exactly 5 entries");
    for (int i = 0; i < 5; ++i) cfg.backbone.widths[static_cast<std::size_t>(i)] = widths[i];
    cfg.backbone.seed = flags.seed;

    cfg.validate();
    return cfg;
}

void add_model_options(CLI::App* cmd, ModelFlags& flags) {
    cmd->add_option("--channels", flags.channels, "Decoder channel width C")
        ->capture_default_str();
    cmd->add_option("--conv", flags.conv, "Convolution style: sym or asym")
        ->capture_default_str();
    cmd->add_option("--decoder", flags.decoder, "Decoder: ncd or pd")->capture_default_str();
    cmd->add_option("--reverse", flags.reverse, "Reverse-guidance flags per block, e.g. 100")
        ->capture_default_str();
    cmd->add_option("--groups", flags.groups, "Group sizes g1;g2;g3")->capture_default_str();
    cmd->add_option("--widths", flags.widths, "Backbone stage widths (5 ints)")
        ->capture_default_str();
    cmd->add_option("--seed", flags.seed, "Initialization seed")->capture_default_str();
}

void write_or_print(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        write_text_file(out_path, content);
}

std::string stats_warning_or_empty(const DatasetManifest& manifest) {
    if (manifest.records.empty())
        return "warning: dataset '" + manifest.name + "' is empty\n";
    return {};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concealed-object detection engine and benchmark toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value config file; CLI flags override");
    app.allow_config_extras(false);

    int threads = 0;
    app.add_option("--threads", threads,
                   "Worker threads (default: SINET_THREADS env or hardware)");

    // ---- infer -------------------------------------------------------------
    auto* infer = app.add_subcommand("infer", "Run the model over a directory of PNGs");
    ModelFlags infer_model;
    std::string infer_weights, infer_images, infer_out;
    int infer_size = kDefaultInputSize;
    infer->add_option("--weights", infer_weights, "Weight file")->required();
    infer->add_option("--images", infer_images, "Input image directory")->required();
    infer->add_option("--out", infer_out, "Output directory for prediction PNGs")->required();
    infer->add_option("--size", infer_size, "Square inference size (multiple of 32)")
        ->capture_default_str();
    add_model_options(infer, infer_model);

    // ---- train-toy ---------------------------------------------------------
    auto* train_toy = app.add_subcommand("train-toy", "Train on the synthetic toy dataset");
    ModelFlags toy_model;
    std::string toy_weights_out, toy_curve_out;
    int toy_images = 32, toy_size = 64, toy_batch = 4;
    long toy_steps = 300;
    double toy_lr = 1e-4;
    train_toy->add_option("--out", toy_weights_out, "Weight file to write")->required();
    train_toy->add_option("--curve", toy_curve_out, "Loss-curve CSV path");
    train_toy->add_option("--images", toy_images, "Toy dataset size")->capture_default_str();
    train_toy->add_option("--img-size", toy_size, "Toy image size (multiple of 32)")
        ->capture_default_str();
    train_toy->add_option("--steps", toy_steps, "Adam step cap")->capture_default_str();
    train_toy->add_option("--batch", toy_batch, "Batch size")->capture_default_str();
    train_toy->add_option("--lr", toy_lr, "Learning rate")->capture_default_str();
    add_model_options(train_toy, toy_model);

    // ---- eval ----------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Score predictions against a ground-truth set");
    std::string eval_preds, eval_gt, eval_name = "dataset", eval_out, eval_format = "json";
    bool eval_skip_missing = false;
    eval->add_option("--preds", eval_preds, "Prediction PNG directory")->required();
    eval->add_option("--gt", eval_gt, "GT dataset: directory, .csv, or .json manifest")
        ->required();
    eval->add_option("--name", eval_name, "Dataset display name")->capture_default_str();
    eval->add_option("--out", eval_out, "Output file (default: stdout)");
    eval->add_option("--format", eval_format, "json, csv, or markdown")
        ->check(CLI::IsMember({"json", "csv", "markdown"}))
        ->capture_default_str();
    eval->add_flag("--skip-missing", eval_skip_missing,
                   "Skip GT images without predictions instead of failing");

    // ---- stats -----------------------------------------------------------------
    auto* stats = app.add_subcommand("stats", "Dataset statistics and attribute analysis");
    std::string stats_dataset, stats_name = "dataset", stats_out_dir;
    int stats_grid = 256;
    stats->add_option("--dataset", stats_dataset, "Dataset: directory, .csv, or .json manifest")
        ->required();
    stats->add_option("--name", stats_name, "Dataset display name")->capture_default_str();
    stats->add_option("--out-dir", stats_out_dir, "Output directory")->required();
    stats->add_option("--grid", stats_grid, "Heatmap grid size")->capture_default_str();

    // ---- ablate -----------------------------------------------------------------
    auto* ablate = app.add_subcommand("ablate", "Train and score the ablation grid");
    ModelFlags ablate_model;
    std::string ablate_out, ablate_format = "markdown";
    std::vector<std::string> ablate_rows;
    AblationOptions ablate_opt;
    ablate->add_option("--out", ablate_out, "Output file (default: stdout)");
    ablate->add_option("--format", ablate_format, "json, csv, or markdown")
        ->check(CLI::IsMember({"json", "csv", "markdown"}))
        ->capture_default_str();
    ablate->add_option("--row", ablate_rows,
                       "Grid row override, e.g. decoder=pd, conv=sym, reverse=110, "
                       "groups=8;8;8 (repeatable; default: full grid)");
    ablate->add_option("--images", ablate_opt.images, "Toy dataset size")
        ->capture_default_str();
    ablate->add_option("--img-size", ablate_opt.image_size, "Toy image size")
        ->capture_default_str();
    ablate->add_option("--steps", ablate_opt.steps, "Adam steps per variant")
        ->capture_default_str();
    ablate->add_option("--batch", ablate_opt.batch_size, "Batch size")->capture_default_str();
    ablate->add_option("--lr", ablate_opt.learning_rate, "Learning rate")
        ->capture_default_str();
    add_model_options(ablate, ablate_model);

    // ---- crossdata ------------------------------------------------------------
    auto* crossdata = app.add_subcommand("crossdata", "Cross-dataset generalization table");
    std::string cross_spec, cross_out, cross_format = "markdown";
    crossdata->add_option("--spec", cross_spec, "JSON run specification")->required();
    crossdata->add_option("--out", cross_out, "Output file (default: stdout)");
    crossdata->add_option("--format", cross_format, "json or markdown")
        ->check(CLI::IsMember({"json", "markdown"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (threads > 0) {
            const std::string value = std::to_string(threads);
            setenv("SINET_THREADS", value.c_str(), 1);
        }

        if (infer->parsed()) {
            const SinetConfig cfg = to_config(infer_model);
            SinetParams params = SinetParams::make(cfg);
            load_weights_into(infer_weights, params);
            const std::size_t n = infer_dir(infer_images, infer_out, params, cfg, infer_size);
            if (n == 0) std::cerr << "warning: no images found in " << infer_images << "\n";
            std::cout << "wrote " << n << " prediction(s) to " << infer_out << "\n";
        } else if (train_toy->parsed()) {
            const SinetConfig cfg = to_config(toy_model);
            TrainConfig tc;
            tc.batch_size = toy_batch;
            tc.learning_rate = static_cast<Real>(toy_lr);
            tc.max_steps = toy_steps;
            tc.epochs = 1 << 20;
            tc.seed = toy_model.seed;
            const std::vector<Sample> data =
                make_toy_dataset(toy_images, toy_size, toy_model.seed);
            const TrainResult result = train(data, cfg, tc);
            save_weights(toy_weights_out, result.params);
            if (!toy_curve_out.empty())
                write_text_file(toy_curve_out, loss_curve_csv(result.loss_curve));
            const Real iou = mean_train_iou(data, result.params, cfg);
            std::cout << "steps " << result.loss_curve.size() << ", final loss "
                      << (result.loss_curve.empty() ? Real(0) : result.loss_curve.back())
                      << ", train IoU " << iou << "\n";
        } else if (eval->parsed()) {
            const DatasetManifest manifest = load_manifest(eval_gt, eval_name);
            const EvalResult result = evaluate_dataset(manifest, eval_preds, eval_skip_missing);
            const EvalReport report = make_eval_report(eval_name, result);
            if (eval_format == "json")
                write_or_print(eval_out, to_json(report).dump(2) + "\n");
            else if (eval_format == "csv")
                write_or_print(eval_out, to_csv(report));
            else
                write_or_print(eval_out, to_markdown(report));
        } else if (stats->parsed()) {
            const DatasetManifest manifest = load_manifest(stats_dataset, stats_name);
            const std::string warning = stats_warning_or_empty(manifest);
            if (!warning.empty()) std::cerr << warning;
            const DatasetStats st = dataset_stats(manifest, stats_grid);
            std::filesystem::create_directories(stats_out_dir);
            const std::filesystem::path dir(stats_out_dir);
            write_text_file((dir / "stats.json").string(),
                            to_json(st, manifest.name).dump(2) + "\n");
            write_text_file((dir / "size_histogram.csv").string(), size_histogram_csv(st));
            if (!manifest.records.empty())
                write_heatmap_png(st, (dir / "heatmap.png").string());
            std::cout << "wrote statistics for " << st.image_count << " image(s) to "
                      << stats_out_dir << "\n";
        } else if (ablate->parsed()) {
            const SinetConfig base = to_config(ablate_model);
            ablate_opt.seed = ablate_model.seed;
            std::vector<AblationSpec> grid;
            if (ablate_rows.empty()) {
                grid = default_ablation_grid(base);
            } else {
                for (const std::string& row : ablate_rows) {
                    const auto pos = row.find('=');
                    require(pos != std::string::npos, ErrorKind::Config,
                            "grid row must look like axis=value: " + row);
                    const std::string axis = row.substr(0, pos);
                    const std::string value = row.substr(pos + 1);
                    ModelFlags flags = ablate_model;
                    if (axis == "decoder") flags.decoder = value;
                    else if (axis == "conv") flags.conv = value;
                    else if (axis == "reverse") flags.reverse = value;
                    else if (axis == "groups") flags.groups = value;
                    else fail(ErrorKind::Config, "unknown grid axis '" + axis + "'");
                    grid.push_back({row, to_config(flags)});
                }
            }
            const BenchmarkTable table = run_ablation(grid, ablate_opt);
            if (ablate_format == "json")
                write_or_print(ablate_out, to_json(table).dump(2) + "\n");
            else if (ablate_format == "csv")
                write_or_print(ablate_out, to_csv(table));
            else
                write_or_print(ablate_out, to_markdown(table));
        } else if (crossdata->parsed()) {
            std::ifstream in(cross_spec);
            require(in.good(), ErrorKind::Io, "cannot open spec " + cross_spec);
            nlohmann::json spec;
            try {
                in >> spec;
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::Validation, std::string("bad JSON spec: ") + e.what());
            }
            const CrossdataReport report = crossdata_from_spec(spec);
            if (cross_format == "json")
                write_or_print(cross_out, to_json(report).dump(2) + "\n");
            else
                write_or_print(cross_out, to_markdown(report));
        }
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
