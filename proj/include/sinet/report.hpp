#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sinet/common.hpp"
#include "sinet/dataset.hpp"
#include "sinet/metrics.hpp"

namespace sinet {

// Fixed metric column order used by every table and report.
inline constexpr std::array<const char*, 4> kMetricColumns{"S_alpha", "E_phi", "F_beta_w",
                                                           "M"};

// Fixed-point rendering with ties rounded half away from zero, so the exact
// tie 0.0625 prints as "0.063" where printf's half-even would give "0.062".
inline std::string format_fixed(Real v, int decimals) {
    require(decimals >= 0 && decimals <= 9, ErrorKind::Validation, "bad decimal count");
    require(is_finite(v), ErrorKind::Validation, "cannot format non-finite value");
    long double scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const bool neg = v < 0;
    long long units = static_cast<long long>(std::floor(
        static_cast<long double>(neg ? -v : v) * scale + 0.5L));
    char buf[64];
    if (decimals == 0) {
        std::snprintf(buf, sizeof(buf), "%s%lld", neg && units != 0 ? "-" : "", units);
        return buf;
    }
    long long whole = units;
    long long frac = 0;
    const long long div = static_cast<long long>(scale);
    whole = units / div;
    frac = units % div;
    std::snprintf(buf, sizeof(buf), "%s%lld.%0*lld", neg && units != 0 ? "-" : "", whole,
                  decimals, frac);
    return buf;
}

inline std::string format_score(Real v) { return format_fixed(v, 3); }

inline std::string format_percent(Real fraction) {
    return format_fixed(fraction * 100, 1) + "%";
}

namespace detail {

inline std::string markdown_table(const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows) {
    std::string out = "|";
    for (const auto& h : header) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& row : rows) {
        require(row.size() == header.size(), ErrorKind::Validation,
                "markdown row width mismatch");
        out += "|";
        for (const auto& cell : row) out += " " + cell + " |";
        out += "\n";
    }
    return out;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// benchmark table (rows = runs, column group of four metrics per dataset)
// ---------------------------------------------------------------------------

struct BenchmarkTable {
    std::string title;
    std::vector<std::string> datasets;
    struct Row {
        std::string name;
        std::vector<MetricScores> cells;   // one per dataset
    };
    std::vector<Row> rows;

    void validate() const {
        for (const Row& r : rows)
            require(r.cells.size() == datasets.size(), ErrorKind::Validation,
                    "benchmark row '" + r.name + "' has wrong cell count");
    }
};

inline nlohmann::json to_json(const MetricScores& s) {
    return {{"s_alpha", s.s_alpha},
            {"e_phi", s.e_phi_mean},
            {"f_beta_w", s.f_beta_w},
            {"mae", s.mae_v}};
}

inline MetricScores metric_scores_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("s_alpha") && j.contains("e_phi") &&
                j.contains("f_beta_w") && j.contains("mae"),
            ErrorKind::Validation, "metric cell needs s_alpha/e_phi/f_beta_w/mae");
    MetricScores s;
    s.s_alpha = j["s_alpha"].get<Real>();
    s.e_phi_mean = j["e_phi"].get<Real>();
    s.f_beta_w = j["f_beta_w"].get<Real>();
    s.mae_v = j["mae"].get<Real>();
    return s;
}

inline nlohmann::json to_json(const BenchmarkTable& table) {
    table.validate();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& cell : row.cells) cells.push_back(to_json(cell));
        rows.push_back({{"name", row.name}, {"scores", cells}});
    }
    return {{"schema", "sinet-benchmark-table/1"},
            {"title", table.title},
            {"datasets", table.datasets},
            {"rows", rows}};
}

inline BenchmarkTable benchmark_table_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.value("schema", "") == "sinet-benchmark-table/1",
            ErrorKind::Validation, "not a sinet-benchmark-table/1 document");
    BenchmarkTable t;
    t.title = j.value("title", "");
    for (const auto& d : j.at("datasets")) t.datasets.push_back(d.get<std::string>());
    for (const auto& row : j.at("rows")) {
        BenchmarkTable::Row r;
        r.name = row.at("name").get<std::string>();
        for (const auto& cell : row.at("scores"))
            r.cells.push_back(metric_scores_from_json(cell));
        t.rows.push_back(std::move(r));
    }
    t.validate();
    return t;
}

// Markdown with the best score per column bolded (MAE: lower is better,
// everything else: higher is better). Ties are all marked.
inline std::string to_markdown(const BenchmarkTable& table) {
    table.validate();
    std::vector<std::string> header{"run"};
    for (const auto& d : table.datasets)
        for (const auto* m : kMetricColumns) header.push_back(d + " " + m);

    const auto metric_of = [](const MetricScores& s, int k) {
        switch (k) {
            case 0: return s.s_alpha;
            case 1: return s.e_phi_mean;
            case 2: return s.f_beta_w;
            default: return s.mae_v;
        }
    };
    const std::size_t columns = table.datasets.size() * 4;
    std::vector<Real> best(columns, 0);
    for (std::size_t c = 0; c < columns; ++c) {
        const int k = static_cast<int>(c % 4);
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const Real v = metric_of(table.rows[r].cells[c / 4], k);
            if (r == 0 || (k == 3 ? v < best[c] : v > best[c])) best[c] = v;
        }
    }

    std::vector<std::vector<std::string>> rows;
    for (const auto& row : table.rows) {
        std::vector<std::string> cells{row.name};
        for (std::size_t c = 0; c < columns; ++c) {
            const Real v = metric_of(row.cells[c / 4], static_cast<int>(c % 4));
            std::string s = format_score(v);
            if (!table.rows.empty() && v == best[c]) s = "**" + s + "**";
            cells.push_back(std::move(s));
        }
        rows.push_back(std::move(cells));
    }
    std::string out;
    if (!table.title.empty()) out += "## " + table.title + "\n\n";
    out += detail::markdown_table(header, rows);
    return out;
}

inline std::string to_csv(const BenchmarkTable& table) {
    table.validate();
    std::string out = "run";
    for (const auto& d : table.datasets)
        for (const auto* m : kMetricColumns)
            out += "," + detail::csv_escape(d + " " + m);
    out += "\n";
    for (const auto& row : table.rows) {
        out += detail::csv_escape(row.name);
        for (const auto& cell : row.cells) {
            out += "," + format_score(cell.s_alpha);
            out += "," + format_score(cell.e_phi_mean);
            out += "," + format_score(cell.f_beta_w);
            out += "," + format_score(cell.mae_v);
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// evaluation report (overall + per-super-class + per-sub-class)
// ---------------------------------------------------------------------------

struct EvalReport {
    std::string dataset;
    MetricReport overall;
    std::map<std::string, MetricReport> per_super;
    std::map<std::string, MetricReport> per_sub;
};

inline EvalReport make_eval_report(const std::string& dataset, const EvalResult& result) {
    EvalReport rep;
    rep.dataset = dataset;
    rep.overall = result.overall;
    rep.per_super = result.per_super;
    rep.per_sub = result.per_sub;
    return rep;
}

inline nlohmann::json to_json(const MetricReport& r) {
    return {{"s_alpha", r.s_alpha},
            {"e_phi", r.e_phi_mean},
            {"f_beta_w", r.f_beta_w},
            {"mae", r.mae_v},
            {"images", r.image_count}};
}

inline MetricReport metric_report_from_json(const nlohmann::json& j) {
    const MetricScores s = metric_scores_from_json(j);
    require(j.contains("images"), ErrorKind::Validation, "metric report needs image count");
    MetricReport r;
    r.s_alpha = s.s_alpha;
    r.e_phi_mean = s.e_phi_mean;
    r.f_beta_w = s.f_beta_w;
    r.mae_v = s.mae_v;
    r.image_count = j["images"].get<std::size_t>();
    return r;
}

inline nlohmann::json to_json(const EvalReport& rep) {
    nlohmann::json per_super = nlohmann::json::object();
    for (const auto& [name, r] : rep.per_super) per_super[name] = to_json(r);
    nlohmann::json per_sub = nlohmann::json::object();
    for (const auto& [name, r] : rep.per_sub) per_sub[name] = to_json(r);
    return {{"schema", "sinet-eval/1"},
            {"dataset", rep.dataset},
            {"overall", to_json(rep.overall)},
            {"per_super", per_super},
            {"per_sub", per_sub}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.value("schema", "") == "sinet-eval/1", ErrorKind::Validation,
            "not a sinet-eval/1 document");
    EvalReport rep;
    rep.dataset = j.value("dataset", "");
    rep.overall = metric_report_from_json(j.at("overall"));
    for (const auto& [name, r] : j.at("per_super").items())
        rep.per_super[name] = metric_report_from_json(r);
    for (const auto& [name, r] : j.at("per_sub").items())
        rep.per_sub[name] = metric_report_from_json(r);
    return rep;
}

namespace detail {

inline std::vector<std::string> metric_row(const std::string& name, const MetricReport& r) {
    return {name,
            format_score(r.s_alpha),
            format_score(r.e_phi_mean),
            format_score(r.f_beta_w),
            format_score(r.mae_v),
            std::to_string(r.image_count)};
}

} // namespace detail

inline std::string to_markdown(const EvalReport& rep) {
    const std::vector<std::string> header{"scope",    kMetricColumns[0], kMetricColumns[1],
                                          kMetricColumns[2], kMetricColumns[3], "images"};
    std::string out = "## Evaluation: " + rep.dataset + "\n\n";
    out += detail::markdown_table(header, {detail::metric_row("overall", rep.overall)});
    if (!rep.per_super.empty()) {
        out += "\n### Per super-class\n\n";
        std::vector<std::vector<std::string>> rows;
        for (const auto& [name, r] : rep.per_super)
            rows.push_back(detail::metric_row(name, r));
        out += detail::markdown_table(header, rows);
    }
    if (!rep.per_sub.empty()) {
        out += "\n### Per sub-class\n\n";
        std::vector<std::vector<std::string>> rows;
        for (const auto& [name, r] : rep.per_sub) rows.push_back(detail::metric_row(name, r));
        out += detail::markdown_table(header, rows);
    }
    return out;
}

inline std::string to_csv(const EvalReport& rep) {
    std::string out = "scope,name,S_alpha,E_phi,F_beta_w,M,images\n";
    const auto line = [&](const std::string& scope, const std::string& name,
                          const MetricReport& r) {
        out += scope + "," + detail::csv_escape(name) + "," + format_score(r.s_alpha) + "," +
               format_score(r.e_phi_mean) + "," + format_score(r.f_beta_w) + "," +
               format_score(r.mae_v) + "," + std::to_string(r.image_count) + "\n";
    };
    line("overall", rep.dataset, rep.overall);
    for (const auto& [name, r] : rep.per_super) line("super", name, r);
    for (const auto& [name, r] : rep.per_sub) line("sub", name, r);
    return out;
}

// ---------------------------------------------------------------------------
// cross-dataset generalization report
// ---------------------------------------------------------------------------

struct CrossdataReport {
    std::vector<std::string> datasets;           // row = trained-on, col = tested-on
    std::vector<std::vector<Real>> matrix;       // S_alpha scores
    std::vector<GeneralizationRow> rows;         // empty when single dataset (N/A)
};

inline CrossdataReport make_crossdata_report(std::vector<std::string> datasets,
                                             std::vector<std::vector<Real>> matrix) {
    require(!datasets.empty(), ErrorKind::Validation, "crossdata: no datasets");
    require(matrix.size() == datasets.size(), ErrorKind::Validation,
            "crossdata: matrix rows must match dataset count");
    for (const auto& row : matrix)
        require(row.size() == datasets.size(), ErrorKind::Validation,
                "crossdata: score matrix is not square");
    CrossdataReport rep;
    rep.datasets = std::move(datasets);
    rep.matrix = std::move(matrix);
    if (rep.datasets.size() >= 2) rep.rows = generalization_table(rep.matrix);
    return rep;
}

inline nlohmann::json to_json(const CrossdataReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"self", r.self}, {"mean_others", r.mean_others}, {"drop", r.drop}});
    return {{"schema", "sinet-crossdata/1"},
            {"datasets", rep.datasets},
            {"matrix", rep.matrix},
            {"rows", rows}};
}

inline CrossdataReport crossdata_report_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.value("schema", "") == "sinet-crossdata/1",
            ErrorKind::Validation, "not a sinet-crossdata/1 document");
    std::vector<std::string> datasets;
    for (const auto& d : j.at("datasets")) datasets.push_back(d.get<std::string>());
    std::vector<std::vector<Real>> matrix;
    for (const auto& row : j.at("matrix")) matrix.push_back(row.get<std::vector<Real>>());
    return make_crossdata_report(std::move(datasets), std::move(matrix));
}

inline std::string to_markdown(const CrossdataReport& rep) {
    std::string out = "## Cross-dataset generalization\n\n";
    if (rep.rows.empty()) {
        out += "Single dataset: self/others drop is N/A.\n";
        return out;
    }
    std::vector<std::string> header{"trained on", "self", "mean others", "drop"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        rows.push_back({rep.datasets[i], format_score(rep.rows[i].self),
                        format_score(rep.rows[i].mean_others),
                        format_percent(rep.rows[i].drop)});
    }
    out += detail::markdown_table(header, rows);
    return out;
}

// ---------------------------------------------------------------------------
// dataset statistics report
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const DatasetStats& stats, const std::string& dataset) {
    nlohmann::json resolutions = nlohmann::json::array();
    for (const auto& [dims, count] : stats.resolution_histogram)
        resolutions.push_back(
            {{"width", dims.first}, {"height", dims.second}, {"count", count}});
    nlohmann::json attributes = nlohmann::json::object();
    for (int a = 0; a < kAttributeCount; ++a)
        attributes[kAttributeNames[a]] = {{"count", stats.attribute_counts[a]},
                                          {"known", stats.attribute_known[a]}};
    nlohmann::json cooccurrence = nlohmann::json::array();
    for (int a = 0; a < kAttributeCount; ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (int b = 0; b < kAttributeCount; ++b) row.push_back(stats.cooccurrence[a][b]);
        cooccurrence.push_back(row);
    }
    return {{"schema", "sinet-stats/1"},
            {"dataset", dataset},
            {"images", stats.image_count},
            {"size",
             {{"min", stats.size_min},
              {"mean", stats.size_mean},
              {"max", stats.size_max},
              {"ratios", stats.size_ratios},
              {"histogram", stats.size_histogram}}},
            {"contrast",
             {{"global", stats.global_contrast},
              {"local", stats.local_contrast},
              {"skipped", stats.contrast_skipped}}},
            {"center",
             {{"distances", stats.center_distances}, {"skipped", stats.center_skipped}}},
            {"heatmap_grid", stats.heatmap_grid},
            {"resolutions", resolutions},
            {"attributes", attributes},
            {"cooccurrence", cooccurrence}};
}

// CSV histogram of foreground-size ratios: bin lower bound, upper bound, count.
inline std::string size_histogram_csv(const DatasetStats& stats) {
    std::string out = "bin_low,bin_high,count\n";
    for (int b = 0; b < kSizeHistogramBins; ++b) {
        const Real lo = Real(b) / kSizeHistogramBins;
        const Real hi = Real(b + 1) / kSizeHistogramBins;
        out += format_fixed(lo, 2) + "," + format_fixed(hi, 2) + "," +
               std::to_string(stats.size_histogram[b]) + "\n";
    }
    return out;
}

} // namespace sinet
