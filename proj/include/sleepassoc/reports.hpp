#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sleepassoc/inclusion.hpp"
#include "sleepassoc/stats.hpp"
#include "sleepassoc/sweep.hpp"

namespace sleepassoc {

// The declarative run configuration: flat keys, readable from a key=value
// file and emitted verbatim as a '#'-prefixed header in every report so any
// output can be traced back to (and re-run from) its exact settings.
struct RunConfig {
    std::string episodes;
    std::string phq8;
    std::string demographics;
    std::string table;
    std::string out_dir = ".";
    int window_days = 14;
    int min_days = 12;
    int min_records = 3;
    std::string predictor = "both";  // phq8 | subscore | both
    bool per_site = true;
    double bh_level = 0.05;
    std::string box_cox = "auto";  // off | auto | fixed:<lambda>
    std::uint64_t seed = 1;
    std::string synth_config;

    bool operator==(const RunConfig&) const = default;
};

// key=value file (one per line, '#' comments); throws ConfigError
RunConfig load_run_config(const std::string& path);

std::vector<std::string> config_header_lines(const RunConfig& cfg);
RunConfig parse_config_header(const std::vector<std::string>& lines);

// leading '#' lines of any report file, with the '#' stripped
std::vector<std::string> read_config_lines(const std::string& path);

BoxCoxSpec box_cox_from_string(const std::string& s);  // throws ConfigError

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

// TSV, one row per feature:
// feature coeff ci_low ci_high z p p_bh significant n_rows n_participants lambda status
void write_association_tsv(const AssociationReport& report, const std::string& path,
                           const RunConfig& cfg);

struct CorrelationReport {
    struct Row {
        std::string scope;  // site name or "Total"
        bool ok = false;
        CorrResult corr;
        std::string status = "ok";
    };
    std::vector<Row> rows;
};

// Spearman of PHQ-8 total against the sleep subscore, per site and pooled
CorrelationReport correlation_report(const AnalysisTable& table);
void write_correlation_tsv(const CorrelationReport& report, const std::string& path,
                           const RunConfig& cfg);

// Sociodemographics and PHQ-8 score summary per site with Kruskal-Wallis
// site-difference p-values
void write_cohort_summary_tsv(const AnalysisTable& table, const std::string& path,
                              const RunConfig& cfg);

void write_filtering_report_tsv(const InclusionReport& report, std::size_t no_profile,
                                const std::string& path, const RunConfig& cfg);

// plot-ready long-format CSVs: PHQ-8 histograms, pairwise feature
// correlations, per-participant trajectories
void write_figure_data(const AnalysisTable& table, const std::string& out_dir,
                       const RunConfig& cfg);

}  // namespace sleepassoc
