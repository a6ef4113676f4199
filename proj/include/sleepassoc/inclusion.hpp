#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sleepassoc/cohort.hpp"
#include "sleepassoc/features.hpp"

namespace sleepassoc {

// One analysis row per (participant, PHQ-8 record), carrying the covariates
// and the 21 windowed features. Feature cells are individually optional; a
// missing feature drops the row from that feature's model only.
struct AnalysisRow {
    std::string participant_id;
    std::int64_t completed_at_s = 0;
    std::string site;
    std::optional<double> age;
    std::string gender;
    std::string education;
    std::string income;
    std::optional<int> phq8_total;      // absent for incomplete records
    std::optional<int> sleep_subscore;  // absent when item 3 missing
    bool phq8_complete = false;
    int n_nights = 0;
    std::array<std::optional<double>, kFeatureCount> features{};
};

struct AnalysisTable {
    std::vector<AnalysisRow> rows;

    std::vector<std::string> site_order() const;  // first-encounter order
};

struct InclusionReport {
    int window_days = 14;
    int min_days = 12;
    int min_records = 3;
    std::size_t input_rows = 0;
    std::size_t no_profile = 0;                        // participant missing demographics
    std::size_t dropped_incomplete = 0;                // criterion (1)
    std::size_t dropped_insufficient_nights = 0;       // criterion (2)
    std::size_t dropped_participant_min_records = 0;   // criterion (3)
    std::size_t kept_rows = 0;
    std::size_t kept_participants = 0;
};

// Builds one row per PHQ-8 record (complete or not) for every participant
// that has a demographics profile, with features over the window anchored at
// the record's completion instant.
AnalysisTable build_analysis_rows(const CohortDataset& ds, int window_days = 14,
                                  const AssemblyConfig& assembly = {},
                                  std::size_t* no_profile_count = nullptr);

// Inclusion criteria, applied in order:
//   (1) drop incomplete PHQ-8 records
//   (2) drop rows with fewer than min_days nights in the window
//   (3) drop participants left with fewer than min_records rows
std::pair<AnalysisTable, InclusionReport> apply_inclusion(const AnalysisTable& table,
                                                          int min_days = 12, int min_records = 3);

// CSV round trip. The header is fixed:
//   participant_id,completed_at_utc,site,age,gender,education,income,
//   phq8_total,sleep_subscore,n_nights,<21 feature names>
// Empty cell = absent value.
void write_analysis_csv(const AnalysisTable& table, const std::string& path,
                        const std::vector<std::string>& config_lines = {});
AnalysisTable read_analysis_csv(const std::string& path);  // throws SchemaError

}  // namespace sleepassoc
