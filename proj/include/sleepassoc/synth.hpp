#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sleepassoc/cohort.hpp"
#include "sleepassoc/features.hpp"

namespace sleepassoc {

struct SynthVariance {
    double site = 0.0;         // variance of the per-site intercept
    double participant = 0.0;  // variance of the per-participant intercept
    double residual = 0.0;     // variance of the per-record noise
};

struct SynthDemographics {
    double age_min = 18.0;
    double age_max = 75.0;
    std::vector<std::pair<std::string, double>> gender_probs = {{"female", 0.7}, {"male", 0.3}};
    double p_degree = 0.5;
    std::array<double, 4> income_probs = {0.25, 0.40, 0.25, 0.10};  // kIncomeLevels order
};

struct SynthConfig {
    std::uint64_t seed = 1;
    int n_sites = 3;
    int participants_per_site = 30;
    int records_per_participant = 6;
    int record_spacing_days = 14;
    int window_days = 14;  // nights generated per questionnaire window
    int tz_offset_min = 0;

    // beta1 per coupled feature; absent features evolve independently of PHQ-8
    std::map<Feat, double> coupling;
    // variance components per coupled feature (defaults apply when absent)
    std::map<Feat, SynthVariance> variance_components;

    double night_drop_p = 0.0;
    double phq8_drop_p = 0.0;
    double item_drop_p = 0.0;

    SynthDemographics demographics;

    double phq8_mean = 10.0;
    double phq8_between_sd = 2.5;  // participant-level spread of the latent severity
    double phq8_within_sd = 2.0;   // record-to-record spread
};

struct TruthRecord {
    std::string participant_id;
    std::int64_t completed_at_s = 0;
    int phq8_total = 0;
    bool complete = true;  // all eight items survived the item drop
    bool emitted = true;   // questionnaire row present in the output
    int n_nights = 0;      // nights kept in this record's window
};

struct GroundTruth {
    std::map<Feat, double> beta1;  // all features; 0 when uncoupled
    std::map<Feat, SynthVariance> variance_components;
    std::map<Feat, std::map<std::string, double>> site_intercepts;
    std::map<Feat, std::map<std::string, double>> participant_intercepts;
    std::vector<TruthRecord> records;
};

struct RawCohort {
    CohortDataset dataset;  // identical to what ingesting the emitted files yields
    GroundTruth truth;
};

// Draws site and participant intercepts, per-record PHQ-8 totals (decomposed
// into items), then synthesizes each night's episode list so the targeted
// features realize delta + V_site + U_participant + beta1*PHQ8 + eps. Fully
// deterministic per seed. Throws ConfigError before any generation when a
// coupling is infeasible or two couplings drive the same construction channel.
RawCohort simulate_cohort(const SynthConfig& config);

// cohort files in the ingest formats plus the ground-truth sidecar
void write_cohort_files(const RawCohort& cohort, const std::string& episodes_path,
                        const std::string& phq8_path, const std::string& demographics_path,
                        const std::string& truth_json_path);

SynthConfig parse_synth_config_json(const std::string& json_text);  // throws ConfigError
std::string synth_config_to_json(const SynthConfig& config);

}  // namespace sleepassoc
