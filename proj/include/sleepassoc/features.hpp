#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "sleepassoc/cohort.hpp"

namespace sleepassoc {

// ---------------------------------------------------------------------------
// Feature catalogue (fixed order; report rows and table columns follow it)
// ---------------------------------------------------------------------------

enum class Feat : int {
    SleepDur = 0,
    TimeBed,
    DeepPct,
    LightPct,
    RemPct,
    NremPct,
    AwakePct,
    RemL,
    StdDur,
    StdOnset,
    StdOffset,
    Efficiency,
    Awake5,
    WkdDiff,
    AvOnset,
    After12,
    After1,
    After2,
    MInsomnia,
    AvOffset,
    Dur10,
};

inline constexpr int kFeatureCount = 21;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "Sleep_dur", "Time_bed",  "Deep_pct",   "Light_pct",  "REM_pct",  "NREM_pct", "Awake_pct",
    "REM_L",     "Std_dur",   "Std_onset",  "Std_offset", "Efficiency", "Awake_5", "WKD_diff",
    "Av_onset",  "After_12",  "After_1",    "After_2",    "M_insomnia", "Av_offset", "Dur_10"};

std::optional<Feat> feature_from_name(std::string_view name);
inline std::string_view feature_name(Feat f) { return kFeatureNames[static_cast<int>(f)]; }

// ---------------------------------------------------------------------------
// Per-night metrics
// ---------------------------------------------------------------------------

struct NightMetrics {
    double sleep_duration_h = 0.0;  // sum of Non-Awake stages
    double time_in_bed_h = 0.0;     // sum of all stages
    double pct_deep = 0.0;          // percent of time in bed, [0,100]
    double pct_light = 0.0;
    double pct_rem = 0.0;
    double pct_nrem = 0.0;
    double pct_awake = 0.0;
    std::optional<double> rem_latency_min;  // absent when the night has no REM
    double efficiency = 0.0;                // sleep_duration / time_in_bed
    double onset_h = 0.0;                   // noon axis
    double offset_h = 0.0;
    int awakenings_gt5 = 0;  // merged Awake runs > 5 min strictly inside onset..offset
    bool is_weekend_night = false;  // offset falls on local Saturday or Sunday
    bool middle_insomnia = false;   // < 6 h sleep and an awakening >= 30 min
    bool dur_gt10 = false;          // sleep duration > 10 h
    bool onset_after_00 = false;    // onset_h > 12.0 (past midnight)
    bool onset_after_01 = false;    // onset_h > 13.0
    bool onset_after_02 = false;    // onset_h > 14.0
};

NightMetrics night_metrics(const NightRecord& night);

// ---------------------------------------------------------------------------
// Windowed features
// ---------------------------------------------------------------------------

struct FeatureVector {
    std::string participant_id;
    std::int64_t anchor_completed_at_s = 0;
    int n_nights_in_window = 0;
    std::array<std::optional<double>, kFeatureCount> values{};

    const std::optional<double>& operator[](Feat f) const {
        return values[static_cast<int>(f)];
    }
    std::optional<double>& operator[](Feat f) { return values[static_cast<int>(f)]; }
};

// Aggregates nights whose offset instant lies in the half-open window
// (anchor - window_days, anchor]. Means for the level features, sample
// standard deviations (n-1, absent below 2 nights) for the stability
// features, percent-of-days for the flag features. WKD_diff needs both a
// weekend and a weekday night; REM_L needs at least one night with REM.
FeatureVector window_features(std::span<const NightRecord> nights, const Phq8Record& anchor,
                              int window_days = 14);

}  // namespace sleepassoc
