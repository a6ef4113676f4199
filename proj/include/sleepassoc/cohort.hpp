#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sleepassoc/timeutil.hpp"

namespace sleepassoc {

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

enum class SleepStage { Awake, Light, Deep, Rem };

inline bool is_non_awake(SleepStage s) { return s != SleepStage::Awake; }
inline bool is_nrem(SleepStage s) { return s == SleepStage::Light || s == SleepStage::Deep; }

std::string_view stage_label(SleepStage s);                    // "awake".."rem"
std::optional<SleepStage> parse_stage(std::string_view label); // lowercase exact match

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct SleepEpisode {
    SleepStage stage = SleepStage::Awake;
    std::int64_t start_epoch_s = 0;
    int tz_offset_min = 0;
    std::int64_t duration_s = 0;  // > 0

    std::int64_t end_epoch_s() const { return start_epoch_s + duration_s; }
};

// One assembled main-sleep session. Episodes are contiguous (internal gaps
// closed with synthetic Awake episodes). Leading/trailing Awake episodes are
// kept and count toward time in bed; onset/offset bracket the Non-Awake part.
struct NightRecord {
    std::string participant_id;
    std::int64_t night_key = 0;  // noon-to-noon local day number the session starts in
    int tz_offset_min = 0;
    std::vector<SleepEpisode> episodes;
    double onset_h = 0.0;   // noon axis: hours since 12:00 local of night_key
    double offset_h = 0.0;
    std::int64_t onset_epoch_s = 0;   // instant of first Non-Awake start
    std::int64_t offset_epoch_s = 0;  // instant of last Non-Awake end
};

struct Phq8Record {
    std::string participant_id;
    std::int64_t completed_at_s = 0;
    int tz_offset_min = 0;
    std::array<std::optional<int>, 8> items{};  // each in [0,3] when present

    bool complete() const {
        for (const auto& it : items) {
            if (!it) return false;
        }
        return true;
    }
    std::optional<int> total() const {
        int t = 0;
        for (const auto& it : items) {
            if (!it) return std::nullopt;
            t += *it;
        }
        return t;
    }
    // sub-item 3 ("trouble falling or staying asleep, or sleeping too much")
    std::optional<int> sleep_subscore() const { return items[2]; }
};

struct ParticipantProfile {
    std::string participant_id;
    std::string site;
    std::optional<double> age;  // years at baseline
    std::string gender;
    std::string education;  // "degree-or-above" | "below-degree"
    std::string income;     // "<15k" | "15k-40k" | ">40k" | "not-mentioned"
};

inline const std::array<std::string_view, 2> kEducationLevels = {"degree-or-above",
                                                                 "below-degree"};
inline const std::array<std::string_view, 4> kIncomeLevels = {"<15k", "15k-40k", ">40k",
                                                              "not-mentioned"};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct RowDiagnostic {
    std::string file;
    std::size_t line = 0;  // 1-based line in the source file
    std::string message;
};

// Immutable after ingestion; all downstream operations are pure functions
// over it and safe to run concurrently per participant.
struct CohortDataset {
    std::vector<std::string> participant_order;  // demographics file order
    std::map<std::string, std::vector<SleepEpisode>> episodes;  // sorted by start
    std::map<std::string, std::vector<Phq8Record>> phq8;        // sorted by completed_at
    std::map<std::string, ParticipantProfile> profiles;

    bool operator==(const CohortDataset&) const;
};

struct IngestResult {
    CohortDataset dataset;
    std::vector<RowDiagnostic> diagnostics;  // rejected rows, one entry each
};

// File formats (CSV, exact headers):
//   episodes:     participant_id,stage,start_utc,tz_offset_min,duration_s
//   phq8:         participant_id,completed_at_utc,tz_offset_min,q1,...,q8
//   demographics: participant_id,site,age,gender,education,income
// Malformed rows are rejected with row-level diagnostics; a wrong header is
// fatal. PHQ-8 rows with blank items are kept and flagged incomplete.
IngestResult ingest_cohort(const std::string& episodes_path, const std::string& phq8_path,
                           const std::string& demographics_path);

void export_cohort(const CohortDataset& ds, const std::string& episodes_path,
                   const std::string& phq8_path, const std::string& demographics_path);

// ---------------------------------------------------------------------------
// Night assembly
// ---------------------------------------------------------------------------

struct AssemblyConfig {
    std::int64_t session_gap_s = 3600;  // gap > this starts a new session
    std::int64_t min_session_s = 3600;  // shorter sessions are naps, dropped
};

// Groups a participant's episode stream into sessions, closes internal gaps
// with synthetic Awake episodes, keeps the longest session per noon-to-noon
// day, and drops naps. Sessions with no Non-Awake stage, and the rare session
// still running at the following noon, are dropped as well.
std::vector<NightRecord> assemble_nights(std::string_view participant_id,
                                         std::vector<SleepEpisode> episodes,
                                         const AssemblyConfig& cfg = {});

}  // namespace sleepassoc
