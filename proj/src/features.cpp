#include "sleepassoc/features.hpp"

#include <vector>

#include "sleepassoc/kernels.hpp"

namespace sleepassoc {

std::optional<Feat> feature_from_name(std::string_view name) {
    for (int i = 0; i < kFeatureCount; ++i) {
        if (kFeatureNames[i] == name) return static_cast<Feat>(i);
    }
    return std::nullopt;
}

NightMetrics night_metrics(const NightRecord& night) {
    NightMetrics m;

    std::int64_t total_s = 0, deep_s = 0, light_s = 0, rem_s = 0, awake_s = 0;
    std::optional<std::int64_t> first_rem_start;
    for (const auto& ep : night.episodes) {
        total_s += ep.duration_s;
        switch (ep.stage) {
            case SleepStage::Deep: deep_s += ep.duration_s; break;
            case SleepStage::Light: light_s += ep.duration_s; break;
            case SleepStage::Rem:
                rem_s += ep.duration_s;
                if (!first_rem_start) first_rem_start = ep.start_epoch_s;
                break;
            case SleepStage::Awake: awake_s += ep.duration_s; break;
        }
    }
    const std::int64_t sleep_s = deep_s + light_s + rem_s;

    m.sleep_duration_h = static_cast<double>(sleep_s) / 3600.0;
    m.time_in_bed_h = static_cast<double>(total_s) / 3600.0;
    const double tib = static_cast<double>(total_s);
    m.pct_deep = 100.0 * static_cast<double>(deep_s) / tib;
    m.pct_light = 100.0 * static_cast<double>(light_s) / tib;
    m.pct_rem = 100.0 * static_cast<double>(rem_s) / tib;
    m.pct_awake = 100.0 * static_cast<double>(awake_s) / tib;
    m.pct_nrem = m.pct_deep + m.pct_light;
    m.efficiency = static_cast<double>(sleep_s) / tib;
    m.onset_h = night.onset_h;
    m.offset_h = night.offset_h;

    // REM latency: wall-clock interval from onset to the first REM start,
    // intervening wake time included
    if (first_rem_start) {
        m.rem_latency_min = static_cast<double>(*first_rem_start - night.onset_epoch_s) / 60.0;
    }

    // merge contiguous Awake episodes into runs, then count the ones strictly
    // inside the onset..offset bracket
    struct AwakeRun {
        std::int64_t start, end;
    };
    std::vector<AwakeRun> runs;
    for (const auto& ep : night.episodes) {
        if (ep.stage != SleepStage::Awake) continue;
        if (!runs.empty() && runs.back().end == ep.start_epoch_s) {
            runs.back().end = ep.end_epoch_s();
        } else {
            runs.push_back({ep.start_epoch_s, ep.end_epoch_s()});
        }
    }
    bool prolonged = false;
    for (const auto& run : runs) {
        if (run.start < night.onset_epoch_s || run.end > night.offset_epoch_s) continue;
        const std::int64_t dur = run.end - run.start;
        if (dur > 5 * 60) ++m.awakenings_gt5;
        if (dur >= 30 * 60) prolonged = true;
    }

    m.middle_insomnia = m.sleep_duration_h < 6.0 && prolonged;
    m.dur_gt10 = m.sleep_duration_h > 10.0;
    m.onset_after_00 = m.onset_h > 12.0;
    m.onset_after_01 = m.onset_h > 13.0;
    m.onset_after_02 = m.onset_h > 14.0;
    m.is_weekend_night = is_weekend_day(local_day(night.offset_epoch_s, night.tz_offset_min));

    return m;
}

namespace {

double mean_of(const std::vector<double>& v) { return kernels::mean(v); }

}  // namespace

FeatureVector window_features(std::span<const NightRecord> nights, const Phq8Record& anchor,
                              int window_days) {
    FeatureVector fv;
    fv.participant_id = anchor.participant_id;
    fv.anchor_completed_at_s = anchor.completed_at_s;

    const std::int64_t hi = anchor.completed_at_s;
    const std::int64_t lo = hi - static_cast<std::int64_t>(window_days) * 86400;

    std::vector<NightMetrics> sel;
    for (const auto& night : nights) {
        if (night.offset_epoch_s > lo && night.offset_epoch_s <= hi) {
            sel.push_back(night_metrics(night));
        }
    }
    fv.n_nights_in_window = static_cast<int>(sel.size());
    if (sel.empty()) return fv;

    const auto n = static_cast<double>(sel.size());
    std::vector<double> durs, tibs, deeps, lights, rems, nrems, awakes, effs, onsets, offsets,
        awk_counts, rem_lats, wkend_durs, wkday_durs;
    int n_after12 = 0, n_after1 = 0, n_after2 = 0, n_insomnia = 0, n_dur10 = 0;
    for (const auto& m : sel) {
        durs.push_back(m.sleep_duration_h);
        tibs.push_back(m.time_in_bed_h);
        deeps.push_back(m.pct_deep);
        lights.push_back(m.pct_light);
        rems.push_back(m.pct_rem);
        nrems.push_back(m.pct_nrem);
        awakes.push_back(m.pct_awake);
        effs.push_back(m.efficiency);
        onsets.push_back(m.onset_h);
        offsets.push_back(m.offset_h);
        awk_counts.push_back(static_cast<double>(m.awakenings_gt5));
        if (m.rem_latency_min) rem_lats.push_back(*m.rem_latency_min);
        (m.is_weekend_night ? wkend_durs : wkday_durs).push_back(m.sleep_duration_h);
        n_after12 += m.onset_after_00;
        n_after1 += m.onset_after_01;
        n_after2 += m.onset_after_02;
        n_insomnia += m.middle_insomnia;
        n_dur10 += m.dur_gt10;
    }

    fv[Feat::SleepDur] = mean_of(durs);
    fv[Feat::TimeBed] = mean_of(tibs);
    fv[Feat::DeepPct] = mean_of(deeps);
    fv[Feat::LightPct] = mean_of(lights);
    fv[Feat::RemPct] = mean_of(rems);
    fv[Feat::NremPct] = mean_of(nrems);
    fv[Feat::AwakePct] = mean_of(awakes);
    fv[Feat::Efficiency] = mean_of(effs);
    fv[Feat::AvOnset] = mean_of(onsets);
    fv[Feat::AvOffset] = mean_of(offsets);
    fv[Feat::Awake5] = mean_of(awk_counts);
    if (!rem_lats.empty()) fv[Feat::RemL] = mean_of(rem_lats);
    if (sel.size() >= 2) {
        fv[Feat::StdDur] = kernels::sample_stddev(durs);
        fv[Feat::StdOnset] = kernels::sample_stddev(onsets);
        fv[Feat::StdOffset] = kernels::sample_stddev(offsets);
    }
    if (!wkend_durs.empty() && !wkday_durs.empty()) {
        fv[Feat::WkdDiff] = mean_of(wkend_durs) - mean_of(wkday_durs);
    }
    fv[Feat::After12] = 100.0 * n_after12 / n;
    fv[Feat::After1] = 100.0 * n_after1 / n;
    fv[Feat::After2] = 100.0 * n_after2 / n;
    fv[Feat::MInsomnia] = 100.0 * n_insomnia / n;
    fv[Feat::Dur10] = 100.0 * n_dur10 / n;

    return fv;
}

}  // namespace sleepassoc
