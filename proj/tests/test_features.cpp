#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle_helpers.hpp"
#include "sleepassoc/features.hpp"

using namespace sleepassoc;

namespace {

SleepEpisode ep(SleepStage stage, std::int64_t start_local, std::int64_t dur, int tz = 0) {
    SleepEpisode e;
    e.stage = stage;
    e.start_epoch_s = start_local - static_cast<std::int64_t>(tz) * 60;
    e.tz_offset_min = tz;
    e.duration_s = dur;
    return e;
}

std::int64_t lt(std::int64_t day, int h, int m = 0) { return day * 86400 + h * 3600 + m * 60; }

const std::int64_t kDay = days_from_civil(2019, 6, 12);  // Wednesday

NightRecord night_of(std::vector<SleepEpisode> eps) {
    const auto nights = assemble_nights("P1", std::move(eps));
    REQUIRE(nights.size() == 1);
    return nights[0];
}

Phq8Record anchor_at(std::int64_t epoch_s) {
    Phq8Record rec;
    rec.participant_id = "P1";
    rec.completed_at_s = epoch_s;
    for (auto& it : rec.items) it = 1;
    return rec;
}

}  // namespace

TEST_CASE("night metrics: mixed night with one awakening") {
    // Light 23:00-23:30, Deep 23:30-00:30, Awake 00:30-00:40, REM 00:40-01:10,
    // Light 01:10-07:00
    const NightRecord night = night_of({
        ep(SleepStage::Light, lt(kDay, 23, 0), 30 * 60),
        ep(SleepStage::Deep, lt(kDay, 23, 30), 60 * 60),
        ep(SleepStage::Awake, lt(kDay + 1, 0, 30), 10 * 60),
        ep(SleepStage::Rem, lt(kDay + 1, 0, 40), 30 * 60),
        ep(SleepStage::Light, lt(kDay + 1, 1, 10), 350 * 60),
    });
    const NightMetrics m = night_metrics(night);

    CHECK(m.sleep_duration_h == doctest::Approx(47.0 / 6.0).epsilon(1e-12));  // 7.8333 h
    CHECK(m.time_in_bed_h == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(m.pct_awake == doctest::Approx(100.0 * 10.0 / 480.0).epsilon(1e-12));  // 2.0833
    CHECK(m.efficiency == doctest::Approx(47.0 / 48.0).epsilon(1e-12));          // 0.97917
    REQUIRE(m.rem_latency_min.has_value());
    CHECK(*m.rem_latency_min == doctest::Approx(100.0));
    CHECK(m.awakenings_gt5 == 1);
    CHECK(!m.middle_insomnia);
    CHECK(!m.dur_gt10);

    // grid oracle agrees field by field
    const oracle::GridMetrics g = oracle::grid_night_metrics(night);
    CHECK(m.sleep_duration_h == doctest::Approx(g.sleep_duration_h).epsilon(1e-12));
    CHECK(m.pct_awake == doctest::Approx(g.pct_awake).epsilon(1e-12));
    CHECK(*m.rem_latency_min == doctest::Approx(*g.rem_latency_min).epsilon(1e-12));
    CHECK(m.awakenings_gt5 == g.awakenings_gt5);
}

TEST_CASE("night metrics: single-stage night") {
    const NightRecord night = night_of({ep(SleepStage::Light, lt(kDay, 22), 8 * 3600)});
    const NightMetrics m = night_metrics(night);
    CHECK(m.efficiency == doctest::Approx(1.0));
    CHECK(m.pct_light == doctest::Approx(100.0));
    CHECK(m.awakenings_gt5 == 0);
    CHECK(!m.rem_latency_min.has_value());
}

TEST_CASE("night metrics: middle insomnia and strict onset thresholds") {
    // Light 01:00-04:00, Awake 04:00-04:40, Light 04:40-06:00 (onset exactly 01:00)
    const NightRecord night = night_of({
        ep(SleepStage::Light, lt(kDay + 1, 1, 0), 3 * 3600),
        ep(SleepStage::Awake, lt(kDay + 1, 4, 0), 40 * 60),
        ep(SleepStage::Light, lt(kDay + 1, 4, 40), 80 * 60),
    });
    const NightMetrics m = night_metrics(night);
    CHECK(m.sleep_duration_h == doctest::Approx(13.0 / 3.0).epsilon(1e-12));  // 4.3333 h
    CHECK(m.middle_insomnia);
    CHECK(m.onset_h == doctest::Approx(13.0));
    CHECK(m.onset_after_00);
    CHECK(!m.onset_after_01);  // 13.0 is not > 13.0
    CHECK(!m.onset_after_02);
}

TEST_CASE("night metrics: leading/trailing awake excluded from awakenings") {
    const NightRecord night = night_of({
        ep(SleepStage::Awake, lt(kDay, 22, 30), 30 * 60),
        ep(SleepStage::Light, lt(kDay, 23, 0), 4 * 3600),
        ep(SleepStage::Awake, lt(kDay + 1, 3, 0), 20 * 60),
        ep(SleepStage::Deep, lt(kDay + 1, 3, 20), 3 * 3600),
        ep(SleepStage::Awake, lt(kDay + 1, 6, 20), 40 * 60),
    });
    const NightMetrics m = night_metrics(night);
    CHECK(m.awakenings_gt5 == 1);  // only the 03:00 awakening is interior
    CHECK(m.time_in_bed_h == doctest::Approx(8.5));
    CHECK(m.onset_h == doctest::Approx(11.0));
    CHECK(m.offset_h == doctest::Approx(18.0 + 20.0 / 60.0));
}

TEST_CASE("night metrics: REM latency includes intervening wake") {
    const NightRecord night = night_of({
        ep(SleepStage::Light, lt(kDay, 23, 0), 3600),
        ep(SleepStage::Awake, lt(kDay + 1, 0, 0), 30 * 60),
        ep(SleepStage::Rem, lt(kDay + 1, 0, 30), 3600),
    });
    const NightMetrics m = night_metrics(night);
    REQUIRE(m.rem_latency_min.has_value());
    CHECK(*m.rem_latency_min == doctest::Approx(90.0));
}

TEST_CASE("night metrics: weekend flag follows the offset date") {
    // Friday night (June 14) into Saturday morning
    const std::int64_t fri = days_from_civil(2019, 6, 14);
    const NightMetrics fri_night =
        night_metrics(night_of({ep(SleepStage::Light, lt(fri, 23), 8 * 3600)}));
    CHECK(fri_night.is_weekend_night);
    // Sunday night into Monday morning
    const std::int64_t sun = days_from_civil(2019, 6, 16);
    const NightMetrics sun_night =
        night_metrics(night_of({ep(SleepStage::Light, lt(sun, 23), 8 * 3600)}));
    CHECK(!sun_night.is_weekend_night);
}

TEST_CASE("oracle equivalence on randomized nights") {
    Rng rng(0xFEA7);
    for (int i = 0; i < 200; ++i) {
        const NightRecord night = oracle::random_night(rng);
        const NightMetrics m = night_metrics(night);
        const oracle::GridMetrics g = oracle::grid_night_metrics(night);
        const auto close = [](double a, double b) {
            return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
        };
        CHECK(close(m.sleep_duration_h, g.sleep_duration_h));
        CHECK(close(m.time_in_bed_h, g.time_in_bed_h));
        CHECK(close(m.pct_deep, g.pct_deep));
        CHECK(close(m.pct_light, g.pct_light));
        CHECK(close(m.pct_rem, g.pct_rem));
        CHECK(close(m.pct_nrem, g.pct_nrem));
        CHECK(close(m.pct_awake, g.pct_awake));
        CHECK(close(m.efficiency, g.efficiency));
        CHECK(close(m.onset_h, g.onset_h));
        CHECK(close(m.offset_h, g.offset_h));
        CHECK(m.rem_latency_min.has_value() == g.rem_latency_min.has_value());
        if (m.rem_latency_min) CHECK(close(*m.rem_latency_min, *g.rem_latency_min));
        CHECK(m.awakenings_gt5 == g.awakenings_gt5);
        CHECK(m.middle_insomnia == g.middle_insomnia);
        CHECK(m.dur_gt10 == g.dur_gt10);
        CHECK(m.is_weekend_night == g.is_weekend_night);
        CHECK(m.onset_after_00 == g.onset_after_00);
        CHECK(m.onset_after_01 == g.onset_after_01);
        CHECK(m.onset_after_02 == g.onset_after_02);

        // invariants
        CHECK(m.pct_deep + m.pct_light + m.pct_rem + m.pct_awake ==
              doctest::Approx(100.0).epsilon(1e-12));
        CHECK(m.efficiency >= 0.0);
        CHECK(m.efficiency <= 1.0);
        CHECK(m.sleep_duration_h <= m.time_in_bed_h + 1e-12);
        CHECK(night.onset_h >= 0.0);
        CHECK(night.onset_h < night.offset_h);
        CHECK(night.offset_h <= 24.0);
    }
}

TEST_CASE("time-shift invariance: +k*24h changes only the night key") {
    Rng rng(0xC0FFEE);
    for (int i = 0; i < 50; ++i) {
        const NightRecord night = oracle::random_night(rng);
        NightRecord shifted = night;
        const std::int64_t shift = 3 * 86400;
        shifted.night_key += 3;
        shifted.onset_epoch_s += shift;
        shifted.offset_epoch_s += shift;
        for (auto& e : shifted.episodes) e.start_epoch_s += shift;

        const NightMetrics a = night_metrics(night);
        const NightMetrics b = night_metrics(shifted);
        CHECK(a.sleep_duration_h == b.sleep_duration_h);
        CHECK(a.pct_awake == b.pct_awake);
        CHECK(a.onset_h == b.onset_h);
        CHECK(a.offset_h == b.offset_h);
        CHECK(a.awakenings_gt5 == b.awakenings_gt5);
        // weekend flag may differ; everything else may not
    }
}

TEST_CASE("monotonicity: an extra interior awake episode") {
    const NightRecord base = night_of({
        ep(SleepStage::Light, lt(kDay, 23, 0), 4 * 3600),
        ep(SleepStage::Deep, lt(kDay + 1, 3, 0), 4 * 3600),
    });
    // same wall-clock span, but one hour of the middle turned awake
    const NightRecord more_awake = night_of({
        ep(SleepStage::Light, lt(kDay, 23, 0), 4 * 3600),
        ep(SleepStage::Awake, lt(kDay + 1, 3, 0), 3600),
        ep(SleepStage::Deep, lt(kDay + 1, 4, 0), 3 * 3600),
    });
    const NightMetrics a = night_metrics(base);
    const NightMetrics b = night_metrics(more_awake);
    CHECK(b.efficiency <= a.efficiency);
    CHECK(b.pct_awake >= a.pct_awake);
}

// ---------------------------------------------------------------------------
// windowed features
// ---------------------------------------------------------------------------

TEST_CASE("window: fourteen identical nights") {
    std::vector<NightRecord> nights;
    for (int d = 0; d < 14; ++d) {
        nights.push_back(night_of({ep(SleepStage::Light, lt(kDay + d, 23), 8 * 3600)}));
    }
    const auto anchor = anchor_at(lt(kDay + 14, 18));
    const FeatureVector fv = window_features(nights, anchor, 14);
    CHECK(fv.n_nights_in_window == 14);
    CHECK(*fv[Feat::SleepDur] == doctest::Approx(8.0));
    CHECK(*fv[Feat::StdDur] == doctest::Approx(0.0));
    CHECK(*fv[Feat::Dur10] == doctest::Approx(0.0));
    CHECK(*fv[Feat::WkdDiff] == doctest::Approx(0.0));
    CHECK(!fv[Feat::RemL].has_value());  // no REM anywhere
}

TEST_CASE("window: hypersomnia percentage 12 short + 2 long") {
    std::vector<NightRecord> nights;
    for (int d = 0; d < 14; ++d) {
        const std::int64_t dur = d < 12 ? 8 * 3600 : 11 * 3600;
        nights.push_back(night_of({ep(SleepStage::Light, lt(kDay + d, 22), dur)}));
    }
    const FeatureVector fv = window_features(nights, anchor_at(lt(kDay + 14, 18)), 14);
    CHECK(*fv[Feat::Dur10] == doctest::Approx(100.0 * 2.0 / 14.0));  // 14.286
}

TEST_CASE("window: empty selection yields an all-absent vector") {
    std::vector<NightRecord> nights = {
        night_of({ep(SleepStage::Light, lt(kDay, 23), 8 * 3600)})};
    const FeatureVector fv = window_features(nights, anchor_at(lt(kDay + 200, 18)), 14);
    CHECK(fv.n_nights_in_window == 0);
    for (const auto& v : fv.values) CHECK(!v.has_value());
}

TEST_CASE("window: half-open interval keyed by the offset instant") {
    const NightRecord night = night_of({ep(SleepStage::Light, lt(kDay, 23), 8 * 3600)});
    const std::int64_t offset_epoch = night.offset_epoch_s;

    // anchor exactly at the offset: included (closed right end)
    CHECK(window_features({&night, 1}, anchor_at(offset_epoch), 14).n_nights_in_window == 1);
    // anchor 14 days after the offset: the offset sits on the open left end
    CHECK(window_features({&night, 1}, anchor_at(offset_epoch + 14 * 86400), 14)
              .n_nights_in_window == 0);
    CHECK(window_features({&night, 1}, anchor_at(offset_epoch + 14 * 86400 - 1), 14)
              .n_nights_in_window == 1);
}

TEST_CASE("window: Std_* absent below two nights, WKD_diff needs both groups") {
    const NightRecord weekday = night_of({ep(SleepStage::Light, lt(kDay, 23), 8 * 3600)});
    const FeatureVector fv = window_features({&weekday, 1}, anchor_at(lt(kDay + 2, 18)), 14);
    CHECK(fv.n_nights_in_window == 1);
    CHECK(!fv[Feat::StdDur].has_value());
    CHECK(!fv[Feat::StdOnset].has_value());
    CHECK(!fv[Feat::StdOffset].has_value());
    CHECK(!fv[Feat::WkdDiff].has_value());  // no weekend night selected
    CHECK(fv[Feat::SleepDur].has_value());
}

TEST_CASE("window: agrees with the grid-driven aggregation oracle") {
    Rng rng(0xAB5EED);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<NightRecord> nights;
        const int n = 3 + static_cast<int>(rng.uniform_int(14));
        for (int d = 0; d < n; ++d) {
            NightRecord night = oracle::random_night(rng);
            const std::int64_t want_key = kDay + d;
            const std::int64_t shift_days = want_key - night.night_key;
            night.night_key += shift_days;
            night.onset_epoch_s += shift_days * 86400;
            night.offset_epoch_s += shift_days * 86400;
            for (auto& e : night.episodes) e.start_epoch_s += shift_days * 86400;
            nights.push_back(std::move(night));
        }
        const std::int64_t anchor_s = lt(kDay + n, 17);
        const FeatureVector fv = window_features(nights, anchor_at(anchor_s), 14);
        const auto expect = oracle::grid_window_features(nights, anchor_s, 14);
        for (int f = 0; f < kFeatureCount; ++f) {
            REQUIRE(fv.values[f].has_value() == expect[f].has_value());
            if (fv.values[f]) {
                const double a = *fv.values[f], b = *expect[f];
                CHECK(std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)}));
            }
        }
    }
}

TEST_CASE("window determinism: permuted night order changes nothing") {
    Rng rng(0x9999);
    std::vector<NightRecord> nights;
    for (int d = 0; d < 6; ++d) {
        NightRecord night = oracle::random_night(rng);
        const std::int64_t shift_days = (kDay + d) - night.night_key;
        night.night_key += shift_days;
        night.onset_epoch_s += shift_days * 86400;
        night.offset_epoch_s += shift_days * 86400;
        for (auto& e : night.episodes) e.start_epoch_s += shift_days * 86400;
        nights.push_back(std::move(night));
    }
    auto reversed = nights;
    std::reverse(reversed.begin(), reversed.end());
    const auto a = window_features(nights, anchor_at(lt(kDay + 6, 18)), 14);
    const auto b = window_features(reversed, anchor_at(lt(kDay + 6, 18)), 14);
    for (int f = 0; f < kFeatureCount; ++f) {
        CHECK(a.values[f].has_value() == b.values[f].has_value());
        if (a.values[f]) CHECK(*a.values[f] == doctest::Approx(*b.values[f]).epsilon(1e-12));
    }
}
