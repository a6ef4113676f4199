// Test-side reference implementations. These deliberately avoid the library's
// analytic paths: night metrics come from a literal 1-second walk over the
// episode list, ranks from an O(n^2) count, BH from the textbook definition,
// and GLS from an explicitly materialized covariance matrix.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "sleepassoc/cohort.hpp"
#include "sleepassoc/features.hpp"
#include "sleepassoc/inclusion.hpp"
#include "sleepassoc/rng.hpp"
#include "sleepassoc/timeutil.hpp"

namespace oracle {

using namespace sleepassoc;

// ---------------------------------------------------------------------------
// 1-second-grid night metrics
// ---------------------------------------------------------------------------

struct GridMetrics {
    double sleep_duration_h = 0.0;
    double time_in_bed_h = 0.0;
    double pct_deep = 0.0, pct_light = 0.0, pct_rem = 0.0, pct_nrem = 0.0, pct_awake = 0.0;
    std::optional<double> rem_latency_min;
    double efficiency = 0.0;
    double onset_h = 0.0, offset_h = 0.0;
    int awakenings_gt5 = 0;
    bool is_weekend_night = false;
    bool middle_insomnia = false;
    bool dur_gt10 = false;
    bool onset_after_00 = false, onset_after_01 = false, onset_after_02 = false;
    std::int64_t onset_epoch_s = 0, offset_epoch_s = 0;
};

inline GridMetrics grid_night_metrics(const NightRecord& night) {
    const std::int64_t t0 = night.episodes.front().start_epoch_s;
    const std::int64_t t1 = night.episodes.back().end_epoch_s();
    const std::int64_t span = t1 - t0;

    // stage of every second
    std::vector<SleepStage> sec(static_cast<std::size_t>(span), SleepStage::Awake);
    for (const auto& ep : night.episodes) {
        for (std::int64_t t = ep.start_epoch_s; t < ep.end_epoch_s(); ++t) {
            sec[static_cast<std::size_t>(t - t0)] = ep.stage;
        }
    }

    std::int64_t deep = 0, light = 0, rem = 0, awake = 0;
    std::int64_t onset = -1, offset = -1, first_rem = -1;
    for (std::int64_t t = 0; t < span; ++t) {
        switch (sec[static_cast<std::size_t>(t)]) {
            case SleepStage::Deep: ++deep; break;
            case SleepStage::Light: ++light; break;
            case SleepStage::Rem: ++rem; break;
            case SleepStage::Awake: ++awake; break;
        }
        if (sec[static_cast<std::size_t>(t)] != SleepStage::Awake) {
            if (onset < 0) onset = t;
            offset = t + 1;
            if (first_rem < 0 && sec[static_cast<std::size_t>(t)] == SleepStage::Rem) {
                first_rem = t;
            }
        }
    }

    GridMetrics m;
    m.time_in_bed_h = static_cast<double>(span) / 3600.0;
    m.sleep_duration_h = static_cast<double>(deep + light + rem) / 3600.0;
    m.pct_deep = 100.0 * static_cast<double>(deep) / static_cast<double>(span);
    m.pct_light = 100.0 * static_cast<double>(light) / static_cast<double>(span);
    m.pct_rem = 100.0 * static_cast<double>(rem) / static_cast<double>(span);
    m.pct_awake = 100.0 * static_cast<double>(awake) / static_cast<double>(span);
    m.pct_nrem = m.pct_deep + m.pct_light;
    m.efficiency = static_cast<double>(deep + light + rem) / static_cast<double>(span);
    if (first_rem >= 0) m.rem_latency_min = static_cast<double>(first_rem - onset) / 60.0;

    m.onset_epoch_s = t0 + onset;
    m.offset_epoch_s = t0 + offset;
    const std::int64_t key = noon_day(t0, night.tz_offset_min);
    m.onset_h = noon_axis_hours(m.onset_epoch_s, night.tz_offset_min, key);
    m.offset_h = noon_axis_hours(m.offset_epoch_s, night.tz_offset_min, key);

    // awake runs strictly between onset and offset
    std::int64_t run = 0;
    bool prolonged = false;
    for (std::int64_t t = onset; t < offset; ++t) {
        if (sec[static_cast<std::size_t>(t)] == SleepStage::Awake) {
            ++run;
        } else {
            if (run > 300) ++m.awakenings_gt5;
            if (run >= 1800) prolonged = true;
            run = 0;
        }
    }

    m.middle_insomnia = m.sleep_duration_h < 6.0 && prolonged;
    m.dur_gt10 = m.sleep_duration_h > 10.0;
    m.onset_after_00 = m.onset_h > 12.0;
    m.onset_after_01 = m.onset_h > 13.0;
    m.onset_after_02 = m.onset_h > 14.0;
    m.is_weekend_night = is_weekend_day(local_day(m.offset_epoch_s, night.tz_offset_min));
    return m;
}

// ---------------------------------------------------------------------------
// windowed aggregation on top of the grid metrics
// ---------------------------------------------------------------------------

inline double naive_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double naive_sample_sd(const std::vector<double>& v) {
    const double m = naive_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline std::array<std::optional<double>, kFeatureCount> grid_window_features(
    const std::vector<NightRecord>& nights, std::int64_t anchor_s, int window_days) {
    std::array<std::optional<double>, kFeatureCount> out{};
    std::vector<GridMetrics> sel;
    for (const auto& n : nights) {
        const GridMetrics g = grid_night_metrics(n);
        const std::int64_t lo = anchor_s - static_cast<std::int64_t>(window_days) * 86400;
        if (g.offset_epoch_s > lo && g.offset_epoch_s <= anchor_s) sel.push_back(g);
    }
    if (sel.empty()) return out;
    const double n = static_cast<double>(sel.size());

    auto set = [&out](Feat f, double v) { out[static_cast<int>(f)] = v; };
    std::vector<double> dur, tib, dp, lp, rp, np, ap, eff, on, off, awk, lat, we, wd;
    int a12 = 0, a1 = 0, a2 = 0, mi = 0, d10 = 0;
    for (const auto& g : sel) {
        dur.push_back(g.sleep_duration_h);
        tib.push_back(g.time_in_bed_h);
        dp.push_back(g.pct_deep);
        lp.push_back(g.pct_light);
        rp.push_back(g.pct_rem);
        np.push_back(g.pct_nrem);
        ap.push_back(g.pct_awake);
        eff.push_back(g.efficiency);
        on.push_back(g.onset_h);
        off.push_back(g.offset_h);
        awk.push_back(static_cast<double>(g.awakenings_gt5));
        if (g.rem_latency_min) lat.push_back(*g.rem_latency_min);
        (g.is_weekend_night ? we : wd).push_back(g.sleep_duration_h);
        a12 += g.onset_after_00;
        a1 += g.onset_after_01;
        a2 += g.onset_after_02;
        mi += g.middle_insomnia;
        d10 += g.dur_gt10;
    }
    set(Feat::SleepDur, naive_mean(dur));
    set(Feat::TimeBed, naive_mean(tib));
    set(Feat::DeepPct, naive_mean(dp));
    set(Feat::LightPct, naive_mean(lp));
    set(Feat::RemPct, naive_mean(rp));
    set(Feat::NremPct, naive_mean(np));
    set(Feat::AwakePct, naive_mean(ap));
    set(Feat::Efficiency, naive_mean(eff));
    set(Feat::AvOnset, naive_mean(on));
    set(Feat::AvOffset, naive_mean(off));
    set(Feat::Awake5, naive_mean(awk));
    if (!lat.empty()) set(Feat::RemL, naive_mean(lat));
    if (sel.size() >= 2) {
        set(Feat::StdDur, naive_sample_sd(dur));
        set(Feat::StdOnset, naive_sample_sd(on));
        set(Feat::StdOffset, naive_sample_sd(off));
    }
    if (!we.empty() && !wd.empty()) set(Feat::WkdDiff, naive_mean(we) - naive_mean(wd));
    set(Feat::After12, 100.0 * a12 / n);
    set(Feat::After1, 100.0 * a1 / n);
    set(Feat::After2, 100.0 * a2 / n);
    set(Feat::MInsomnia, 100.0 * mi / n);
    set(Feat::Dur10, 100.0 * d10 / n);
    return out;
}

// ---------------------------------------------------------------------------
// random nights for oracle-equivalence sweeps (integer-second episodes)
// ---------------------------------------------------------------------------

inline NightRecord random_night(Rng& rng, int tz_offset_min = 0) {
    // random day in 2019, onset in the evening, arbitrary stage mosaic with
    // optional leading/trailing awake
    const std::int64_t day = days_from_civil(2019, 1, 1) + static_cast<std::int64_t>(
                                                               rng.uniform_int(360));
    const double onset_axis = rng.uniform(8.0, 15.5);
    const std::int64_t session_start_local =
        day * 86400 + 43200 + static_cast<std::int64_t>(std::llround(onset_axis * 3600.0));

    std::vector<SleepEpisode> eps;
    std::int64_t t_local = session_start_local;
    const int n_eps = 3 + static_cast<int>(rng.uniform_int(14));
    const std::int64_t max_end = day * 86400 + 43200 + 86400 - 600;
    for (int i = 0; i < n_eps && t_local < max_end - 120; ++i) {
        SleepEpisode ep;
        const double u = rng.uniform();
        if (i == 0 && rng.bernoulli(0.3)) {
            ep.stage = SleepStage::Awake;  // leading awake is allowed
        } else {
            ep.stage = u < 0.15   ? SleepStage::Awake
                       : u < 0.45 ? SleepStage::Light
                       : u < 0.7  ? SleepStage::Deep
                                  : SleepStage::Rem;
        }
        ep.duration_s = 60 + static_cast<std::int64_t>(rng.uniform_int(3 * 3600));
        ep.duration_s = std::min(ep.duration_s, max_end - t_local);
        ep.tz_offset_min = tz_offset_min;
        ep.start_epoch_s = t_local - static_cast<std::int64_t>(tz_offset_min) * 60;
        t_local += ep.duration_s;
        eps.push_back(ep);
    }
    // ensure at least one non-awake episode
    bool has_sleep = false;
    for (const auto& e : eps) has_sleep = has_sleep || e.stage != SleepStage::Awake;
    if (!has_sleep) eps[eps.size() / 2].stage = SleepStage::Light;

    const auto nights = assemble_nights("PX", eps);
    return nights.at(0);
}

// ---------------------------------------------------------------------------
// ranks, BH, Spearman-by-hand
// ---------------------------------------------------------------------------

inline std::vector<double> brute_force_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t less = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (x[j] < x[i]) ++less;
            if (x[j] == x[i]) ++equal;
        }
        r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return r;
}

inline double brute_force_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = brute_force_ranks(x);
    const auto ry = brute_force_ranks(y);
    const std::size_t n = x.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += rx[i];
        mb += ry[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = rx[i] - ma;
        const double db = ry[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> brute_force_bh(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&p](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> q(m);
    for (std::size_t i = 0; i < m; ++i) {
        double best = 1.0;
        for (std::size_t j = i; j < m; ++j) {
            best = std::min(best, std::min(1.0, p[idx[j]] * static_cast<double>(m) /
                                                    static_cast<double>(j + 1)));
        }
        q[idx[i]] = best;
    }
    return q;
}

// ---------------------------------------------------------------------------
// dense GLS with an explicitly materialized covariance matrix
// ---------------------------------------------------------------------------

// X, y plus integer group labels; V = s2e*I + s2p*ZpZp' + s2s*ZsZs'
inline Eigen::VectorXd dense_gls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const std::vector<int>& participant,
                                 const std::vector<int>& site, double s2_site,
                                 double s2_participant, double s2_resid) {
    const int n = static_cast<int>(y.size());
    Eigen::MatrixXd V = s2_resid * Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (participant[i] == participant[j]) V(i, j) += s2_participant;
            if (!site.empty() && site[i] == site[j]) V(i, j) += s2_site;
        }
    }
    const Eigen::MatrixXd Vi = V.llt().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd XtVi = X.transpose() * Vi;
    return (XtVi * X).ldlt().solve(XtVi * y);
}

// ---------------------------------------------------------------------------
// direct analysis-table generator (response follows the mixed model exactly)
// ---------------------------------------------------------------------------

struct DirectTableConfig {
    std::uint64_t seed = 1;
    int n_sites = 3;
    int participants_per_site = 100;
    int records = 10;
    Feat response = Feat::SleepDur;
    double intercept = 7.0;
    double beta_pred = 0.5;
    double sd_site = 0.4;
    double sd_participant = 1.0;
    double sd_resid = 0.8;
};

inline AnalysisTable direct_table(const DirectTableConfig& cfg) {
    AnalysisTable table;
    Rng rng(cfg.seed);
    int pid_counter = 0;
    for (int s = 0; s < cfg.n_sites; ++s) {
        const double v_site = rng.normal(0.0, cfg.sd_site);
        for (int p = 0; p < cfg.participants_per_site; ++p) {
            ++pid_counter;
            const double u_part = rng.normal(0.0, cfg.sd_participant);
            const double mu = rng.normal(10.0, 3.0);
            for (int r = 0; r < cfg.records; ++r) {
                AnalysisRow row;
                row.participant_id = "P" + std::to_string(pid_counter);
                row.site = "S" + std::to_string(s + 1);
                row.completed_at_s = 1546300800 + (pid_counter * 100 + r) * 86400LL;
                row.age = 20.0 + std::floor(rng.uniform(0.0, 50.0));
                row.gender = rng.bernoulli(0.6) ? "female" : "male";
                row.education = rng.bernoulli(0.5) ? "degree-or-above" : "below-degree";
                const char* incomes[4] = {"<15k", "15k-40k", ">40k", "not-mentioned"};
                row.income = incomes[rng.uniform_int(4)];
                const int phq8 = static_cast<int>(std::clamp(
                    std::round(rng.normal(mu, 3.0)), 0.0, 24.0));
                row.phq8_total = phq8;
                row.sleep_subscore = std::clamp(phq8 / 8, 0, 3);
                row.phq8_complete = true;
                row.n_nights = 14;
                row.features[static_cast<int>(cfg.response)] =
                    cfg.intercept + v_site + u_part + cfg.beta_pred * phq8 +
                    rng.normal(0.0, cfg.sd_resid);
                table.rows.push_back(std::move(row));
            }
        }
    }
    return table;
}

}  // namespace oracle
