#include "sleepassoc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sleepassoc/errors.hpp"
#include "sleepassoc/rng.hpp"

namespace sleepassoc {

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Construction channels. Every night is carved from a handful of knobs; a
// coupled feature claims the knobs it drives, and two couplings may not share
// a knob.
// ---------------------------------------------------------------------------

enum Channel : int {
    ChDurMean = 0,
    ChDurSd,
    ChTib,
    ChAwakeFrac,
    ChDeepFrac,
    ChLightFrac,
    ChRemFrac,
    ChOnsetMean,
    ChOnsetSd,
    ChOffsetMean,
    ChAwakenings,
    ChRemLat,
    ChDur10Flag,
    ChInsomniaFlag,
    ChAfterFlag,
    ChWkdDelta,
    kChannelCount,
};

std::vector<int> feature_claims(Feat f) {
    switch (f) {
        case Feat::SleepDur: return {ChDurMean};
        case Feat::TimeBed: return {ChTib, ChDurMean};
        case Feat::DeepPct: return {ChDeepFrac};
        case Feat::LightPct: return {ChLightFrac, ChDeepFrac, ChRemFrac};
        case Feat::RemPct: return {ChRemFrac};
        case Feat::NremPct: return {ChDeepFrac, ChLightFrac, ChRemFrac};
        case Feat::AwakePct: return {ChAwakeFrac};
        case Feat::RemL: return {ChRemLat};
        case Feat::StdDur: return {ChDurSd};
        case Feat::StdOnset: return {ChOnsetSd};
        case Feat::StdOffset: return {ChOnsetSd};
        case Feat::Efficiency: return {ChAwakeFrac};
        case Feat::Awake5: return {ChAwakenings};
        case Feat::WkdDiff: return {ChWkdDelta};
        case Feat::AvOnset: return {ChOnsetMean};
        case Feat::After12: return {ChAfterFlag, ChOnsetMean};
        case Feat::After1: return {ChAfterFlag, ChOnsetMean};
        case Feat::After2: return {ChAfterFlag, ChOnsetMean};
        case Feat::MInsomnia: return {ChInsomniaFlag, ChDurMean, ChAwakenings};
        case Feat::AvOffset: return {ChOffsetMean, ChOnsetMean};
        case Feat::Dur10: return {ChDur10Flag, ChDurMean};
    }
    return {};
}

struct Bounds {
    double lo, hi;
};

Bounds target_bounds(Feat f) {
    switch (f) {
        case Feat::SleepDur: return {1.5, 12.5};
        case Feat::TimeBed: return {1.6, 13.0};
        case Feat::DeepPct: return {1.0, 60.0};
        case Feat::LightPct: return {5.0, 90.0};
        case Feat::RemPct: return {1.0, 60.0};
        case Feat::NremPct: return {10.0, 95.0};
        case Feat::AwakePct: return {0.4, 50.0};
        case Feat::RemL: return {2.0, 200.0};
        case Feat::StdDur: return {0.05, 2.5};
        case Feat::StdOnset: return {0.05, 2.5};
        case Feat::StdOffset: return {0.05, 2.5};
        case Feat::Efficiency: return {0.5, 0.996};
        case Feat::Awake5: return {0.0, 6.0};
        case Feat::WkdDiff: return {-3.0, 3.0};
        case Feat::AvOnset: return {6.5, 16.0};
        case Feat::After12: return {0.0, 100.0};
        case Feat::After1: return {0.0, 100.0};
        case Feat::After2: return {0.0, 100.0};
        case Feat::MInsomnia: return {0.0, 100.0};
        case Feat::AvOffset: return {17.0, 23.5};
        case Feat::Dur10: return {0.0, 100.0};
    }
    return {0.0, 0.0};
}

double feature_delta(Feat f) {
    switch (f) {
        case Feat::SleepDur: return 7.4;
        case Feat::TimeBed: return 8.0;
        case Feat::DeepPct: return 15.0;
        case Feat::LightPct: return 55.0;
        case Feat::RemPct: return 20.0;
        case Feat::NremPct: return 70.0;
        case Feat::AwakePct: return 7.0;
        case Feat::RemL: return 80.0;
        case Feat::StdDur: return 0.5;
        case Feat::StdOnset: return 0.6;
        case Feat::StdOffset: return 0.65;
        case Feat::Efficiency: return 0.93;
        case Feat::Awake5: return 1.5;
        case Feat::WkdDiff: return 0.0;
        case Feat::AvOnset: return 11.0;
        case Feat::After12: return 25.0;
        case Feat::After1: return 10.0;
        case Feat::After2: return 5.0;
        case Feat::MInsomnia: return 8.0;
        case Feat::AvOffset: return 19.2;
        case Feat::Dur10: return 6.0;
    }
    return 0.0;
}

SynthVariance default_variance(Feat f) {
    // scaled to the feature's natural units
    switch (f) {
        case Feat::SleepDur: return {0.02, 0.20, 0.04};
        case Feat::TimeBed: return {0.02, 0.22, 0.05};
        case Feat::DeepPct: return {0.25, 4.0, 1.0};
        case Feat::LightPct: return {0.25, 6.0, 1.5};
        case Feat::RemPct: return {0.25, 4.0, 1.0};
        case Feat::NremPct: return {0.25, 6.0, 1.5};
        case Feat::AwakePct: return {0.16, 2.25, 0.64};
        case Feat::RemL: return {4.0, 140.0, 36.0};
        case Feat::StdDur: return {0.0004, 0.01, 0.002};
        case Feat::StdOnset: return {0.0004, 0.01, 0.002};
        case Feat::StdOffset: return {0.0004, 0.01, 0.002};
        case Feat::Efficiency: return {1.6e-5, 2.2e-4, 6e-5};
        case Feat::Awake5: return {0.01, 0.25, 0.09};
        case Feat::WkdDiff: return {0.002, 0.02, 0.01};
        case Feat::AvOnset: return {0.02, 0.25, 0.06};
        case Feat::After12: return {4.0, 64.0, 25.0};
        case Feat::After1: return {1.0, 16.0, 9.0};
        case Feat::After2: return {0.5, 4.0, 2.0};
        case Feat::MInsomnia: return {1.0, 9.0, 4.0};
        case Feat::AvOffset: return {0.02, 0.25, 0.06};
        case Feat::Dur10: return {1.0, 9.0, 4.0};
    }
    return {};
}

// defaults for channels nobody couples: participant personality + window drift
struct ChannelDefault {
    double delta;
    double part_sd;
    double win_sd;
};

ChannelDefault channel_default(int ch) {
    switch (ch) {
        case ChDurMean: return {7.4, 0.45, 0.20};
        case ChDurSd: return {0.50, 0.10, 0.05};
        case ChTib: return {8.0, 0.0, 0.0};  // derived unless coupled
        case ChAwakeFrac: return {7.0, 1.50, 0.80};
        case ChDeepFrac: return {15.0, 2.0, 1.0};
        case ChLightFrac: return {55.0, 0.0, 0.0};  // derived unless coupled
        case ChRemFrac: return {20.0, 2.0, 1.0};
        case ChOnsetMean: return {11.0, 0.50, 0.25};
        case ChOnsetSd: return {0.60, 0.10, 0.05};
        case ChOffsetMean: return {19.2, 0.0, 0.0};  // derived unless coupled
        case ChAwakenings: return {1.5, 0.5, 0.3};
        case ChRemLat: return {80.0, 12.0, 6.0};
        case ChDur10Flag: return {0.0, 0.0, 0.0};      // emerges from duration draws
        case ChInsomniaFlag: return {0.0, 0.0, 0.0};   // emerges naturally
        case ChAfterFlag: return {0.0, 0.0, 0.0};      // emerges from onset draws
        case ChWkdDelta: return {0.0, 0.12, 0.08};
        default: return {0.0, 0.0, 0.0};
    }
}

// per-night jitter around the window-level channel value
constexpr double kNightDeepSd = 1.5;
constexpr double kNightRemSd = 1.5;
constexpr double kNightAwakeSd = 1.0;
constexpr double kNightRemLatSd = 15.0;

struct CoupledFeature {
    Feat feature;
    double beta1;
    SynthVariance var;
};

// ---------------------------------------------------------------------------
// Night construction
// ---------------------------------------------------------------------------

struct NightPlan {
    std::int64_t day = 0;  // noon-day number
    double onset_h = 11.0;
    std::int64_t dur_s = 0;
    std::int64_t tib_s = 0;
    std::int64_t deep_s = 0;
    std::int64_t rem_s = 0;
    std::int64_t lat_s = 0;  // first REM start relative to onset
    int n_awakenings = 0;
    bool prolonged_awakening = false;  // force one run >= 30 min
};

void build_night_episodes(const NightPlan& plan, int tz_offset_min, Rng& rng,
                          std::vector<SleepEpisode>& out) {
    struct Seg {
        SleepStage stage;
        std::int64_t len;
    };

    const std::int64_t light_s = plan.dur_s - plan.deep_s - plan.rem_s;
    std::vector<Seg> segs;
    std::int64_t insert_lo = 1;
    if (plan.rem_s > 0) {
        // latency block carved from NREM so the first REM starts exactly at
        // onset + lat_s
        const std::int64_t l1 = std::min(light_s, plan.lat_s);
        const std::int64_t d1 = plan.lat_s - l1;
        if (l1 > 0) segs.push_back({SleepStage::Light, l1});
        if (d1 > 0) segs.push_back({SleepStage::Deep, d1});
        segs.push_back({SleepStage::Rem, plan.rem_s});
        if (plan.deep_s - d1 > 0) segs.push_back({SleepStage::Deep, plan.deep_s - d1});
        if (light_s - l1 > 0) segs.push_back({SleepStage::Light, light_s - l1});
        insert_lo = plan.lat_s + 1;  // awake insertions must not delay the first REM
    } else {
        if (light_s > 0) segs.push_back({SleepStage::Light, light_s});
        if (plan.deep_s > 0) segs.push_back({SleepStage::Deep, plan.deep_s});
    }

    // split the awake budget into runs
    const std::int64_t awake_s = plan.tib_s - plan.dur_s;
    std::vector<std::int64_t> runs;
    if (awake_s > 0) {
        int n = plan.n_awakenings;
        if (n <= 0) n = awake_s > 300 ? 1 : 0;
        if (n == 0) {
            runs.push_back(awake_s);  // single sub-5-minute awakening
        } else {
            const std::int64_t base = plan.prolonged_awakening ? 1800 : 301;
            // first run gets any forced minimum; the rest at least 301 s
            std::vector<std::int64_t> mins(n, 301);
            mins[0] = std::max<std::int64_t>(base, 301);
            std::int64_t needed = 0;
            for (auto m : mins) needed += m;
            while (needed > awake_s && n > 1) {
                mins.pop_back();
                needed -= 301;
                --n;
            }
            if (needed > awake_s) {
                mins[0] = awake_s;  // degenerate, keep a single run
                needed = awake_s;
            }
            std::int64_t slack = awake_s - needed;
            runs = mins;
            // spread the slack over the runs
            for (int i = 0; i < n && slack > 0; ++i) {
                const std::int64_t take =
                    i == n - 1 ? slack
                               : static_cast<std::int64_t>(rng.uniform() * static_cast<double>(slack));
                runs[i] += take;
                slack -= take;
            }
        }
    }

    // pick distinct insertion offsets inside the sleep program
    const std::int64_t prog_len = plan.dur_s;
    std::set<std::int64_t> positions;
    const std::int64_t lo = std::min<std::int64_t>(insert_lo, prog_len - 1);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const std::int64_t pos =
                lo + static_cast<std::int64_t>(rng.uniform_int(
                         static_cast<std::uint64_t>(std::max<std::int64_t>(prog_len - lo, 1))));
            if (pos >= 1 && pos <= prog_len - 1 && !positions.count(pos)) {
                positions.insert(pos);
                break;
            }
        }
    }
    // if collisions exhausted the attempts, fall back to packed positions
    {
        std::int64_t fallback = lo;
        while (positions.size() < runs.size() && fallback < prog_len) {
            positions.insert(fallback);
            ++fallback;
        }
    }

    // walk the program, splitting at insert positions
    const std::int64_t noon_local = plan.day * 86400 + 43200;
    const std::int64_t onset_local =
        noon_local + static_cast<std::int64_t>(std::llround(plan.onset_h * 3600.0));
    std::int64_t t_local = onset_local;
    auto emit = [&](SleepStage stage, std::int64_t len) {
        if (len <= 0) return;
        if (!out.empty() && out.back().stage == stage &&
            out.back().end_epoch_s() == t_local - static_cast<std::int64_t>(tz_offset_min) * 60) {
            out.back().duration_s += len;
        } else {
            SleepEpisode ep;
            ep.stage = stage;
            ep.start_epoch_s = t_local - static_cast<std::int64_t>(tz_offset_min) * 60;
            ep.tz_offset_min = tz_offset_min;
            ep.duration_s = len;
            out.push_back(ep);
        }
        t_local += len;
    };

    auto pos_it = positions.begin();
    auto run_it = runs.begin();
    std::int64_t prog_pos = 0;
    for (const auto& seg : segs) {
        std::int64_t remaining = seg.len;
        while (remaining > 0) {
            std::int64_t chunk = remaining;
            if (pos_it != positions.end() && *pos_it < prog_pos + remaining) {
                chunk = *pos_it - prog_pos;
            }
            emit(seg.stage, chunk);
            prog_pos += chunk;
            remaining -= chunk;
            if (pos_it != positions.end() && *pos_it == prog_pos) {
                emit(SleepStage::Awake, *run_it);
                ++pos_it;
                ++run_it;
            }
        }
    }
    // an awake run that landed exactly at the end of the program (possible
    // via the packed fallback) would trail the last sleep episode; append it
    while (run_it != runs.end()) {
        emit(SleepStage::Awake, *run_it);
        ++run_it;
    }
}

// ---------------------------------------------------------------------------
// Config validation
// ---------------------------------------------------------------------------

void validate_config(const SynthConfig& cfg, const std::map<Feat, CoupledFeature>& coupled) {
    if (cfg.n_sites < 1 || cfg.participants_per_site < 1 || cfg.records_per_participant < 1) {
        throw ConfigError("synth: sites, participants and records must be positive");
    }
    if (cfg.record_spacing_days < 1 || cfg.window_days < 1 ||
        cfg.window_days > cfg.record_spacing_days) {
        throw ConfigError("synth: need 1 <= window_days <= record_spacing_days");
    }
    for (double p : {cfg.night_drop_p, cfg.phq8_drop_p, cfg.item_drop_p}) {
        if (p < 0.0 || p > 1.0) throw ConfigError("synth: drop probabilities must be in [0,1]");
    }
    if (cfg.demographics.age_min < 0 || cfg.demographics.age_max < cfg.demographics.age_min) {
        throw ConfigError("synth: bad age range");
    }
    double gsum = 0.0;
    for (const auto& [label, p] : cfg.demographics.gender_probs) {
        if (label.empty() || p < 0.0) throw ConfigError("synth: bad gender distribution");
        gsum += p;
    }
    if (cfg.demographics.gender_probs.empty() || std::fabs(gsum - 1.0) > 1e-9) {
        throw ConfigError("synth: gender probabilities must sum to 1");
    }
    double isum = 0.0;
    for (double p : cfg.demographics.income_probs) {
        if (p < 0.0) throw ConfigError("synth: bad income distribution");
        isum += p;
    }
    if (std::fabs(isum - 1.0) > 1e-9) {
        throw ConfigError("synth: income probabilities must sum to 1");
    }

    // channel conflicts
    std::array<std::optional<Feat>, kChannelCount> owner;
    for (const auto& [f, c] : coupled) {
        for (int ch : feature_claims(f)) {
            if (owner[ch] && *owner[ch] != f) {
                throw ConfigError(std::string("synth: conflicting couplings: ") +
                                  std::string(feature_name(*owner[ch])) + " and " +
                                  std::string(feature_name(f)) +
                                  " drive the same construction channel");
            }
            owner[ch] = f;
        }
    }

    // feasibility: the target range over PHQ-8 in [0,24], widened by 4 total
    // standard deviations, must stay inside the channel's physical bounds
    for (const auto& [f, c] : coupled) {
        if (c.var.site < 0 || c.var.participant < 0 || c.var.residual < 0) {
            throw ConfigError("synth: negative variance component");
        }
        const double delta = feature_delta(f);
        const double sd_total =
            std::sqrt(c.var.site) + std::sqrt(c.var.participant) + std::sqrt(c.var.residual);
        const double a = delta + std::min(0.0, c.beta1 * 24.0) - 4.0 * sd_total;
        const double b = delta + std::max(0.0, c.beta1 * 24.0) + 4.0 * sd_total;
        const Bounds bounds = target_bounds(f);
        if (a < bounds.lo || b > bounds.hi) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "synth: infeasible coupling on %s: targets span [%g, %g], feasible "
                          "[%g, %g]",
                          std::string(feature_name(f)).c_str(), a, b, bounds.lo, bounds.hi);
            throw ConfigError(buf);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

RawCohort simulate_cohort(const SynthConfig& cfg) {
    std::map<Feat, CoupledFeature> coupled;
    for (const auto& [f, beta] : cfg.coupling) {
        CoupledFeature c;
        c.feature = f;
        c.beta1 = beta;
        auto it = cfg.variance_components.find(f);
        c.var = it != cfg.variance_components.end() ? it->second : default_variance(f);
        coupled.emplace(f, c);
    }
    validate_config(cfg, coupled);

    RawCohort out;
    GroundTruth& truth = out.truth;
    for (int f = 0; f < kFeatureCount; ++f) {
        const Feat feat = static_cast<Feat>(f);
        auto it = coupled.find(feat);
        truth.beta1[feat] = it == coupled.end() ? 0.0 : it->second.beta1;
        if (it != coupled.end()) truth.variance_components[feat] = it->second.var;
    }

    const std::int64_t base_day = days_from_civil(2018, 6, 4);  // a Monday
    const int tz = cfg.tz_offset_min;

    // ownership per channel, for quick lookup during night planning
    std::array<std::optional<Feat>, kChannelCount> owner;
    for (const auto& [f, c] : coupled) {
        for (int ch : feature_claims(f)) owner[ch] = f;
    }
    auto owns = [&](int ch) { return owner[ch].has_value(); };

    // per-site intercepts for coupled features
    std::map<std::string, std::map<Feat, double>> site_v;
    std::vector<std::string> site_names;
    for (int s = 0; s < cfg.n_sites; ++s) {
        site_names.push_back("S" + std::to_string(s + 1));
        Rng rng(Rng::derive(cfg.seed, 0xA11CE, static_cast<std::uint64_t>(s)));
        for (const auto& [f, c] : coupled) {
            const double v = rng.normal(0.0, std::sqrt(c.var.site));
            site_v[site_names.back()][f] = v;
            truth.site_intercepts[f][site_names.back()] = v;
        }
    }

    int participant_counter = 0;
    for (int s = 0; s < cfg.n_sites; ++s) {
        const std::string& site = site_names[s];
        for (int pj = 0; pj < cfg.participants_per_site; ++pj) {
            ++participant_counter;
            char idbuf[16];
            std::snprintf(idbuf, sizeof(idbuf), "P%04d", participant_counter);
            const std::string pid = idbuf;

            Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(s) + 1,
                                static_cast<std::uint64_t>(pj) + 1));

            // demographics
            ParticipantProfile prof;
            prof.participant_id = pid;
            prof.site = site;
            prof.age = std::floor(rng.uniform(cfg.demographics.age_min,
                                              cfg.demographics.age_max + 1.0));
            {
                double u = rng.uniform();
                for (const auto& [label, p] : cfg.demographics.gender_probs) {
                    prof.gender = label;
                    if (u < p) break;
                    u -= p;
                }
                prof.education = rng.bernoulli(cfg.demographics.p_degree)
                                     ? "degree-or-above"
                                     : "below-degree";
                double ui = rng.uniform();
                prof.income = std::string(kIncomeLevels[3]);
                for (std::size_t i = 0; i < kIncomeLevels.size(); ++i) {
                    if (ui < cfg.demographics.income_probs[i]) {
                        prof.income = std::string(kIncomeLevels[i]);
                        break;
                    }
                    ui -= cfg.demographics.income_probs[i];
                }
            }
            out.dataset.profiles[pid] = prof;
            out.dataset.participant_order.push_back(pid);

            // participant-level intercepts
            std::map<Feat, double> u_part;
            for (const auto& [f, c] : coupled) {
                const double u = rng.normal(0.0, std::sqrt(c.var.participant));
                u_part[f] = u;
                truth.participant_intercepts[f][pid] = u;
            }
            std::array<double, kChannelCount> personality{};
            for (int ch = 0; ch < kChannelCount; ++ch) {
                personality[ch] = rng.normal(0.0, channel_default(ch).part_sd);
            }
            const double phq8_mu =
                std::clamp(rng.normal(cfg.phq8_mean, cfg.phq8_between_sd), 1.0, 23.0);

            auto& episodes = out.dataset.episodes[pid];
            auto& phq_rows = out.dataset.phq8[pid];

            for (int rec = 0; rec < cfg.records_per_participant; ++rec) {
                // PHQ-8 total and items
                const int total = static_cast<int>(std::clamp(
                    std::round(rng.normal(phq8_mu, cfg.phq8_within_sd)), 0.0, 24.0));
                std::array<int, 8> items{};
                {
                    int remaining = total;
                    while (remaining > 0) {
                        const int q = static_cast<int>(rng.uniform_int(8));
                        if (items[q] < 3) {
                            ++items[q];
                            --remaining;
                        }
                    }
                }

                const std::int64_t rec_day =
                    base_day + static_cast<std::int64_t>(rec + 1) * cfg.record_spacing_days;
                const std::int64_t completed_local = rec_day * 86400 + 19 * 3600 + 30 * 60;
                const std::int64_t completed_epoch =
                    completed_local - static_cast<std::int64_t>(tz) * 60;

                // window-level targets for coupled features
                std::map<Feat, double> target;
                for (const auto& [f, c] : coupled) {
                    target[f] = feature_delta(f) + site_v[site][f] + u_part[f] +
                                c.beta1 * static_cast<double>(total) +
                                rng.normal(0.0, std::sqrt(c.var.residual));
                }
                // window drift for unowned channels
                std::array<double, kChannelCount> drift{};
                for (int ch = 0; ch < kChannelCount; ++ch) {
                    drift[ch] = rng.normal(0.0, channel_default(ch).win_sd);
                }
                auto channel_value = [&](int ch) {
                    return channel_default(ch).delta + personality[ch] + drift[ch];
                };
                auto clamp_target = [&](Feat f, double v) {
                    const Bounds b = target_bounds(f);
                    return std::clamp(v, b.lo, b.hi);
                };

                // resolve window plan
                double dur_mean, awake_frac_w, deep_frac_w, rem_frac_w, onset_mean, onset_sd,
                    dur_sd, awk_mean, rem_lat_w, wkd_delta;
                double tib_target = 0.0;

                if (owns(ChTib)) {
                    tib_target = clamp_target(*owner[ChTib], target[*owner[ChTib]]);
                }
                if (owns(ChAwakeFrac)) {
                    const Feat f = *owner[ChAwakeFrac];
                    const double t = clamp_target(f, target[f]);
                    awake_frac_w = f == Feat::Efficiency ? 100.0 * (1.0 - t) : t;
                } else {
                    awake_frac_w = std::clamp(channel_value(ChAwakeFrac), 0.4, 50.0);
                }
                if (owns(ChDurMean)) {
                    const Feat f = *owner[ChDurMean];
                    if (f == Feat::TimeBed) {
                        dur_mean = tib_target * (1.0 - awake_frac_w / 100.0);
                    } else if (f == Feat::SleepDur) {
                        dur_mean = clamp_target(f, target[f]);
                    } else {
                        // flag features own the duration channel but only
                        // steer it through their per-night flags
                        dur_mean = std::clamp(channel_value(ChDurMean), 1.5, 12.5);
                    }
                } else {
                    dur_mean = std::clamp(channel_value(ChDurMean), 1.5, 12.5);
                }
                if (owns(ChDeepFrac)) {
                    const Feat f = *owner[ChDeepFrac];
                    const double t = clamp_target(f, target[f]);
                    const double sleep_frac = 100.0 - awake_frac_w;
                    if (f == Feat::DeepPct) {
                        deep_frac_w = t;
                        rem_frac_w = std::clamp(channel_value(ChRemFrac), 1.0, 60.0);
                    } else if (f == Feat::NremPct) {
                        deep_frac_w = t * (15.0 / 70.0);
                        rem_frac_w = std::max(sleep_frac - t, 0.5);
                    } else {  // LightPct drives the split
                        const double other = std::max(sleep_frac - t, 1.0);
                        deep_frac_w = other * (15.0 / 35.0);
                        rem_frac_w = other * (20.0 / 35.0);
                    }
                } else {
                    deep_frac_w = std::clamp(channel_value(ChDeepFrac), 1.0, 60.0);
                    rem_frac_w = owns(ChRemFrac)
                                     ? clamp_target(*owner[ChRemFrac], target[*owner[ChRemFrac]])
                                     : std::clamp(channel_value(ChRemFrac), 1.0, 60.0);
                }
                if (owns(ChOnsetMean)) {
                    const Feat f = *owner[ChOnsetMean];
                    if (f == Feat::AvOnset) {
                        onset_mean = clamp_target(f, target[f]);
                    } else if (f == Feat::AvOffset) {
                        const double off = clamp_target(f, target[f]);
                        const double tib_h = dur_mean / (1.0 - awake_frac_w / 100.0);
                        onset_mean = std::clamp(off - tib_h, 6.5, 16.0);
                    } else {
                        onset_mean = std::clamp(channel_value(ChOnsetMean), 6.5, 16.0);
                    }
                } else {
                    onset_mean = std::clamp(channel_value(ChOnsetMean), 6.5, 16.0);
                }
                onset_sd = owns(ChOnsetSd)
                               ? clamp_target(*owner[ChOnsetSd], target[*owner[ChOnsetSd]])
                               : std::clamp(channel_value(ChOnsetSd), 0.05, 2.5);
                dur_sd = owns(ChDurSd) ? clamp_target(*owner[ChDurSd], target[*owner[ChDurSd]])
                                       : std::clamp(channel_value(ChDurSd), 0.05, 2.5);
                awk_mean = owns(ChAwakenings)
                               ? clamp_target(*owner[ChAwakenings], target[*owner[ChAwakenings]])
                               : std::clamp(channel_value(ChAwakenings), 0.0, 6.0);
                rem_lat_w = owns(ChRemLat)
                                ? clamp_target(*owner[ChRemLat], target[*owner[ChRemLat]])
                                : std::clamp(channel_value(ChRemLat), 2.0, 200.0);
                wkd_delta = owns(ChWkdDelta)
                                ? clamp_target(*owner[ChWkdDelta], target[*owner[ChWkdDelta]])
                                : channel_value(ChWkdDelta);

                double p_dur10 = -1.0, p_insomnia = -1.0, p_after = -1.0;
                double after_threshold = 12.0;
                if (owns(ChDur10Flag)) {
                    p_dur10 = clamp_target(Feat::Dur10, target[Feat::Dur10]) / 100.0;
                }
                if (owns(ChInsomniaFlag)) {
                    p_insomnia = clamp_target(Feat::MInsomnia, target[Feat::MInsomnia]) / 100.0;
                }
                if (owns(ChAfterFlag)) {
                    const Feat f = *owner[ChAfterFlag];
                    p_after = clamp_target(f, target[f]) / 100.0;
                    after_threshold = f == Feat::After12 ? 12.0 : f == Feat::After1 ? 13.0 : 14.0;
                }

                // nights
                int n_nights = 0;
                for (int k = 0; k < cfg.window_days; ++k) {
                    if (cfg.night_drop_p > 0.0 && rng.bernoulli(cfg.night_drop_p)) continue;
                    const std::int64_t day =
                        base_day + static_cast<std::int64_t>(rec) * cfg.record_spacing_days + k;
                    const bool weekend = is_weekend_day(day + 1);

                    NightPlan plan;
                    plan.day = day;

                    double dur_h = rng.normal(dur_mean, dur_sd);
                    dur_h += weekend ? wkd_delta : 0.0;
                    bool insomnia = false;
                    if (p_dur10 >= 0.0) {
                        if (rng.bernoulli(p_dur10)) {
                            dur_h = rng.uniform(10.15, 11.4);
                        } else {
                            dur_h = std::min(dur_h, 9.8);
                        }
                    }
                    if (p_insomnia >= 0.0) {
                        if (rng.bernoulli(p_insomnia)) {
                            dur_h = rng.uniform(4.2, 5.7);
                            insomnia = true;
                        } else if (dur_h < 6.2) {
                            dur_h = rng.uniform(6.2, 7.5);
                        }
                    }
                    dur_h = std::clamp(dur_h, 1.2, 12.9);

                    double onset = rng.normal(onset_mean, onset_sd);
                    if (p_after >= 0.0) {
                        onset = rng.bernoulli(p_after)
                                    ? rng.uniform(after_threshold + 0.15,
                                                  std::min(after_threshold + 2.5, 16.4))
                                    : rng.uniform(std::max(6.5, after_threshold - 3.5),
                                                  after_threshold - 0.15);
                    }
                    onset = std::clamp(onset, 6.5, 16.4);

                    const double awake_frac =
                        std::clamp(rng.normal(awake_frac_w, kNightAwakeSd), 0.3, 55.0);
                    plan.dur_s = std::llround(dur_h * 3600.0);
                    plan.tib_s = std::llround(static_cast<double>(plan.dur_s) /
                                              (1.0 - awake_frac / 100.0));
                    if (plan.tib_s < plan.dur_s) plan.tib_s = plan.dur_s;

                    // keep the whole session inside the noon-to-noon day
                    const double tib_h = static_cast<double>(plan.tib_s) / 3600.0;
                    if (onset + tib_h > 23.8) onset = std::max(6.5, 23.8 - tib_h);
                    plan.onset_h = onset;

                    double deep_frac = std::clamp(rng.normal(deep_frac_w, kNightDeepSd), 0.5, 70.0);
                    double rem_frac = std::clamp(rng.normal(rem_frac_w, kNightRemSd), 0.5, 70.0);
                    const double sleep_frac = 100.0 * static_cast<double>(plan.dur_s) /
                                              static_cast<double>(plan.tib_s);
                    if (deep_frac + rem_frac > sleep_frac - 1.0) {
                        const double scale = (sleep_frac - 1.0) / (deep_frac + rem_frac);
                        deep_frac *= scale;
                        rem_frac *= scale;
                    }
                    plan.deep_s = std::llround(deep_frac / 100.0 * static_cast<double>(plan.tib_s));
                    plan.rem_s = std::llround(rem_frac / 100.0 * static_cast<double>(plan.tib_s));
                    if (plan.deep_s + plan.rem_s > plan.dur_s) {
                        plan.rem_s = std::max<std::int64_t>(plan.dur_s - plan.deep_s, 0);
                    }

                    // awakenings
                    const std::int64_t awake_s = plan.tib_s - plan.dur_s;
                    int n_awk = rng.poisson(std::max(awk_mean, 0.0));
                    const int max_awk =
                        static_cast<int>(std::min<std::int64_t>(awake_s / 302, 6));
                    n_awk = std::clamp(n_awk, awake_s > 300 ? 1 : 0, std::max(max_awk, 0));
                    plan.prolonged_awakening = insomnia;
                    if (insomnia && awake_s < 1900) {
                        // widen time in bed so the forced >=30-minute run fits
                        plan.tib_s = plan.dur_s + 1900 + 302 * std::max(n_awk - 1, 0);
                    }
                    if (p_insomnia >= 0.0 && !insomnia && dur_h < 6.0) {
                        // a non-flagged short night must not cross the
                        // prolonged-awakening line
                        n_awk = std::max<int>(
                            n_awk, static_cast<int>((plan.tib_s - plan.dur_s) / 1700 + 1));
                        n_awk = std::min(n_awk, 6);
                    }
                    plan.n_awakenings = n_awk;

                    // REM latency inside the NREM budget
                    if (plan.rem_s > 0) {
                        const std::int64_t nrem_s = plan.dur_s - plan.rem_s;
                        const double lat_min = std::clamp(
                            rng.normal(rem_lat_w, kNightRemLatSd), 1.0,
                            std::max(1.0, static_cast<double>(nrem_s) / 60.0 - 2.0));
                        plan.lat_s = std::llround(lat_min * 60.0);
                        plan.lat_s = std::clamp<std::int64_t>(plan.lat_s, 0,
                                                              std::max<std::int64_t>(nrem_s - 1, 0));
                    }

                    build_night_episodes(plan, tz, rng, episodes);
                    ++n_nights;
                }

                // item drops and questionnaire drop
                Phq8Record phq;
                phq.participant_id = pid;
                phq.completed_at_s = completed_epoch;
                phq.tz_offset_min = tz;
                bool complete = true;
                for (int q = 0; q < 8; ++q) {
                    if (cfg.item_drop_p > 0.0 && rng.bernoulli(cfg.item_drop_p)) {
                        complete = false;
                    } else {
                        phq.items[q] = items[q];
                    }
                }
                const bool emitted = !(cfg.phq8_drop_p > 0.0 && rng.bernoulli(cfg.phq8_drop_p));
                if (emitted) phq_rows.push_back(phq);

                TruthRecord tr;
                tr.participant_id = pid;
                tr.completed_at_s = completed_epoch;
                tr.phq8_total = total;
                tr.complete = complete;
                tr.emitted = emitted;
                tr.n_nights = n_nights;
                truth.records.push_back(tr);
            }
            if (phq_rows.empty()) out.dataset.phq8.erase(pid);
            if (episodes.empty()) out.dataset.episodes.erase(pid);
        }
    }

    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

void write_cohort_files(const RawCohort& cohort, const std::string& episodes_path,
                        const std::string& phq8_path, const std::string& demographics_path,
                        const std::string& truth_json_path) {
    export_cohort(cohort.dataset, episodes_path, phq8_path, demographics_path);

    json j;
    for (const auto& [f, b] : cohort.truth.beta1) {
        j["beta1"][std::string(feature_name(f))] = b;
    }
    for (const auto& [f, v] : cohort.truth.variance_components) {
        json jv;
        jv["site"] = v.site;
        jv["participant"] = v.participant;
        jv["residual"] = v.residual;
        j["variance_components"][std::string(feature_name(f))] = jv;
    }
    for (const auto& [f, m] : cohort.truth.site_intercepts) {
        for (const auto& [site, v] : m) {
            j["site_intercepts"][std::string(feature_name(f))][site] = v;
        }
    }
    for (const auto& [f, m] : cohort.truth.participant_intercepts) {
        for (const auto& [pid, v] : m) {
            j["participant_intercepts"][std::string(feature_name(f))][pid] = v;
        }
    }
    j["records"] = json::array();
    for (const auto& r : cohort.truth.records) {
        json jr;
        jr["participant_id"] = r.participant_id;
        jr["completed_at_utc"] = format_iso_utc(r.completed_at_s);
        jr["phq8_total"] = r.phq8_total;
        jr["complete"] = r.complete;
        jr["emitted"] = r.emitted;
        jr["n_nights"] = r.n_nights;
        j["records"].push_back(jr);
    }

    std::ofstream out(truth_json_path);
    if (!out) throw InputError("cannot write: " + truth_json_path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// JSON config
// ---------------------------------------------------------------------------

SynthConfig parse_synth_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    SynthConfig cfg;
    try {
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("n_sites")) cfg.n_sites = j["n_sites"].get<int>();
        if (j.contains("participants_per_site")) {
            cfg.participants_per_site = j["participants_per_site"].get<int>();
        }
        if (j.contains("records_per_participant")) {
            cfg.records_per_participant = j["records_per_participant"].get<int>();
        }
        if (j.contains("record_spacing_days")) {
            cfg.record_spacing_days = j["record_spacing_days"].get<int>();
        }
        if (j.contains("window_days")) cfg.window_days = j["window_days"].get<int>();
        if (j.contains("tz_offset_min")) cfg.tz_offset_min = j["tz_offset_min"].get<int>();
        if (j.contains("night_drop_p")) cfg.night_drop_p = j["night_drop_p"].get<double>();
        if (j.contains("phq8_drop_p")) cfg.phq8_drop_p = j["phq8_drop_p"].get<double>();
        if (j.contains("item_drop_p")) cfg.item_drop_p = j["item_drop_p"].get<double>();
        if (j.contains("phq8_mean")) cfg.phq8_mean = j["phq8_mean"].get<double>();
        if (j.contains("phq8_between_sd")) cfg.phq8_between_sd = j["phq8_between_sd"].get<double>();
        if (j.contains("phq8_within_sd")) cfg.phq8_within_sd = j["phq8_within_sd"].get<double>();
        if (j.contains("coupling")) {
            for (const auto& [name, v] : j["coupling"].items()) {
                const auto f = feature_from_name(name);
                if (!f) throw ConfigError("synth config: unknown feature '" + name + "'");
                cfg.coupling[*f] = v.get<double>();
            }
        }
        if (j.contains("variance_components")) {
            for (const auto& [name, v] : j["variance_components"].items()) {
                const auto f = feature_from_name(name);
                if (!f) throw ConfigError("synth config: unknown feature '" + name + "'");
                SynthVariance sv;
                sv.site = v.value("site", 0.0);
                sv.participant = v.value("participant", 0.0);
                sv.residual = v.value("residual", 0.0);
                cfg.variance_components[*f] = sv;
            }
        }
        if (j.contains("demographics")) {
            const auto& d = j["demographics"];
            cfg.demographics.age_min = d.value("age_min", cfg.demographics.age_min);
            cfg.demographics.age_max = d.value("age_max", cfg.demographics.age_max);
            if (d.contains("gender_probs")) {
                cfg.demographics.gender_probs.clear();
                for (const auto& [label, p] : d["gender_probs"].items()) {
                    cfg.demographics.gender_probs.emplace_back(label, p.get<double>());
                }
            }
            cfg.demographics.p_degree = d.value("p_degree", cfg.demographics.p_degree);
            if (d.contains("income_probs")) {
                const auto v = d["income_probs"].get<std::vector<double>>();
                if (v.size() != 4) throw ConfigError("synth config: income_probs needs 4 entries");
                std::copy(v.begin(), v.end(), cfg.demographics.income_probs.begin());
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    return cfg;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["n_sites"] = cfg.n_sites;
    j["participants_per_site"] = cfg.participants_per_site;
    j["records_per_participant"] = cfg.records_per_participant;
    j["record_spacing_days"] = cfg.record_spacing_days;
    j["window_days"] = cfg.window_days;
    j["tz_offset_min"] = cfg.tz_offset_min;
    j["night_drop_p"] = cfg.night_drop_p;
    j["phq8_drop_p"] = cfg.phq8_drop_p;
    j["item_drop_p"] = cfg.item_drop_p;
    j["phq8_mean"] = cfg.phq8_mean;
    j["phq8_between_sd"] = cfg.phq8_between_sd;
    j["phq8_within_sd"] = cfg.phq8_within_sd;
    for (const auto& [f, b] : cfg.coupling) j["coupling"][std::string(feature_name(f))] = b;
    for (const auto& [f, v] : cfg.variance_components) {
        json jv;
        jv["site"] = v.site;
        jv["participant"] = v.participant;
        jv["residual"] = v.residual;
        j["variance_components"][std::string(feature_name(f))] = jv;
    }
    return j.dump(2);
}

}  // namespace sleepassoc
