#include "sleepassoc/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "sleepassoc/csv.hpp"
#include "sleepassoc/errors.hpp"

namespace sleepassoc {

std::string_view stage_label(SleepStage s) {
    switch (s) {
        case SleepStage::Awake: return "awake";
        case SleepStage::Light: return "light";
        case SleepStage::Deep: return "deep";
        case SleepStage::Rem: return "rem";
    }
    return "awake";
}

std::optional<SleepStage> parse_stage(std::string_view label) {
    if (label == "awake") return SleepStage::Awake;
    if (label == "light") return SleepStage::Light;
    if (label == "deep") return SleepStage::Deep;
    if (label == "rem") return SleepStage::Rem;
    return std::nullopt;
}

namespace {

bool parse_int_strict(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool parse_double_strict(std::string_view s, double& out) {
    if (s.empty()) return false;
    const std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size();
}

bool header_is(const std::vector<std::string>& actual, const std::vector<std::string>& expect) {
    return actual == expect;
}

std::string header_string(const std::vector<std::string>& h) { return join_csv(h); }

const std::vector<std::string> kEpisodesHeader = {"participant_id", "stage", "start_utc",
                                                  "tz_offset_min", "duration_s"};
const std::vector<std::string> kPhq8Header = {"participant_id", "completed_at_utc",
                                              "tz_offset_min", "q1", "q2", "q3", "q4",
                                              "q5",            "q6", "q7", "q8"};
const std::vector<std::string> kDemographicsHeader = {"participant_id", "site",     "age",
                                                      "gender",         "education", "income"};

}  // namespace

bool CohortDataset::operator==(const CohortDataset& o) const {
    auto ep_eq = [](const SleepEpisode& a, const SleepEpisode& b) {
        return a.stage == b.stage && a.start_epoch_s == b.start_epoch_s &&
               a.tz_offset_min == b.tz_offset_min && a.duration_s == b.duration_s;
    };
    auto phq_eq = [](const Phq8Record& a, const Phq8Record& b) {
        return a.participant_id == b.participant_id && a.completed_at_s == b.completed_at_s &&
               a.tz_offset_min == b.tz_offset_min && a.items == b.items;
    };
    auto prof_eq = [](const ParticipantProfile& a, const ParticipantProfile& b) {
        return a.participant_id == b.participant_id && a.site == b.site && a.age == b.age &&
               a.gender == b.gender && a.education == b.education && a.income == b.income;
    };
    if (participant_order != o.participant_order) return false;
    if (episodes.size() != o.episodes.size() || phq8.size() != o.phq8.size() ||
        profiles.size() != o.profiles.size()) {
        return false;
    }
    for (const auto& [id, eps] : episodes) {
        auto it = o.episodes.find(id);
        if (it == o.episodes.end() || it->second.size() != eps.size()) return false;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (!ep_eq(eps[i], it->second[i])) return false;
        }
    }
    for (const auto& [id, recs] : phq8) {
        auto it = o.phq8.find(id);
        if (it == o.phq8.end() || it->second.size() != recs.size()) return false;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (!phq_eq(recs[i], it->second[i])) return false;
        }
    }
    for (const auto& [id, prof] : profiles) {
        auto it = o.profiles.find(id);
        if (it == o.profiles.end() || !prof_eq(prof, it->second)) return false;
    }
    return true;
}

IngestResult ingest_cohort(const std::string& episodes_path, const std::string& phq8_path,
                           const std::string& demographics_path) {
    IngestResult result;
    CohortDataset& ds = result.dataset;
    auto& diags = result.diagnostics;

    // --- episodes ---
    {
        const CsvTable t = read_csv(episodes_path);
        if (!header_is(t.header, kEpisodesHeader)) {
            throw InputError("episodes file " + episodes_path + ": unexpected header '" +
                             header_string(t.header) + "'");
        }
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::size_t line = t.first_data_line + r;
            const auto& row = t.rows[r];
            auto reject = [&](const std::string& msg) {
                diags.push_back({episodes_path, line, msg});
            };
            if (row.size() != kEpisodesHeader.size()) {
                reject("schema violation: expected 5 columns, got " + std::to_string(row.size()));
                continue;
            }
            const auto stage = parse_stage(row[1]);
            if (!stage) {
                reject("schema violation: unknown stage label '" + row[1] + "'");
                continue;
            }
            SleepEpisode ep;
            ep.stage = *stage;
            if (!parse_iso_utc(row[2], ep.start_epoch_s)) {
                reject("schema violation: bad start_utc '" + row[2] + "'");
                continue;
            }
            std::int64_t tz = 0, dur = 0;
            if (!parse_int_strict(row[3], tz)) {
                reject("schema violation: bad tz_offset_min '" + row[3] + "'");
                continue;
            }
            if (!parse_int_strict(row[4], dur) || dur <= 0) {
                reject("schema violation: bad duration_s '" + row[4] + "'");
                continue;
            }
            ep.tz_offset_min = static_cast<int>(tz);
            ep.duration_s = dur;
            if (row[0].empty()) {
                reject("schema violation: empty participant_id");
                continue;
            }
            ds.episodes[row[0]].push_back(ep);
        }
        // per participant: sort by start, reject duplicates and overlaps
        for (auto& [id, eps] : ds.episodes) {
            std::stable_sort(eps.begin(), eps.end(),
                             [](const SleepEpisode& a, const SleepEpisode& b) {
                                 return a.start_epoch_s < b.start_epoch_s;
                             });
            std::vector<SleepEpisode> kept;
            kept.reserve(eps.size());
            for (const auto& ep : eps) {
                if (!kept.empty() && ep.start_epoch_s == kept.back().start_epoch_s) {
                    diags.push_back({episodes_path, 0,
                                     "duplicate episode start for participant " + id + " at " +
                                         format_iso_utc(ep.start_epoch_s)});
                    continue;
                }
                if (!kept.empty() && ep.start_epoch_s < kept.back().end_epoch_s()) {
                    diags.push_back({episodes_path, 0,
                                     "overlapping episode for participant " + id + " at " +
                                         format_iso_utc(ep.start_epoch_s)});
                    continue;
                }
                kept.push_back(ep);
            }
            eps = std::move(kept);
        }
    }

    // --- phq8 ---
    {
        const CsvTable t = read_csv(phq8_path);
        if (!header_is(t.header, kPhq8Header)) {
            throw InputError("phq8 file " + phq8_path + ": unexpected header '" +
                             header_string(t.header) + "'");
        }
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::size_t line = t.first_data_line + r;
            const auto& row = t.rows[r];
            auto reject = [&](const std::string& msg) { diags.push_back({phq8_path, line, msg}); };
            if (row.size() != kPhq8Header.size()) {
                reject("schema violation: expected 11 columns, got " + std::to_string(row.size()));
                continue;
            }
            if (row[0].empty()) {
                reject("schema violation: empty participant_id");
                continue;
            }
            Phq8Record rec;
            rec.participant_id = row[0];
            if (!parse_iso_utc(row[1], rec.completed_at_s)) {
                reject("schema violation: bad completed_at_utc '" + row[1] + "'");
                continue;
            }
            std::int64_t tz = 0;
            if (!parse_int_strict(row[2], tz)) {
                reject("schema violation: bad tz_offset_min '" + row[2] + "'");
                continue;
            }
            rec.tz_offset_min = static_cast<int>(tz);
            bool ok = true;
            for (int q = 0; q < 8; ++q) {
                const auto& cell = row[3 + q];
                if (cell.empty()) continue;  // missing item
                std::int64_t v = 0;
                if (!parse_int_strict(cell, v) || v < 0 || v > 3) {
                    reject("schema violation: bad item q" + std::to_string(q + 1) + " value '" +
                           cell + "'");
                    ok = false;
                    break;
                }
                rec.items[q] = static_cast<int>(v);
            }
            if (!ok) continue;
            ds.phq8[rec.participant_id].push_back(rec);
        }
        for (auto& [id, recs] : ds.phq8) {
            std::stable_sort(recs.begin(), recs.end(), [](const Phq8Record& a, const Phq8Record& b) {
                return a.completed_at_s < b.completed_at_s;
            });
        }
    }

    // --- demographics ---
    {
        const CsvTable t = read_csv(demographics_path);
        if (!header_is(t.header, kDemographicsHeader)) {
            throw InputError("demographics file " + demographics_path + ": unexpected header '" +
                             header_string(t.header) + "'");
        }
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::size_t line = t.first_data_line + r;
            const auto& row = t.rows[r];
            auto reject = [&](const std::string& msg) {
                diags.push_back({demographics_path, line, msg});
            };
            if (row.size() != kDemographicsHeader.size()) {
                reject("schema violation: expected 6 columns, got " + std::to_string(row.size()));
                continue;
            }
            if (row[0].empty()) {
                reject("schema violation: empty participant_id");
                continue;
            }
            if (ds.profiles.count(row[0])) {
                reject("duplicate participant_id '" + row[0] + "'");
                continue;
            }
            ParticipantProfile p;
            p.participant_id = row[0];
            p.site = row[1];
            if (p.site.empty()) {
                reject("schema violation: empty site");
                continue;
            }
            if (!row[2].empty()) {
                double age = 0;
                if (!parse_double_strict(row[2], age) || age < 0) {
                    reject("schema violation: bad age '" + row[2] + "'");
                    continue;
                }
                p.age = age;
            }
            p.gender = row[3];
            if (p.gender.empty()) {
                reject("schema violation: empty gender");
                continue;
            }
            p.education = row[4];
            if (std::find(kEducationLevels.begin(), kEducationLevels.end(), p.education) ==
                kEducationLevels.end()) {
                reject("schema violation: unknown education level '" + p.education + "'");
                continue;
            }
            p.income = row[5];
            if (std::find(kIncomeLevels.begin(), kIncomeLevels.end(), p.income) ==
                kIncomeLevels.end()) {
                reject("schema violation: unknown income level '" + p.income + "'");
                continue;
            }
            ds.profiles[p.participant_id] = p;
            ds.participant_order.push_back(p.participant_id);
        }
    }

    return result;
}

void export_cohort(const CohortDataset& ds, const std::string& episodes_path,
                   const std::string& phq8_path, const std::string& demographics_path) {
    // participants present only in episode/phq8 maps come after the profiled
    // ones, in key order, so the export is deterministic
    std::vector<std::string> order = ds.participant_order;
    auto append_missing = [&order](const auto& m) {
        for (const auto& [id, _] : m) {
            if (std::find(order.begin(), order.end(), id) == order.end()) order.push_back(id);
        }
    };
    append_missing(ds.episodes);
    append_missing(ds.phq8);

    {
        std::ofstream out(episodes_path);
        if (!out) throw InputError("cannot write: " + episodes_path);
        out << join_csv(kEpisodesHeader) << '\n';
        for (const auto& id : order) {
            auto it = ds.episodes.find(id);
            if (it == ds.episodes.end()) continue;
            for (const auto& ep : it->second) {
                out << id << ',' << stage_label(ep.stage) << ',' << format_iso_utc(ep.start_epoch_s)
                    << ',' << ep.tz_offset_min << ',' << ep.duration_s << '\n';
            }
        }
    }
    {
        std::ofstream out(phq8_path);
        if (!out) throw InputError("cannot write: " + phq8_path);
        out << join_csv(kPhq8Header) << '\n';
        for (const auto& id : order) {
            auto it = ds.phq8.find(id);
            if (it == ds.phq8.end()) continue;
            for (const auto& rec : it->second) {
                out << id << ',' << format_iso_utc(rec.completed_at_s) << ',' << rec.tz_offset_min;
                for (const auto& item : rec.items) {
                    out << ',';
                    if (item) out << *item;
                }
                out << '\n';
            }
        }
    }
    {
        std::ofstream out(demographics_path);
        if (!out) throw InputError("cannot write: " + demographics_path);
        out << join_csv(kDemographicsHeader) << '\n';
        for (const auto& id : order) {
            auto it = ds.profiles.find(id);
            if (it == ds.profiles.end()) continue;
            const auto& p = it->second;
            out << id << ',' << p.site << ','
                << (p.age ? format_double_roundtrip(*p.age) : std::string()) << ',' << p.gender
                << ',' << p.education << ',' << p.income << '\n';
        }
    }
}

std::vector<NightRecord> assemble_nights(std::string_view participant_id,
                                         std::vector<SleepEpisode> episodes,
                                         const AssemblyConfig& cfg) {
    std::vector<NightRecord> out;
    if (episodes.empty()) return out;

    // split into sessions on gaps > threshold
    std::vector<std::vector<SleepEpisode>> sessions;
    sessions.emplace_back();
    sessions.back().push_back(episodes.front());
    for (std::size_t i = 1; i < episodes.size(); ++i) {
        const std::int64_t gap = episodes[i].start_epoch_s - sessions.back().back().end_epoch_s();
        if (gap > cfg.session_gap_s) {
            sessions.emplace_back();
        }
        sessions.back().push_back(episodes[i]);
    }

    std::vector<NightRecord> candidates;
    for (auto& sess : sessions) {
        // close internal gaps with synthetic Awake episodes
        std::vector<SleepEpisode> closed;
        closed.reserve(sess.size());
        for (const auto& ep : sess) {
            if (!closed.empty()) {
                const std::int64_t gap = ep.start_epoch_s - closed.back().end_epoch_s();
                if (gap > 0) {
                    SleepEpisode filler;
                    filler.stage = SleepStage::Awake;
                    filler.start_epoch_s = closed.back().end_epoch_s();
                    filler.tz_offset_min = closed.back().tz_offset_min;
                    filler.duration_s = gap;
                    closed.push_back(filler);
                }
            }
            closed.push_back(ep);
        }

        const std::int64_t span = closed.back().end_epoch_s() - closed.front().start_epoch_s;
        if (span < cfg.min_session_s) continue;  // nap

        const auto first_na = std::find_if(closed.begin(), closed.end(),
                                           [](const SleepEpisode& e) { return is_non_awake(e.stage); });
        if (first_na == closed.end()) continue;  // no sleep at all
        const auto last_na = std::find_if(closed.rbegin(), closed.rend(), [](const SleepEpisode& e) {
            return is_non_awake(e.stage);
        });

        NightRecord night;
        night.participant_id = std::string(participant_id);
        night.tz_offset_min = closed.front().tz_offset_min;
        night.night_key = noon_day(closed.front().start_epoch_s, night.tz_offset_min);
        night.onset_epoch_s = first_na->start_epoch_s;
        night.offset_epoch_s = last_na->end_epoch_s();
        night.onset_h = noon_axis_hours(night.onset_epoch_s, night.tz_offset_min, night.night_key);
        night.offset_h = noon_axis_hours(night.offset_epoch_s, night.tz_offset_min, night.night_key);
        if (night.offset_h > 24.0) continue;  // session runs past the following noon
        night.episodes = std::move(closed);
        candidates.push_back(std::move(night));
    }

    // keep the longest session per noon-to-noon day (ties: earliest start)
    std::map<std::int64_t, const NightRecord*> best;
    for (const auto& n : candidates) {
        auto [it, inserted] = best.try_emplace(n.night_key, &n);
        if (!inserted) {
            const NightRecord& cur = *it->second;
            const std::int64_t cur_span =
                cur.episodes.back().end_epoch_s() - cur.episodes.front().start_epoch_s;
            const std::int64_t new_span =
                n.episodes.back().end_epoch_s() - n.episodes.front().start_epoch_s;
            if (new_span > cur_span) it->second = &n;
        }
    }
    out.reserve(best.size());
    for (const auto& [key, night] : best) out.push_back(*night);
    return out;
}

}  // namespace sleepassoc
