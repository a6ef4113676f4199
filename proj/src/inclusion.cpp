#include "sleepassoc/inclusion.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>

#include "sleepassoc/csv.hpp"
#include "sleepassoc/errors.hpp"

namespace sleepassoc {

std::vector<std::string> AnalysisTable::site_order() const {
    std::vector<std::string> order;
    for (const auto& row : rows) {
        if (std::find(order.begin(), order.end(), row.site) == order.end()) {
            order.push_back(row.site);
        }
    }
    return order;
}

AnalysisTable build_analysis_rows(const CohortDataset& ds, int window_days,
                                  const AssemblyConfig& assembly, std::size_t* no_profile_count) {
    AnalysisTable table;
    std::size_t skipped_no_profile = 0;

    // rows follow demographics file order, then questionnaire order
    for (const auto& pid : ds.participant_order) {
        const auto prof_it = ds.profiles.find(pid);
        if (prof_it == ds.profiles.end()) continue;
        const ParticipantProfile& prof = prof_it->second;

        const auto phq_it = ds.phq8.find(pid);
        if (phq_it == ds.phq8.end()) continue;

        std::vector<NightRecord> nights;
        if (const auto ep_it = ds.episodes.find(pid); ep_it != ds.episodes.end()) {
            nights = assemble_nights(pid, ep_it->second, assembly);
        }

        for (const Phq8Record& rec : phq_it->second) {
            const FeatureVector fv = window_features(nights, rec, window_days);
            AnalysisRow row;
            row.participant_id = pid;
            row.completed_at_s = rec.completed_at_s;
            row.site = prof.site;
            row.age = prof.age;
            row.gender = prof.gender;
            row.education = prof.education;
            row.income = prof.income;
            row.phq8_total = rec.total();
            row.sleep_subscore = rec.sleep_subscore();
            row.phq8_complete = rec.complete();
            row.n_nights = fv.n_nights_in_window;
            row.features = fv.values;
            table.rows.push_back(std::move(row));
        }
    }

    // questionnaire rows whose participant has no demographics profile are
    // not representable in the analysis table; count them for the report
    for (const auto& [pid, recs] : ds.phq8) {
        if (!ds.profiles.count(pid)) skipped_no_profile += recs.size();
    }
    if (no_profile_count) *no_profile_count = skipped_no_profile;
    return table;
}

std::pair<AnalysisTable, InclusionReport> apply_inclusion(const AnalysisTable& table, int min_days,
                                                          int min_records) {
    InclusionReport rep;
    rep.min_days = min_days;
    rep.min_records = min_records;
    rep.input_rows = table.rows.size();

    // (1) completed PHQ-8 only
    std::vector<const AnalysisRow*> stage1;
    for (const auto& row : table.rows) {
        if (row.phq8_complete) {
            stage1.push_back(&row);
        } else {
            ++rep.dropped_incomplete;
        }
    }

    // (2) enough observed nights in the window
    std::vector<const AnalysisRow*> stage2;
    for (const auto* row : stage1) {
        if (row->n_nights >= min_days) {
            stage2.push_back(row);
        } else {
            ++rep.dropped_insufficient_nights;
        }
    }

    // (3) enough surviving records per participant
    std::map<std::string, int> per_participant;
    for (const auto* row : stage2) ++per_participant[row->participant_id];

    AnalysisTable out;
    for (const auto* row : stage2) {
        if (per_participant[row->participant_id] >= min_records) {
            out.rows.push_back(*row);
        } else {
            ++rep.dropped_participant_min_records;
        }
    }

    rep.kept_rows = out.rows.size();
    std::map<std::string, int> kept_participants;
    for (const auto& row : out.rows) ++kept_participants[row.participant_id];
    rep.kept_participants = kept_participants.size();
    return {std::move(out), rep};
}

namespace {

std::vector<std::string> analysis_header() {
    std::vector<std::string> h = {"participant_id", "completed_at_utc", "site",
                                  "age",            "gender",           "education",
                                  "income",         "phq8_total",       "sleep_subscore",
                                  "n_nights"};
    for (const auto& name : kFeatureNames) h.emplace_back(name);
    return h;
}

}  // namespace

void write_analysis_csv(const AnalysisTable& table, const std::string& path,
                        const std::vector<std::string>& config_lines) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    for (const auto& line : config_lines) out << '#' << line << '\n';
    out << join_csv(analysis_header()) << '\n';
    for (const auto& row : table.rows) {
        out << row.participant_id << ',' << format_iso_utc(row.completed_at_s) << ',' << row.site
            << ',';
        if (row.age) out << format_double_roundtrip(*row.age);
        out << ',' << row.gender << ',' << row.education << ',' << row.income << ',';
        if (row.phq8_total) out << *row.phq8_total;
        out << ',';
        if (row.sleep_subscore) out << *row.sleep_subscore;
        out << ',' << row.n_nights;
        for (const auto& f : row.features) {
            out << ',';
            if (f) out << format_double_roundtrip(*f);
        }
        out << '\n';
    }
}

AnalysisTable read_analysis_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto expect = analysis_header();
    if (t.header != expect) {
        throw SchemaError("analysis table " + path + ": unexpected header");
    }
    AnalysisTable table;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.first_data_line + r;
        if (row.size() != expect.size()) {
            throw SchemaError("analysis table " + path + " line " + std::to_string(line) +
                              ": expected " + std::to_string(expect.size()) + " columns");
        }
        AnalysisRow a;
        a.participant_id = row[0];
        if (!parse_iso_utc(row[1], a.completed_at_s)) {
            throw SchemaError("analysis table " + path + " line " + std::to_string(line) +
                              ": bad completed_at_utc");
        }
        a.site = row[2];
        auto parse_opt_double = [&](const std::string& cell) -> std::optional<double> {
            if (cell.empty()) return std::nullopt;
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size()) {
                throw SchemaError("analysis table " + path + " line " + std::to_string(line) +
                                  ": bad numeric cell '" + cell + "'");
            }
            return v;
        };
        auto parse_opt_int = [&](const std::string& cell) -> std::optional<int> {
            if (cell.empty()) return std::nullopt;
            int v = 0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size()) {
                throw SchemaError("analysis table " + path + " line " + std::to_string(line) +
                                  ": bad integer cell '" + cell + "'");
            }
            return v;
        };
        a.age = parse_opt_double(row[3]);
        a.gender = row[4];
        a.education = row[5];
        a.income = row[6];
        a.phq8_total = parse_opt_int(row[7]);
        a.sleep_subscore = parse_opt_int(row[8]);
        a.phq8_complete = a.phq8_total.has_value();
        const auto n_nights = parse_opt_int(row[9]);
        a.n_nights = n_nights.value_or(0);
        for (int f = 0; f < kFeatureCount; ++f) {
            a.features[f] = parse_opt_double(row[10 + f]);
        }
        table.rows.push_back(std::move(a));
    }
    return table;
}

}  // namespace sleepassoc
