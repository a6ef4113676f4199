#include "sleepassoc/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>

#include "sleepassoc/csv.hpp"
#include "sleepassoc/errors.hpp"

namespace sleepassoc {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value,
               const std::string& where) {
    auto to_int = [&](const std::string& v) {
        int out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size()) {
            throw ConfigError(where + ": bad integer for " + key + ": '" + v + "'");
        }
        return out;
    };
    auto to_u64 = [&](const std::string& v) {
        std::uint64_t out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size()) {
            throw ConfigError(where + ": bad integer for " + key + ": '" + v + "'");
        }
        return out;
    };
    auto to_double = [&](const std::string& v) {
        char* end = nullptr;
        const double out = std::strtod(v.c_str(), &end);
        if (end != v.c_str() + v.size()) {
            throw ConfigError(where + ": bad number for " + key + ": '" + v + "'");
        }
        return out;
    };
    auto to_bool = [&](const std::string& v) {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError(where + ": bad boolean for " + key + ": '" + v + "'");
    };

    if (key == "episodes") cfg.episodes = value;
    else if (key == "phq8") cfg.phq8 = value;
    else if (key == "demographics") cfg.demographics = value;
    else if (key == "table") cfg.table = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "window_days") cfg.window_days = to_int(value);
    else if (key == "min_days") cfg.min_days = to_int(value);
    else if (key == "min_records") cfg.min_records = to_int(value);
    else if (key == "predictor") cfg.predictor = value;
    else if (key == "per_site") cfg.per_site = to_bool(value);
    else if (key == "bh_level") cfg.bh_level = to_double(value);
    else if (key == "box_cox") cfg.box_cox = value;
    else if (key == "seed") cfg.seed = to_u64(value);
    else if (key == "synth_config") cfg.synth_config = value;
    else throw ConfigError(where + ": unknown config key '" + key + "'");
}

void validate_run_config(const RunConfig& cfg, const std::string& where) {
    if (cfg.window_days < 1) throw ConfigError(where + ": window_days must be >= 1");
    if (cfg.min_days < 0 || cfg.min_records < 0) {
        throw ConfigError(where + ": min_days and min_records must be >= 0");
    }
    if (cfg.predictor != "phq8" && cfg.predictor != "subscore" && cfg.predictor != "both") {
        throw ConfigError(where + ": predictor must be phq8, subscore or both");
    }
    if (!(cfg.bh_level > 0.0 && cfg.bh_level < 1.0)) {
        throw ConfigError(where + ": bh_level must be in (0,1)");
    }
    box_cox_from_string(cfg.box_cox);
}

}  // namespace

BoxCoxSpec box_cox_from_string(const std::string& s) {
    BoxCoxSpec spec;
    if (s == "off") {
        spec.mode = BoxCoxSpec::Mode::Off;
    } else if (s == "auto") {
        spec.mode = BoxCoxSpec::Mode::Auto;
    } else if (s.rfind("fixed:", 0) == 0) {
        spec.mode = BoxCoxSpec::Mode::Fixed;
        const std::string v = s.substr(6);
        char* end = nullptr;
        spec.fixed_lambda = std::strtod(v.c_str(), &end);
        if (v.empty() || end != v.c_str() + v.size()) {
            throw ConfigError("box_cox: bad fixed lambda '" + v + "'");
        }
    } else {
        throw ConfigError("box_cox must be off, auto or fixed:<lambda>, got '" + s + "'");
    }
    return spec;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + " line " + std::to_string(lineno) +
                              ": expected key = value");
        }
        apply_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)), path);
    }
    validate_run_config(cfg, path);
    return cfg;
}

std::vector<std::string> config_header_lines(const RunConfig& cfg) {
    std::vector<std::string> lines;
    auto kv = [&lines](const std::string& k, const std::string& v) {
        lines.push_back(" " + k + " = " + v);
    };
    kv("episodes", cfg.episodes);
    kv("phq8", cfg.phq8);
    kv("demographics", cfg.demographics);
    kv("table", cfg.table);
    kv("out_dir", cfg.out_dir);
    kv("window_days", std::to_string(cfg.window_days));
    kv("min_days", std::to_string(cfg.min_days));
    kv("min_records", std::to_string(cfg.min_records));
    kv("predictor", cfg.predictor);
    kv("per_site", cfg.per_site ? "true" : "false");
    kv("bh_level", format_double_roundtrip(cfg.bh_level));
    kv("box_cox", cfg.box_cox);
    kv("seed", std::to_string(cfg.seed));
    kv("synth_config", cfg.synth_config);
    return lines;
}

RunConfig parse_config_header(const std::vector<std::string>& lines) {
    RunConfig cfg;
    for (const auto& raw : lines) {
        const std::string t = trim(raw);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) continue;  // warning lines etc.
        const std::string key = trim(t.substr(0, eq));
        if (key.rfind("warning", 0) == 0) continue;
        apply_key(cfg, key, trim(t.substr(eq + 1)), "config header");
    }
    return cfg;
}

std::vector<std::string> read_config_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] != '#') break;
        lines.push_back(line.substr(1));
    }
    return lines;
}

namespace {

std::string opt_sig6(const std::optional<double>& v) {
    return v ? format_sig6(*v) : std::string("NA");
}

void write_header(std::ofstream& out, const RunConfig& cfg,
                  const std::vector<std::string>& warnings = {}) {
    for (const auto& line : config_header_lines(cfg)) out << '#' << line << '\n';
    for (const auto& w : warnings) out << "# warning: " << w << '\n';
}

std::string_view predictor_label(Predictor p) {
    return p == Predictor::Phq8Total ? "phq8_total" : "sleep_subscore";
}

}  // namespace

void write_association_tsv(const AssociationReport& report, const std::string& path,
                           const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    write_header(out, cfg, report.warnings);
    out << "# predictor = " << predictor_label(report.predictor) << '\n';
    out << "# grouping = "
        << (report.grouping == Grouping::ThreeLevelSiteParticipant ? "three-level" : "two-level")
        << '\n';
    out << "# scope = " << (report.site ? *report.site : std::string("pooled")) << '\n';
    out << "# bh_family = " << kFeatureCount
        << " features of this sweep (fitted rows only)" << '\n';
    if (report.status != "ok") out << "# status = " << report.status << '\n';
    out << "feature\tcoeff\tci_low\tci_high\tz\tp\tp_bh\tsignificant\tn_rows\tn_participants"
           "\tlambda\tstatus\n";
    for (const auto& row : report.rows) {
        out << feature_name(row.feature) << '\t' << opt_sig6(row.coeff) << '\t'
            << opt_sig6(row.ci_lo) << '\t' << opt_sig6(row.ci_hi) << '\t' << opt_sig6(row.z)
            << '\t' << opt_sig6(row.p) << '\t' << opt_sig6(row.p_bh) << '\t'
            << (row.significant ? 1 : 0) << '\t' << row.n_rows << '\t' << row.n_participants
            << '\t' << opt_sig6(row.lambda) << '\t' << row.status << '\n';
    }
}

CorrelationReport correlation_report(const AnalysisTable& table) {
    CorrelationReport report;
    std::vector<std::string> scopes = table.site_order();
    scopes.emplace_back("Total");
    for (const auto& scope : scopes) {
        CorrelationReport::Row row;
        row.scope = scope;
        std::vector<double> x, y;
        for (const auto& r : table.rows) {
            if (scope != "Total" && r.site != scope) continue;
            if (r.phq8_total && r.sleep_subscore) {
                x.push_back(static_cast<double>(*r.phq8_total));
                y.push_back(static_cast<double>(*r.sleep_subscore));
            }
        }
        try {
            row.corr = spearman(x, y);
            row.ok = true;
        } catch (const StatError& e) {
            row.status = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_correlation_tsv(const CorrelationReport& report, const std::string& path,
                           const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    write_header(out, cfg);
    out << "scope\tr\tci_low\tci_high\tfisher_z\tt_stat\tp\tn\tstatus\n";
    for (const auto& row : report.rows) {
        if (row.ok) {
            out << row.scope << '\t' << format_sig6(row.corr.r) << '\t'
                << format_sig6(row.corr.ci_lo) << '\t' << format_sig6(row.corr.ci_hi) << '\t'
                << format_sig6(row.corr.stat_fisher_z) << '\t' << format_sig6(row.corr.stat_t)
                << '\t' << format_sig6(row.corr.p) << '\t' << row.corr.n << '\t' << row.status
                << '\n';
        } else {
            out << row.scope << "\tNA\tNA\tNA\tNA\tNA\tNA\t0\t" << row.status << '\n';
        }
    }
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::nan("");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(i);
    return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

}  // namespace

void write_cohort_summary_tsv(const AnalysisTable& table, const std::string& path,
                              const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    write_header(out, cfg);

    const std::vector<std::string> sites = table.site_order();

    // participant-level view (one entry per participant)
    struct Participant {
        std::string site;
        std::optional<double> age;
        std::string gender, education, income;
    };
    std::map<std::string, Participant> participants;
    std::map<std::string, std::vector<double>> phq8_by_site;
    std::vector<double> phq8_all;
    for (const auto& r : table.rows) {
        auto& p = participants[r.participant_id];
        p.site = r.site;
        p.age = r.age;
        p.gender = r.gender;
        p.education = r.education;
        p.income = r.income;
        if (r.phq8_total) {
            phq8_by_site[r.site].push_back(static_cast<double>(*r.phq8_total));
            phq8_all.push_back(static_cast<double>(*r.phq8_total));
        }
    }

    auto site_col = [&](auto&& per_site_value) {
        std::string cols;
        for (const auto& s : sites) cols += '\t' + per_site_value(s);
        return cols;
    };
    auto kw_p = [&](const std::map<std::string, std::vector<double>>& groups) -> std::string {
        std::vector<std::vector<double>> g;
        for (const auto& s : sites) {
            auto it = groups.find(s);
            g.push_back(it != groups.end() ? it->second : std::vector<double>{});
        }
        try {
            return format_sig6(kruskal_wallis(g).p);
        } catch (const StatError&) {
            return "NA";
        }
    };

    out << "characteristic";
    for (const auto& s : sites) out << '\t' << s;
    out << "\ttotal\tkw_p\n";

    // participants and record counts
    {
        std::map<std::string, int> n_part, n_rec;
        for (const auto& [pid, p] : participants) ++n_part[p.site];
        for (const auto& r : table.rows) ++n_rec[r.site];
        out << "participants_n"
            << site_col([&](const std::string& s) { return std::to_string(n_part[s]); }) << '\t'
            << participants.size() << "\tNA\n";
        out << "phq8_records_n"
            << site_col([&](const std::string& s) { return std::to_string(n_rec[s]); }) << '\t'
            << table.rows.size() << "\tNA\n";
    }

    // PHQ-8 score distribution (record level)
    {
        auto q = [&](const std::string& site, double p) {
            auto v = site == "total" ? phq8_all : phq8_by_site[site];
            std::sort(v.begin(), v.end());
            return v.empty() ? std::string("NA") : format_sig6(quantile_sorted(v, p));
        };
        out << "phq8_median" << site_col([&](const std::string& s) { return q(s, 0.5); }) << '\t'
            << q("total", 0.5) << '\t' << kw_p(phq8_by_site) << '\n';
        out << "phq8_q1" << site_col([&](const std::string& s) { return q(s, 0.25); }) << '\t'
            << q("total", 0.25) << "\tNA\n";
        out << "phq8_q3" << site_col([&](const std::string& s) { return q(s, 0.75); }) << '\t'
            << q("total", 0.75) << "\tNA\n";

        std::map<std::string, std::vector<double>> ge10;
        double total_ge10 = 0.0;
        for (const auto& [site, v] : phq8_by_site) {
            for (double s : v) ge10[site].push_back(s >= 10.0 ? 1.0 : 0.0);
        }
        for (double s : phq8_all) total_ge10 += s >= 10.0 ? 1.0 : 0.0;
        auto pct = [&](const std::string& s) {
            const auto& v = ge10[s];
            if (v.empty()) return std::string("NA");
            double sum = 0.0;
            for (double b : v) sum += b;
            return format_sig6(100.0 * sum / static_cast<double>(v.size()));
        };
        out << "phq8_ge10_pct" << site_col(pct) << '\t'
            << (phq8_all.empty()
                    ? "NA"
                    : format_sig6(100.0 * total_ge10 / static_cast<double>(phq8_all.size())))
            << '\t' << kw_p(ge10) << '\n';
    }

    // age (participant level)
    {
        std::map<std::string, std::vector<double>> age_by_site;
        std::vector<double> age_all;
        for (const auto& [pid, p] : participants) {
            if (p.age) {
                age_by_site[p.site].push_back(*p.age);
                age_all.push_back(*p.age);
            }
        }
        auto q = [&](const std::string& site, double pr) {
            auto v = site == "total" ? age_all : age_by_site[site];
            std::sort(v.begin(), v.end());
            return v.empty() ? std::string("NA") : format_sig6(quantile_sorted(v, pr));
        };
        out << "age_median" << site_col([&](const std::string& s) { return q(s, 0.5); }) << '\t'
            << q("total", 0.5) << '\t' << kw_p(age_by_site) << '\n';
        out << "age_q1" << site_col([&](const std::string& s) { return q(s, 0.25); }) << '\t'
            << q("total", 0.25) << "\tNA\n";
        out << "age_q3" << site_col([&](const std::string& s) { return q(s, 0.75); }) << '\t'
            << q("total", 0.75) << "\tNA\n";
    }

    // categorical blocks: percent of participants per level, with an
    // indicator Kruskal-Wallis per level
    auto categorical_block = [&](const std::string& label, auto&& level_of,
                                 const std::vector<std::string>& levels) {
        for (const auto& level : levels) {
            std::map<std::string, std::vector<double>> ind_by_site;
            double total_n = 0.0, total_hit = 0.0;
            for (const auto& [pid, p] : participants) {
                const double hit = level_of(p) == level ? 1.0 : 0.0;
                ind_by_site[p.site].push_back(hit);
                total_n += 1.0;
                total_hit += hit;
            }
            auto pct = [&](const std::string& s) {
                const auto& v = ind_by_site[s];
                if (v.empty()) return std::string("NA");
                double sum = 0.0;
                for (double b : v) sum += b;
                return format_sig6(100.0 * sum / static_cast<double>(v.size()));
            };
            out << label << ':' << level << "_pct" << site_col(pct) << '\t'
                << (total_n > 0.0 ? format_sig6(100.0 * total_hit / total_n) : "NA") << '\t'
                << kw_p(ind_by_site) << '\n';
        }
    };

    std::vector<std::string> gender_levels;
    for (const auto& [pid, p] : participants) {
        if (std::find(gender_levels.begin(), gender_levels.end(), p.gender) ==
            gender_levels.end()) {
            gender_levels.push_back(p.gender);
        }
    }
    categorical_block("gender", [](const Participant& p) { return p.gender; }, gender_levels);
    categorical_block("education", [](const Participant& p) { return p.education; },
                      {std::string(kEducationLevels[0]), std::string(kEducationLevels[1])});
    categorical_block("income", [](const Participant& p) { return p.income; },
                      {std::string(kIncomeLevels[0]), std::string(kIncomeLevels[1]),
                       std::string(kIncomeLevels[2]), std::string(kIncomeLevels[3])});
}

void write_filtering_report_tsv(const InclusionReport& report, std::size_t no_profile,
                                const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    write_header(out, cfg);
    out << "stage\trows\n";
    out << "input_rows\t" << report.input_rows << '\n';
    out << "skipped_no_demographics\t" << no_profile << '\n';
    out << "dropped_criterion1_incomplete_phq8\t" << report.dropped_incomplete << '\n';
    out << "dropped_criterion2_fewer_than_" << report.min_days << "_nights\t"
        << report.dropped_insufficient_nights << '\n';
    out << "dropped_criterion3_fewer_than_" << report.min_records << "_records\t"
        << report.dropped_participant_min_records << '\n';
    out << "kept_rows\t" << report.kept_rows << '\n';
    out << "kept_participants\t" << report.kept_participants << '\n';
}

void write_figure_data(const AnalysisTable& table, const std::string& out_dir,
                       const RunConfig& cfg) {
    // PHQ-8 histograms per site and pooled
    {
        std::ofstream out(out_dir + "/phq8_histogram.csv");
        if (!out) throw InputError("cannot write: " + out_dir + "/phq8_histogram.csv");
        write_header(out, cfg);
        out << "site,score,count\n";
        std::vector<std::string> scopes = table.site_order();
        scopes.emplace_back("Total");
        for (const auto& scope : scopes) {
            std::array<int, 25> bins{};
            for (const auto& r : table.rows) {
                if (scope != "Total" && r.site != scope) continue;
                if (r.phq8_total && *r.phq8_total >= 0 && *r.phq8_total <= 24) {
                    ++bins[*r.phq8_total];
                }
            }
            for (int s = 0; s <= 24; ++s) {
                out << scope << ',' << s << ',' << bins[s] << '\n';
            }
        }
    }

    // pairwise Spearman correlations between the features
    {
        std::ofstream out(out_dir + "/feature_correlations.csv");
        if (!out) throw InputError("cannot write: " + out_dir + "/feature_correlations.csv");
        write_header(out, cfg);
        out << "feature_a,feature_b,spearman_r,n\n";
        for (int a = 0; a < kFeatureCount; ++a) {
            for (int b = 0; b < kFeatureCount; ++b) {
                std::vector<double> x, y;
                for (const auto& r : table.rows) {
                    if (r.features[a] && r.features[b]) {
                        x.push_back(*r.features[a]);
                        y.push_back(*r.features[b]);
                    }
                }
                out << kFeatureNames[a] << ',' << kFeatureNames[b] << ',';
                if (a == b) {
                    out << 1 << ',' << x.size() << '\n';
                    continue;
                }
                try {
                    const CorrResult c = spearman(x, y);
                    out << format_sig6(c.r) << ',' << c.n << '\n';
                } catch (const StatError&) {
                    out << "NA," << x.size() << '\n';
                }
            }
        }
    }

    // per-participant trajectories, long format
    {
        std::ofstream out(out_dir + "/trajectories.csv");
        if (!out) throw InputError("cannot write: " + out_dir + "/trajectories.csv");
        write_header(out, cfg);
        out << "participant_id,completed_at_utc,phq8_total,feature,value\n";
        for (const auto& r : table.rows) {
            for (int f = 0; f < kFeatureCount; ++f) {
                if (!r.features[f]) continue;
                out << r.participant_id << ',' << format_iso_utc(r.completed_at_s) << ',';
                if (r.phq8_total) out << *r.phq8_total;
                out << ',' << kFeatureNames[f] << ',' << format_sig6(*r.features[f]) << '\n';
            }
        }
    }
}

}  // namespace sleepassoc
