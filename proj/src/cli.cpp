#include "sleepassoc/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sleepassoc/errors.hpp"
#include "sleepassoc/reports.hpp"
#include "sleepassoc/synth.hpp"

namespace sleepassoc {

namespace {

namespace fs = std::filesystem;

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory: " + dir);
}

int cmd_extract(const RunConfig& cfg) {
    if (cfg.episodes.empty() || cfg.phq8.empty() || cfg.demographics.empty()) {
        throw ConfigError("extract needs episodes, phq8 and demographics paths");
    }
    ensure_out_dir(cfg.out_dir);

    const IngestResult ingest = ingest_cohort(cfg.episodes, cfg.phq8, cfg.demographics);
    for (const auto& d : ingest.diagnostics) {
        std::cerr << d.file << ':' << d.line << ": " << d.message << '\n';
    }

    std::size_t no_profile = 0;
    const AnalysisTable all_rows =
        build_analysis_rows(ingest.dataset, cfg.window_days, {}, &no_profile);
    auto [table, report] = apply_inclusion(all_rows, cfg.min_days, cfg.min_records);
    report.window_days = cfg.window_days;

    write_analysis_csv(table, cfg.out_dir + "/analysis_table.csv", config_header_lines(cfg));
    write_filtering_report_tsv(report, no_profile, cfg.out_dir + "/filtering_report.tsv", cfg);

    std::cout << "extract: kept " << report.kept_rows << " rows from " << report.input_rows
              << " (" << report.kept_participants << " participants)\n";
    return 0;
}

int cmd_analyze(const RunConfig& cfg) {
    if (cfg.table.empty()) throw ConfigError("analyze needs a table path");
    ensure_out_dir(cfg.out_dir);

    const AnalysisTable table = read_analysis_csv(cfg.table);
    const BoxCoxSpec box_cox = box_cox_from_string(cfg.box_cox);

    write_cohort_summary_tsv(table, cfg.out_dir + "/cohort_summary.tsv", cfg);
    write_correlation_tsv(correlation_report(table), cfg.out_dir + "/correlation_report.tsv",
                          cfg);

    std::vector<Predictor> predictors;
    if (cfg.predictor == "phq8" || cfg.predictor == "both") {
        predictors.push_back(Predictor::Phq8Total);
    }
    if (cfg.predictor == "subscore" || cfg.predictor == "both") {
        predictors.push_back(Predictor::SleepSubscore);
    }

    for (Predictor pred : predictors) {
        const std::string tag = pred == Predictor::Phq8Total ? "phq8" : "subscore";
        const AssociationReport pooled =
            association_sweep(table, pred, Grouping::ThreeLevelSiteParticipant, box_cox,
                              cfg.bh_level);
        write_association_tsv(pooled, cfg.out_dir + "/assoc_pooled_" + tag + ".tsv", cfg);
        for (const auto& w : pooled.warnings) std::cerr << "warning: " << w << '\n';

        if (cfg.per_site) {
            for (const auto& site : table.site_order()) {
                const AssociationReport per_site =
                    association_sweep(table, pred, Grouping::TwoLevelParticipant, box_cox,
                                      cfg.bh_level, site);
                write_association_tsv(per_site,
                                      cfg.out_dir + "/assoc_" + site + "_" + tag + ".tsv", cfg);
            }
        }
    }

    std::cout << "analyze: reports written to " << cfg.out_dir << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& cfg, bool seed_given) {
    ensure_out_dir(cfg.out_dir);
    SynthConfig synth;
    if (!cfg.synth_config.empty()) {
        std::ifstream in(cfg.synth_config);
        if (!in) throw InputError("cannot open synth config: " + cfg.synth_config);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        synth = parse_synth_config_json(text);
    }
    if (seed_given || cfg.synth_config.empty()) synth.seed = cfg.seed;

    const RawCohort cohort = simulate_cohort(synth);
    write_cohort_files(cohort, cfg.out_dir + "/episodes.csv", cfg.out_dir + "/phq8.csv",
                       cfg.out_dir + "/demographics.csv", cfg.out_dir + "/ground_truth.json");
    std::cout << "simulate: cohort written to " << cfg.out_dir << '\n';
    return 0;
}

int cmd_report(const RunConfig& cfg) {
    if (cfg.table.empty()) throw ConfigError("report needs a table path");
    ensure_out_dir(cfg.out_dir);
    const AnalysisTable table = read_analysis_csv(cfg.table);
    write_figure_data(table, cfg.out_dir, cfg);
    std::cout << "report: figure data written to " << cfg.out_dir << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"sleep feature extraction and depression-severity association pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    RunConfig flags;  // flag values overlay the config file
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value run config file");
        sub->add_option("--out-dir", flags.out_dir, "output directory")->capture_default_str();
        return sub;
    };

    CLI::App* extract = add_common(app.add_subcommand(
        "extract", "ingest cohort files, build the windowed analysis table"));
    extract->add_option("--episodes", flags.episodes, "episodes CSV");
    extract->add_option("--phq8", flags.phq8, "PHQ-8 CSV");
    extract->add_option("--demographics", flags.demographics, "demographics CSV");
    extract->add_option("--window-days", flags.window_days, "feature window size")
        ->capture_default_str();
    extract->add_option("--min-days", flags.min_days, "inclusion: min nights per window")
        ->capture_default_str();
    extract->add_option("--min-records", flags.min_records,
                        "inclusion: min records per participant")
        ->capture_default_str();

    CLI::App* analyze = add_common(app.add_subcommand(
        "analyze", "fit the mixed models and emit the association reports"));
    analyze->add_option("--table", flags.table, "analysis table CSV");
    analyze->add_option("--predictor", flags.predictor, "phq8 | subscore | both")
        ->capture_default_str();
    analyze->add_flag("--per-site,!--pooled-only", flags.per_site,
                      "also run the per-site two-level sweeps");
    analyze->add_option("--bh-level", flags.bh_level, "BH significance level")
        ->capture_default_str();
    analyze->add_option("--box-cox", flags.box_cox, "off | auto | fixed:<lambda>")
        ->capture_default_str();

    CLI::App* simulate = add_common(app.add_subcommand(
        "simulate", "generate a synthetic cohort with known ground truth"));
    simulate->add_option("--synth-config", flags.synth_config, "synthesis config JSON");
    simulate->add_option("--seed", flags.seed, "generator seed")
        ->capture_default_str()
        ->each([&](const std::string&) { seed_given = true; });

    CLI::App* report = add_common(app.add_subcommand(
        "report", "emit plot-ready figure data from an analysis table"));
    report->add_option("--table", flags.table, "analysis table CSV");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        // explicit flags win over the config file
        auto overlay = [&](CLI::App* sub) {
            const RunConfig defaults;
            if (sub->count("--out-dir")) cfg.out_dir = flags.out_dir;
            if (sub->count("--episodes")) cfg.episodes = flags.episodes;
            if (sub->count("--phq8")) cfg.phq8 = flags.phq8;
            if (sub->count("--demographics")) cfg.demographics = flags.demographics;
            if (sub->count("--table")) cfg.table = flags.table;
            if (sub->count("--window-days")) cfg.window_days = flags.window_days;
            if (sub->count("--min-days")) cfg.min_days = flags.min_days;
            if (sub->count("--min-records")) cfg.min_records = flags.min_records;
            if (sub->count("--predictor")) cfg.predictor = flags.predictor;
            if (sub->count("--per-site") || sub->count("--pooled-only")) {
                cfg.per_site = flags.per_site;
            }
            if (sub->count("--bh-level")) cfg.bh_level = flags.bh_level;
            if (sub->count("--box-cox")) cfg.box_cox = flags.box_cox;
            if (sub->count("--seed")) cfg.seed = flags.seed;
            if (sub->count("--synth-config")) cfg.synth_config = flags.synth_config;
            if (config_path.empty() && !sub->count("--out-dir")) cfg.out_dir = defaults.out_dir;
        };

        if (app.got_subcommand(extract)) {
            overlay(extract);
            return cmd_extract(cfg);
        }
        if (app.got_subcommand(analyze)) {
            overlay(analyze);
            return cmd_analyze(cfg);
        }
        if (app.got_subcommand(simulate)) {
            overlay(simulate);
            return cmd_simulate(cfg, seed_given);
        }
        if (app.got_subcommand(report)) {
            overlay(report);
            return cmd_report(cfg);
        }
        return 1;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const StatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 5;
    }
}

}  // namespace sleepassoc
