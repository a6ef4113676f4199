#include "sleepassoc/sweep.hpp"

#include <algorithm>

#include "sleepassoc/errors.hpp"
#include "sleepassoc/stats.hpp"

namespace sleepassoc {

AssociationReport association_sweep(const AnalysisTable& table, Predictor predictor,
                                    Grouping grouping, const BoxCoxSpec& box_cox, double bh_level,
                                    const std::optional<std::string>& site_filter) {
    AssociationReport report;
    report.predictor = predictor;
    report.site = site_filter;
    report.bh_level = bh_level;

    AnalysisTable scoped;
    if (site_filter) {
        for (const auto& row : table.rows) {
            if (row.site == *site_filter) scoped.rows.push_back(row);
        }
    } else {
        scoped = table;
    }

    if (scoped.rows.empty()) {
        report.grouping = grouping;
        report.status = site_filter ? "no rows for site '" + *site_filter + "'"
                                    : "no rows in analysis table";
        return report;
    }

    const auto sites = scoped.site_order();
    if (grouping == Grouping::ThreeLevelSiteParticipant && sites.size() < 2) {
        report.warnings.push_back(
            "single site in scope; three-level grouping downgraded to two-level");
        grouping = Grouping::TwoLevelParticipant;
    }
    report.grouping = grouping;

    for (int f = 0; f < kFeatureCount; ++f) {
        AssociationRow row;
        row.feature = static_cast<Feat>(f);
        ModelSpec spec;
        spec.response = row.feature;
        spec.predictor = predictor;
        spec.grouping = grouping;
        spec.box_cox = box_cox;
        try {
            const ModelFit fit = fit_lmm(scoped, spec);
            const int b1 = fit.predictor_index;
            row.coeff = fit.beta[b1];
            row.ci_lo = fit.ci_lo[b1];
            row.ci_hi = fit.ci_hi[b1];
            row.z = fit.z[b1];
            row.p = fit.p[b1];
            row.n_rows = fit.n_rows;
            row.n_participants = fit.n_participants;
            row.lambda = fit.lambda;
            if (!fit.converged) row.status = "fit did not converge";
            for (const auto& w : fit.warnings) report.warnings.push_back(
                std::string(feature_name(row.feature)) + ": " + w);
        } catch (const StatError& e) {
            row.status = e.what();
        }
        report.rows.push_back(std::move(row));
    }

    // BH family: the features of this sweep with a fitted p-value
    std::vector<double> raw;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        if (report.rows[i].p) {
            raw.push_back(*report.rows[i].p);
            which.push_back(i);
        }
    }
    if (!raw.empty()) {
        const std::vector<double> adj = bh_adjust(raw);
        for (std::size_t i = 0; i < which.size(); ++i) {
            report.rows[which[i]].p_bh = adj[i];
            report.rows[which[i]].significant = adj[i] <= bh_level;
        }
    }

    // de-duplicate repeated warnings (each feature fit repeats the same
    // grouping warnings)
    std::sort(report.warnings.begin(), report.warnings.end());
    report.warnings.erase(std::unique(report.warnings.begin(), report.warnings.end()),
                          report.warnings.end());
    return report;
}

}  // namespace sleepassoc
