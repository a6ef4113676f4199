#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sleepassoc/lmm.hpp"

namespace sleepassoc {

struct AssociationRow {
    Feat feature = Feat::SleepDur;
    std::optional<double> coeff;  // slope of the predictor of interest
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
    std::optional<double> z;
    std::optional<double> p;
    std::optional<double> p_bh;
    bool significant = false;
    int n_rows = 0;
    int n_participants = 0;
    std::optional<double> lambda;  // Box-Cox exponent when applied
    std::string status = "ok";
};

struct AssociationReport {
    Predictor predictor = Predictor::Phq8Total;
    Grouping grouping = Grouping::ThreeLevelSiteParticipant;
    std::optional<std::string> site;  // set for per-site sweeps
    double bh_level = 0.05;
    std::string status = "ok";             // e.g. explains an empty report
    std::vector<AssociationRow> rows;      // one per feature, catalogue order
    std::vector<std::string> warnings;     // e.g. grouping downgrades
};

// Fits one mixed model per feature (feature as response, chosen predictor,
// full covariate adjustment), then BH-adjusts the predictor p-values across
// the sweep. The BH family is the features of this sweep that produced a fit.
// Per-feature failures land in the row status; the sweep itself never throws
// for them. A three-level request on a single-site table downgrades to
// two-level with a warning.
AssociationReport association_sweep(const AnalysisTable& table, Predictor predictor,
                                    Grouping grouping, const BoxCoxSpec& box_cox = {},
                                    double bh_level = 0.05,
                                    const std::optional<std::string>& site_filter = {});

}  // namespace sleepassoc
