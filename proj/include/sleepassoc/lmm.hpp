#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sleepassoc/inclusion.hpp"

namespace sleepassoc {

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

enum class Predictor { Phq8Total, SleepSubscore };
enum class Grouping { TwoLevelParticipant, ThreeLevelSiteParticipant };
enum class Covariate { Age, Gender, Education, Income };

struct BoxCoxSpec {
    enum class Mode { Off, Auto, Fixed };
    Mode mode = Mode::Off;
    double fixed_lambda = 1.0;
    // Auto mode transforms the response when the OLS residual skewness
    // exceeds this magnitude, standing in for a visual normality check.
    double skew_threshold = 1.0;
};

struct ModelSpec {
    Feat response = Feat::SleepDur;
    Predictor predictor = Predictor::Phq8Total;
    std::vector<Covariate> covariates = {Covariate::Age, Covariate::Gender, Covariate::Education,
                                         Covariate::Income};
    Grouping grouping = Grouping::ThreeLevelSiteParticipant;
    BoxCoxSpec box_cox;

    // Freeze the variance ratios (sigma2_participant/sigma2_residual,
    // sigma2_site/sigma2_residual) instead of optimizing; oracle/testing knob.
    std::optional<std::pair<double, double>> fixed_theta;

    // profiled-REML search settings
    double theta_lo = 1e-10;
    double theta_hi = 1e6;
    double rel_tol = 1e-10;
    int max_sweeps = 100;
};

// ---------------------------------------------------------------------------
// Fit result
// ---------------------------------------------------------------------------

struct ModelFit {
    std::vector<std::string> column_names;  // "(intercept)", predictor, covariate dummies
    int predictor_index = 1;                // column of the coefficient of interest
    std::vector<double> beta;
    std::vector<double> se;
    std::vector<double> z;      // beta / se
    std::vector<double> p;      // two-sided normal
    std::vector<double> ci_lo;  // beta -/+ 1.96 * se
    std::vector<double> ci_hi;

    std::optional<double> sigma2_site;  // three-level grouping only
    double sigma2_participant = 0.0;
    double sigma2_residual = 0.0;

    std::optional<double> lambda;  // Box-Cox exponent when a transform was applied
    double boxcox_shift = 0.0;

    double reml_loglik = 0.0;
    int n_rows = 0;
    int n_participants = 0;
    int n_sites = 0;
    int n_dropped_rows = 0;  // listwise deletions
    bool converged = true;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Problem handle
// ---------------------------------------------------------------------------

// The assembled regression problem: design matrix, grouping structure and the
// per-group sufficient statistics that make one REML criterion evaluation
// O(groups x p^2). Exposed so tests can probe the criterion surface directly.
class LmmProblem {
  public:
    static LmmProblem build(const AnalysisTable& table, const ModelSpec& spec);

    // profiled REML criterion (lower is better) at the given variance ratios
    double criterion(double theta_participant, double theta_site = 0.0) const;

    // skewness of the plain OLS residuals; drives the Box-Cox auto gate
    double ols_residual_skewness() const;

    ModelFit fit() const;

    int n_rows() const;
    int n_participants() const;
    int n_sites() const;

    struct Impl;

  private:
    std::shared_ptr<const Impl> impl_;
};

// Listwise-deletes rows with an absent response/predictor/covariate, builds
// the dummy-coded design, optimizes the variance ratios by bounded
// derivative-free search, and reports Wald z inference on the GLS solution.
// Throws StatError on rank deficiency (naming the collinear columns) or when
// no usable rows remain.
ModelFit fit_lmm(const AnalysisTable& table, const ModelSpec& spec);

}  // namespace sleepassoc
