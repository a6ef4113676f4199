#include "sleepassoc/lmm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sleepassoc/dists.hpp"
#include "sleepassoc/errors.hpp"
#include "sleepassoc/kernels.hpp"
#include "sleepassoc/stats.hpp"

namespace sleepassoc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string_view predictor_name(Predictor p) {
    return p == Predictor::Phq8Total ? "phq8_total" : "sleep_subscore";
}

}  // namespace

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

struct LmmProblem::Impl {
    ModelSpec spec;
    std::vector<std::string> column_names;
    int predictor_index = 1;
    int n = 0;
    int p = 0;
    int n_participants = 0;
    int n_sites = 0;
    bool three_level = false;
    int n_dropped = 0;
    bool pin_participant = false;
    bool pin_site = false;
    std::vector<std::string> warnings;

    Eigen::MatrixXd X;  // n x p, rows grouped by (site, participant)
    Eigen::VectorXd y;  // n

    std::vector<int> part_start;  // row offset per participant, size J+1
    std::vector<int> part_site;   // participant -> site index
    Eigen::VectorXd rows_per_participant;  // n_j
    Eigen::VectorXd rows_per_site;         // N_k

    // sufficient statistics over D = [X y]
    Eigen::MatrixXd cross;      // (p+1) x (p+1) = D'D
    Eigen::MatrixXd part_sums;  // J x (p+1), column sums per participant
    Eigen::MatrixXd site_sums;  // K x (p+1)

    void compute_stats();

    struct Eval {
        Eigen::MatrixXd xtwix;
        Eigen::VectorXd xtwiy;
        double ytwiy = 0.0;
        double logdet_w = 0.0;
    };
    Eval evaluate(double th1, double th2) const;
    double criterion(double th1, double th2) const;
    ModelFit finish(double th1, double th2, bool converged) const;
    double ols_residual_skewness() const;
};

void LmmProblem::Impl::compute_stats() {
    const int m = p + 1;
    Eigen::MatrixXd d(n, m);
    d.leftCols(p) = X;
    d.col(p) = y;

    cross.resize(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = a; b < m; ++b) {
            const double v = kernels::dot({d.col(a).data(), static_cast<std::size_t>(n)},
                                          {d.col(b).data(), static_cast<std::size_t>(n)});
            cross(a, b) = v;
            cross(b, a) = v;
        }
    }

    const int j_count = n_participants;
    part_sums.resize(j_count, m);
    for (int j = 0; j < j_count; ++j) {
        const int lo = part_start[j];
        const int len = part_start[j + 1] - lo;
        for (int c = 0; c < m; ++c) {
            part_sums(j, c) =
                kernels::sum({d.col(c).data() + lo, static_cast<std::size_t>(len)});
        }
    }

    site_sums = Eigen::MatrixXd::Zero(n_sites, m);
    rows_per_site = Eigen::VectorXd::Zero(n_sites);
    for (int j = 0; j < j_count; ++j) {
        site_sums.row(part_site[j]) += part_sums.row(j);
        rows_per_site(part_site[j]) += rows_per_participant(j);
    }
}

LmmProblem::Impl::Eval LmmProblem::Impl::evaluate(double th1, double th2) const {
    const int m = p + 1;
    Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(m, m);
    double logdet_w = 0.0;

    const bool use_part = th1 > 0.0;
    const bool use_site = three_level && th2 > 0.0;

    Eigen::VectorXd a_diag;  // 1 + th1 * n_j
    if (use_part || use_site) {
        a_diag = (1.0 + th1 * rows_per_participant.array()).matrix();
    }

    if (use_part || use_site) {
        for (int j = 0; j < n_participants; ++j) logdet_w += std::log(a_diag(j));

        // u/w solve of the (participant, site) Woodbury core, done on all
        // RHS columns of [X y] at once
        Eigen::MatrixXd a_tilde = std::sqrt(th1) * part_sums;  // J x m
        Eigen::MatrixXd u;                                     // J x m

        if (use_site) {
            Eigen::VectorXd s_diag(n_sites);
            Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n_sites, m);
            Eigen::VectorXd nn_over_a = Eigen::VectorXd::Zero(n_sites);
            for (int j = 0; j < n_participants; ++j) {
                const double nj = rows_per_participant(j);
                const double w = nj / a_diag(j);
                e.row(part_site[j]) += w * part_sums.row(j);
                nn_over_a(part_site[j]) += nj * nj / a_diag(j);
            }
            e *= th1 * std::sqrt(th2);
            for (int k = 0; k < n_sites; ++k) {
                s_diag(k) = 1.0 + th2 * rows_per_site(k) - th1 * th2 * nn_over_a(k);
                logdet_w += std::log(s_diag(k));
            }
            Eigen::MatrixXd b_tilde = std::sqrt(th2) * site_sums;  // K x m
            Eigen::MatrixXd w_mat(n_sites, m);
            for (int k = 0; k < n_sites; ++k) {
                w_mat.row(k) = (b_tilde.row(k) - e.row(k)) / s_diag(k);
            }
            u.resize(n_participants, m);
            const double b_scale = std::sqrt(th1 * th2);
            for (int j = 0; j < n_participants; ++j) {
                u.row(j) = (a_tilde.row(j) -
                            b_scale * rows_per_participant(j) * w_mat.row(part_site[j])) /
                           a_diag(j);
            }
            corr = a_tilde.transpose() * u + b_tilde.transpose() * w_mat;
        } else {
            u.resize(n_participants, m);
            for (int j = 0; j < n_participants; ++j) {
                u.row(j) = a_tilde.row(j) / a_diag(j);
            }
            corr = a_tilde.transpose() * u;
        }
    }

    Eval ev;
    ev.xtwix = cross.topLeftCorner(p, p) - corr.topLeftCorner(p, p);
    ev.xtwiy = cross.topRightCorner(p, 1) - corr.topRightCorner(p, 1);
    ev.ytwiy = cross(p, p) - corr(p, p);
    ev.logdet_w = logdet_w;
    return ev;
}

double LmmProblem::Impl::criterion(double th1, double th2) const {
    const Eval ev = evaluate(th1, th2);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.xtwix);
    if (ldlt.info() != Eigen::Success) return kInf;
    double logdet_x = 0.0;
    for (int i = 0; i < p; ++i) {
        const double d = ldlt.vectorD()(i);
        if (d <= 0.0) return kInf;
        logdet_x += std::log(d);
    }
    const Eigen::VectorXd beta = ldlt.solve(ev.xtwiy);
    const double rss = ev.ytwiy - beta.dot(ev.xtwiy);
    if (!(rss > 0.0)) return kInf;
    return ev.logdet_w + logdet_x + static_cast<double>(n - p) * std::log(rss);
}

ModelFit LmmProblem::Impl::finish(double th1, double th2, bool converged) const {
    const Eval ev = evaluate(th1, th2);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.xtwix);
    const Eigen::VectorXd beta = ldlt.solve(ev.xtwiy);
    const double rss = std::max(ev.ytwiy - beta.dot(ev.xtwiy), 0.0);
    const double dof = static_cast<double>(n - p);
    const double sigma2 = rss / dof;

    const Eigen::MatrixXd cov = sigma2 * ldlt.solve(Eigen::MatrixXd::Identity(p, p));

    double logdet_x = 0.0;
    for (int i = 0; i < p; ++i) logdet_x += std::log(ldlt.vectorD()(i));

    ModelFit fit;
    fit.column_names = column_names;
    fit.predictor_index = predictor_index;
    fit.beta.resize(p);
    fit.se.resize(p);
    fit.z.resize(p);
    fit.p.resize(p);
    fit.ci_lo.resize(p);
    fit.ci_hi.resize(p);
    for (int i = 0; i < p; ++i) {
        fit.beta[i] = beta(i);
        fit.se[i] = std::sqrt(std::max(cov(i, i), 0.0));
        fit.z[i] = fit.beta[i] / fit.se[i];
        fit.p[i] = two_sided_p_from_z(fit.z[i]);
        fit.ci_lo[i] = fit.beta[i] - 1.96 * fit.se[i];
        fit.ci_hi[i] = fit.beta[i] + 1.96 * fit.se[i];
    }
    fit.sigma2_residual = sigma2;
    fit.sigma2_participant = th1 * sigma2;
    if (three_level) fit.sigma2_site = th2 * sigma2;
    fit.reml_loglik = -0.5 * (dof * std::log(2.0 * M_PI * sigma2) + dof + ev.logdet_w + logdet_x);
    fit.n_rows = n;
    fit.n_participants = n_participants;
    fit.n_sites = n_sites;
    fit.n_dropped_rows = n_dropped;
    fit.converged = converged;
    fit.warnings = warnings;
    return fit;
}

double LmmProblem::Impl::ols_residual_skewness() const {
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd resid = y - X * beta;
    return skewness({resid.data(), static_cast<std::size_t>(resid.size())});
}

LmmProblem LmmProblem::build(const AnalysisTable& table, const ModelSpec& spec) {
    auto impl = std::make_shared<Impl>();
    impl->spec = spec;
    impl->three_level = spec.grouping == Grouping::ThreeLevelSiteParticipant;

    const int feat_idx = static_cast<int>(spec.response);

    struct KeptRow {
        const AnalysisRow* row;
        double response;
        double predictor;
    };
    std::vector<KeptRow> kept;
    const bool use_age =
        std::find(spec.covariates.begin(), spec.covariates.end(), Covariate::Age) !=
        spec.covariates.end();
    for (const auto& row : table.rows) {
        const auto& resp = row.features[feat_idx];
        std::optional<double> pred;
        if (spec.predictor == Predictor::Phq8Total) {
            if (row.phq8_total) pred = static_cast<double>(*row.phq8_total);
        } else {
            if (row.sleep_subscore) pred = static_cast<double>(*row.sleep_subscore);
        }
        if (!resp || !pred || (use_age && !row.age)) {
            ++impl->n_dropped;
            continue;
        }
        kept.push_back({&row, *resp, *pred});
    }
    if (kept.empty()) throw StatError("fit_lmm: no usable rows for " +
                                      std::string(feature_name(spec.response)));

    // group indices in first-encounter order
    std::map<std::string, int> site_idx, part_idx;
    std::vector<int> row_site(kept.size()), row_part(kept.size());
    std::vector<int> participant_site;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& r = *kept[i].row;
        auto [sit, s_new] = site_idx.try_emplace(r.site, static_cast<int>(site_idx.size()));
        row_site[i] = sit->second;
        auto [pit, p_new] = part_idx.try_emplace(r.participant_id,
                                                 static_cast<int>(part_idx.size()));
        row_part[i] = pit->second;
        if (p_new) participant_site.push_back(row_site[i]);
    }
    impl->n_sites = static_cast<int>(site_idx.size());
    impl->n_participants = static_cast<int>(part_idx.size());

    // order rows so each participant is a contiguous block and participants
    // are grouped by site
    std::vector<std::size_t> order(kept.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (row_site[a] != row_site[b]) return row_site[a] < row_site[b];
        return row_part[a] < row_part[b];
    });

    // dummy-coded design; factor levels that never occur get no column
    std::vector<std::string> gender_levels;
    bool edu_has_ref = false, edu_has_other = false;
    std::array<bool, 4> income_present{};  // indexes into kIncomeLevels
    for (const auto& k : kept) {
        const auto& r = *k.row;
        if (std::find(gender_levels.begin(), gender_levels.end(), r.gender) ==
            gender_levels.end()) {
            gender_levels.push_back(r.gender);
        }
        if (r.education == "below-degree") edu_has_ref = true;
        if (r.education == "degree-or-above") edu_has_other = true;
        for (std::size_t i = 0; i < kIncomeLevels.size(); ++i) {
            if (r.income == kIncomeLevels[i]) income_present[i] = true;
        }
    }

    std::vector<std::string> names = {"(intercept)", std::string(predictor_name(spec.predictor))};
    impl->predictor_index = 1;

    struct DummyCol {
        Covariate kind;
        std::string level;
    };
    std::vector<DummyCol> dummies;
    for (Covariate c : spec.covariates) {
        switch (c) {
            case Covariate::Age:
                names.emplace_back("age");
                dummies.push_back({Covariate::Age, ""});
                break;
            case Covariate::Gender:
                for (std::size_t g = 1; g < gender_levels.size(); ++g) {
                    names.push_back("gender:" + gender_levels[g]);
                    dummies.push_back({Covariate::Gender, gender_levels[g]});
                }
                break;
            case Covariate::Education:
                if (edu_has_ref && edu_has_other) {
                    names.emplace_back("education:degree-or-above");
                    dummies.push_back({Covariate::Education, "degree-or-above"});
                }
                break;
            case Covariate::Income: {
                // reference: first occurring level in the declared order
                int ref = -1;
                for (std::size_t i = 0; i < kIncomeLevels.size(); ++i) {
                    if (income_present[i]) {
                        ref = static_cast<int>(i);
                        break;
                    }
                }
                for (std::size_t i = 0; i < kIncomeLevels.size(); ++i) {
                    if (!income_present[i] || static_cast<int>(i) == ref) continue;
                    names.push_back("income:" + std::string(kIncomeLevels[i]));
                    dummies.push_back({Covariate::Income, std::string(kIncomeLevels[i])});
                }
                break;
            }
        }
    }

    const int n = static_cast<int>(kept.size());
    const int p = static_cast<int>(names.size());
    if (n <= p) {
        throw StatError("fit_lmm: too few rows (" + std::to_string(n) + ") for " +
                        std::to_string(p) + " coefficients");
    }

    impl->n = n;
    impl->p = p;
    impl->column_names = names;
    impl->X.resize(n, p);
    impl->y.resize(n);
    impl->part_start.clear();
    impl->rows_per_participant = Eigen::VectorXd::Zero(impl->n_participants);
    impl->part_site = participant_site;

    int prev_part = -1;
    for (int r = 0; r < n; ++r) {
        const KeptRow& k = kept[order[r]];
        const AnalysisRow& row = *k.row;
        impl->y(r) = k.response;
        impl->X(r, 0) = 1.0;
        impl->X(r, 1) = k.predictor;
        int c = 2;
        for (const auto& d : dummies) {
            double v = 0.0;
            switch (d.kind) {
                case Covariate::Age: v = *row.age; break;
                case Covariate::Gender: v = row.gender == d.level ? 1.0 : 0.0; break;
                case Covariate::Education: v = row.education == d.level ? 1.0 : 0.0; break;
                case Covariate::Income: v = row.income == d.level ? 1.0 : 0.0; break;
            }
            impl->X(r, c++) = v;
        }
        const int part = row_part[order[r]];
        impl->rows_per_participant(part) += 1.0;
        if (part != prev_part) {
            impl->part_start.push_back(r);
            prev_part = part;
        }
    }
    impl->part_start.push_back(n);

    // the sort above visits participants in (site, first-encounter) order;
    // remap per-participant arrays to that layout
    {
        std::vector<int> seen;
        for (int r = 0; r < n; ++r) {
            const int part = row_part[order[r]];
            if (seen.empty() || seen.back() != part) seen.push_back(part);
        }
        Eigen::VectorXd nj(impl->n_participants);
        std::vector<int> psite(impl->n_participants);
        for (int j = 0; j < impl->n_participants; ++j) {
            nj(j) = impl->rows_per_participant(seen[j]);
            psite[j] = participant_site[seen[j]];
        }
        impl->rows_per_participant = nj;
        impl->part_site = psite;
    }

    // rank check with column names in the error
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(impl->X);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) {
            const auto perm = qr.colsPermutation().indices();
            std::string cols;
            for (int i = qr.rank(); i < p; ++i) {
                if (!cols.empty()) cols += ", ";
                cols += names[perm(i)];
            }
            throw StatError("fit_lmm: rank-deficient design; collinear columns: " + cols);
        }
    }

    if (impl->n_participants < 2) {
        impl->pin_participant = true;
        impl->warnings.push_back(
            "participant grouping has a single unit; variance pinned to 0");
    }
    if (impl->three_level && impl->n_sites < 2) {
        impl->pin_site = true;
        impl->warnings.push_back("site grouping has a single unit; variance pinned to 0");
    }

    impl->compute_stats();

    LmmProblem prob;
    prob.impl_ = std::move(impl);
    return prob;
}

double LmmProblem::criterion(double theta_participant, double theta_site) const {
    return impl_->criterion(theta_participant, theta_site);
}

double LmmProblem::ols_residual_skewness() const { return impl_->ols_residual_skewness(); }

int LmmProblem::n_rows() const { return impl_->n; }
int LmmProblem::n_participants() const { return impl_->n_participants; }
int LmmProblem::n_sites() const { return impl_->n_sites; }

// ---------------------------------------------------------------------------
// Optimizer: per-coordinate coarse scan + golden section, then a compass
// polish. Deterministic probe sequence throughout.
// ---------------------------------------------------------------------------

namespace {

template <typename F>
std::pair<double, double> golden_min(F&& f, double lo, double hi) {
    constexpr double kPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kPhi * (b - a);
    double x2 = a + kPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 120 && (b - a) > 1e-10; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kPhi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 <= f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

}  // namespace

ModelFit LmmProblem::fit() const {
    const Impl& im = *impl_;
    const ModelSpec& spec = im.spec;

    double th1 = 0.0, th2 = 0.0;
    bool converged = true;

    if (spec.fixed_theta) {
        th1 = spec.fixed_theta->first;
        th2 = im.three_level ? spec.fixed_theta->second : 0.0;
    } else {
        std::vector<int> dims;  // 0 = participant ratio, 1 = site ratio
        if (!im.pin_participant) dims.push_back(0);
        if (im.three_level && !im.pin_site) dims.push_back(1);

        if (!dims.empty()) {
            const double t_lo = std::log(spec.theta_lo);
            const double t_hi = std::log(spec.theta_hi);
            std::array<double, 2> th{spec.theta_lo, im.three_level ? spec.theta_lo : 0.0};
            if (im.pin_participant) th[0] = 0.0;
            if (!im.three_level || im.pin_site) th[1] = 0.0;

            auto eval_at = [&](int dim, double t) {
                std::array<double, 2> probe = th;
                probe[dim] = std::exp(t);
                return im.criterion(probe[0], probe[1]);
            };

            double prev = im.criterion(th[0], th[1]);
            converged = false;
            for (int sweep = 0; sweep < spec.max_sweeps; ++sweep) {
                for (int dim : dims) {
                    // coarse scan to bracket, golden section to refine
                    constexpr int kScan = 17;
                    double best_t = t_lo, best_f = kInf;
                    for (int s = 0; s < kScan; ++s) {
                        const double t = t_lo + (t_hi - t_lo) * s / (kScan - 1);
                        const double f = eval_at(dim, t);
                        if (f < best_f) {
                            best_f = f;
                            best_t = t;
                        }
                    }
                    const double step = (t_hi - t_lo) / (kScan - 1);
                    const auto [t_min, f_min] =
                        golden_min([&](double t) { return eval_at(dim, t); },
                                   std::max(t_lo, best_t - step), std::min(t_hi, best_t + step));
                    th[dim] = std::exp(f_min <= best_f ? t_min : best_t);
                }
                const double cur = im.criterion(th[0], th[1]);
                if (prev - cur <= spec.rel_tol * (std::fabs(prev) + 1.0)) {
                    converged = true;
                    prev = cur;
                    break;
                }
                prev = cur;
            }

            // compass polish in log-space catches coordinate-descent stalls
            if (dims.size() > 1) {
                double radius = 0.25;
                double f_cur = prev;
                while (radius > 1e-9) {
                    bool moved = false;
                    for (int dim : dims) {
                        for (double dir : {+1.0, -1.0}) {
                            const double t =
                                std::clamp(std::log(th[dim]) + dir * radius, t_lo, t_hi);
                            std::array<double, 2> probe = th;
                            probe[dim] = std::exp(t);
                            const double f = im.criterion(probe[0], probe[1]);
                            if (f < f_cur) {
                                f_cur = f;
                                th = probe;
                                moved = true;
                            }
                        }
                    }
                    if (!moved) radius *= 0.5;
                }
            }
            th1 = th[0];
            th2 = th[1];
        }
    }

    ModelFit fit = im.finish(th1, th2, converged);
    if (!converged) fit.warnings.push_back("REML search hit the sweep cap without converging");
    return fit;
}

// ---------------------------------------------------------------------------
// fit_lmm: Box-Cox handling on top of the problem handle
// ---------------------------------------------------------------------------

namespace {

LmmProblem rebuild_with_response(const AnalysisTable& table, const ModelSpec& spec,
                                 const std::vector<double>& transformed,
                                 const std::vector<std::size_t>& kept_row_ids) {
    AnalysisTable patched = table;
    const int fi = static_cast<int>(spec.response);
    for (std::size_t i = 0; i < kept_row_ids.size(); ++i) {
        patched.rows[kept_row_ids[i]].features[fi] = transformed[i];
    }
    return LmmProblem::build(patched, spec);
}

// row ids (in table order) that fit_lmm keeps, mirroring the listwise rule
std::vector<std::size_t> kept_rows(const AnalysisTable& table, const ModelSpec& spec) {
    std::vector<std::size_t> ids;
    const int fi = static_cast<int>(spec.response);
    const bool use_age =
        std::find(spec.covariates.begin(), spec.covariates.end(), Covariate::Age) !=
        spec.covariates.end();
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const bool has_pred = spec.predictor == Predictor::Phq8Total
                                  ? row.phq8_total.has_value()
                                  : row.sleep_subscore.has_value();
        if (row.features[fi] && has_pred && (!use_age || row.age)) ids.push_back(i);
    }
    return ids;
}

}  // namespace

ModelFit fit_lmm(const AnalysisTable& table, const ModelSpec& spec) {
    LmmProblem problem = LmmProblem::build(table, spec);

    if (spec.box_cox.mode == BoxCoxSpec::Mode::Off) {
        return problem.fit();
    }

    const std::vector<std::size_t> ids = kept_rows(table, spec);
    std::vector<double> response(ids.size());
    const int fi = static_cast<int>(spec.response);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        response[i] = *table.rows[ids[i]].features[fi];
    }

    if (spec.box_cox.mode == BoxCoxSpec::Mode::Fixed) {
        double shift = 0.0;
        const double lo = *std::min_element(response.begin(), response.end());
        if (lo <= 0.0) shift = 1.0 - lo;
        for (double& v : response) v += shift;
        const std::vector<double> transformed = boxcox_apply(response, spec.box_cox.fixed_lambda);
        ModelFit fit = rebuild_with_response(table, spec, transformed, ids).fit();
        fit.lambda = spec.box_cox.fixed_lambda;
        fit.boxcox_shift = shift;
        return fit;
    }

    // Auto: transform only when the untransformed OLS residuals are skewed
    const double skew = problem.ols_residual_skewness();
    if (std::fabs(skew) <= spec.box_cox.skew_threshold) {
        return problem.fit();
    }
    const BoxCoxResult bc = boxcox(response);
    ModelFit fit = rebuild_with_response(table, spec, bc.transformed, ids).fit();
    fit.lambda = bc.lambda;
    fit.boxcox_shift = bc.shift;
    return fit;
}

}  // namespace sleepassoc
