#include "milc/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>

namespace milc {

namespace {

double sigma_max(const Eigen::MatrixXcd& a) {
    return a.jacobiSvd().singularValues()(0);
}

double spectral_radius(const Eigen::MatrixXcd& a) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void check_same_grid(const FrfMatrix& a, const FrfMatrix& b, const char* who) {
    if (!(a.grid() == b.grid())) throw DimensionMismatch(std::string(who) + ": grid mismatch");
}

}  // namespace

IterationFactors factorize(const FrfMatrix& L_resp, const FrfMatrix& J_frf) {
    check_same_grid(L_resp, J_frf, "factorize");
    if (J_frf.ny() != J_frf.nu() || L_resp.ny() != J_frf.nu() || L_resp.nu() != J_frf.ny())
        throw DimensionMismatch("factorize: square L*J required");
    int n = J_frf.ny();
    IterationFactors f{J_frf.grid(), {}, {}, {}};
    for (int k = 0; k < J_frf.npoints(); ++k) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(n, n) - L_resp.at(k) * J_frf.at(k);
        Eigen::VectorXcd md = m.diagonal();
        double scale = m.cwiseAbs().maxCoeff();
        Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            if (std::abs(md(i)) <= 1e-14 * std::max(1.0, scale))
                throw ZeroDiagonalM("factorize: M_" + std::to_string(i + 1) +
                                    std::to_string(i + 1) + " is zero at grid index " +
                                    std::to_string(k) + " (unit learning gain on the diagonal)");
            for (int j = 0; j < n; ++j)
                if (j != i) e(i, j) = m(i, j) / md(i);
        }
        f.M.push_back(std::move(m));
        f.Md.push_back(std::move(md));
        f.E.push_back(std::move(e));
    }
    return f;
}

SpectralRadiusResult check_convergence_thm1(const FrfMatrix& Q_resp, const FrfMatrix& L_resp,
                                            const FrfMatrix& J_frf) {
    check_same_grid(Q_resp, J_frf, "check_convergence_thm1");
    check_same_grid(L_resp, J_frf, "check_convergence_thm1");
    int n = J_frf.ny();
    SpectralRadiusResult r;
    r.convergent = true;
    for (int k = 0; k < J_frf.npoints(); ++k) {
        Eigen::MatrixXcd t =
            Q_resp.at(k) * (Eigen::MatrixXcd::Identity(n, n) - L_resp.at(k) * J_frf.at(k));
        double rho = spectral_radius(t);
        if (!strictly_less(rho, 1.0)) r.convergent = false;
        r.rho.push_back(rho);
    }
    return r;
}

MonotonicResult check_monotonic_thm2(const FrfMatrix& Q_resp, const FrfMatrix& L_resp,
                                     const FrfMatrix& J_frf) {
    check_same_grid(Q_resp, J_frf, "check_monotonic_thm2");
    check_same_grid(L_resp, J_frf, "check_monotonic_thm2");
    int n = J_frf.ny();
    MonotonicResult r;
    for (int k = 0; k < J_frf.npoints(); ++k) {
        Eigen::MatrixXcd t =
            Q_resp.at(k) * (Eigen::MatrixXcd::Identity(n, n) - L_resp.at(k) * J_frf.at(k));
        double s = sigma_max(t);
        r.sigma.push_back(s);
        r.gamma = std::max(r.gamma, s);
    }
    r.monotone = strictly_less(r.gamma, 1.0);
    return r;
}

QdBounds qd_feasible_bound(const FrfMatrix& L_resp, const FrfMatrix& J_frf) {
    check_same_grid(L_resp, J_frf, "qd_feasible_bound");
    int n = J_frf.ny();
    QdBounds b;
    const double inf = std::numeric_limits<double>::infinity();
    for (int k = 0; k < J_frf.npoints(); ++k) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(n, n) - L_resp.at(k) * J_frf.at(k);
        double rho = spectral_radius(m);
        double s = sigma_max(m);
        b.convergent.push_back(rho > 0.0 ? 1.0 / rho : inf);
        b.monotone.push_back(s > 0.0 ? 1.0 / s : inf);
    }
    return b;
}

GershgorinBounds gershgorin_bounds_thm4(const IterationFactors& f) {
    GershgorinBounds g;
    int n = f.n();
    for (size_t k = 0; k < f.E.size(); ++k) {
        Eigen::MatrixXcd ipe = Eigen::MatrixXcd::Identity(n, n) + f.E[k];
        Eigen::MatrixXd a = ipe.cwiseAbs();
        Eigen::MatrixXd h = (ipe * ipe.adjoint()).cwiseAbs();
        Eigen::VectorXd row(n), col(n), mon(n);
        for (int i = 0; i < n; ++i) {
            row(i) = 1.0 / a.row(i).sum();
            col(i) = 1.0 / a.col(i).sum();
            mon(i) = 1.0 / std::sqrt(h.row(i).sum());
        }
        g.row_sum.push_back(std::move(row));
        g.col_sum.push_back(std::move(col));
        g.monotone.push_back(std::move(mon));
    }
    return g;
}

namespace {

double scaled_sigma(const Eigen::MatrixXcd& a, const Eigen::VectorXd& d) {
    Eigen::MatrixXcd m = a;
    int n = static_cast<int>(a.rows());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) *= d(i) / d(j);
    return sigma_max(m);
}

// One-dimensional golden-section refinement of log d(idx).
double refine_coordinate(const Eigen::MatrixXcd& a, Eigen::VectorXd& d, int idx, double best) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = std::log(d(idx)) - 4.0, hi = std::log(d(idx)) + 4.0;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    auto eval = [&](double lx) {
        Eigen::VectorXd dd = d;
        dd(idx) = std::exp(lx);
        return scaled_sigma(a, dd);
    };
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < 60 && hi - lo > 1e-10; ++it) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - phi * (hi - lo); f1 = eval(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + phi * (hi - lo); f2 = eval(x2);
        }
    }
    double lx = 0.5 * (lo + hi);
    double fx = eval(lx);
    if (fx < best) {
        d(idx) = std::exp(lx);
        return fx;
    }
    return best;
}

}  // namespace

MuResult mu_upper_diag(const Eigen::MatrixXcd& A) {
    if (A.rows() != A.cols()) throw DimensionMismatch("mu_upper_diag: square required");
    int n = static_cast<int>(A.rows());
    MuResult r;
    if (n == 1) {
        r.mu = std::abs(A(0, 0));
        return r;
    }
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
    double best = sigma_max(A);
    const int cap = 200;
    const double rel_tol = 1e-8;
    int it = 0;
    bool improved = true;
    // Osborne-style sweeps: equalize off-diagonal row/column norms of the
    // scaled matrix, accept only when sigma_max decreases.
    while (improved && it < cap) {
        improved = false;
        Eigen::VectorXd cand = d;
        for (int i = 0; i < n; ++i) {
            double rn = 0.0, cn = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                rn += std::norm(A(i, j)) * (cand(i) / cand(j)) * (cand(i) / cand(j));
                cn += std::norm(A(j, i)) * (cand(j) / cand(i)) * (cand(j) / cand(i));
            }
            if (rn > 0.0 && cn > 0.0)
                cand(i) *= std::pow(cn / rn, 0.25);  // sqrt of norm ratio
        }
        double v = scaled_sigma(A, cand);
        if (v < best) {
            improved = best - v > rel_tol * best;
            best = v;
            d = cand;
        }
        ++it;
    }
    // Coordinate refinement toward the D-scaling infimum (exact for n <= 3).
    improved = true;
    while (improved && it < cap) {
        improved = false;
        for (int i = 1; i < n; ++i) {  // d(0) pinned, scaling is similarity-invariant
            double v = refine_coordinate(A, d, i, best);
            if (best - v > rel_tol * std::max(best, 1e-300)) improved = true;
            best = std::min(best, v);
        }
        ++it;
    }
    r.mu = best;
    r.converged = !improved;
    return r;
}

SsvBounds ssv_bounds_thm5(const IterationFactors& f) {
    SsvBounds b;
    int n = f.n();
    for (size_t k = 0; k < f.E.size(); ++k) {
        Eigen::MatrixXcd ipe = Eigen::MatrixXcd::Identity(n, n) + f.E[k];
        MuResult m1 = mu_upper_diag(ipe);
        MuResult m2 = mu_upper_diag(ipe * ipe.adjoint());
        if (!m1.converged || !m2.converged) b.mu_warning = true;
        b.convergent.push_back(1.0 / m1.mu);
        b.monotone.push_back(1.0 / std::sqrt(m2.mu));
    }
    return b;
}

const char* criterion_name(Criterion c) {
    switch (c) {
        case Criterion::Eq20: return "Eq20";
        case Criterion::Eq21: return "Eq21";
        case Criterion::Eq24: return "Eq24";
        default: return "none";
    }
}

const char* criterion_name(MonCriterion c) {
    switch (c) {
        case MonCriterion::Eq22: return "Eq22";
        case MonCriterion::Eq25: return "Eq25";
        default: return "none";
    }
}

JointCheck joint_condition_check(const IterationFactors& f,
                                 const std::vector<std::vector<double>>& q_of_loop) {
    int n = f.n();
    if (static_cast<int>(q_of_loop.size()) != n)
        throw DimensionMismatch("joint_condition_check: one q response per loop required");
    GershgorinBounds g = gershgorin_bounds_thm4(f);
    SsvBounds s = ssv_bounds_thm5(f);
    JointCheck jc;
    jc.convergent = true;
    jc.monotone = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < f.E.size(); ++k) {
        Eigen::VectorXd lhs(n);
        for (int i = 0; i < n; ++i)
            lhs(i) = q_of_loop[static_cast<size_t>(i)][k] * std::abs(f.Md[k](i));

        auto all_below = [&](auto rhs_of_loop) {
            for (int i = 0; i < n; ++i)
                if (!strictly_less(lhs(i), rhs_of_loop(i))) return false;
            return true;
        };

        Criterion c = Criterion::None;
        if (all_below([&](int i) { return g.row_sum[k](i); })) c = Criterion::Eq20;
        else if (all_below([&](int i) { return g.col_sum[k](i); })) c = Criterion::Eq21;
        else if (all_below([&](int) { return s.convergent[k]; })) c = Criterion::Eq24;

        MonCriterion mc = MonCriterion::None;
        if (all_below([&](int i) { return g.monotone[k](i); })) mc = MonCriterion::Eq22;
        else if (all_below([&](int) { return s.monotone[k]; })) mc = MonCriterion::Eq25;

        jc.conv_label.push_back(c);
        jc.mon_label.push_back(mc);
        if (c == Criterion::None) jc.convergent = false;
        if (mc == MonCriterion::None) jc.monotone = false;

        // margin: best criterion slack at this frequency
        double margin = -std::numeric_limits<double>::infinity();
        auto slack = [&](auto rhs_of_loop) {
            double m = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) m = std::min(m, rhs_of_loop(i) - lhs(i));
            return m;
        };
        margin = std::max(margin, slack([&](int i) { return g.row_sum[k](i); }));
        margin = std::max(margin, slack([&](int i) { return g.col_sum[k](i); }));
        margin = std::max(margin, slack([&](int) { return s.convergent[k]; }));
        if (margin < worst_margin) {
            worst_margin = margin;
            jc.worst_index = static_cast<int>(k);
        }
    }
    return jc;
}

ConvergenceReport build_report(const FrfMatrix& Q_resp, const FrfMatrix& L_resp,
                               const FrfMatrix& J_frf) {
    IterationFactors f = factorize(L_resp, J_frf);
    int n = f.n();
    std::vector<std::vector<double>> q(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < Q_resp.npoints(); ++k)
            q[static_cast<size_t>(i)].push_back(std::abs(Q_resp.at(k)(i, i)));

    ConvergenceReport rep{J_frf.grid(), {}, {}, {}, gershgorin_bounds_thm4(f),
                          ssv_bounds_thm5(f), joint_condition_check(f, q),
                          check_convergence_thm1(Q_resp, L_resp, J_frf),
                          check_monotonic_thm2(Q_resp, L_resp, J_frf), 0.0, 0.0, 0.0};
    rep.rho = rep.thm1.rho;
    rep.sigma = rep.thm2.sigma;
    rep.gamma = rep.thm2.gamma;
    for (int k = 0; k < J_frf.npoints(); ++k) {
        Eigen::VectorXd lhs(n);
        for (int i = 0; i < n; ++i) lhs(i) = q[static_cast<size_t>(i)][static_cast<size_t>(k)] *
                                             std::abs(f.Md[static_cast<size_t>(k)](i));
        rep.qM_abs.push_back(lhs);
    }
    rep.worst_omega = rep.grid.omega()[static_cast<size_t>(rep.joint.worst_index)];
    // min over grid of (best certified RHS - LHS), using the row-sum bound as reference
    double mm = std::numeric_limits<double>::infinity();
    for (int k = 0; k < J_frf.npoints(); ++k) {
        for (int i = 0; i < n; ++i) {
            double best_rhs = std::max({rep.gersh.row_sum[static_cast<size_t>(k)](i),
                                        rep.gersh.col_sum[static_cast<size_t>(k)](i),
                                        rep.ssv.convergent[static_cast<size_t>(k)]});
            mm = std::min(mm, best_rhs - rep.qM_abs[static_cast<size_t>(k)](i));
        }
    }
    rep.min_margin = mm;
    return rep;
}

void ConvergenceReport::write_csv(std::ostream& os) const {
    int n = static_cast<int>(qM_abs.front().size());
    os << "omega, rho, sigma_max";
    for (int i = 1; i <= n; ++i) os << ", q" << i << "M" << i << i << "_abs";
    for (int i = 1; i <= n; ++i) os << ", rhs_eq20_" << i;
    for (int i = 1; i <= n; ++i) os << ", rhs_eq21_" << i;
    for (int i = 1; i <= n; ++i) os << ", rhs_eq22_" << i;
    os << ", rhs_eq24, rhs_eq25, criterion_label, convergent, monotone\n";
    os << std::setprecision(17);
    for (int k = 0; k < static_cast<int>(rho.size()); ++k) {
        size_t ks = static_cast<size_t>(k);
        os << grid.omega()[ks] << ", " << rho[ks] << ", " << sigma[ks];
        for (int i = 0; i < n; ++i) os << ", " << qM_abs[ks](i);
        for (int i = 0; i < n; ++i) os << ", " << gersh.row_sum[ks](i);
        for (int i = 0; i < n; ++i) os << ", " << gersh.col_sum[ks](i);
        for (int i = 0; i < n; ++i) os << ", " << gersh.monotone[ks](i);
        os << ", " << ssv.convergent[ks] << ", " << ssv.monotone[ks] << ", "
           << criterion_name(joint.conv_label[ks]) << ", "
           << (joint.conv_label[ks] != Criterion::None ? 1 : 0) << ", "
           << (joint.mon_label[ks] != MonCriterion::None ? 1 : 0) << "\n";
    }
}

std::string ConvergenceReport::summary_json() const {
    nlohmann::json j;
    j["gamma"] = gamma;
    j["convergent_thm1"] = thm1.convergent;
    j["monotone_thm2"] = thm2.monotone;
    j["joint_convergent"] = joint.convergent;
    j["joint_monotone"] = joint.monotone;
    j["worst_omega"] = worst_omega;
    j["min_margin"] = min_margin;
    j["mu_warning"] = ssv.mu_warning;
    return j.dump(2);
}

}  // namespace milc
