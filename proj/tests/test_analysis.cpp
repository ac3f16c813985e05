#include <doctest.h>

#include "milc/analysis.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <sstream>

using namespace milc;
using Complex = std::complex<double>;

namespace {
constexpr double kTs = 1e-3;

FrfMatrix constant_frf(const Eigen::MatrixXcd& m, int points = 6) {
    FrequencyGrid grid = FrequencyGrid::linear(kTs, points);
    return FrfMatrix(grid, std::vector<Eigen::MatrixXcd>(static_cast<size_t>(points), m));
}

FrfMatrix identity_frf(int n, int points = 6) {
    return constant_frf(Eigen::MatrixXcd::Identity(n, n), points);
}

// L and J such that M = I - LJ equals the given constant matrix: L = I - M, J = I.
std::pair<FrfMatrix, FrfMatrix> lj_for_M(const Eigen::MatrixXcd& M, int points = 6) {
    int n = static_cast<int>(M.rows());
    return {constant_frf(Eigen::MatrixXcd::Identity(n, n) - M, points), identity_frf(n, points)};
}
}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("strictly_less has a numerical margin") {
    CHECK(strictly_less(0.5, 1.0));
    CHECK_FALSE(strictly_less(1.0, 1.0));
    CHECK_FALSE(strictly_less(1.0 - 5e-10, 1.0));
}

TEST_CASE("factorize: diagonal M gives E = 0") {
    Eigen::MatrixXcd M(2, 2);
    M << Complex(0.3, 0.1), 0.0, 0.0, Complex(-0.2, 0.4);
    auto [L, J] = lj_for_M(M);
    IterationFactors f = factorize(L, J);
    for (const auto& E : f.E) CHECK(E.norm() == 0.0);
    for (const auto& Md : f.Md) {
        CHECK(std::abs(Md(0) - M(0, 0)) < 1e-14);
        CHECK(std::abs(Md(1) - M(1, 1)) < 1e-14);
    }
}

TEST_CASE("factorize: L = 0 gives M = I, E = 0") {
    FrfMatrix L = constant_frf(Eigen::MatrixXcd::Zero(2, 2));
    FrfMatrix J = constant_frf((Eigen::MatrixXcd(2, 2) << 1.0, 0.2, 0.3, 1.0).finished());
    IterationFactors f = factorize(L, J);
    for (const auto& M : f.M) CHECK((M - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-14);
    for (const auto& E : f.E) CHECK(E.norm() == 0.0);
}

TEST_CASE("factorize: zero diagonal of M raises") {
    // J = [[1, 0.2],[0.3, 1]], L = I -> M = I - J has zero diagonal
    FrfMatrix J = constant_frf((Eigen::MatrixXcd(2, 2) << 1.0, 0.2, 0.3, 1.0).finished());
    CHECK_THROWS_AS(factorize(identity_frf(2), J), ZeroDiagonalM);
}

TEST_CASE("factorize reconstruction invariant") {
    std::mt19937 rng(17);
    std::normal_distribution<double> dist;
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 12);
    std::vector<Eigen::MatrixXcd> lm, jm;
    for (int k = 0; k < grid.size(); ++k) {
        Eigen::MatrixXcd a(3, 3), b(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                a(i, j) = Complex(dist(rng), dist(rng)) * 0.2;
                b(i, j) = Complex(dist(rng), dist(rng)) * 0.2;
            }
        b += Eigen::MatrixXcd::Identity(3, 3);
        lm.push_back(a);
        jm.push_back(b);
    }
    IterationFactors f = factorize(FrfMatrix(grid, lm), FrfMatrix(grid, jm));
    for (int k = 0; k < grid.size(); ++k) {
        size_t sk = static_cast<size_t>(k);
        Eigen::MatrixXcd recon = Eigen::MatrixXcd(f.Md[sk].asDiagonal()) *
                                 (Eigen::MatrixXcd::Identity(3, 3) + f.E[sk]);
        CHECK((recon - f.M[sk]).norm() < 1e-10);
        CHECK(f.E[sk].diagonal().norm() == 0.0);
    }
}

TEST_CASE("thm1: Q = 0 and deadbeat cases") {
    FrfMatrix J = constant_frf((Eigen::MatrixXcd(2, 2) << 1.0, 0.4, 0.1, 0.8).finished());
    FrfMatrix Q0 = constant_frf(Eigen::MatrixXcd::Zero(2, 2));
    SpectralRadiusResult r0 = check_convergence_thm1(Q0, identity_frf(2), J);
    for (double v : r0.rho) CHECK(v == 0.0);
    CHECK(r0.convergent);

    // L = exact inverse: M = 0
    Eigen::MatrixXcd Jm = J.at(0);
    FrfMatrix Linv = constant_frf(Jm.inverse());
    SpectralRadiusResult r1 = check_convergence_thm1(identity_frf(2), Linv, J);
    for (double v : r1.rho) CHECK(v < 1e-12);
    CHECK(r1.convergent);
    MonotonicResult m1 = check_monotonic_thm2(identity_frf(2), Linv, J);
    CHECK(m1.gamma < 1e-12);
    CHECK(m1.monotone);
}

TEST_CASE("thm1 matches 2x2 quadratic-formula eigenvalue oracle") {
    std::mt19937 rng(23);
    std::normal_distribution<double> dist;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXcd Qm = Eigen::MatrixXcd::Zero(2, 2), Lm(2, 2), Jm(2, 2);
        Qm(0, 0) = dist(rng);
        Qm(1, 1) = dist(rng);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                Lm(i, j) = Complex(dist(rng), dist(rng));
                Jm(i, j) = Complex(dist(rng), dist(rng));
            }
        SpectralRadiusResult r =
            check_convergence_thm1(constant_frf(Qm), constant_frf(Lm), constant_frf(Jm));
        Eigen::MatrixXcd A = Qm * (Eigen::MatrixXcd::Identity(2, 2) - Lm * Jm);
        Complex tr = A.trace(), det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
        Complex disc = std::sqrt(tr * tr - 4.0 * det);
        double want = std::max(std::abs((tr + disc) / 2.0), std::abs((tr - disc) / 2.0));
        CHECK(r.rho[0] == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("rho/sigma gap on a nilpotent iteration matrix") {
    Eigen::MatrixXcd M(2, 2);
    M << 0.0, 2.0, 0.0, 0.0;
    auto [L, J] = lj_for_M(M);
    SpectralRadiusResult r = check_convergence_thm1(identity_frf(2), L, J);
    MonotonicResult m = check_monotonic_thm2(identity_frf(2), L, J);
    CHECK(r.rho[0] == doctest::Approx(0.0));
    CHECK(r.convergent);
    CHECK(m.gamma == doctest::Approx(2.0));
    CHECK_FALSE(m.monotone);
    CHECK(m.gamma >= r.rho[0]);
}

TEST_CASE("qd_feasible_bound diagonal hand case") {
    Eigen::MatrixXcd M(2, 2);
    M << 0.5, 0.0, 0.0, 0.25;
    auto [L, J] = lj_for_M(M);
    QdBounds b = qd_feasible_bound(L, J);
    CHECK(b.convergent[0] == doctest::Approx(2.0));
    CHECK(b.monotone[0] == doctest::Approx(2.0));
}

TEST_CASE("qd_feasible_bound is +inf for exact inverse") {
    Eigen::MatrixXcd Jm(2, 2);
    Jm << 1.0, 0.4, 0.1, 0.8;
    QdBounds b = qd_feasible_bound(constant_frf(Jm.inverse()), constant_frf(Jm));
    // M is zero up to round-off, so the admissible gain is astronomically large
    for (double v : b.convergent) CHECK(v > 1e12);
    for (double v : b.monotone) CHECK(v > 1e12);
}

TEST_CASE("gershgorin hand values for I+E = [[1, 0.5],[0.5, 1]]") {
    // choose Md = I so M = I + E
    Eigen::MatrixXcd M(2, 2);
    M << 1.0, 0.5, 0.5, 1.0;
    auto [L, J] = lj_for_M(M);
    IterationFactors f = factorize(L, J);
    GershgorinBounds g = gershgorin_bounds_thm4(f);
    for (int i = 0; i < 2; ++i) {
        CHECK(g.row_sum[0](i) == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
        CHECK(g.col_sum[0](i) == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
        // (I+E)(I+E)^H = [[1.25, 1],[1, 1.25]], row sums 2.25
        CHECK(g.monotone[0](i) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SsvBounds s = ssv_bounds_thm5(f);
    // mu_d of [[1, 0.5],[0.5, 1]] is 1.5
    CHECK(s.convergent[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("SISO recovery: E = 0 makes every right-hand side 1") {
    Eigen::MatrixXcd M(3, 3);
    M.setZero();
    M(0, 0) = Complex(0.4, 0.2);
    M(1, 1) = Complex(-0.1, 0.6);
    M(2, 2) = Complex(0.3, 0.0);
    auto [L, J] = lj_for_M(M);
    IterationFactors f = factorize(L, J);
    GershgorinBounds g = gershgorin_bounds_thm4(f);
    SsvBounds s = ssv_bounds_thm5(f);
    for (size_t k = 0; k < static_cast<size_t>(f.grid.size()); ++k) {
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(g.row_sum[k](i) - 1.0) < 1e-10);
            CHECK(std::abs(g.col_sum[k](i) - 1.0) < 1e-10);
            CHECK(std::abs(g.monotone[k](i) - 1.0) < 1e-10);
        }
        CHECK(std::abs(s.convergent[k] - 1.0) < 1e-10);
        CHECK(std::abs(s.monotone[k] - 1.0) < 1e-10);
    }
}

TEST_CASE("mu hand cases") {
    Eigen::MatrixXcd A(2, 2);
    A << 2.0, 0.0, 0.0, 0.5;
    CHECK(mu_upper_diag(A).mu == doctest::Approx(2.0).epsilon(1e-8));

    A << 1.0, 1.0, 1.0, 1.0;
    CHECK(mu_upper_diag(A).mu == doctest::Approx(2.0).epsilon(1e-6));

    CHECK(mu_upper_diag(Eigen::MatrixXcd::Identity(3, 3)).mu == doctest::Approx(1.0));
}

TEST_CASE("mu sandwich and D-scaling invariance") {
    std::mt19937 rng(29);
    std::normal_distribution<double> dist;
    std::uniform_real_distribution<double> du(0.2, 5.0);
    for (int rep = 0; rep < 50; ++rep) {
        int n = 2 + rep % 3;
        Eigen::MatrixXcd A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = Complex(dist(rng), dist(rng));
        double mu = mu_upper_diag(A).mu;
        double rho = 0.0;
        for (auto ev : A.eigenvalues()) rho = std::max(rho, std::abs(ev));
        double smax = A.jacobiSvd().singularValues()(0);
        CHECK(rho <= mu + 1e-8);
        CHECK(mu <= smax + 1e-8);
        // any positive diagonal similarity upper-bounds the infimum
        Eigen::VectorXd d(n);
        for (int i = 0; i < n; ++i) d(i) = du(rng);
        Eigen::MatrixXcd DAD = d.asDiagonal().toDenseMatrix().cast<Complex>() * A *
                               d.cwiseInverse().asDiagonal().toDenseMatrix().cast<Complex>();
        CHECK(DAD.jacobiSvd().singularValues()(0) >= mu - 1e-8);
    }
}

TEST_CASE("mu is exact for rank-one matrices") {
    std::mt19937 rng(31);
    std::normal_distribution<double> dist;
    for (int rep = 0; rep < 10; ++rep) {
        int n = 2 + rep % 2;
        Eigen::VectorXcd u(n), v(n);
        for (int i = 0; i < n; ++i) {
            u(i) = Complex(dist(rng), dist(rng));
            v(i) = Complex(dist(rng), dist(rng));
        }
        Eigen::MatrixXcd A = u * v.adjoint();
        // mu_d(u v^H) = sum_i |u_i v_i|
        double want = 0.0;
        for (int i = 0; i < n; ++i) want += std::abs(u(i)) * std::abs(v(i));
        CHECK(mu_upper_diag(A).mu == doctest::Approx(want).epsilon(1e-4));
    }
}

TEST_CASE("joint check: E = 0 certifies via Eq20") {
    Eigen::MatrixXcd M(2, 2);
    M.setZero();
    M(0, 0) = 0.5;
    M(1, 1) = 0.6;
    auto [L, J] = lj_for_M(M);
    IterationFactors f = factorize(L, J);
    std::vector<std::vector<double>> q(2, std::vector<double>(static_cast<size_t>(f.grid.size()), 1.0));
    JointCheck jc = joint_condition_check(f, q);
    CHECK(jc.convergent);
    CHECK(jc.monotone);
    for (auto c : jc.conv_label) CHECK(c == Criterion::Eq20);
}

TEST_CASE("joint check: one criterion suffices and failure reports worst frequency") {
    Eigen::MatrixXcd M(2, 2);
    M << 0.9, 0.4, 0.4, 0.9;
    auto [L, J] = lj_for_M(M);
    IterationFactors f = factorize(L, J);
    // |q M_ii| = 0.9 exceeds the row-sum bound 1/(1+4/9) but the violation must
    // be reported jointly
    std::vector<std::vector<double>> q(2, std::vector<double>(static_cast<size_t>(f.grid.size()), 1.0));
    JointCheck jc = joint_condition_check(f, q);
    CHECK_FALSE(jc.convergent);
    CHECK(jc.worst_index >= 0);
    CHECK(jc.worst_index < f.grid.size());
}

TEST_CASE("full report invariants and CSV export") {
    Eigen::MatrixXcd Jm(2, 2);
    Jm << 1.0, 0.15, 0.1, 0.9;
    Eigen::MatrixXcd Lm = Jm.inverse() * 0.7;  // M = 0.3 I
    FrfMatrix J = constant_frf(Jm), L = constant_frf(Lm), Q = identity_frf(2);
    ConvergenceReport rep = build_report(Q, L, J);
    CHECK(rep.thm1.convergent);
    CHECK(rep.thm2.monotone);
    CHECK(rep.joint.convergent);
    CHECK(rep.gamma >= *std::max_element(rep.rho.begin(), rep.rho.end()));
    for (size_t k = 0; k < rep.rho.size(); ++k) CHECK(rep.sigma[k] >= rep.rho[k] - 1e-12);
    std::stringstream ss;
    rep.write_csv(ss);
    std::string line;
    std::getline(ss, line);
    CHECK(line.find("omega") != std::string::npos);
    CHECK(line.find("rho") != std::string::npos);
    CHECK(rep.summary_json().find("gamma") != std::string::npos);
}

}  // TEST_SUITE
