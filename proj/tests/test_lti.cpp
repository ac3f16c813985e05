#include <doctest.h>

#include "milc/lti.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <random>

using namespace milc;
using Complex = std::complex<double>;

namespace {
constexpr double kTs = 1e-3;

RationalTransfer c1() {
    return RationalTransfer({5e4, -5e4 * 0.988}, {1.0, -0.939}, kTs);
}
}  // namespace

TEST_SUITE("lti") {

TEST_CASE("controller c1 at z = 1") {
    // 5e4 * (1 - 0.988) / (1 - 0.939) = 5e4 * 0.012 / 0.061
    Complex v = c1().eval(Complex(1.0, 0.0));
    CHECK(v.real() == doctest::Approx(9836.0656).epsilon(1e-6));
    CHECK(v.imag() == doctest::Approx(0.0));
}

TEST_CASE("identity transfer matrix evaluates to identity") {
    TransferMatrix I2 = TransferMatrix::identity(2, kTs);
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 5);
    FrfMatrix frf = evaluate_frf(I2, grid);
    for (int k = 0; k < frf.npoints(); ++k)
        CHECK((frf.at(k) - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("closed loop with C = 0 gives S = I, J = G") {
    RationalTransfer g(std::vector<double>{0.5}, std::vector<double>{1.0, -0.5}, kTs);
    TransferMatrix G = TransferMatrix::diagonal({g, g});
    TransferMatrix C = TransferMatrix::diagonal(
        {RationalTransfer::constant(0.0, kTs), RationalTransfer::constant(0.0, kTs)});
    auto [S, J] = closed_loop_maps(G, C);
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 9);
    FrfMatrix Sf = evaluate_frf(S, grid), Jf = evaluate_frf(J, grid), Gf = evaluate_frf(G, grid);
    for (int k = 0; k < grid.size(); ++k) {
        CHECK((Sf.at(k) - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-10);
        CHECK((Jf.at(k) - Gf.at(k)).norm() < 1e-10);
    }
}

TEST_CASE("SISO hand example: g = 0.5/(z-0.5), c = 1") {
    RationalTransfer g(std::vector<double>{0.5}, std::vector<double>{1.0, -0.5}, kTs);
    TransferMatrix G = TransferMatrix::diagonal({g});
    TransferMatrix C = TransferMatrix::diagonal({RationalTransfer::constant(1.0, kTs)});
    auto [S, J] = closed_loop_maps(G, C);
    // S = (z-0.5)/z, J = 0.5/z
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 17);
    FrfMatrix Sf = evaluate_frf(S, grid), Jf = evaluate_frf(J, grid);
    for (int k = 0; k < grid.size(); ++k) {
        Complex z = std::polar(1.0, grid.omega()[static_cast<size_t>(k)]);
        CHECK(std::abs(Sf.at(k)(0, 0) - (z - 0.5) / z) < 1e-12);
        CHECK(std::abs(Jf.at(k)(0, 0) - 0.5 / z) < 1e-12);
    }
}

TEST_CASE("closed loop matches pointwise complex inverse oracle") {
    RationalTransfer g11(std::vector<double>{0.4}, std::vector<double>{1.0, -0.6}, kTs);
    RationalTransfer g12(std::vector<double>{0.1}, std::vector<double>{1.0, -0.2}, kTs);
    RationalTransfer g21(std::vector<double>{0.05}, std::vector<double>{1.0, -0.3}, kTs);
    RationalTransfer g22(std::vector<double>{0.3}, std::vector<double>{1.0, -0.4}, kTs);
    TransferMatrix G({{g11, g12}, {g21, g22}});
    TransferMatrix C = TransferMatrix::diagonal(
        {RationalTransfer::constant(0.5, kTs), RationalTransfer::constant(0.5, kTs)});
    auto [S, J] = closed_loop_maps(G, C);
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 33);
    FrfMatrix Sf = evaluate_frf(S, grid), Jf = evaluate_frf(J, grid);
    FrfMatrix Gf = evaluate_frf(G, grid), Cf = evaluate_frf(C, grid);
    for (int k = 0; k < grid.size(); ++k) {
        Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(2, 2);
        Eigen::MatrixXcd So = (I + Gf.at(k) * Cf.at(k)).inverse();
        CHECK((Sf.at(k) - So).norm() < 1e-9 * (1.0 + So.norm()));
        CHECK((Jf.at(k) - So * Gf.at(k)).norm() < 1e-9 * (1.0 + So.norm()));
        // return-difference identity (I + GC) S = I
        CHECK(((I + Gf.at(k) * Cf.at(k)) * Sf.at(k) - I).norm() < 1e-8);
    }
}

TEST_CASE("closed loop rejects unstable results") {
    // g = 2/(z-1.5) with c = 0: J = G has a pole outside the unit disk
    RationalTransfer g(std::vector<double>{2.0}, std::vector<double>{1.0, -1.5}, kTs);
    TransferMatrix G = TransferMatrix::diagonal({g});
    TransferMatrix C = TransferMatrix::diagonal({RationalTransfer::constant(0.0, kTs)});
    CHECK_THROWS_AS(closed_loop_maps(G, C), UnstableClosedLoop);
}

TEST_CASE("zoh of an integrator") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(1, 1), B = Eigen::MatrixXd::Ones(1, 1);
    StateSpace ss(A, B, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1));
    StateSpace d = zoh_discretize(ss, 1e-3);
    CHECK(d.A(0, 0) == doctest::Approx(1.0));
    CHECK(d.B(0, 0) == doctest::Approx(1e-3));
    CHECK(d.discrete);
    CHECK(d.ts == doctest::Approx(1e-3));
}

TEST_CASE("zoh of a scalar lag") {
    Eigen::MatrixXd A = -Eigen::MatrixXd::Ones(1, 1), B = Eigen::MatrixXd::Ones(1, 1);
    StateSpace ss(A, B, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1));
    StateSpace d = zoh_discretize(ss, 1e-3);
    CHECK(d.A(0, 0) == doctest::Approx(std::exp(-1e-3)).epsilon(1e-12));
    CHECK(d.B(0, 0) == doctest::Approx(1.0 - std::exp(-1e-3)).epsilon(1e-12));
}

TEST_CASE("zoh eigenvalue map oracle") {
    std::mt19937 rng(7);
    std::normal_distribution<double> dist;
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::MatrixXd M(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) M(i, j) = dist(rng);
        Eigen::MatrixXd A = -(M * M.transpose()) - Eigen::MatrixXd::Identity(4, 4);
        StateSpace ss(A, Eigen::MatrixXd::Ones(4, 1), Eigen::MatrixXd::Ones(1, 4),
                      Eigen::MatrixXd::Zero(1, 1));
        StateSpace d = zoh_discretize(ss, 1e-3);
        Eigen::VectorXcd lc = A.eigenvalues(), ld = d.A.eigenvalues();
        std::vector<double> want, got;
        for (int i = 0; i < 4; ++i) {
            want.push_back(std::exp(lc(i).real() * 1e-3));
            got.push_back(std::abs(ld(i)));
        }
        std::sort(want.begin(), want.end());
        std::sort(got.begin(), got.end());
        for (int i = 0; i < 4; ++i) CHECK(std::abs(want[i] - got[i]) < 1e-10);
    }
}

TEST_CASE("transmission zeros of a diagonal system") {
    RationalTransfer a(std::vector<double>{1.0, -0.5}, std::vector<double>{1.0, -0.2}, kTs);
    RationalTransfer b(std::vector<double>{1.0}, std::vector<double>{1.0, -0.3}, kTs);
    std::vector<TransmissionZero> zs = transmission_zeros(TransferMatrix::diagonal({a, b}));
    REQUIRE(zs.size() == 1);
    CHECK(std::abs(zs[0].z - Complex(0.5, 0.0)) < 1e-10);
    CHECK(zs[0].minimum_phase);
}

TEST_CASE("non-minimum-phase zero is tagged") {
    RationalTransfer h(std::vector<double>{1.0, -1.09}, std::vector<double>{1.0, -0.5}, kTs);
    std::vector<TransmissionZero> zs = transmission_zeros(TransferMatrix::diagonal({h}));
    REQUIRE(zs.size() == 1);
    CHECK(std::abs(zs[0].z - Complex(1.09, 0.0)) < 1e-10);
    CHECK_FALSE(zs[0].minimum_phase);
}

TEST_CASE("conjugate symmetry of real-coefficient responses") {
    RationalTransfer h(std::vector<double>{1.0, 0.3}, std::vector<double>{1.0, -0.7, 0.12}, kTs);
    for (double w : {0.1, 0.5, 1.7, 3.0}) {
        Complex plus = h.eval(std::polar(1.0, w));
        Complex minus = h.eval(std::polar(1.0, -w));
        CHECK(std::abs(minus - std::conj(plus)) < 1e-13);
    }
}

TEST_CASE("evaluate_frf rejects a pole on the grid") {
    // pole exactly at z = e^{i pi/2}: den = z^2 + 1
    RationalTransfer h(std::vector<double>{1.0}, std::vector<double>{1.0, 0.0, 1.0}, kTs);
    FrequencyGrid grid({0.0, M_PI / 2.0, M_PI}, kTs);
    CHECK_THROWS_AS(evaluate_frf(TransferMatrix::diagonal({h}), grid), PoleOnGrid);
}

TEST_CASE("state-space and rational evaluation agree") {
    Eigen::MatrixXd A(2, 2), B(2, 2), C(2, 2), D(2, 2);
    A << 0.5, 0.1, 0.0, -0.3;
    B << 1.0, 0.0, 0.2, 1.0;
    C << 1.0, 0.5, 0.0, 1.0;
    D << 0.0, 0.0, 0.1, 0.0;
    StateSpace ss(A, B, C, D, true, kTs);
    TransferMatrix tm = ss_to_transfer_matrix(ss);
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 21);
    FrfMatrix f1 = evaluate_frf(ss, grid), f2 = evaluate_frf(tm, grid);
    for (int k = 0; k < grid.size(); ++k) CHECK((f1.at(k) - f2.at(k)).norm() < 1e-10);
}

TEST_CASE("transfer matrix JSON round-trip") {
    RationalTransfer g11(std::vector<double>{0.4, 0.1}, std::vector<double>{1.0, -0.6, 0.05}, kTs);
    RationalTransfer g12(std::vector<double>{0.1}, std::vector<double>{1.0, -0.2}, kTs);
    TransferMatrix G({{g11, g12}, {g12, g11}});
    TransferMatrix back = TransferMatrix::from_json(G.to_json());
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 11);
    FrfMatrix f1 = evaluate_frf(G, grid), f2 = evaluate_frf(back, grid);
    for (int k = 0; k < grid.size(); ++k) CHECK((f1.at(k) - f2.at(k)).norm() < 1e-14);
}

}  // TEST_SUITE
