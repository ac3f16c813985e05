#include <doctest.h>

#include "milc/frf.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <sstream>

using namespace milc;
using Complex = std::complex<double>;

namespace {
constexpr double kTs = 1e-3;

FrfMatrix constant_frf(const Eigen::MatrixXcd& m, int points = 8) {
    FrequencyGrid grid = FrequencyGrid::linear(kTs, points);
    return FrfMatrix(grid, std::vector<Eigen::MatrixXcd>(static_cast<size_t>(points), m));
}
}  // namespace

TEST_SUITE("frf") {

TEST_CASE("default log grid covers [0, pi]") {
    FrequencyGrid g = FrequencyGrid::log_default(kTs);
    CHECK(g.omega().front() == doctest::Approx(0.0));
    CHECK(g.omega().back() == doctest::Approx(M_PI));
    for (size_t k = 1; k < g.omega().size(); ++k) CHECK(g.omega()[k] > g.omega()[k - 1]);
}

TEST_CASE("grid rejects out-of-range frequencies") {
    CHECK_THROWS(FrequencyGrid({0.0, 1.0, 3.5}, kTs));
    CHECK_THROWS(FrequencyGrid({1.0, 0.5}, kTs));  // not increasing
}

TEST_CASE("hz conversion round-trip") {
    FrequencyGrid g = FrequencyGrid::log_default(kTs, 200);
    int k = g.nearest(FrequencyGrid::hz_to_omega(25.0, kTs));
    CHECK(g.hz(k) == doctest::Approx(25.0).epsilon(0.02));
}

TEST_CASE("interaction of a diagonal FRF is exactly zero") {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
    m(0, 0) = Complex(2.0, 1.0);
    m(1, 1) = Complex(0.5, -0.2);
    InteractionReport rep = interaction_measure(constant_frf(m));
    CHECK(rep.max_sigma == 0.0);
    CHECK(rep.decoupled);
    for (const auto& E : rep.E) CHECK(E.norm() == 0.0);
}

TEST_CASE("hand value: coupled constant FRF") {
    Eigen::MatrixXcd m(2, 2);
    m << 1.0, 0.5, 0.5, 1.0;
    InteractionReport rep = interaction_measure(constant_frf(m));
    // E = [[0, 0.5], [0.5, 0]], largest singular value 0.5
    for (double s : rep.sigma) CHECK(s == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.max_sigma == doctest::Approx(0.5));
    CHECK_FALSE(rep.decoupled);
}

TEST_CASE("reconstruction identity frf = diag(frf)(I + E)") {
    std::mt19937 rng(11);
    std::normal_distribution<double> dist;
    FrequencyGrid grid = FrequencyGrid::linear(kTs, 16);
    std::vector<Eigen::MatrixXcd> data;
    for (int k = 0; k < grid.size(); ++k) {
        Eigen::MatrixXcd m(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = Complex(dist(rng), dist(rng));
        for (int i = 0; i < 3; ++i) m(i, i) += 3.0;  // keep diagonals away from zero
        data.push_back(m);
    }
    FrfMatrix frf(grid, data);
    InteractionReport rep = interaction_measure(frf);
    for (int k = 0; k < grid.size(); ++k) {
        Eigen::MatrixXcd D = frf.at(k).diagonal().asDiagonal();
        Eigen::MatrixXcd recon =
            D * (Eigen::MatrixXcd::Identity(3, 3) + rep.E[static_cast<size_t>(k)]);
        CHECK((recon - frf.at(k)).norm() < 1e-10);
    }
}

TEST_CASE("zero diagonal raises") {
    Eigen::MatrixXcd m(2, 2);
    m << 0.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(interaction_measure(constant_frf(m)), ZeroDiagonal);
}

TEST_CASE("hand value: static decoupling of [[1,1],[-1,1]]") {
    Eigen::MatrixXcd m(2, 2);
    m << 1.0, 1.0, -1.0, 1.0;
    FrfMatrix frf = constant_frf(m);
    DecouplingTransform T = static_decoupling(frf, frf.grid().omega()[2]);
    // Re(G)^-1 = 0.5*[[1,-1],[1,1]]; unit max-abs columns -> [[1,-1],[1,1]]
    Eigen::MatrixXd want(2, 2);
    want << 1.0, -1.0, 1.0, 1.0;
    CHECK((T.Tu - want).norm() < 1e-12);
    // product is diagonal at the anchor
    Eigen::MatrixXcd prod = m * T.Tu;
    CHECK(std::abs(prod(0, 1)) < 1e-12);
    CHECK(std::abs(prod(1, 0)) < 1e-12);
}

TEST_CASE("decoupling guarantee at the anchor") {
    std::mt19937 rng(3);
    std::normal_distribution<double> dist;
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::MatrixXcd m(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) m(i, j) = Complex(dist(rng), 0.1 * dist(rng));
        m(0, 0) += 2.0;
        m(1, 1) += 2.0;
        m(0, 1) += 0.8;  // make it clearly coupled
        FrfMatrix frf = constant_frf(m);
        double w0 = frf.grid().omega()[3];
        double before = interaction_measure(frf).sigma[3];
        DecouplingTransform T = static_decoupling(frf, w0);
        double after = interaction_measure(apply_input_transform(frf, T.Tu)).sigma[3];
        CHECK(after < before);
        CHECK(T.condition_number > 0.0);
    }
}

TEST_CASE("singular anchor raises") {
    Eigen::MatrixXcd m(2, 2);
    m << 1.0, 1.0, 1.0, 1.0;
    FrfMatrix frf = constant_frf(m);
    CHECK_THROWS_AS(static_decoupling(frf, frf.grid().omega()[0]), SingularAtAnchor);
}

TEST_CASE("CSV round-trip to 1e-12") {
    std::mt19937 rng(5);
    std::normal_distribution<double> dist;
    FrequencyGrid grid = FrequencyGrid::log_default(kTs, 50);
    std::vector<Eigen::MatrixXcd> data;
    for (int k = 0; k < grid.size(); ++k) {
        Eigen::MatrixXcd m(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) m(i, j) = Complex(dist(rng), dist(rng));
        data.push_back(m);
    }
    FrfMatrix frf(grid, data);
    std::stringstream ss;
    frf.write_csv(ss);
    FrfMatrix back = FrfMatrix::read_csv(ss, kTs);
    REQUIRE(back.npoints() == frf.npoints());
    for (int k = 0; k < frf.npoints(); ++k) {
        CHECK(std::abs(back.grid().omega()[static_cast<size_t>(k)] -
                       frf.grid().omega()[static_cast<size_t>(k)]) < 1e-12);
        CHECK((back.at(k) - frf.at(k)).norm() < 1e-12);
    }
}

TEST_CASE("JSON round-trip is exact") {
    Eigen::MatrixXcd m(2, 2);
    m << Complex(1.25, -0.5), Complex(0.0, 2.0), Complex(-3.0, 0.125), Complex(0.75, 0.0);
    FrfMatrix frf = constant_frf(m, 4);
    FrfMatrix back = FrfMatrix::from_json(frf.to_json());
    REQUIRE(back.npoints() == 4);
    for (int k = 0; k < 4; ++k) CHECK((back.at(k) - frf.at(k)).norm() == 0.0);
}

}  // TEST_SUITE
