#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "milc/errors.hpp"
#include "milc/frf.hpp"
#include "milc/polynomial.hpp"

namespace milc {

// Discrete-time SISO rational transfer function, coefficients in descending
// powers of z, common sample time Ts.
class RationalTransfer {
public:
    RationalTransfer(Polynomial num, Polynomial den, double ts);
    RationalTransfer(std::vector<double> num, std::vector<double> den, double ts)
        : RationalTransfer(Polynomial(std::move(num)), Polynomial(std::move(den)), ts) {}

    static RationalTransfer constant(double c, double ts) {
        return RationalTransfer(Polynomial::constant(c), Polynomial::constant(1.0), ts);
    }

    const Polynomial& num() const { return num_; }
    const Polynomial& den() const { return den_; }
    double ts() const { return ts_; }
    bool causal() const { return num_.degree() <= den_.degree(); }

    Complex eval(Complex z) const;
    std::vector<Complex> poles() const { return den_.roots(); }
    std::vector<Complex> zeros() const { return num_.roots(); }

    // Cancel matched numerator/denominator roots (tolerance tol on root distance).
    RationalTransfer simplified(double tol = 1e-8) const;

    RationalTransfer operator+(const RationalTransfer& rhs) const;
    RationalTransfer operator*(const RationalTransfer& rhs) const;
    RationalTransfer operator*(double s) const;

private:
    Polynomial num_, den_;
    double ts_;
};

struct StateSpace {
    Eigen::MatrixXd A, B, C, D;
    bool discrete = false;
    double ts = 0.0;  // valid when discrete

    StateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d,
               bool discrete_ = false, double ts_ = 0.0);
    int order() const { return static_cast<int>(A.rows()); }
    int nu() const { return static_cast<int>(B.cols()); }
    int ny() const { return static_cast<int>(C.rows()); }
};

// n_y x n_u grid of rational entries sharing Ts.
class TransferMatrix {
public:
    TransferMatrix(std::vector<std::vector<RationalTransfer>> entries);

    static TransferMatrix identity(int n, double ts);
    static TransferMatrix diagonal(std::vector<RationalTransfer> diag);

    int ny() const { return static_cast<int>(entries_.size()); }
    int nu() const { return static_cast<int>(entries_.front().size()); }
    double ts() const { return entries_.front().front().ts(); }
    const RationalTransfer& at(int i, int j) const {
        return entries_[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }

    Eigen::MatrixXcd eval(Complex z) const;
    std::vector<Complex> poles() const;  // union over entries, after simplification

    std::string to_json() const;
    static TransferMatrix from_json(const std::string& text);

private:
    std::vector<std::vector<RationalTransfer>> entries_;
};

struct TransmissionZero {
    Complex z;
    bool minimum_phase;  // |z| < 1
};

// --- operations ---

// Frequency response on a grid; entries evaluated at z = e^{i omega}.
FrfMatrix evaluate_frf(const TransferMatrix& sys, const FrequencyGrid& grid);
FrfMatrix evaluate_frf(const RationalTransfer& sys, const FrequencyGrid& grid);
// C (zI - A)^-1 B + D of a discrete model; the well-conditioned route for
// higher-order interconnections where entrywise rational forms degrade.
FrfMatrix evaluate_frf(const StateSpace& sys, const FrequencyGrid& grid);

// S = (I+GC)^-1, J = SG, with closed-loop stability verified on the
// simplified denominators (poles strictly inside the unit disk).
std::pair<TransferMatrix, TransferMatrix> closed_loop_maps(const TransferMatrix& G,
                                                           const TransferMatrix& C);

// Zero-order-hold discretization via a single augmented matrix exponential.
StateSpace zoh_discretize(const StateSpace& sys, double ts);

// Finite transmission zeros: roots of det after clearing denominators.
std::vector<TransmissionZero> transmission_zeros(const TransferMatrix& sys);
// Invariant zeros of a square state-space model via the generalized
// eigenvalue problem of the system pencil [A B; C D] - z [I 0; 0 0].
std::vector<TransmissionZero> transmission_zeros(const StateSpace& sys);

// Per-entry transfer functions of a discrete state-space model
// (Leverrier-Faddeev for the characteristic polynomial and adjugate).
TransferMatrix ss_to_transfer_matrix(const StateSpace& sys);

// Determinant of a square transfer matrix as a single rational function.
RationalTransfer rational_determinant(const TransferMatrix& sys);

}  // namespace milc
