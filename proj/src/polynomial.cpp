#include "milc/polynomial.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace milc {

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_ = {0.0};
    trim();
}

void Polynomial::trim() {
    size_t lead = 0;
    while (lead + 1 < coeffs_.size() && coeffs_[lead] == 0.0) ++lead;
    if (lead > 0) coeffs_.erase(coeffs_.begin(), coeffs_.begin() + static_cast<long>(lead));
}

bool Polynomial::is_zero() const {
    return coeffs_.size() == 1 && coeffs_[0] == 0.0;
}

Complex Polynomial::eval(Complex z) const {
    Complex acc = 0.0;
    for (double c : coeffs_) acc = acc * z + c;
    return acc;
}

double Polynomial::eval(double x) const {
    double acc = 0.0;
    for (double c : coeffs_) acc = acc * x + c;
    return acc;
}

Polynomial Polynomial::operator+(const Polynomial& rhs) const {
    const auto& a = coeffs_;
    const auto& b = rhs.coeffs_;
    size_t n = std::max(a.size(), b.size());
    std::vector<double> out(n, 0.0);
    for (size_t i = 0; i < a.size(); ++i) out[n - a.size() + i] += a[i];
    for (size_t i = 0; i < b.size(); ++i) out[n - b.size() + i] += b[i];
    return Polynomial(std::move(out));
}

Polynomial Polynomial::operator-(const Polynomial& rhs) const {
    return *this + rhs * -1.0;
}

Polynomial Polynomial::operator*(const Polynomial& rhs) const {
    if (is_zero() || rhs.is_zero()) return Polynomial();
    std::vector<double> out(coeffs_.size() + rhs.coeffs_.size() - 1, 0.0);
    for (size_t i = 0; i < coeffs_.size(); ++i)
        for (size_t j = 0; j < rhs.coeffs_.size(); ++j)
            out[i + j] += coeffs_[i] * rhs.coeffs_[j];
    return Polynomial(std::move(out));
}

Polynomial Polynomial::operator*(double s) const {
    std::vector<double> out = coeffs_;
    for (double& c : out) c *= s;
    return Polynomial(std::move(out));
}

std::vector<Complex> Polynomial::roots() const {
    int n = degree();
    if (n <= 0 || is_zero()) return {};
    // Companion matrix with Eigen's balancing-based eigensolver.
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) comp(0, i) = -coeffs_[static_cast<size_t>(i) + 1] / coeffs_[0];
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
    std::vector<Complex> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = es.eigenvalues()(i);
    return out;
}

Polynomial Polynomial::from_roots(const std::vector<Complex>& roots, double gain) {
    // Pair conjugate roots into real quadratic factors to keep coefficients real.
    std::vector<Complex> pending = roots;
    Polynomial p = Polynomial::constant(gain);
    const double imag_tol = 1e-9;
    while (!pending.empty()) {
        Complex r = pending.back();
        pending.pop_back();
        if (std::abs(r.imag()) <= imag_tol * (1.0 + std::abs(r.real()))) {
            p = p * Polynomial({1.0, -r.real()});
        } else {
            // find closest conjugate partner
            size_t best = pending.size();
            double best_d = std::numeric_limits<double>::max();
            for (size_t i = 0; i < pending.size(); ++i) {
                double d = std::abs(pending[i] - std::conj(r));
                if (d < best_d) { best_d = d; best = i; }
            }
            if (best < pending.size()) pending.erase(pending.begin() + static_cast<long>(best));
            p = p * Polynomial({1.0, -2.0 * r.real(), std::norm(r)});
        }
    }
    return p;
}

}  // namespace milc
