#pragma once

#include <complex>
#include <vector>

namespace milc {

using Complex = std::complex<double>;

// Real-coefficient polynomial in z, coefficients stored in descending powers.
// poly({1, -0.5}) is z - 0.5.
class Polynomial {
public:
    Polynomial() : coeffs_{0.0} {}
    explicit Polynomial(std::vector<double> coeffs);

    static Polynomial constant(double c) { return Polynomial({c}); }
    // Monic polynomial with the given roots; complex roots must come in
    // conjugate pairs (enforced by pairing during reconstruction).
    static Polynomial from_roots(const std::vector<Complex>& roots, double gain = 1.0);

    const std::vector<double>& coeffs() const { return coeffs_; }
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    double leading() const { return coeffs_.front(); }
    bool is_zero() const;

    Complex eval(Complex z) const;
    double eval(double x) const;

    std::vector<Complex> roots() const;

    Polynomial operator+(const Polynomial& rhs) const;
    Polynomial operator-(const Polynomial& rhs) const;
    Polynomial operator*(const Polynomial& rhs) const;
    Polynomial operator*(double s) const;

private:
    std::vector<double> coeffs_;  // never empty, leading coefficient nonzero unless zero poly
    void trim();
};

}  // namespace milc
