#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "milc/errors.hpp"

namespace milc {

// Frequencies in rad/sample on [0, pi]. Ts is kept for Hz conversion only.
class FrequencyGrid {
public:
    FrequencyGrid(std::vector<double> omega, double ts);

    // 0.1 Hz .. Nyquist log-spaced plus the endpoints {0, pi}. Density chosen so
    // lightly damped resonances (zeta >= 0.005) are sampled within 1% of peak.
    static FrequencyGrid log_default(double ts, int count = 2000);
    // Linearly spaced on [0, pi] including both endpoints.
    static FrequencyGrid linear(double ts, int count);

    const std::vector<double>& omega() const { return omega_; }
    double ts() const { return ts_; }
    int size() const { return static_cast<int>(omega_.size()); }
    double hz(int k) const { return omega_[static_cast<size_t>(k)] / (2.0 * M_PI * ts_); }
    static double hz_to_omega(double f, double ts) { return 2.0 * M_PI * f * ts; }

    // Index of the grid point closest to the given frequency.
    int nearest(double omega) const;

    bool operator==(const FrequencyGrid& o) const { return omega_ == o.omega_ && ts_ == o.ts_; }

private:
    std::vector<double> omega_;
    double ts_;
};

// Complex n_y x n_u response sampled on a frequency grid.
class FrfMatrix {
public:
    FrfMatrix(FrequencyGrid grid, std::vector<Eigen::MatrixXcd> data);

    const FrequencyGrid& grid() const { return grid_; }
    const Eigen::MatrixXcd& at(int k) const { return data_[static_cast<size_t>(k)]; }
    Eigen::MatrixXcd& at(int k) { return data_[static_cast<size_t>(k)]; }
    int ny() const { return static_cast<int>(data_.front().rows()); }
    int nu() const { return static_cast<int>(data_.front().cols()); }
    int npoints() const { return grid_.size(); }

    void write_csv(std::ostream& os) const;
    static FrfMatrix read_csv(std::istream& is, double ts);
    std::string to_json() const;
    static FrfMatrix from_json(const std::string& text);

private:
    FrequencyGrid grid_;
    std::vector<Eigen::MatrixXcd> data_;
};

struct InteractionReport {
    std::vector<Eigen::MatrixXcd> E;   // diag(frf)^-1 (frf - diag(frf)) per grid point
    std::vector<double> sigma;         // max singular value of E per grid point
    double max_sigma = 0.0;
    double threshold = 0.1;
    bool decoupled = false;
};

struct DecouplingTransform {
    Eigen::MatrixXd Tu;
    double omega0 = 0.0;
    double condition_number = 0.0;
};

// Normalized interaction of the raw FRF: E(w) = diag(frf)^-1 (frf - diag(frf)).
InteractionReport interaction_measure(const FrfMatrix& frf, double threshold = 0.1);

// Static input transform from real-part alignment at anchor omega0, columns
// normalized to unit max-absolute entry.
DecouplingTransform static_decoupling(const FrfMatrix& frf_of_Go, double omega0);

// frf right-multiplied by a static matrix (used for G = Go * Tu).
FrfMatrix apply_input_transform(const FrfMatrix& frf, const Eigen::MatrixXd& Tu);

}  // namespace milc
