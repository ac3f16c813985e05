#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "milc/analysis.hpp"
#include "milc/frf.hpp"
#include "milc/lti.hpp"

namespace milc {

// Two-sided FIR filter matrix: taps h(-K..K) per entry.
class NoncausalFir {
public:
    // taps[i][j] has length 2K+1, index k+K for tap at lag k.
    NoncausalFir(std::vector<std::vector<Eigen::VectorXd>> taps, int preview, double ts);

    static NoncausalFir identity(int n, double ts);
    static NoncausalFir single_tap(int n, int lag, double ts);  // advance (lag<0) or delay

    int n() const { return static_cast<int>(taps_.size()); }
    int preview() const { return preview_; }
    double ts() const { return ts_; }
    const Eigen::VectorXd& taps(int i, int j) const {
        return taps_[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    double fit_error() const { return fit_error_; }
    void set_fit_error(double e) { fit_error_ = e; }

    Complex eval_entry(int i, int j, double omega) const;  // sum h(k) e^{-i w k}
    FrfMatrix response(const FrequencyGrid& grid) const;

    // y = H * u with zero padding outside [0, N); u, y channel-major (n x N).
    Eigen::MatrixXd apply(const Eigen::MatrixXd& u) const;

private:
    std::vector<std::vector<Eigen::VectorXd>> taps_;
    int preview_;
    double ts_;
    double fit_error_ = 0.0;
};

// Zero-phase low-pass: squared magnitude of a Butterworth prototype
// (forward-backward application in the time domain).
class ZeroPhaseFilter {
public:
    ZeroPhaseFilter(double fc_hz, double ts, int order = 1);

    double fc() const { return fc_; }
    double ts() const { return ts_; }
    int order() const { return order_; }

    // Real response in (0, 1]; exactly 1 at omega = 0.
    double response(double omega) const;

    // Forward pass of the causal prototype, zero initial state.
    Eigen::VectorXd filter_forward(const Eigen::VectorXd& x) const;
    // Forward-backward (zero-phase) application with zero edge extension.
    Eigen::VectorXd filter_zero_phase(const Eigen::VectorXd& x) const;

private:
    double fc_, ts_;
    int order_;
    // cascaded sections; first order: b0 (z+1)/(z - a)
    struct Section { double b0, b1, b2, a1, a2; };
    std::vector<Section> sections_;
};

enum class DesignMode { NaiveSiso, RobustMultiloop, Decentralized, Centralized };
enum class TuneTarget { Convergent, Monotone };
const char* mode_name(DesignMode m);

struct IlcDesign {
    NoncausalFir L;
    std::vector<ZeroPhaseFilter> Q;  // one per loop; identical entries for q_d * I
    DesignMode mode;
    std::optional<ConvergenceReport> report;

    int n() const { return L.n(); }
    FrfMatrix q_response(const FrequencyGrid& grid) const;
    std::string to_json() const;
    static IlcDesign from_json(const std::string& text);
};

DesignMode mode_from_name(const std::string& name);

struct SynthesisOptions {
    int preview = 200;           // K
    double regularization = 1e-8;
    TuneTarget target = TuneTarget::Monotone;
    int q_order = 1;
    int inversion_grid = 4097;   // uniform points on [0, pi] for the FIR fit
    double max_fit_error = std::numeric_limits<double>::infinity();
};

// Regularized frequency-pointwise inverse fitted to a two-sided FIR by
// inverse discrete Fourier synthesis. The target grid must be uniform on
// [0, pi] including both endpoints.
NoncausalFir invert_frf_to_fir(const FrfMatrix& target, int preview, double regularization,
                               double max_fit_error = std::numeric_limits<double>::infinity());

ZeroPhaseFilter design_zero_phase(double fc_hz, double ts, int order = 1);

// Largest cut-off (0.1 Hz bisection) keeping |q_d| below the per-frequency
// feasible bound from the Q = q_d I corollary.
struct QdTuning {
    double fc = 0.0;
    IlcDesign design;
};
QdTuning autotune_qd(const NoncausalFir& L, const FrfMatrix& J_frf, TuneTarget target,
                     int q_order = 1);

// Coordinate ascent over per-loop cut-offs keeping the joint per-frequency
// condition satisfied; deterministic loop order 1..n.
struct DecentralizedTuning {
    std::vector<double> fc;
    IlcDesign design;
};
DecentralizedTuning autotune_decentralized(const NoncausalFir& L, const FrfMatrix& J_frf,
                                           TuneTarget target, int q_order = 1);

struct DesignModels {
    std::optional<TransferMatrix> full;                 // MIMO parametric model
    std::optional<std::vector<RationalTransfer>> diag;  // per-loop SISO models
    // alternative: the model pre-sampled on the uniform inversion grid
    // (used for state-space models whose entrywise rational form is fragile);
    // the diagonal entries double as the per-loop SISO models
    std::optional<FrfMatrix> full_frf;
};

IlcDesign build_design(DesignMode mode, const DesignModels& models, const FrfMatrix& J_frf,
                       const SynthesisOptions& opts = {});

}  // namespace milc
