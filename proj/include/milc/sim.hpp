#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "milc/lti.hpp"
#include "milc/synthesis.hpp"

namespace milc {

// Finite-horizon (lifted) form of an operator over N samples and n channels.
// Vectors are channel-major, sample-minor: channel i occupies [i*N, (i+1)*N).
// The dense matrix is materialized only for small horizons; larger operators
// are applied by recursion/convolution without forming the matrix.
class LiftedOperator {
public:
    static constexpr long kDenseLimit = 4096;

    static LiftedOperator lift(const TransferMatrix& tm, long N);
    static LiftedOperator lift(const StateSpace& ss, long N);  // discrete, zero initial state
    static LiftedOperator lift(const NoncausalFir& fir, long N);
    static LiftedOperator zero_phase(const std::vector<ZeroPhaseFilter>& q, long N);
    static LiftedOperator identity(int n, long N);

    long horizon() const { return N_; }
    int channels() const { return n_; }
    long dim() const { return N_ * n_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& v) const;

    // Channel-major matrix forms (n x N in, n x N out).
    Eigen::MatrixXd apply(const Eigen::MatrixXd& u) const;

    bool is_dense() const { return dense_.size() > 0; }
    const Eigen::MatrixXd& dense() const;

private:
    LiftedOperator(long N, int n,
                   std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fwd,
                   std::function<Eigen::VectorXd(const Eigen::VectorXd&)> adj);

    long N_;
    int n_;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fwd_, adj_;
    Eigen::MatrixXd dense_;
};

// Reshape helpers between channel-major stacked vectors and n x N matrices.
Eigen::VectorXd stack_channels(const Eigen::MatrixXd& sig);
Eigen::MatrixXd unstack_channels(const Eigen::VectorXd& v, int n);

struct TrialRecord {
    int trial = 0;
    Eigen::MatrixXd e, f;  // n x N
    double e_norm_F = 0.0;
    double f_dist_to_fixed = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
};

struct FixedPoint {
    Eigen::MatrixXd f_inf, e_inf;  // n x N
    double residual = 0.0;
    int iterations = 0;  // 0 for the dense direct solve
};

struct MonotoneAudit {
    std::vector<double> ratios;  // per trial step, skipped denominators omitted
    double gamma_lift = 0.0;
    bool monotone = false;
};

// Trial-invariant Q applied in the time domain (zero-phase filtering per
// channel for designs; tests may substitute identity or zero). Must be a
// symmetric operator in lifted form for the adjoint-based audits.
using QApply = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

QApply q_apply_of(const IlcDesign& design);

// e_j = S r - J f_j, f_{j+1} = Q (f_j + L e_j), j = 0..trials-1.
// Runs are truncated with a divergence flag once ||e_j||_F exceeds 1e12.
std::vector<TrialRecord> run_trials(const QApply& qop, const NoncausalFir& L,
                                    const LiftedOperator& S_lift, const LiftedOperator& J_lift,
                                    const Eigen::MatrixXd& r, int trials,
                                    const Eigen::MatrixXd* f0 = nullptr);
std::vector<TrialRecord> run_trials(const IlcDesign& design, const LiftedOperator& S_lift,
                                    const LiftedOperator& J_lift, const Eigen::MatrixXd& r,
                                    int trials, const Eigen::MatrixXd* f0 = nullptr);

// sigma_max of the lifted iteration matrix Q(I - LJ), by power iteration on
// T^T T with a deterministic start.
double lifted_gamma(const QApply& qop, const NoncausalFir& L, const LiftedOperator& J_lift,
                    int iters = 300);
double lifted_gamma(const IlcDesign& design, const LiftedOperator& J_lift, int iters = 300);

// Solves (I - Q(I-LJ)) f_inf = Q L S r; dense direct solve below the dense
// limit, otherwise the contraction iteration to relative residual 1e-10.
FixedPoint fixed_points(const QApply& qop, const NoncausalFir& L, const LiftedOperator& S_lift,
                        const LiftedOperator& J_lift, const Eigen::MatrixXd& r);
FixedPoint fixed_points(const IlcDesign& design, const LiftedOperator& S_lift,
                        const LiftedOperator& J_lift, const Eigen::MatrixXd& r);

// Fills f_dist_to_fixed and checks ||f_inf - f_{j+1}|| <= (gamma_lift+tol) ||f_inf - f_j||.
MonotoneAudit monotonicity_audit(std::vector<TrialRecord>& records, const Eigen::MatrixXd& f_inf,
                                 double gamma_lift, double tol = 0.05);

// CSV exports: per-run norms and per-trial signal dumps.
void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records);
void write_trial_signals_csv(std::ostream& os, const TrialRecord& rec);

}  // namespace milc
