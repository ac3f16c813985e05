#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "milc/frf.hpp"

namespace milc {

// Open conditions "x < y" are checked with a fixed numerical margin.
inline bool strictly_less(double lhs, double rhs) { return lhs <= rhs - 1e-9; }

// Per-frequency factorization of the iteration matrix M = I - LJ into its
// diagonal part and normalized interaction: M = Md (I + E).
struct IterationFactors {
    FrequencyGrid grid;
    std::vector<Eigen::MatrixXcd> M;
    std::vector<Eigen::VectorXcd> Md;   // diagonal of M
    std::vector<Eigen::MatrixXcd> E;    // Md^-1 (M - Md), zero diagonal

    int n() const { return static_cast<int>(Md.front().size()); }
};

IterationFactors factorize(const FrfMatrix& L_resp, const FrfMatrix& J_frf);

struct SpectralRadiusResult {
    std::vector<double> rho;  // rho(Q(I-LJ)) per grid point
    bool convergent = false;
};

struct MonotonicResult {
    std::vector<double> sigma;  // max singular value per grid point
    double gamma = 0.0;         // max over grid
    bool monotone = false;
};

SpectralRadiusResult check_convergence_thm1(const FrfMatrix& Q_resp, const FrfMatrix& L_resp,
                                            const FrfMatrix& J_frf);
MonotonicResult check_monotonic_thm2(const FrfMatrix& Q_resp, const FrfMatrix& L_resp,
                                     const FrfMatrix& J_frf);

// Maximal admissible |q_d| per grid point for convergence and monotonic
// convergence when Q = q_d I; +inf where rho or sigma is zero.
struct QdBounds {
    std::vector<double> convergent;  // 1 / rho(I-LJ)
    std::vector<double> monotone;    // 1 / sigma_max(I-LJ)
};
QdBounds qd_feasible_bound(const FrfMatrix& L_resp, const FrfMatrix& J_frf);

// Right-hand sides of the row-sum, column-sum and monotone induced-norm
// bounds; [grid point][loop].
struct GershgorinBounds {
    std::vector<Eigen::VectorXd> row_sum;    // 1 / sum_j |I+E|_ij
    std::vector<Eigen::VectorXd> col_sum;    // 1 / sum_j |I+E|_ji
    std::vector<Eigen::VectorXd> monotone;   // 1 / sqrt(sum_j |(I+E)(I+E)^H|_ij)
};
GershgorinBounds gershgorin_bounds_thm4(const IterationFactors& factors);

// Upper bound on the structured singular value for the diagonal complex
// structure, via diagonal scaling: rho(A) <= mu <= sigma_max(A).
struct MuResult {
    double mu = 0.0;
    bool converged = true;  // false when the scaling iteration hit its cap
};
MuResult mu_upper_diag(const Eigen::MatrixXcd& A);

// Right-hand sides of the SSV conditions (loop independent).
struct SsvBounds {
    std::vector<double> convergent;  // 1 / mu(I+E)
    std::vector<double> monotone;    // 1 / sqrt(mu((I+E)(I+E)^H))
    bool mu_warning = false;
};
SsvBounds ssv_bounds_thm5(const IterationFactors& factors);

// Which criterion certified each frequency, if any.
enum class Criterion { None, Eq20, Eq21, Eq24 };
enum class MonCriterion { None, Eq22, Eq25 };
const char* criterion_name(Criterion c);
const char* criterion_name(MonCriterion c);

struct JointCheck {
    std::vector<Criterion> conv_label;     // per grid point
    std::vector<MonCriterion> mon_label;   // per grid point
    bool convergent = false;
    bool monotone = false;
    int worst_index = 0;  // grid index with the smallest certification margin
};

// Joint per-frequency evaluation: a frequency is certified when at least one
// criterion holds for all loops simultaneously. q_of_loop[i] holds |q_i| per
// grid point.
JointCheck joint_condition_check(const IterationFactors& factors,
                                 const std::vector<std::vector<double>>& q_of_loop);

// Full per-frequency report with all criteria, margins and verdicts.
struct ConvergenceReport {
    FrequencyGrid grid;
    std::vector<double> rho;
    std::vector<double> sigma;
    std::vector<Eigen::VectorXd> qM_abs;  // |q_i M_ii| per grid point
    GershgorinBounds gersh;
    SsvBounds ssv;
    JointCheck joint;
    SpectralRadiusResult thm1;
    MonotonicResult thm2;
    double gamma = 0.0;
    double worst_omega = 0.0;
    double min_margin = 0.0;  // min over grid of (best RHS - LHS)

    void write_csv(std::ostream& os) const;
    std::string summary_json() const;
};

// Q_resp must be diagonal for the per-loop criteria to apply.
ConvergenceReport build_report(const FrfMatrix& Q_resp, const FrfMatrix& L_resp,
                               const FrfMatrix& J_frf);

}  // namespace milc
