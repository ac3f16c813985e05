#include "milc/sim.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <ostream>

// Matrix-free operator wrapper so Eigen's iterative solvers can run on the
// lifted iteration map without materializing it (Eigen matrix-free idiom).
class MilcFreeOperator;
namespace Eigen {
namespace internal {
template <>
struct traits<MilcFreeOperator>
    : public Eigen::internal::traits<Eigen::SparseMatrix<double>> {};
}  // namespace internal
}  // namespace Eigen

class MilcFreeOperator : public Eigen::EigenBase<MilcFreeOperator> {
public:
    typedef double Scalar;
    typedef double RealScalar;
    typedef int StorageIndex;
    enum {
        ColsAtCompileTime = Eigen::Dynamic,
        MaxColsAtCompileTime = Eigen::Dynamic,
        IsRowMajor = false
    };
    Index rows() const { return dim; }
    Index cols() const { return dim; }
    template <typename Rhs>
    Eigen::Product<MilcFreeOperator, Rhs, Eigen::AliasFreeProduct> operator*(
        const Eigen::MatrixBase<Rhs>& x) const {
        return Eigen::Product<MilcFreeOperator, Rhs, Eigen::AliasFreeProduct>(*this,
                                                                              x.derived());
    }
    Index dim = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> op;
};

namespace Eigen {
namespace internal {
template <typename Rhs>
struct generic_product_impl<MilcFreeOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<MilcFreeOperator, Rhs,
                                generic_product_impl<MilcFreeOperator, Rhs>> {
    typedef typename Product<MilcFreeOperator, Rhs>::Scalar Scalar;
    template <typename Dest>
    static void scaleAndAddTo(Dest& dst, const MilcFreeOperator& lhs, const Rhs& rhs,
                              const Scalar& alpha) {
        Eigen::VectorXd x = rhs;
        dst += alpha * lhs.op(x);
    }
};
}  // namespace internal
}  // namespace Eigen

namespace milc {

namespace {

// Difference-equation pass of one causal rational entry, zero initial state.
Eigen::VectorXd filter_entry(const std::vector<double>& num, const std::vector<double>& den,
                             const Eigen::VectorXd& u) {
    long m = static_cast<long>(den.size()) - 1;
    long p = static_cast<long>(num.size()) - 1;
    long delay = m - p;  // input delay from relative degree
    double a0 = den.front();
    long N = u.size();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(N);
    for (long t = 0; t < N; ++t) {
        double acc = 0.0;
        for (long k = 0; k <= p; ++k) {
            long idx = t - delay - k;
            if (idx >= 0 && idx < N) acc += num[static_cast<size_t>(k)] * u(idx);
        }
        for (long k = 1; k <= m; ++k)
            if (t - k >= 0) acc -= den[static_cast<size_t>(k)] * y(t - k);
        y(t) = acc / a0;
    }
    return y;
}

struct EntryCoeffs {
    std::vector<double> num, den;
    bool zero = false;
};

}  // namespace

LiftedOperator::LiftedOperator(long N, int n,
                               std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fwd,
                               std::function<Eigen::VectorXd(const Eigen::VectorXd&)> adj)
    : N_(N), n_(n), fwd_(std::move(fwd)), adj_(std::move(adj)) {
    if (N_ < 1) throw DimensionMismatch("LiftedOperator: horizon must be >= 1");
    if (dim() <= kDenseLimit) {
        dense_.resize(dim(), dim());
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim());
        for (long k = 0; k < dim(); ++k) {
            e(k) = 1.0;
            dense_.col(k) = fwd_(e);
            e(k) = 0.0;
        }
    }
}

const Eigen::MatrixXd& LiftedOperator::dense() const {
    if (!is_dense()) throw MilcError("LiftedOperator: dense form not materialized");
    return dense_;
}

Eigen::VectorXd LiftedOperator::apply(const Eigen::VectorXd& u) const {
    if (u.size() != dim()) throw DimensionMismatch("LiftedOperator::apply: size mismatch");
    if (is_dense()) return dense_ * u;
    return fwd_(u);
}

Eigen::VectorXd LiftedOperator::apply_transpose(const Eigen::VectorXd& v) const {
    if (v.size() != dim())
        throw DimensionMismatch("LiftedOperator::apply_transpose: size mismatch");
    if (is_dense()) return dense_.transpose() * v;
    return adj_(v);
}

Eigen::MatrixXd LiftedOperator::apply(const Eigen::MatrixXd& u) const {
    return unstack_channels(apply(stack_channels(u)), n_);
}

Eigen::VectorXd stack_channels(const Eigen::MatrixXd& sig) {
    long n = sig.rows(), N = sig.cols();
    Eigen::VectorXd v(n * N);
    for (long i = 0; i < n; ++i) v.segment(i * N, N) = sig.row(i).transpose();
    return v;
}

Eigen::MatrixXd unstack_channels(const Eigen::VectorXd& v, int n) {
    long N = v.size() / n;
    Eigen::MatrixXd sig(n, N);
    for (long i = 0; i < n; ++i) sig.row(i) = v.segment(i * N, N).transpose();
    return sig;
}

LiftedOperator LiftedOperator::lift(const TransferMatrix& tm, long N) {
    if (tm.ny() != tm.nu()) throw DimensionMismatch("lift: square TransferMatrix required");
    int n = tm.ny();
    auto coeffs = std::make_shared<std::vector<EntryCoeffs>>();
    coeffs->reserve(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            RationalTransfer h = tm.at(i, j).simplified();
            if (!h.causal())
                throw MilcError("lift: entry (" + std::to_string(i + 1) + "," +
                                std::to_string(j + 1) + ") is non-causal");
            for (const Complex& p : h.poles())
                if (std::abs(p) >= 1.0 - 1e-9)
                    throw UnstableOperator("lift: pole at |z| = " +
                                           std::to_string(std::abs(p)));
            EntryCoeffs ec;
            ec.num = h.num().coeffs();
            ec.den = h.den().coeffs();
            ec.zero = h.num().is_zero();
            coeffs->push_back(std::move(ec));
        }
    auto fwd = [coeffs, n, N](const Eigen::VectorXd& u) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(u.size());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const EntryCoeffs& ec = (*coeffs)[static_cast<size_t>(i * n + j)];
                if (ec.zero) continue;
                y.segment(i * N, N) += filter_entry(ec.num, ec.den, u.segment(j * N, N));
            }
        return y;
    };
    // transpose of a causal Toeplitz block is the time-reversed filter of the
    // transposed entry: (H^T v)_j = rev(h_ij * rev(v_i))
    auto adj = [coeffs, n, N](const Eigen::VectorXd& v) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(v.size());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const EntryCoeffs& ec = (*coeffs)[static_cast<size_t>(i * n + j)];
                if (ec.zero) continue;
                Eigen::VectorXd rv = v.segment(i * N, N).reverse();
                y.segment(j * N, N) += filter_entry(ec.num, ec.den, rv).reverse().eval();
            }
        return y;
    };
    return LiftedOperator(N, n, std::move(fwd), std::move(adj));
}

LiftedOperator LiftedOperator::lift(const StateSpace& ss, long N) {
    if (!ss.discrete) throw MilcError("lift: discrete state space required");
    if (ss.ny() != ss.nu()) throw DimensionMismatch("lift: square system required");
    Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(ss.A).eigenvalues();
    for (long i = 0; i < eig.size(); ++i)
        if (std::abs(eig(i)) >= 1.0 - 1e-9)
            throw UnstableOperator("lift: state-space pole at |z| = " +
                                   std::to_string(std::abs(eig(i))));
    int n = ss.ny();
    auto run = [N](const StateSpace& s, const Eigen::VectorXd& u) {
        int nch = s.ny();
        Eigen::VectorXd y(nch * N);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(s.order());
        Eigen::VectorXd uk(nch);
        for (long k = 0; k < N; ++k) {
            for (int i = 0; i < nch; ++i) uk(i) = u(i * N + k);
            Eigen::VectorXd yk = s.C * x + s.D * uk;
            for (int i = 0; i < nch; ++i) y(i * N + k) = yk(i);
            x = s.A * x + s.B * uk;
        }
        return y;
    };
    auto sp = std::make_shared<StateSpace>(ss);
    auto fwd = [sp, run](const Eigen::VectorXd& u) { return run(*sp, u); };
    // transpose acts as the transposed system run in reversed time
    auto spt = std::make_shared<StateSpace>(ss.A.transpose(), ss.C.transpose(),
                                            ss.B.transpose(), ss.D.transpose(), true, ss.ts);
    auto adj = [spt, run, n, N](const Eigen::VectorXd& v) {
        Eigen::VectorXd rv(v.size());
        for (int i = 0; i < n; ++i)
            rv.segment(i * N, N) = v.segment(i * N, N).reverse();
        Eigen::VectorXd y = run(*spt, rv);
        for (int i = 0; i < n; ++i)
            y.segment(i * N, N) = y.segment(i * N, N).reverse().eval();
        return y;
    };
    return LiftedOperator(N, n, std::move(fwd), std::move(adj));
}

LiftedOperator LiftedOperator::lift(const NoncausalFir& fir, long N) {
    int n = fir.n();
    auto f = std::make_shared<NoncausalFir>(fir);
    auto fwd = [f, n](const Eigen::VectorXd& u) {
        return stack_channels(f->apply(unstack_channels(u, n)));
    };
    // transposed FIR: entries swapped, taps reversed in lag
    std::vector<std::vector<Eigen::VectorXd>> ttaps(
        static_cast<size_t>(n), std::vector<Eigen::VectorXd>(static_cast<size_t>(n)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            ttaps[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                fir.taps(j, i).reverse();
    auto ft = std::make_shared<NoncausalFir>(std::move(ttaps), fir.preview(), fir.ts());
    auto adj = [ft, n](const Eigen::VectorXd& v) {
        return stack_channels(ft->apply(unstack_channels(v, n)));
    };
    return LiftedOperator(N, n, std::move(fwd), std::move(adj));
}

LiftedOperator LiftedOperator::zero_phase(const std::vector<ZeroPhaseFilter>& q, long N) {
    int n = static_cast<int>(q.size());
    auto filt = std::make_shared<std::vector<ZeroPhaseFilter>>(q);
    // forward-backward filtering is symmetric in lifted form
    auto fwd = [filt, n, N](const Eigen::VectorXd& u) {
        Eigen::VectorXd y(u.size());
        for (int i = 0; i < n; ++i)
            y.segment(i * N, N) =
                (*filt)[static_cast<size_t>(i)].filter_zero_phase(u.segment(i * N, N));
        return y;
    };
    return LiftedOperator(N, n, fwd, fwd);
}

LiftedOperator LiftedOperator::identity(int n, long N) {
    auto id = [](const Eigen::VectorXd& u) { return u; };
    return LiftedOperator(N, n, id, id);
}

QApply q_apply_of(const IlcDesign& design) {
    std::vector<ZeroPhaseFilter> q = design.Q;
    if (q.empty())  // empty Q list means Q = I
        return [](const Eigen::MatrixXd& u) { return u; };
    return [q](const Eigen::MatrixXd& u) {
        Eigen::MatrixXd y(u.rows(), u.cols());
        for (long i = 0; i < u.rows(); ++i)
            y.row(i) =
                q[static_cast<size_t>(i)].filter_zero_phase(u.row(i).transpose()).transpose();
        return y;
    };
}

std::vector<TrialRecord> run_trials(const QApply& qop, const NoncausalFir& L,
                                    const LiftedOperator& S_lift, const LiftedOperator& J_lift,
                                    const Eigen::MatrixXd& r, int trials,
                                    const Eigen::MatrixXd* f0) {
    int n = J_lift.channels();
    long N = J_lift.horizon();
    if (r.rows() != n || r.cols() != N)
        throw DimensionMismatch("run_trials: reference must be n x N");
    Eigen::MatrixXd f = f0 ? *f0 : Eigen::MatrixXd::Zero(n, N);
    Eigen::MatrixXd sr = S_lift.apply(r);
    std::vector<TrialRecord> out;
    for (int j = 0; j < trials; ++j) {
        TrialRecord rec;
        rec.trial = j;
        rec.f = f;
        rec.e = sr - J_lift.apply(f);
        rec.e_norm_F = rec.e.norm();
        if (!std::isfinite(rec.e_norm_F) || rec.e_norm_F > 1e12) {
            rec.diverged = true;
            out.push_back(std::move(rec));
            break;
        }
        f = qop(f + L.apply(rec.e));
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<TrialRecord> run_trials(const IlcDesign& design, const LiftedOperator& S_lift,
                                    const LiftedOperator& J_lift, const Eigen::MatrixXd& r,
                                    int trials, const Eigen::MatrixXd* f0) {
    return run_trials(q_apply_of(design), design.L, S_lift, J_lift, r, trials, f0);
}

namespace {

// T f = Q (f - L J f); transpose uses the symmetric Q and the FIR transpose.
struct IterationOp {
    const QApply& qop;
    const NoncausalFir& L;
    const LiftedOperator& J;
    NoncausalFir Lt;

    IterationOp(const QApply& q, const NoncausalFir& l, const LiftedOperator& j)
        : qop(q), L(l), J(j), Lt(transpose_fir(l)) {}

    static NoncausalFir transpose_fir(const NoncausalFir& l) {
        int n = l.n();
        std::vector<std::vector<Eigen::VectorXd>> t(
            static_cast<size_t>(n), std::vector<Eigen::VectorXd>(static_cast<size_t>(n)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                t[static_cast<size_t>(i)][static_cast<size_t>(j)] = l.taps(j, i).reverse();
        return NoncausalFir(std::move(t), l.preview(), l.ts());
    }

    Eigen::MatrixXd fwd(const Eigen::MatrixXd& f) const { return qop(f - L.apply(J.apply(f))); }
    Eigen::MatrixXd adj(const Eigen::MatrixXd& v) const {
        Eigen::MatrixXd qv = qop(v);
        return qv - unstack_channels(
                        J.apply_transpose(stack_channels(Lt.apply(qv))), J.channels());
    }
};

double power_iteration_rho(const IterationOp& op, int n, long N, int iters) {
    Eigen::MatrixXd x(n, N);
    for (long i = 0; i < n; ++i)
        for (long k = 0; k < N; ++k) x(i, k) = std::cos(0.7 * (i + 1) * (k + 1));
    x /= x.norm();
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        Eigen::MatrixXd y = op.fwd(x);
        lambda = y.norm();
        if (lambda < 1e-300) return 0.0;
        x = y / lambda;
    }
    return lambda;
}

}  // namespace

double lifted_gamma(const QApply& qop, const NoncausalFir& L, const LiftedOperator& J_lift,
                    int iters) {
    IterationOp op(qop, L, J_lift);
    int n = J_lift.channels();
    long N = J_lift.horizon();
    Eigen::MatrixXd x(n, N);
    for (long i = 0; i < n; ++i)
        for (long k = 0; k < N; ++k) x(i, k) = std::sin(0.3 * (i + 1) * (k + 1)) + 0.1;
    x /= x.norm();
    double s2 = 0.0;
    for (int it = 0; it < iters; ++it) {
        Eigen::MatrixXd y = op.adj(op.fwd(x));
        s2 = y.norm();
        if (s2 < 1e-300) return 0.0;
        x = y / s2;
    }
    return std::sqrt(s2);
}

double lifted_gamma(const IlcDesign& design, const LiftedOperator& J_lift, int iters) {
    return lifted_gamma(q_apply_of(design), design.L, J_lift, iters);
}

FixedPoint fixed_points(const QApply& qop, const NoncausalFir& L, const LiftedOperator& S_lift,
                        const LiftedOperator& J_lift, const Eigen::MatrixXd& r) {
    int n = J_lift.channels();
    long N = J_lift.horizon();
    IterationOp op(qop, L, J_lift);

    double rho = power_iteration_rho(op, n, N, 200);
    if (rho >= 1.0)
        throw NonContractive("fixed_points: lifted spectral radius estimate " +
                             std::to_string(rho) + " >= 1");

    Eigen::MatrixXd sr = S_lift.apply(r);
    Eigen::MatrixXd c = qop(L.apply(sr));  // Q L S r
    FixedPoint fp;
    double cnorm = std::max(c.norm(), 1e-300);

    if (J_lift.dim() <= LiftedOperator::kDenseLimit) {
        long d = J_lift.dim();
        Eigen::MatrixXd T(d, d);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        for (long k = 0; k < d; ++k) {
            e(k) = 1.0;
            T.col(k) = stack_channels(op.fwd(unstack_channels(e, n)));
            e(k) = 0.0;
        }
        Eigen::VectorXd cv = stack_channels(c);
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) - T;
        Eigen::VectorXd fv = A.partialPivLu().solve(cv);
        fp.residual = (A * fv - cv).norm() / cnorm;
        fp.f_inf = unstack_channels(fv, n);
        fp.iterations = 0;
    } else {
        Eigen::VectorXd cv = stack_channels(c);
        MilcFreeOperator A;
        A.dim = J_lift.dim();
        A.op = [&](const Eigen::VectorXd& x) {
            return (x - stack_channels(op.fwd(unstack_channels(x, n)))).eval();
        };
        Eigen::BiCGSTAB<MilcFreeOperator, Eigen::IdentityPreconditioner> solver;
        solver.setTolerance(1e-12);
        solver.setMaxIterations(20000);
        solver.compute(A);
        Eigen::VectorXd fv = solver.solveWithGuess(cv, cv);
        int it = static_cast<int>(solver.iterations());
        double res = (A.op(fv) - cv).norm() / cnorm;
        // contraction polishing in case the Krylov solve stalled short of target
        Eigen::MatrixXd f = unstack_channels(fv, n);
        int polish = 0;
        while (res > 1e-10 && polish < 5000) {
            f = op.fwd(f) + c;
            res = (stack_channels(f) - stack_channels(op.fwd(f)) - stack_channels(c)).norm() /
                  cnorm;
            ++polish;
        }
        if (res > 1e-10)
            throw NonContractive("fixed_points: iterative solve stalled at residual " +
                                 std::to_string(res));
        fp.f_inf = f;
        fp.residual = res;
        fp.iterations = it + polish;
    }
    fp.e_inf = sr - J_lift.apply(fp.f_inf);
    return fp;
}

FixedPoint fixed_points(const IlcDesign& design, const LiftedOperator& S_lift,
                        const LiftedOperator& J_lift, const Eigen::MatrixXd& r) {
    return fixed_points(q_apply_of(design), design.L, S_lift, J_lift, r);
}

MonotoneAudit monotonicity_audit(std::vector<TrialRecord>& records, const Eigen::MatrixXd& f_inf,
                                 double gamma_lift, double tol) {
    MonotoneAudit audit;
    audit.gamma_lift = gamma_lift;
    for (auto& rec : records) rec.f_dist_to_fixed = (f_inf - rec.f).norm();
    audit.monotone = true;
    for (size_t j = 0; j + 1 < records.size(); ++j) {
        double d0 = records[j].f_dist_to_fixed;
        double d1 = records[j + 1].f_dist_to_fixed;
        if (d0 < 1e-12) continue;
        double ratio = d1 / d0;
        audit.ratios.push_back(ratio);
        if (ratio > gamma_lift + tol) audit.monotone = false;
    }
    return audit;
}

void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
    os << "trial, e_norm_F, f_dist_to_fixed, diverged\n";
    for (const auto& rec : records)
        os << rec.trial << ", " << rec.e_norm_F << ", " << rec.f_dist_to_fixed << ", "
           << (rec.diverged ? 1 : 0) << "\n";
}

void write_trial_signals_csv(std::ostream& os, const TrialRecord& rec) {
    long n = rec.e.rows(), N = rec.e.cols();
    os << "k";
    for (long i = 1; i <= n; ++i) os << ", e_" << i;
    for (long i = 1; i <= n; ++i) os << ", f_" << i;
    os << "\n";
    for (long k = 0; k < N; ++k) {
        os << k;
        for (long i = 0; i < n; ++i) os << ", " << rec.e(i, k);
        for (long i = 0; i < n; ++i) os << ", " << rec.f(i, k);
        os << "\n";
    }
}

}  // namespace milc
