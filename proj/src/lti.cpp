#include "milc/lti.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace milc {

namespace {

// Multiset root cancellation: removes pairs of numerator/denominator roots
// closer than tol (scaled by root magnitude).
void cancel_roots(std::vector<Complex>& nr, std::vector<Complex>& dr, double tol) {
    for (size_t i = 0; i < nr.size();) {
        size_t best = dr.size();
        double best_d = std::numeric_limits<double>::max();
        for (size_t j = 0; j < dr.size(); ++j) {
            double d = std::abs(nr[i] - dr[j]);
            if (d < best_d) { best_d = d; best = j; }
        }
        double scale = std::max(1.0, std::abs(nr[i]));
        if (best < dr.size() && best_d <= tol * scale) {
            dr.erase(dr.begin() + static_cast<long>(best));
            nr.erase(nr.begin() + static_cast<long>(i));
        } else {
            ++i;
        }
    }
}

}  // namespace

RationalTransfer::RationalTransfer(Polynomial num, Polynomial den, double ts)
    : num_(std::move(num)), den_(std::move(den)), ts_(ts) {
    if (ts_ <= 0.0) throw MilcError("RationalTransfer: Ts must be positive");
    if (den_.is_zero() || den_.leading() == 0.0)
        throw MilcError("RationalTransfer: leading denominator coefficient must be nonzero");
    // keep denominator monic
    double lead = den_.leading();
    num_ = num_ * (1.0 / lead);
    den_ = den_ * (1.0 / lead);
}

Complex RationalTransfer::eval(Complex z) const {
    return num_.eval(z) / den_.eval(z);
}

RationalTransfer RationalTransfer::simplified(double tol) const {
    if (num_.is_zero()) return RationalTransfer(Polynomial(), Polynomial::constant(1.0), ts_);
    std::vector<Complex> nr = num_.roots();
    std::vector<Complex> dr = den_.roots();
    size_t before = dr.size();
    cancel_roots(nr, dr, tol);
    if (dr.size() == before) return *this;
    return RationalTransfer(Polynomial::from_roots(nr, num_.leading()),
                            Polynomial::from_roots(dr, den_.leading()), ts_);
}

RationalTransfer RationalTransfer::operator+(const RationalTransfer& rhs) const {
    return RationalTransfer(num_ * rhs.den_ + rhs.num_ * den_, den_ * rhs.den_, ts_).simplified();
}

RationalTransfer RationalTransfer::operator*(const RationalTransfer& rhs) const {
    return RationalTransfer(num_ * rhs.num_, den_ * rhs.den_, ts_).simplified();
}

RationalTransfer RationalTransfer::operator*(double s) const {
    return RationalTransfer(num_ * s, den_, ts_);
}

StateSpace::StateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d,
                       bool discrete_, double ts_)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)),
      discrete(discrete_), ts(ts_) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || C.cols() != A.rows() ||
        D.rows() != C.rows() || D.cols() != B.cols())
        throw DimensionMismatch("StateSpace: inconsistent matrix dimensions");
}

TransferMatrix::TransferMatrix(std::vector<std::vector<RationalTransfer>> entries)
    : entries_(std::move(entries)) {
    if (entries_.empty() || entries_.front().empty())
        throw DimensionMismatch("TransferMatrix: empty");
    double ts0 = entries_.front().front().ts();
    for (const auto& row : entries_) {
        if (row.size() != entries_.front().size())
            throw DimensionMismatch("TransferMatrix: ragged rows");
        for (const auto& e : row)
            if (e.ts() != ts0) throw DimensionMismatch("TransferMatrix: mixed sample times");
    }
}

TransferMatrix TransferMatrix::identity(int n, double ts) {
    std::vector<std::vector<RationalTransfer>> e;
    for (int i = 0; i < n; ++i) {
        std::vector<RationalTransfer> row;
        for (int j = 0; j < n; ++j)
            row.push_back(RationalTransfer::constant(i == j ? 1.0 : 0.0, ts));
        e.push_back(std::move(row));
    }
    return TransferMatrix(std::move(e));
}

TransferMatrix TransferMatrix::diagonal(std::vector<RationalTransfer> diag) {
    int n = static_cast<int>(diag.size());
    double ts = diag.front().ts();
    std::vector<std::vector<RationalTransfer>> e;
    for (int i = 0; i < n; ++i) {
        std::vector<RationalTransfer> row;
        for (int j = 0; j < n; ++j)
            row.push_back(i == j ? diag[static_cast<size_t>(i)]
                                 : RationalTransfer::constant(0.0, ts));
        e.push_back(std::move(row));
    }
    return TransferMatrix(std::move(e));
}

Eigen::MatrixXcd TransferMatrix::eval(Complex z) const {
    Eigen::MatrixXcd m(ny(), nu());
    for (int i = 0; i < ny(); ++i)
        for (int j = 0; j < nu(); ++j) m(i, j) = at(i, j).eval(z);
    return m;
}

std::vector<Complex> TransferMatrix::poles() const {
    std::vector<Complex> out;
    for (int i = 0; i < ny(); ++i)
        for (int j = 0; j < nu(); ++j) {
            auto p = at(i, j).simplified().poles();
            out.insert(out.end(), p.begin(), p.end());
        }
    return out;
}

std::string TransferMatrix::to_json() const {
    nlohmann::json j;
    j["ts"] = ts();
    j["ny"] = ny();
    j["nu"] = nu();
    auto& rows = j["entries"];
    for (int i = 0; i < ny(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < nu(); ++k) {
            row.push_back({{"num", at(i, k).num().coeffs()}, {"den", at(i, k).den().coeffs()}});
        }
        rows.push_back(row);
    }
    return j.dump(2);
}

TransferMatrix TransferMatrix::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    double ts = j.at("ts").get<double>();
    std::vector<std::vector<RationalTransfer>> entries;
    for (const auto& row : j.at("entries")) {
        std::vector<RationalTransfer> r;
        for (const auto& e : row)
            r.emplace_back(e.at("num").get<std::vector<double>>(),
                           e.at("den").get<std::vector<double>>(), ts);
        entries.push_back(std::move(r));
    }
    return TransferMatrix(std::move(entries));
}

FrfMatrix evaluate_frf(const TransferMatrix& sys, const FrequencyGrid& grid) {
    // a grid point is "on a pole" when e^{i omega} is within 1e-9 of an actual
    // denominator root (|den| alone is unreliable for higher-order entries)
    std::vector<std::vector<Complex>> entry_poles;
    for (int i = 0; i < sys.ny(); ++i)
        for (int j = 0; j < sys.nu(); ++j)
            entry_poles.push_back(sys.at(i, j).poles());

    std::vector<Eigen::MatrixXcd> data;
    data.reserve(static_cast<size_t>(grid.size()));
    for (double w : grid.omega()) {
        Complex z = std::polar(1.0, w);
        Eigen::MatrixXcd m(sys.ny(), sys.nu());
        for (int i = 0; i < sys.ny(); ++i)
            for (int j = 0; j < sys.nu(); ++j) {
                const auto& e = sys.at(i, j);
                for (const Complex& p : entry_poles[static_cast<size_t>(i * sys.nu() + j)])
                    if (std::abs(z - p) < 1e-9 || std::abs(conj(z) - p) < 1e-9)
                        throw PoleOnGrid("evaluate_frf: pole at omega=" + std::to_string(w) +
                                         " in entry (" + std::to_string(i + 1) + "," +
                                         std::to_string(j + 1) + ")");
                m(i, j) = e.num().eval(z) / e.den().eval(z);
            }
        data.push_back(std::move(m));
    }
    return FrfMatrix(grid, std::move(data));
}

FrfMatrix evaluate_frf(const RationalTransfer& sys, const FrequencyGrid& grid) {
    return evaluate_frf(TransferMatrix({{sys}}), grid);
}

RationalTransfer rational_determinant(const TransferMatrix& sys) {
    if (sys.ny() != sys.nu()) throw DimensionMismatch("rational_determinant: square required");
    int n = sys.ny();
    double ts = sys.ts();
    if (n == 1) return sys.at(0, 0).simplified();
    // cofactor expansion along the first row
    RationalTransfer det = RationalTransfer::constant(0.0, ts);
    for (int j = 0; j < n; ++j) {
        std::vector<std::vector<RationalTransfer>> minor;
        for (int i = 1; i < n; ++i) {
            std::vector<RationalTransfer> row;
            for (int k = 0; k < n; ++k)
                if (k != j) row.push_back(sys.at(i, k));
            minor.push_back(std::move(row));
        }
        RationalTransfer term = sys.at(0, j) * rational_determinant(TransferMatrix(minor));
        det = det + (j % 2 == 0 ? term : term * -1.0);
    }
    return det.simplified();
}

namespace {

// Adjugate via cofactors (small n only).
TransferMatrix rational_adjugate(const TransferMatrix& sys) {
    int n = sys.ny();
    double ts = sys.ts();
    std::vector<std::vector<RationalTransfer>> adj(
        static_cast<size_t>(n),
        std::vector<RationalTransfer>(static_cast<size_t>(n),
                                      RationalTransfer::constant(0.0, ts)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (n == 1) { adj[0][0] = RationalTransfer::constant(1.0, ts); continue; }
            std::vector<std::vector<RationalTransfer>> minor;
            for (int r = 0; r < n; ++r) {
                if (r == i) continue;
                std::vector<RationalTransfer> row;
                for (int c = 0; c < n; ++c)
                    if (c != j) row.push_back(sys.at(r, c));
                minor.push_back(std::move(row));
            }
            RationalTransfer cof = rational_determinant(TransferMatrix(minor));
            if ((i + j) % 2 != 0) cof = cof * -1.0;
            adj[static_cast<size_t>(j)][static_cast<size_t>(i)] = cof;  // transpose
        }
    return TransferMatrix(std::move(adj));
}

RationalTransfer rational_divide(const RationalTransfer& a, const RationalTransfer& b) {
    return RationalTransfer(a.num() * b.den(), a.den() * b.num(), a.ts()).simplified();
}

TransferMatrix rational_matmul(const TransferMatrix& a, const TransferMatrix& b) {
    if (a.nu() != b.ny()) throw DimensionMismatch("rational_matmul");
    std::vector<std::vector<RationalTransfer>> out;
    for (int i = 0; i < a.ny(); ++i) {
        std::vector<RationalTransfer> row;
        for (int j = 0; j < b.nu(); ++j) {
            RationalTransfer acc = RationalTransfer::constant(0.0, a.ts());
            for (int k = 0; k < a.nu(); ++k) acc = acc + a.at(i, k) * b.at(k, j);
            row.push_back(acc.simplified());
        }
        out.push_back(std::move(row));
    }
    return TransferMatrix(std::move(out));
}

}  // namespace

std::pair<TransferMatrix, TransferMatrix> closed_loop_maps(const TransferMatrix& G,
                                                           const TransferMatrix& C) {
    if (C.ny() != G.nu() || C.nu() != G.ny())
        throw DimensionMismatch("closed_loop_maps: G and C dimensions incompatible");
    if (G.ts() != C.ts()) throw DimensionMismatch("closed_loop_maps: mixed sample times");
    double ts = G.ts();
    int n = G.ny();

    TransferMatrix GC = rational_matmul(G, C);
    std::vector<std::vector<RationalTransfer>> pe;
    for (int i = 0; i < n; ++i) {
        std::vector<RationalTransfer> row;
        for (int j = 0; j < n; ++j) {
            RationalTransfer p = GC.at(i, j);
            if (i == j) p = p + RationalTransfer::constant(1.0, ts);
            row.push_back(p.simplified());
        }
        pe.push_back(std::move(row));
    }
    TransferMatrix P(std::move(pe));

    RationalTransfer det = rational_determinant(P);
    if (det.num().is_zero())
        throw SingularReturnDifference("closed_loop_maps: det(I+GC) is identically zero");

    TransferMatrix adj = rational_adjugate(P);
    std::vector<std::vector<RationalTransfer>> se;
    for (int i = 0; i < n; ++i) {
        std::vector<RationalTransfer> row;
        for (int j = 0; j < n; ++j) row.push_back(rational_divide(adj.at(i, j), det));
        se.push_back(std::move(row));
    }
    TransferMatrix S(std::move(se));
    TransferMatrix J = rational_matmul(S, G);

    const double tol = 1e-9;
    for (const auto* sys : {&S, &J})
        for (Complex p : sys->poles())
            if (std::abs(p) >= 1.0 - tol)
                throw UnstableClosedLoop("closed_loop_maps: pole at |z|=" +
                                         std::to_string(std::abs(p)));
    return {std::move(S), std::move(J)};
}

StateSpace zoh_discretize(const StateSpace& sys, double ts) {
    if (ts <= 0.0) throw MilcError("zoh_discretize: Ts must be positive");
    if (sys.discrete) throw MilcError("zoh_discretize: system already discrete");
    int n = sys.order(), m = sys.nu();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = sys.A * ts;
    aug.topRightCorner(n, m) = sys.B * ts;
    Eigen::MatrixXd e = aug.exp();
    return StateSpace(e.topLeftCorner(n, n), e.topRightCorner(n, m), sys.C, sys.D,
                      /*discrete=*/true, ts);
}

std::vector<TransmissionZero> transmission_zeros(const TransferMatrix& sys) {
    if (sys.ny() != sys.nu())
        throw DimensionMismatch("transmission_zeros: square system required");
    RationalTransfer det = rational_determinant(sys);
    if (det.num().is_zero())
        throw RankDeficient("transmission_zeros: determinant identically zero");
    std::vector<TransmissionZero> out;
    for (Complex z : det.simplified().num().roots())
        out.push_back({z, std::abs(z) < 1.0});
    return out;
}

std::vector<TransmissionZero> transmission_zeros(const StateSpace& sys) {
    if (sys.ny() != sys.nu())
        throw DimensionMismatch("transmission_zeros: square system required");
    int n = sys.order(), m = sys.nu();
    Eigen::MatrixXd M1(n + m, n + m), M2 = Eigen::MatrixXd::Zero(n + m, n + m);
    M1 << sys.A, sys.B, sys.C, sys.D;
    M2.topLeftCorner(n, n).setIdentity();
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(M1, M2, false);
    std::vector<TransmissionZero> out;
    for (long i = 0; i < ges.alphas().size(); ++i) {
        Complex a = ges.alphas()(i);
        double b = ges.betas()(i);
        if (std::abs(b) <= 1e-12 * (1.0 + std::abs(a))) continue;  // zero at infinity
        Complex z = a / b;
        out.push_back({z, std::abs(z) < 1.0});
    }
    return out;
}

FrfMatrix evaluate_frf(const StateSpace& sys, const FrequencyGrid& grid) {
    if (!sys.discrete) throw MilcError("evaluate_frf: discrete state space required");
    std::vector<Eigen::MatrixXcd> data;
    data.reserve(static_cast<size_t>(grid.size()));
    int nx = sys.order();
    Eigen::MatrixXcd bc = sys.B.cast<Complex>();
    for (double w : grid.omega()) {
        Complex z = std::polar(1.0, w);
        Eigen::MatrixXcd zi = z * Eigen::MatrixXcd::Identity(nx, nx) - sys.A;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(zi);
        if (std::abs(lu.determinant()) < 1e-300)
            throw PoleOnGrid("evaluate_frf: pole at omega=" + std::to_string(w));
        data.push_back(sys.C.cast<Complex>() * lu.solve(bc) + sys.D.cast<Complex>());
    }
    return FrfMatrix(grid, std::move(data));
}

TransferMatrix ss_to_transfer_matrix(const StateSpace& sys) {
    if (!sys.discrete) throw MilcError("ss_to_transfer_matrix: discrete system required");
    int n = sys.order();
    // Leverrier-Faddeev: char poly coefficients and adjugate matrix polynomials.
    std::vector<double> a(static_cast<size_t>(n) + 1);
    a[0] = 1.0;
    std::vector<Eigen::MatrixXd> Bk;  // adj(zI - A) = sum Bk[k] z^{n-1-k}
    Eigen::MatrixXd Bprev = Eigen::MatrixXd::Identity(n, n);
    Bk.push_back(Bprev);
    for (int k = 1; k <= n; ++k) {
        Eigen::MatrixXd Ak = sys.A * Bprev;
        a[static_cast<size_t>(k)] = -Ak.trace() / k;
        Bprev = Ak + a[static_cast<size_t>(k)] * Eigen::MatrixXd::Identity(n, n);
        if (k < n) Bk.push_back(Bprev);
    }
    Polynomial den(a);
    std::vector<std::vector<RationalTransfer>> entries;
    for (int i = 0; i < sys.ny(); ++i) {
        std::vector<RationalTransfer> row;
        for (int j = 0; j < sys.nu(); ++j) {
            std::vector<double> numc(static_cast<size_t>(n), 0.0);
            for (int k = 0; k < n; ++k)
                numc[static_cast<size_t>(k)] = sys.C.row(i) * Bk[static_cast<size_t>(k)] * sys.B.col(j);
            Polynomial num(numc);
            num = num + den * sys.D(i, j);
            row.push_back(RationalTransfer(num, den, sys.ts).simplified());
        }
        entries.push_back(std::move(row));
    }
    return TransferMatrix(std::move(entries));
}

}  // namespace milc
