#include "milc/synthesis.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/FFT>

namespace milc {

NoncausalFir::NoncausalFir(std::vector<std::vector<Eigen::VectorXd>> taps, int preview, double ts)
    : taps_(std::move(taps)), preview_(preview), ts_(ts) {
    if (taps_.empty() || taps_.front().empty())
        throw DimensionMismatch("NoncausalFir: empty tap grid");
    long len = 2L * preview_ + 1;
    for (const auto& row : taps_) {
        if (row.size() != taps_.size())
            throw DimensionMismatch("NoncausalFir: square tap grid required");
        for (const auto& t : row)
            if (t.size() != len) throw DimensionMismatch("NoncausalFir: tap length != 2K+1");
    }
}

NoncausalFir NoncausalFir::identity(int n, double ts) {
    return single_tap(n, 0, ts);
}

NoncausalFir NoncausalFir::single_tap(int n, int lag, double ts) {
    int k = std::abs(lag);
    std::vector<std::vector<Eigen::VectorXd>> taps(
        static_cast<size_t>(n),
        std::vector<Eigen::VectorXd>(static_cast<size_t>(n),
                                     Eigen::VectorXd::Zero(2 * k + 1)));
    for (int i = 0; i < n; ++i) taps[static_cast<size_t>(i)][static_cast<size_t>(i)](lag + k) = 1.0;
    return NoncausalFir(std::move(taps), k, ts);
}

Complex NoncausalFir::eval_entry(int i, int j, double omega) const {
    const Eigen::VectorXd& h = taps(i, j);
    Complex acc = 0.0;
    for (int k = -preview_; k <= preview_; ++k)
        acc += h(k + preview_) * std::polar(1.0, -omega * k);
    return acc;
}

FrfMatrix NoncausalFir::response(const FrequencyGrid& grid) const {
    std::vector<Eigen::MatrixXcd> data;
    data.reserve(static_cast<size_t>(grid.size()));
    for (double w : grid.omega()) {
        Eigen::MatrixXcd m(n(), n());
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j) m(i, j) = eval_entry(i, j, w);
        data.push_back(std::move(m));
    }
    return FrfMatrix(grid, std::move(data));
}

Eigen::MatrixXd NoncausalFir::apply(const Eigen::MatrixXd& u) const {
    if (u.rows() != n()) throw DimensionMismatch("NoncausalFir::apply: channel count mismatch");
    long N = u.cols();
    long L = 2L * preview_ + 1;
    // FFT-based linear convolution with zero extension outside [0, N); the
    // padded length makes circular wrap-around vanish exactly.
    long nfft = 1;
    while (nfft < N + L - 1) nfft <<= 1;
    Eigen::FFT<double> fft;
    std::vector<Eigen::VectorXcd> U(static_cast<size_t>(n()));
    for (int j = 0; j < n(); ++j) {
        Eigen::VectorXd pad = Eigen::VectorXd::Zero(nfft);
        pad.head(N) = u.row(j).transpose();
        U[static_cast<size_t>(j)].resize(nfft);
        fft.fwd(U[static_cast<size_t>(j)], pad);
    }
    Eigen::MatrixXd y(n(), N);
    Eigen::VectorXd hpad(nfft), v(nfft);
    Eigen::VectorXcd H(nfft), acc(nfft);
    for (int i = 0; i < n(); ++i) {
        acc.setZero();
        for (int j = 0; j < n(); ++j) {
            hpad.setZero();
            hpad.head(L) = taps(i, j);
            fft.fwd(H, hpad);
            acc.array() += H.array() * U[static_cast<size_t>(j)].array();
        }
        fft.inv(v, acc);
        // tap index k sits at padded position k + preview_, so y(t) = v(t + K)
        y.row(i) = v.segment(preview_, N).transpose();
    }
    return y;
}

ZeroPhaseFilter::ZeroPhaseFilter(double fc_hz, double ts, int order)
    : fc_(fc_hz), ts_(ts), order_(order) {
    double nyq = 0.5 / ts;
    if (!(fc_hz > 0.0) || !(fc_hz < nyq))
        throw CutoffOutOfRange("ZeroPhaseFilter: cut-off must lie in (0, Nyquist)");
    if (order < 1) throw CutoffOutOfRange("ZeroPhaseFilter: order must be >= 1");
    double wa = std::tan(M_PI * fc_hz * ts);  // prewarped analog cut-off, T=2 bilinear
    int p = order;
    if (p % 2 == 1) {
        double n0 = wa / (1.0 + wa);
        sections_.push_back({n0, n0, 0.0, (wa - 1.0) / (1.0 + wa), 0.0});
    }
    for (int k = 0; k < p / 2; ++k) {
        double theta = M_PI * (2.0 * k + 1.0) / (2.0 * p);  // pole angle from imaginary axis
        double a = 2.0 * std::cos(theta) * wa;              // -2 Re(s_k) * wa
        double b = wa * wa;
        double d = 1.0 + a + b;
        sections_.push_back({b / d, 2.0 * b / d, b / d, (2.0 * b - 2.0) / d, (1.0 - a + b) / d});
    }
}

double ZeroPhaseFilter::response(double omega) const {
    Complex z1 = std::polar(1.0, -omega);
    Complex z2 = z1 * z1;
    double mag2 = 1.0;
    for (const auto& s : sections_) {
        Complex num = s.b0 + s.b1 * z1 + s.b2 * z2;
        Complex den = 1.0 + s.a1 * z1 + s.a2 * z2;
        mag2 *= std::norm(num) / std::norm(den);
    }
    return mag2;
}

Eigen::VectorXd ZeroPhaseFilter::filter_forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = x;
    for (const auto& s : sections_) {
        double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
        for (long t = 0; t < y.size(); ++t) {
            double xt = y(t);
            double yt = s.b0 * xt + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
            x2 = x1; x1 = xt;
            y2 = y1; y1 = yt;
            y(t) = yt;
        }
    }
    return y;
}

Eigen::VectorXd ZeroPhaseFilter::filter_zero_phase(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = filter_forward(x);
    y.reverseInPlace();
    y = filter_forward(y);
    y.reverseInPlace();
    return y;
}

ZeroPhaseFilter design_zero_phase(double fc_hz, double ts, int order) {
    return ZeroPhaseFilter(fc_hz, ts, order);
}

const char* mode_name(DesignMode m) {
    switch (m) {
        case DesignMode::NaiveSiso: return "naive";
        case DesignMode::RobustMultiloop: return "alg1";
        case DesignMode::Decentralized: return "alg2";
        case DesignMode::Centralized: return "alg3";
    }
    return "?";
}

FrfMatrix IlcDesign::q_response(const FrequencyGrid& grid) const {
    std::vector<Eigen::MatrixXcd> data;
    data.reserve(static_cast<size_t>(grid.size()));
    for (double w : grid.omega()) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n(), n());
        for (int i = 0; i < n(); ++i) m(i, i) = Q[static_cast<size_t>(i)].response(w);
        data.push_back(std::move(m));
    }
    return FrfMatrix(grid, std::move(data));
}

std::string IlcDesign::to_json() const {
    nlohmann::json j;
    j["mode"] = mode_name(mode);
    j["ts"] = L.ts();
    j["preview"] = L.preview();
    j["fit_error"] = L.fit_error();
    for (const auto& q : Q)
        j["q"].push_back({{"order", q.order()}, {"fc_hz", q.fc()}});
    for (int i = 0; i < n(); ++i)
        for (int k = 0; k < n(); ++k) {
            std::vector<double> t(L.taps(i, k).data(), L.taps(i, k).data() + L.taps(i, k).size());
            j["taps"][std::to_string(i + 1) + std::to_string(k + 1)] = t;
        }
    if (report) j["report"] = nlohmann::json::parse(report->summary_json());
    return j.dump(2);
}

DesignMode mode_from_name(const std::string& name) {
    if (name == "naive") return DesignMode::NaiveSiso;
    if (name == "alg1") return DesignMode::RobustMultiloop;
    if (name == "alg2") return DesignMode::Decentralized;
    if (name == "alg3") return DesignMode::Centralized;
    throw MilcError("unknown design mode '" + name + "' (expected naive|alg1|alg2|alg3)");
}

IlcDesign IlcDesign::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    double ts = j.at("ts").get<double>();
    int preview = j.at("preview").get<int>();
    std::vector<ZeroPhaseFilter> q;
    for (const auto& qj : j.at("q"))
        q.emplace_back(qj.at("fc_hz").get<double>(), ts, qj.at("order").get<int>());
    int n = static_cast<int>(q.size());
    std::vector<std::vector<Eigen::VectorXd>> taps(
        static_cast<size_t>(n), std::vector<Eigen::VectorXd>(static_cast<size_t>(n)));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            auto t = j.at("taps").at(std::to_string(i + 1) + std::to_string(k + 1))
                         .get<std::vector<double>>();
            if (static_cast<int>(t.size()) != 2 * preview + 1)
                throw MilcError("IlcDesign: tap length inconsistent with preview");
            taps[static_cast<size_t>(i)][static_cast<size_t>(k)] =
                Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<long>(t.size()));
        }
    IlcDesign d{NoncausalFir(std::move(taps), preview, ts), std::move(q),
                mode_from_name(j.at("mode").get<std::string>()), std::nullopt};
    if (j.contains("fit_error")) d.L.set_fit_error(j["fit_error"].get<double>());
    return d;
}

namespace {

bool grid_is_uniform(const FrequencyGrid& g) {
    int K = g.size();
    if (K < 3) return false;
    for (int k = 0; k < K; ++k) {
        double expect = M_PI * k / (K - 1.0);
        if (std::abs(g.omega()[static_cast<size_t>(k)] - expect) > 1e-9) return false;
    }
    return true;
}

}  // namespace

NoncausalFir invert_frf_to_fir(const FrfMatrix& target, int preview, double regularization,
                               double max_fit_error) {
    if (target.ny() != target.nu())
        throw DimensionMismatch("invert_frf_to_fir: square target required");
    if (!grid_is_uniform(target.grid()))
        throw MilcError("invert_frf_to_fir: uniform grid on [0, pi] required");
    int n = target.ny();
    int Kg = target.npoints();
    int nfft = 2 * (Kg - 1);
    if (2 * preview + 1 > nfft)
        throw MilcError("invert_frf_to_fir: preview too long for the fit grid");

    // regularized pointwise inverse W = (T^H T + lambda I)^-1 T^H
    std::vector<Eigen::MatrixXcd> w(static_cast<size_t>(Kg));
    for (int k = 0; k < Kg; ++k) {
        const Eigen::MatrixXcd& t = target.at(k);
        if (regularization == 0.0) {
            double smin = t.jacobiSvd().singularValues()(n - 1);
            if (smin < 1e-8)
                throw IllConditioned("invert_frf_to_fir: target singular at grid index " +
                                     std::to_string(k));
        }
        Eigen::MatrixXcd gram =
            t.adjoint() * t + regularization * Eigen::MatrixXcd::Identity(n, n);
        w[static_cast<size_t>(k)] = gram.ldlt().solve(t.adjoint());
    }

    // two-sided taps by inverse DFT of the conjugate-symmetric extension
    std::vector<std::vector<Eigen::VectorXd>> taps(
        static_cast<size_t>(n),
        std::vector<Eigen::VectorXd>(static_cast<size_t>(n),
                                     Eigen::VectorXd::Zero(2 * preview + 1)));
    for (int k = -preview; k <= preview; ++k) {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
        for (int m = 0; m < nfft; ++m) {
            double wm = 2.0 * M_PI * m / nfft;
            const Eigen::MatrixXcd& wmat =
                m < Kg ? w[static_cast<size_t>(m)] : w[static_cast<size_t>(nfft - m)];
            Complex ph = std::polar(1.0 / nfft, wm * k);
            if (m < Kg) acc += ph * wmat;
            else acc += ph * wmat.conjugate();
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                taps[static_cast<size_t>(i)][static_cast<size_t>(j)](k + preview) =
                    acc(i, j).real();
    }
    NoncausalFir fir(std::move(taps), preview, target.grid().ts());

    double err = 0.0;
    for (int k = 0; k < Kg; ++k) {
        double wk = target.grid().omega()[static_cast<size_t>(k)];
        Eigen::MatrixXcd l(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) l(i, j) = fir.eval_entry(i, j, wk);
        Eigen::MatrixXcd res = Eigen::MatrixXcd::Identity(n, n) - l * target.at(k);
        err = std::max(err, res.jacobiSvd().singularValues()(0));
    }
    fir.set_fit_error(err);
    if (err > max_fit_error)
        throw FitTooCoarse("invert_frf_to_fir: fit error " + std::to_string(err) +
                           " exceeds bound");
    return fir;
}

namespace {

// Largest fc in [lo, hi] with feasible(fc), bisected to 0.1 Hz.
double bisect_cutoff(double lo, double hi, const std::function<bool(double)>& feasible) {
    if (!feasible(lo))
        throw NoFeasibleCutoff("no feasible Q cut-off: bounds violated even at " +
                               std::to_string(lo) + " Hz");
    if (feasible(hi)) return hi;
    while (hi - lo > 0.1) {
        double mid = 0.5 * (lo + hi);
        if (feasible(mid)) lo = mid;
        else hi = mid;
    }
    return lo;
}

double cutoff_lo(double ts) { return std::min(0.5, 0.1 * 0.5 / ts); }
double cutoff_hi(double ts) { return 0.999 * 0.5 / ts; }

IlcDesign make_design(const NoncausalFir& L, std::vector<ZeroPhaseFilter> q, DesignMode mode,
                      const FrfMatrix& J_frf) {
    IlcDesign d{L, std::move(q), mode, std::nullopt};
    d.report = build_report(d.q_response(J_frf.grid()), L.response(J_frf.grid()), J_frf);
    return d;
}

}  // namespace

QdTuning autotune_qd(const NoncausalFir& L, const FrfMatrix& J_frf, TuneTarget target,
                     int q_order) {
    FrfMatrix lresp = L.response(J_frf.grid());
    QdBounds b = qd_feasible_bound(lresp, J_frf);
    const std::vector<double>& bound = target == TuneTarget::Convergent ? b.convergent
                                                                        : b.monotone;
    double ts = J_frf.grid().ts();
    auto feasible = [&](double fc) {
        ZeroPhaseFilter q(fc, ts, q_order);
        for (int k = 0; k < J_frf.npoints(); ++k)
            if (!strictly_less(q.response(J_frf.grid().omega()[static_cast<size_t>(k)]),
                               bound[static_cast<size_t>(k)]))
                return false;
        return true;
    };
    double fc = bisect_cutoff(cutoff_lo(ts), cutoff_hi(ts), feasible);
    std::vector<ZeroPhaseFilter> q(static_cast<size_t>(J_frf.ny()),
                                   ZeroPhaseFilter(fc, ts, q_order));
    return {fc, make_design(L, std::move(q), DesignMode::RobustMultiloop, J_frf)};
}

DecentralizedTuning autotune_decentralized(const NoncausalFir& L, const FrfMatrix& J_frf,
                                           TuneTarget target, int q_order) {
    FrfMatrix lresp = L.response(J_frf.grid());
    IterationFactors f = factorize(lresp, J_frf);
    GershgorinBounds g = gershgorin_bounds_thm4(f);
    SsvBounds s = ssv_bounds_thm5(f);
    int n = f.n();
    double ts = J_frf.grid().ts();
    int K = J_frf.npoints();

    // per-frequency check against the precomputed bounds (Q-independent)
    auto joint_ok = [&](const std::vector<double>& fcs) {
        std::vector<ZeroPhaseFilter> q;
        for (double fc : fcs) q.emplace_back(fc, ts, q_order);
        for (int k = 0; k < K; ++k) {
            double w = J_frf.grid().omega()[static_cast<size_t>(k)];
            Eigen::VectorXd lhs(n);
            for (int i = 0; i < n; ++i)
                lhs(i) = q[static_cast<size_t>(i)].response(w) *
                         std::abs(f.Md[static_cast<size_t>(k)](i));
            auto all = [&](auto rhs) {
                for (int i = 0; i < n; ++i)
                    if (!strictly_less(lhs(i), rhs(i))) return false;
                return true;
            };
            bool conv = all([&](int i) { return g.row_sum[static_cast<size_t>(k)](i); }) ||
                        all([&](int i) { return g.col_sum[static_cast<size_t>(k)](i); }) ||
                        all([&](int) { return s.convergent[static_cast<size_t>(k)]; });
            bool mono = all([&](int i) { return g.monotone[static_cast<size_t>(k)](i); }) ||
                        all([&](int) { return s.monotone[static_cast<size_t>(k)]; });
            if (!(target == TuneTarget::Convergent ? conv : mono)) return false;
        }
        return true;
    };

    // initialize with a common cut-off under the joint check, then raise
    // loops one at a time
    double hi = cutoff_hi(ts);
    double common = bisect_cutoff(cutoff_lo(ts), hi, [&](double fc) {
        return joint_ok(std::vector<double>(static_cast<size_t>(n), fc));
    });
    std::vector<double> fcs(static_cast<size_t>(n), common);
    bool improved = true;
    while (improved) {
        improved = false;
        for (int i = 0; i < n; ++i) {
            auto feas_i = [&](double fc) {
                std::vector<double> trial = fcs;
                trial[static_cast<size_t>(i)] = fc;
                return joint_ok(trial);
            };
            double fc = bisect_cutoff(fcs[static_cast<size_t>(i)], hi, feas_i);
            if (fc > fcs[static_cast<size_t>(i)] + 0.1) {
                fcs[static_cast<size_t>(i)] = fc;
                improved = true;
            }
        }
    }
    std::vector<ZeroPhaseFilter> q;
    for (double fc : fcs) q.emplace_back(fc, ts, q_order);
    IlcDesign d = make_design(L, std::move(q), DesignMode::Decentralized, J_frf);
    return {std::move(fcs), std::move(d)};
}

namespace {

// Sample a rational model on the uniform inversion grid.
FrfMatrix sample_uniform(const TransferMatrix& model, int points) {
    return evaluate_frf(model, FrequencyGrid::linear(model.ts(), points));
}

NoncausalFir diag_fir(const std::vector<NoncausalFir>& loops) {
    int n = static_cast<int>(loops.size());
    int K = loops.front().preview();
    std::vector<std::vector<Eigen::VectorXd>> taps(
        static_cast<size_t>(n),
        std::vector<Eigen::VectorXd>(static_cast<size_t>(n),
                                     Eigen::VectorXd::Zero(2 * K + 1)));
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
        taps[static_cast<size_t>(i)][static_cast<size_t>(i)] = loops[static_cast<size_t>(i)].taps(0, 0);
        err = std::max(err, loops[static_cast<size_t>(i)].fit_error());
    }
    NoncausalFir out(std::move(taps), K, loops.front().ts());
    out.set_fit_error(err);
    return out;
}

}  // namespace

IlcDesign build_design(DesignMode mode, const DesignModels& models, const FrfMatrix& J_frf,
                       const SynthesisOptions& opts) {
    int n = J_frf.ny();
    double ts = J_frf.grid().ts();

    auto siso_target = [&](int i) {
        if (models.full_frf) {
            std::vector<Eigen::MatrixXcd> d;
            for (int k = 0; k < models.full_frf->npoints(); ++k)
                d.push_back(Eigen::MatrixXcd::Constant(1, 1, models.full_frf->at(k)(i, i)));
            return FrfMatrix(models.full_frf->grid(), std::move(d));
        }
        if (!models.diag || static_cast<int>(models.diag->size()) != n)
            throw ModelMissing("build_design: per-loop SISO models required for this mode");
        return sample_uniform(TransferMatrix({{(*models.diag)[static_cast<size_t>(i)]}}),
                              opts.inversion_grid);
    };
    auto diag_learning = [&]() {
        std::vector<NoncausalFir> loops;
        for (int i = 0; i < n; ++i)
            loops.push_back(invert_frf_to_fir(siso_target(i), opts.preview,
                                              opts.regularization, opts.max_fit_error));
        return diag_fir(loops);
    };

    switch (mode) {
        case DesignMode::NaiveSiso: {
            NoncausalFir L = diag_learning();
            // per-loop tuning against |q_i (1 - l_i J_FRF,ii)| < 1, interaction ignored
            FrfMatrix lresp = L.response(J_frf.grid());
            std::vector<ZeroPhaseFilter> q;
            for (int i = 0; i < n; ++i) {
                std::vector<double> bound;
                for (int k = 0; k < J_frf.npoints(); ++k) {
                    Complex mii = 1.0 - lresp.at(k)(i, i) * J_frf.at(k)(i, i);
                    double a = std::abs(mii);
                    bound.push_back(a > 0.0 ? 1.0 / a
                                            : std::numeric_limits<double>::infinity());
                }
                auto feasible = [&](double fc) {
                    ZeroPhaseFilter qq(fc, ts, opts.q_order);
                    for (int k = 0; k < J_frf.npoints(); ++k)
                        if (!strictly_less(
                                qq.response(J_frf.grid().omega()[static_cast<size_t>(k)]),
                                bound[static_cast<size_t>(k)]))
                            return false;
                    return true;
                };
                double fc = bisect_cutoff(cutoff_lo(ts), cutoff_hi(ts), feasible);
                q.emplace_back(fc, ts, opts.q_order);
            }
            return make_design(L, std::move(q), DesignMode::NaiveSiso, J_frf);
        }
        case DesignMode::RobustMultiloop: {
            NoncausalFir L = diag_learning();
            return autotune_qd(L, J_frf, opts.target, opts.q_order).design;
        }
        case DesignMode::Decentralized: {
            NoncausalFir L = diag_learning();
            return autotune_decentralized(L, J_frf, opts.target, opts.q_order).design;
        }
        case DesignMode::Centralized: {
            if (!models.full && !models.full_frf)
                throw ModelMissing("build_design: centralized mode requires full MIMO model");
            FrfMatrix t = models.full_frf ? *models.full_frf
                                          : sample_uniform(*models.full, opts.inversion_grid);
            NoncausalFir L = invert_frf_to_fir(t, opts.preview, opts.regularization,
                                               opts.max_fit_error);
            IlcDesign d = autotune_qd(L, J_frf, opts.target, opts.q_order).design;
            d.mode = DesignMode::Centralized;
            return d;
        }
    }
    throw MilcError("build_design: unknown mode");
}

}  // namespace milc
