#include "milc/frf.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

namespace milc {

FrequencyGrid::FrequencyGrid(std::vector<double> omega, double ts)
    : omega_(std::move(omega)), ts_(ts) {
    if (ts_ <= 0.0) throw MilcError("FrequencyGrid: Ts must be positive");
    if (omega_.empty()) throw MilcError("FrequencyGrid: empty grid");
    if (omega_.front() < 0.0 || omega_.back() > M_PI + 1e-12)
        throw MilcError("FrequencyGrid: frequencies must lie in [0, pi] rad/sample");
    for (size_t k = 1; k < omega_.size(); ++k)
        if (omega_[k] <= omega_[k - 1])
            throw MilcError("FrequencyGrid: frequencies must be strictly increasing");
}

FrequencyGrid FrequencyGrid::log_default(double ts, int count) {
    double nyq = M_PI;                                // rad/sample
    double lo = hz_to_omega(0.1, ts);
    std::vector<double> w;
    w.reserve(static_cast<size_t>(count) + 2);
    w.push_back(0.0);
    double llo = std::log(lo), lhi = std::log(nyq);
    for (int k = 0; k < count; ++k) {
        double x = std::exp(llo + (lhi - llo) * k / (count - 1.0));
        if (x > w.back() + 1e-14 && x < nyq - 1e-12) w.push_back(x);
    }
    w.push_back(nyq);
    return FrequencyGrid(std::move(w), ts);
}

FrequencyGrid FrequencyGrid::linear(double ts, int count) {
    std::vector<double> w(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) w[static_cast<size_t>(k)] = M_PI * k / (count - 1.0);
    return FrequencyGrid(std::move(w), ts);
}

int FrequencyGrid::nearest(double omega) const {
    int best = 0;
    double bd = std::abs(omega_[0] - omega);
    for (int k = 1; k < size(); ++k) {
        double d = std::abs(omega_[static_cast<size_t>(k)] - omega);
        if (d < bd) { bd = d; best = k; }
    }
    return best;
}

FrfMatrix::FrfMatrix(FrequencyGrid grid, std::vector<Eigen::MatrixXcd> data)
    : grid_(std::move(grid)), data_(std::move(data)) {
    if (data_.size() != static_cast<size_t>(grid_.size()))
        throw DimensionMismatch("FrfMatrix: one matrix required per grid point");
    for (const auto& m : data_)
        if (m.rows() != data_.front().rows() || m.cols() != data_.front().cols())
            throw DimensionMismatch("FrfMatrix: inconsistent matrix dimensions");
}

void FrfMatrix::write_csv(std::ostream& os) const {
    os << "omega";
    for (int i = 0; i < ny(); ++i)
        for (int j = 0; j < nu(); ++j)
            os << ", re_" << i + 1 << j + 1 << ", im_" << i + 1 << j + 1;
    os << "\n";
    os << std::setprecision(17);
    for (int k = 0; k < npoints(); ++k) {
        os << grid_.omega()[static_cast<size_t>(k)];
        const auto& m = at(k);
        for (int i = 0; i < ny(); ++i)
            for (int j = 0; j < nu(); ++j)
                os << ", " << m(i, j).real() << ", " << m(i, j).imag();
        os << "\n";
    }
}

FrfMatrix FrfMatrix::read_csv(std::istream& is, double ts) {
    std::string header;
    if (!std::getline(is, header)) throw MilcError("FrfMatrix: empty CSV");
    while (!header.empty() && (header.front() == '#')) {
        if (!std::getline(is, header)) throw MilcError("FrfMatrix: empty CSV");
    }
    int ncols = 1;
    for (char c : header)
        if (c == ',') ++ncols;
    int nent = (ncols - 1) / 2;
    int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(nent))));
    if (n * n != nent) throw MilcError("FrfMatrix: CSV is not a square FRF");
    std::vector<double> omega;
    std::vector<Eigen::MatrixXcd> data;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (static_cast<int>(vals.size()) != ncols)
            throw MilcError("FrfMatrix: bad CSV row");
        omega.push_back(vals[0]);
        Eigen::MatrixXcd m(n, n);
        int p = 1;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                m(i, j) = std::complex<double>(vals[static_cast<size_t>(p)], vals[static_cast<size_t>(p) + 1]);
                p += 2;
            }
        data.push_back(std::move(m));
    }
    return FrfMatrix(FrequencyGrid(std::move(omega), ts), std::move(data));
}

std::string FrfMatrix::to_json() const {
    nlohmann::json j;
    j["ts"] = grid_.ts();
    j["omega"] = grid_.omega();
    j["ny"] = ny();
    j["nu"] = nu();
    auto& pts = j["points"];
    for (int k = 0; k < npoints(); ++k) {
        nlohmann::json mk = nlohmann::json::array();
        for (int i = 0; i < ny(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int jj = 0; jj < nu(); ++jj)
                row.push_back({at(k)(i, jj).real(), at(k)(i, jj).imag()});
            mk.push_back(row);
        }
        pts.push_back(mk);
    }
    return j.dump(2);
}

FrfMatrix FrfMatrix::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    double ts = j.at("ts").get<double>();
    std::vector<double> omega = j.at("omega").get<std::vector<double>>();
    int ny = j.at("ny").get<int>(), nu = j.at("nu").get<int>();
    std::vector<Eigen::MatrixXcd> data;
    for (const auto& mk : j.at("points")) {
        Eigen::MatrixXcd m(ny, nu);
        for (int i = 0; i < ny; ++i)
            for (int jj = 0; jj < nu; ++jj)
                m(i, jj) = std::complex<double>(mk[i][jj][0].get<double>(), mk[i][jj][1].get<double>());
        data.push_back(std::move(m));
    }
    return FrfMatrix(FrequencyGrid(std::move(omega), ts), std::move(data));
}

InteractionReport interaction_measure(const FrfMatrix& frf, double threshold) {
    if (frf.ny() != frf.nu())
        throw DimensionMismatch("interaction_measure: FRF must be square");
    InteractionReport rep;
    rep.threshold = threshold;
    int n = frf.ny();
    for (int k = 0; k < frf.npoints(); ++k) {
        const auto& m = frf.at(k);
        Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            if (m(i, i) == std::complex<double>(0.0, 0.0))
                throw ZeroDiagonal("interaction_measure: zero diagonal entry at grid index " +
                                   std::to_string(k));
            for (int j = 0; j < n; ++j)
                if (i != j) e(i, j) = m(i, j) / m(i, i);
        }
        double s = n == 1 ? 0.0 : e.jacobiSvd().singularValues()(0);
        rep.sigma.push_back(s);
        rep.max_sigma = std::max(rep.max_sigma, s);
        rep.E.push_back(std::move(e));
    }
    rep.decoupled = rep.max_sigma < threshold;
    return rep;
}

DecouplingTransform static_decoupling(const FrfMatrix& frf_of_Go, double omega0) {
    int k0 = frf_of_Go.grid().nearest(omega0);
    Eigen::MatrixXd re = frf_of_Go.at(k0).real();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(re);
    if (!lu.isInvertible())
        throw SingularAtAnchor("static_decoupling: Re(Go) singular at anchor frequency");
    Eigen::MatrixXd tu = lu.inverse();
    // normalize each column to unit max-absolute entry, sign such that the
    // decoupled diagonal is positive at the low-frequency end (controllers
    // downstream assume positive plant DC gain)
    Eigen::MatrixXd re0 = frf_of_Go.at(0).real();
    for (int j = 0; j < tu.cols(); ++j) {
        double m = tu.col(j).cwiseAbs().maxCoeff();
        if (m > 0.0) tu.col(j) /= m;
        if ((re0 * tu)(j, j) < 0.0) tu.col(j) = -tu.col(j);
    }
    DecouplingTransform out;
    out.Tu = tu;
    out.omega0 = frf_of_Go.grid().omega()[static_cast<size_t>(k0)];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(tu);
    out.condition_number = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    return out;
}

FrfMatrix apply_input_transform(const FrfMatrix& frf, const Eigen::MatrixXd& Tu) {
    std::vector<Eigen::MatrixXcd> data;
    data.reserve(static_cast<size_t>(frf.npoints()));
    for (int k = 0; k < frf.npoints(); ++k) data.push_back(frf.at(k) * Tu);
    return FrfMatrix(frf.grid(), std::move(data));
}

}  // namespace milc
