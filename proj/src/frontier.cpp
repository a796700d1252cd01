#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "incpref/solver.hpp"

namespace incpref {

std::vector<FrontierPoint> frontier(const std::vector<double>& mu, const std::vector<std::vector<double>>& cov,
                                    const std::vector<double>& p_list) {
    const auto n = static_cast<Eigen::Index>(mu.size());
    if (n == 0) throw std::invalid_argument("frontier: empty mean vector");
    if (cov.size() != mu.size()) throw std::invalid_argument("frontier: covariance has wrong shape");
    Eigen::MatrixXd S(n, n);
    Eigen::VectorXd m(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (cov[i].size() != mu.size()) throw std::invalid_argument("frontier: covariance has wrong shape");
        m(i) = mu[i];
        for (Eigen::Index j = 0; j < n; ++j) S(i, j) = cov[i][j];
    }
    if (!S.allFinite() || !m.allFinite()) throw std::invalid_argument("frontier: non-finite input");
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + S.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("frontier: covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw std::domain_error("frontier: covariance is singular or not positive definite");
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd s1 = llt.solve(ones);
    const Eigen::VectorXd smu = llt.solve(m);
    const double a = ones.dot(s1);
    const double b = ones.dot(smu);
    if (!(a > 0.0) || !std::isfinite(a)) throw std::domain_error("frontier: covariance is singular");
    const Eigen::VectorXd gmv = s1 / a;
    const Eigen::VectorXd tilt = smu - s1 * (b / a);

    std::vector<FrontierPoint> out;
    out.reserve(p_list.size());
    for (double p : p_list) {
        if (!(p > 0.0)) throw std::invalid_argument("frontier: p must be positive");
        Eigen::VectorXd pi = gmv;
        if (std::isfinite(p)) pi += tilt / p;
        FrontierPoint fp;
        fp.p = p;
        fp.pi.assign(pi.data(), pi.data() + n);
        fp.mean = pi.dot(m);
        fp.variance = pi.dot(S * pi);
        out.push_back(std::move(fp));
    }
    return out;
}

}  // namespace incpref
