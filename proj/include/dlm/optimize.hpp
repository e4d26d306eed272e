#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace dlm {

struct SimplexOptions {
    int max_iterations = 5000;
    double ftol = 1e-10;         ///< relative spread of function values
    double xtol = 1e-8;          ///< simplex diameter
    double initial_step = 0.5;
};

struct SimplexResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Nelder-Mead downhill simplex. Non-finite objective values are treated as
/// +infinity, so infeasible points are simply never accepted.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                                 const SimplexOptions& opts = {}) {
    const Eigen::Index d = x0.size();
    auto eval = [&](const Eigen::VectorXd& x) {
        double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    SimplexResult res;
    if (d == 0) {
        res.x = x0;
        res.value = eval(x0);
        res.converged = true;
        return res;
    }

    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1), x0);
    std::vector<double> vals(static_cast<std::size_t>(d + 1));
    for (Eigen::Index i = 0; i < d; ++i) pts[static_cast<std::size_t>(i + 1)](i) += opts.initial_step;
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(pts.size());
    for (int it = 0; it < opts.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
        res.iterations = it;

        double diam = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) diam = std::max(diam, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
        const double spread = vals[worst] - vals[best];
        if (std::isfinite(spread) && spread <= opts.ftol * (std::abs(vals[best]) + 1e-12) && diam <= opts.xtol) {
            res.converged = true;
            break;
        }
        if (std::isfinite(spread) && spread <= 1e-14 * (std::abs(vals[best]) + 1e-12) && diam <= std::sqrt(opts.xtol)) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (i != worst) centroid += pts[i];
        centroid /= static_cast<double>(d);

        const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
        const double fr = eval(xr);
        if (fr < vals[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Eigen::VectorXd xc =
            outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid)) : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            vals[i] = eval(pts[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    res.x = pts[best];
    res.value = vals[best];
    return res;
}

}  // namespace dlm
