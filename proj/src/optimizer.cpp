#include "enapp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace enapp::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void project(std::vector<double>& x, std::span<const double> lo, std::span<const double> hi) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

bool at_lower(double x, double lo, double hi) { return x <= lo + 1e-12 * (1.0 + std::abs(lo)) || hi <= lo; }
bool at_upper(double x, double lo, double hi) { return x >= hi - 1e-12 * (1.0 + std::abs(hi)) || hi <= lo; }

}  // namespace

std::vector<double> fd_gradient(const Objective& f, std::span<const double> x, double fx,
                                std::span<const double> lo, std::span<const double> hi, double h,
                                int* evaluations) {
    const std::size_t n = x.size();
    std::vector<double> g(n, 0.0);
    std::vector<double> xt(x.begin(), x.end());
    int evals = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (hi[i] <= lo[i]) continue;
        const double up = std::min(x[i] + h, hi[i]);
        const double dn = std::max(x[i] - h, lo[i]);
        xt[i] = up;
        const double fu = up > x[i] ? f(xt) : kInf;
        xt[i] = dn;
        const double fd = dn < x[i] ? f(xt) : kInf;
        xt[i] = x[i];
        evals += (up > x[i]) + (dn < x[i]);
        const bool ok_u = std::isfinite(fu);
        const bool ok_d = std::isfinite(fd);
        if (ok_u && ok_d) {
            g[i] = (fu - fd) / (up - dn);
        } else if (ok_u) {
            g[i] = (fu - fx) / (up - x[i]);
        } else if (ok_d) {
            g[i] = (fx - fd) / (x[i] - dn);
        }
    }
    if (evaluations) *evaluations += evals;
    return g;
}

double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                               std::span<const double> lo, std::span<const double> hi) {
    double norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double step = std::clamp(x[i] - g[i], lo[i], hi[i]) - x[i];
        norm = std::max(norm, std::abs(step));
    }
    return norm;
}

BoxResult minimize_box(const Objective& f, std::span<const double> lo, std::span<const double> hi,
                       std::vector<double> x0, const BoxOptions& opts) {
    const std::size_t n = x0.size();
    BoxResult res;
    project(x0, lo, hi);
    res.x = std::move(x0);
    res.value = f(res.x);
    res.evaluations = 1;
    if (n == 0) {
        res.converged = std::isfinite(res.value);
        return res;
    }
    if (!std::isfinite(res.value)) return res;

    std::vector<double> g = fd_gradient(f, res.x, res.value, lo, hi, opts.fd_step, &res.evaluations);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool fresh = true;  // H carries no curvature information yet
    bool scaled = false;

    for (int it = 0; it < opts.max_iter; ++it) {
        res.pg_norm = projected_gradient_norm(res.x, g, lo, hi);
        if (res.pg_norm <= opts.grad_tol) {
            res.converged = true;
            break;
        }

        std::vector<bool> free(n);
        for (std::size_t i = 0; i < n; ++i) {
            const bool blocked = (at_lower(res.x[i], lo[i], hi[i]) && g[i] > 0.0) ||
                                 (at_upper(res.x[i], lo[i], hi[i]) && g[i] < 0.0);
            free[i] = !blocked;
        }
        auto direction = [&] {
            Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (!free[i]) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    if (free[j]) d[i] -= H(i, j) * g[j];
                }
            }
            return d;
        };
        Eigen::VectorXd d = direction();
        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) slope += g[i] * d[i];
        if (!(slope < 0.0)) {
            H = Eigen::MatrixXd::Identity(n, n);
            fresh = true;
            scaled = false;
            d = direction();
        }

        bool accepted = false;
        std::vector<double> xt(n);
        double ft = kInf;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double alpha = 1.0;
            for (int bt = 0; bt < opts.max_backtracks; ++bt, alpha *= 0.5) {
                for (std::size_t i = 0; i < n; ++i) xt[i] = res.x[i] + alpha * d[i];
                project(xt, lo, hi);
                ft = f(xt);
                ++res.evaluations;
                double decrease = 0.0;
                for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (xt[i] - res.x[i]);
                if (std::isfinite(ft) && ft <= res.value + opts.armijo * decrease) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (fresh) break;
                H = Eigen::MatrixXd::Identity(n, n);
                fresh = true;
                scaled = false;
                d = direction();
            }
        }
        if (!accepted) break;  // stalled at the noise floor of the objective

        std::vector<double> gt = fd_gradient(f, xt, ft, lo, hi, opts.fd_step, &res.evaluations);
        Eigen::VectorXd s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xt[i] - res.x[i];
            y[i] = free[i] ? gt[i] - g[i] : 0.0;
            if (!free[i]) s[i] = 0.0;
        }
        const double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm() && sy > 0.0) {
            if (!scaled) {
                H = Eigen::MatrixXd::Identity(n, n) * (sy / y.dot(y));
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
            fresh = false;
        }
        res.x = std::move(xt);
        res.value = ft;
        g = std::move(gt);
        res.iterations = it + 1;
    }
    res.pg_norm = projected_gradient_norm(res.x, g, lo, hi);
    res.converged = res.pg_norm <= opts.grad_tol;
    return res;
}

BarrierResult solve_barrier(const ConstrainedProblem& problem, std::vector<double> x0,
                            const BarrierOptions& opts) {
    const auto& lo = problem.lo;
    const auto& hi = problem.hi;
    project(x0, lo, hi);

    BarrierResult out;
    std::vector<double> slacks;
    auto min_slack = [&](std::span<const double> x, double* objective = nullptr) {
        const double value = problem.evaluate(x, slacks);
        if (objective) *objective = value;
        if (!std::isfinite(value)) return -kInf;
        double m = kInf;
        for (double s : slacks) m = std::min(m, s);
        return m;
    };

    double f0 = 0.0;
    double start_slack = min_slack(x0, &f0);
    out.evaluations = 1;
    if (!std::isfinite(f0)) {
        out.x = x0;
        out.objective = f0;
        out.min_slack = start_slack;
        out.status = BarrierStatus::Infeasible;
        return out;
    }

    std::vector<double> x = x0;
    if (start_slack <= 0.0) {
        const double margin = opts.restoration_margin;
        Objective violation = [&](std::span<const double> z) {
            std::vector<double> s;
            const double value = problem.evaluate(z, s);
            if (!std::isfinite(value)) return kInf;
            double v = 0.0;
            for (double si : s) {
                const double short_by = margin - si;
                if (short_by > 0.0) v += short_by * short_by;
            }
            return v;
        };
        BoxOptions ropts = opts.box;
        ropts.grad_tol = 1e-14;
        const auto restored = minimize_box(violation, lo, hi, x, ropts);
        out.iterations += restored.iterations;
        out.evaluations += restored.evaluations;
        x = restored.x;
        start_slack = min_slack(x, &f0);
        if (!(start_slack > 0.0)) {
            out.x = x;
            out.objective = f0;
            out.min_slack = start_slack;
            out.status = BarrierStatus::Infeasible;
            return out;
        }
    }

    double kkt = kInf;
    double mu = opts.mu0;
    for (int stage = 0; stage < opts.stages; ++stage, mu *= opts.mu_factor) {
        Objective merit = [&, mu](std::span<const double> z) {
            std::vector<double> s;
            const double value = problem.evaluate(z, s);
            if (!std::isfinite(value)) return kInf;
            double barrier = 0.0;
            for (double si : s) {
                if (!(si > 0.0)) return kInf;
                barrier -= std::log(si);
            }
            return value + mu * barrier;
        };
        const auto r = minimize_box(merit, lo, hi, x, opts.box);
        out.iterations += r.iterations;
        out.evaluations += r.evaluations;
        x = r.x;
        kkt = r.pg_norm;
    }

    double objective = 0.0;
    out.min_slack = min_slack(x, &objective);

    if (opts.polish) {
        Objective feasible_only = [&](std::span<const double> z) {
            std::vector<double> s;
            const double value = problem.evaluate(z, s);
            if (!std::isfinite(value)) return kInf;
            for (double si : s) {
                if (si < 0.0) return kInf;
            }
            return value;
        };
        const auto r = minimize_box(feasible_only, lo, hi, x, opts.box);
        out.iterations += r.iterations;
        out.evaluations += r.evaluations;
        // Against an active constraint the polish stalls at the wall without converging;
        // the barrier stationarity measure is kept in that case.
        if (std::isfinite(r.value) && r.value <= objective) {
            x = r.x;
            objective = r.value;
            if (r.converged) kkt = r.pg_norm;
            out.min_slack = min_slack(x);
        }
    }

    out.x = std::move(x);
    out.objective = objective;
    out.kkt_residual = kkt;
    out.status = kkt <= opts.box.grad_tol ? BarrierStatus::Optimal : BarrierStatus::MaxIter;
    return out;
}

}  // namespace enapp::optim
