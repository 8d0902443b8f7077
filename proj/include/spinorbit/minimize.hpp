#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace spinorbit {

struct MinimizeOptions
{
    int max_evaluations = 100000;
    double gradient_tolerance = 1e-8;
    // Nelder-Mead only
    double initial_step = 0.1;
    double value_tolerance = 1e-14;
};

struct MinimizeResult
{
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    double gradient_norm = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    int iterations = 0;
    bool converged = false;
};

/*!
 * BFGS with a backtracking line search.
 *
 * `f(x, grad)` returns the objective and, when `grad` is non-null, writes the
 * gradient. A step is accepted on the Armijo condition, or, once the decrease
 * is below the rounding noise of f, on the approximate Wolfe condition of
 * Hager and Zhang (which tests the directional derivative instead). Stops when
 * the gradient norm falls below the tolerance, the evaluation budget runs out,
 * or no step makes progress.
 */
template<class F>
MinimizeResult minimize_bfgs(F&& f, Eigen::VectorXd x0, MinimizeOptions const& opts = {})
{
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    auto const n = x0.size();
    MinimizeResult r;
    r.x = std::move(x0);
    VectorXd g(n);
    r.value = f(r.x, &g);
    r.evaluations = 1;
    r.gradient_norm = g.norm();

    MatrixXd h = MatrixXd::Identity(n, n);  // inverse Hessian estimate
    bool first = true;
    int stalls = 0;
    while (r.gradient_norm >= opts.gradient_tolerance && r.evaluations < opts.max_evaluations)
    {
        VectorXd p = -h * g;
        double slope = g.dot(p);
        if (!(slope < 0.0))
        {
            h.setIdentity();
            p = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        if (first)
            step = std::min(1.0, 1.0 / std::max(1.0, p.norm()));

        VectorXd x_new(n);
        VectorXd g_new(n);
        double f_new = 0.0;
        bool accepted = false;
        for (int k = 0; k < 60 && r.evaluations < opts.max_evaluations; ++k)
        {
            x_new = r.x + step * p;
            f_new = f(x_new, &g_new);
            ++r.evaluations;
            if (std::isfinite(f_new) && f_new <= r.value + 1e-4 * step * slope)
            {
                accepted = true;
                break;
            }
            double const noise = 1e-12 * std::abs(r.value);
            double const slope_new = g_new.dot(p);
            if (std::isfinite(f_new) && f_new <= r.value + noise && slope_new >= 0.9 * slope &&
                slope_new <= (2.0 * 1e-4 - 1.0) * slope)
            {
                accepted = true;
                break;
            }
            // Quadratic interpolation, safeguarded to [0.1, 0.5] of the step.
            double const denom = 2.0 * (f_new - r.value - step * slope);
            double next = std::isfinite(f_new) && denom > 0.0 ? -slope * step * step / denom
                                                               : 0.5 * step;
            step = std::clamp(next, 0.1 * step, 0.5 * step);
        }
        if (!accepted)
        {
            if (!first && h != MatrixXd::Identity(n, n))
            {
                // Retry once along steepest descent before giving up.
                h.setIdentity();
                first = true;
                continue;
            }
            break;
        }

        VectorXd const s = x_new - r.x;
        VectorXd const y = g_new - g;
        double const sy = s.dot(y);
        if (first && sy > 0.0)
            h *= sy / y.squaredNorm();
        if (sy > 1e-300)
        {
            double const rho = 1.0 / sy;
            MatrixXd const v = MatrixXd::Identity(n, n) - rho * s * y.transpose();
            h = v * h * v.transpose() + rho * s * s.transpose();
        }
        first = false;
        bool const stalled = f_new >= r.value && g_new.norm() >= r.gradient_norm;
        r.x = x_new;
        r.value = f_new;
        g = g_new;
        r.gradient_norm = g.norm();
        ++r.iterations;
        if (!stalled)
        {
            stalls = 0;
        }
        else if (r.gradient_norm >= opts.gradient_tolerance)
        {
            // No representable decrease; restart with a fresh Hessian a few
            // times before accepting the precision limit.
            if (++stalls > 3)
                break;
            h.setIdentity();
            first = true;
        }
    }
    r.converged = r.gradient_norm < opts.gradient_tolerance;
    return r;
}

/*!
 * Newton refinement near a minimum, for problems whose stationary point has
 * flat (gauge) directions.
 *
 * The Hessian comes from central differences of the analytic gradient; its
 * near-null eigenvectors are dropped from the step. A step is kept only if it
 * lowers the gradient norm without raising f beyond rounding noise, so the
 * result is never worse than the input.
 */
template<class F>
MinimizeResult polish_newton(F&& f, MinimizeResult start, MinimizeOptions const& opts = {},
                             int max_steps = 20)
{
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    MinimizeResult r = std::move(start);
    auto const n = r.x.size();
    VectorXd g(n);
    r.value = f(r.x, &g);
    ++r.evaluations;
    r.gradient_norm = g.norm();

    VectorXd gp(n);
    VectorXd gm(n);
    MatrixXd hess(n, n);
    for (int step = 0; step < max_steps && r.gradient_norm >= opts.gradient_tolerance &&
                       r.evaluations < opts.max_evaluations;
         ++step)
    {
        for (Eigen::Index j = 0; j < n; ++j)
        {
            double const h = 1e-5 * std::max(1.0, std::abs(r.x[j]));
            VectorXd xp = r.x;
            VectorXd xm = r.x;
            xp[j] += h;
            xm[j] -= h;
            f(xp, &gp);
            f(xm, &gm);
            hess.col(j) = (gp - gm) / (2.0 * h);
        }
        r.evaluations += 2 * static_cast<int>(n);
        hess = 0.5 * (hess + hess.transpose()).eval();

        Eigen::SelfAdjointEigenSolver<MatrixXd> es(hess);
        VectorXd const& lam = es.eigenvalues();
        double const cutoff = 1e-9 * lam.cwiseAbs().maxCoeff();
        VectorXd dx = VectorXd::Zero(n);
        for (Eigen::Index k = 0; k < n; ++k)
        {
            if (lam[k] > cutoff)
            {
                auto const v = es.eigenvectors().col(k);
                dx -= (v.dot(g) / lam[k]) * v;
            }
        }

        bool improved = false;
        double const noise = 1e-12 * std::max(1.0, std::abs(r.value));
        for (double scale = 1.0; scale > 1e-3; scale *= 0.5)
        {
            VectorXd const x_new = r.x + scale * dx;
            VectorXd g_new(n);
            double const f_new = f(x_new, &g_new);
            ++r.evaluations;
            if (std::isfinite(f_new) && f_new <= r.value + noise &&
                g_new.norm() < r.gradient_norm)
            {
                r.x = x_new;
                r.value = f_new;
                g = g_new;
                r.gradient_norm = g.norm();
                ++r.iterations;
                improved = true;
                break;
            }
        }
        if (!improved)
            break;
    }
    r.converged = r.gradient_norm < opts.gradient_tolerance;
    return r;
}

/*!
 * Nelder-Mead simplex descent with dimension-adaptive coefficients.
 *
 * Derivative-free; `f(x, nullptr)` is called. Converged means the spread of
 * objective values across the simplex fell below the value tolerance.
 */
template<class F>
MinimizeResult minimize_nelder_mead(F&& f, Eigen::VectorXd x0, MinimizeOptions const& opts = {})
{
    using Eigen::VectorXd;
    auto const n = x0.size();
    double const dn = static_cast<double>(n);
    double const alpha = 1.0;
    double const beta = 1.0 + 2.0 / dn;
    double const gamma = 0.75 - 1.0 / (2.0 * dn);
    double const delta = 1.0 - 1.0 / dn;

    MinimizeResult r;
    auto eval = [&](VectorXd const& x) {
        ++r.evaluations;
        double const v = f(x, static_cast<VectorXd*>(nullptr));
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<VectorXd> simplex(n + 1, x0);
    std::vector<double> values(n + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        simplex[i + 1][i] += x0[i] != 0.0 ? opts.initial_step * std::abs(x0[i]) + opts.initial_step
                                          : opts.initial_step;
    for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i)
        values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    while (r.evaluations < opts.max_evaluations)
    {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::size_t const best = order.front();
        std::size_t const worst = order.back();
        std::size_t const second = order[n - 1];
        if (values[worst] - values[best] <= opts.value_tolerance * (1.0 + std::abs(values[best])))
        {
            r.converged = true;
            break;
        }
        ++r.iterations;

        VectorXd centroid = VectorXd::Zero(n);
        for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i)
            if (i != worst)
                centroid += simplex[i];
        centroid /= dn;

        VectorXd const xr = centroid + alpha * (centroid - simplex[worst]);
        double const fr = eval(xr);
        if (fr < values[best])
        {
            VectorXd const xe = centroid + beta * (xr - centroid);
            double const fe = eval(xe);
            if (fe < fr)
            {
                simplex[worst] = xe;
                values[worst] = fe;
            }
            else
            {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second])
        {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        bool const outside = fr < values[worst];
        VectorXd const xc = outside ? VectorXd(centroid + gamma * (xr - centroid))
                                    : VectorXd(centroid - gamma * (centroid - simplex[worst]));
        double const fc = eval(xc);
        if (fc < (outside ? fr : values[worst]))
        {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i)
        {
            if (i == best)
                continue;
            simplex[i] = simplex[best] + delta * (simplex[i] - simplex[best]);
            values[i] = eval(simplex[i]);
        }
    }
    auto const it = std::min_element(values.begin(), values.end());
    r.x = simplex[static_cast<std::size_t>(it - values.begin())];
    r.value = *it;
    return r;
}

}  // namespace spinorbit
