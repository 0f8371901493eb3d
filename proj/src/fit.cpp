#include "nvsim/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nvsim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;
constexpr double kRelStep = 1e-6;
constexpr double kParamTol = 1e-10;
constexpr double kGradTol = 1e-12;
constexpr int kMaxIterations = 500;

double forward_step(double p) { return kRelStep * std::max(std::fabs(p), 1e-8); }

// Gaussian elimination with partial pivoting; n <= 4 here.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& x) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r][col] / a[col][col];
            for (std::size_t cc = col; cc < n; ++cc) a[r][cc] -= factor * a[col][cc];
            b[r] -= factor * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t cc = ri + 1; cc < n; ++cc) s -= a[ri][cc] * x[cc];
        x[ri] = s / a[ri][ri];
    }
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

bool invert_matrix(const std::vector<std::vector<double>>& a, std::vector<std::vector<double>>& inv) {
    const std::size_t n = a.size();
    inv.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        std::vector<double> col;
        if (!solve_linear(a, e, col)) return false;
        for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
    }
    // symmetrize against round-off
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (inv[i][j] + inv[j][i]);
            inv[i][j] = inv[j][i] = m;
        }
    return true;
}

double linear_regression_slope(const std::vector<double>& xs, const std::vector<double>& ys,
                               double& intercept) {
    const double n = double(xs.size());
    const double sx = std::accumulate(xs.begin(), xs.end(), 0.0);
    const double sy = std::accumulate(ys.begin(), ys.end(), 0.0);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    const double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    intercept = (sy - slope * sx) / n;
    return slope;
}

}  // namespace

ModelFunction ModelFunction::exp_decay() {
    ModelFunction m;
    m.id = Id::ExpDecay;
    m.param_names = {"A", "tau", "c"};
    m.lower = {-1e12, 1e-12, -1e12};
    m.upper = {1e12, 1e12, 1e12};
    return m;
}

ModelFunction ModelFunction::lorentzian() {
    ModelFunction m;
    m.id = Id::Lorentzian;
    m.param_names = {"A", "x0", "gamma", "c"};
    m.lower = {-1e12, -1e12, 1e-12, -1e12};
    m.upper = {1e12, 1e12, 1e12, 1e12};
    return m;
}

ModelFunction ModelFunction::detuned_rabi_line(double pulse_duration_s) {
    if (!(pulse_duration_s > 0.0))
        throw std::invalid_argument("detuned_rabi_line: pulse duration must be positive");
    ModelFunction m;
    m.id = Id::DetunedRabiLine;
    m.param_names = {"A", "x0", "omega", "c"};
    m.lower = {-1e12, -1e12, 1e-12, -1e12};
    m.upper = {1e12, 1e12, 1e12, 1e12};
    m.pulse_duration_s = pulse_duration_s;
    return m;
}

ModelFunction ModelFunction::damped_rabi() {
    ModelFunction m;
    m.id = Id::DampedRabi;
    m.param_names = {"A", "t2p", "omega", "c"};
    m.lower = {-1e12, 1e-12, 1e-12, -1e12};
    m.upper = {1e12, 1e12, 1e12, 1e12};
    return m;
}

ModelFunction ModelFunction::saturable_power() {
    ModelFunction m;
    m.id = Id::SaturablePower;
    m.param_names = {"k", "p_sat"};
    m.lower = {0.0, 1e-12};
    m.upper = {1e12, 1e12};
    return m;
}

ModelFunction ModelFunction::by_name(const std::string& name, double pulse_duration_s) {
    if (name == "expdecay") return exp_decay();
    if (name == "lorentzian") return lorentzian();
    if (name == "rabiline") return detuned_rabi_line(pulse_duration_s);
    if (name == "dampedrabi") return damped_rabi();
    if (name == "saturable") return saturable_power();
    throw std::invalid_argument("unknown model '" + name +
                                "' (expdecay, lorentzian, rabiline, dampedrabi, saturable)");
}

double ModelFunction::eval(double x, const std::vector<double>& p) const {
    switch (id) {
        case Id::ExpDecay:
            return p[0] * std::exp(-x / p[1]) + p[2];
        case Id::Lorentzian: {
            const double hw = p[2] / 2.0;
            const double dx = x - p[1];
            return p[0] * hw * hw / (dx * dx + hw * hw) + p[3];
        }
        case Id::DetunedRabiLine: {
            // x and omega in kHz, pulse duration in seconds
            const double d = x - p[1];
            const double w2 = p[2] * p[2];
            const double g2 = w2 + d * d;
            const double phase = M_PI * std::sqrt(g2) * 1e3 * pulse_duration_s;
            const double s = std::sin(phase);
            return p[0] * (w2 / g2) * s * s + p[3];
        }
        case Id::DampedRabi:
            return p[0] * (1.0 - std::exp(-x / p[1]) * std::cos(kTwoPi * p[2] * 1e3 * x)) / 2.0 +
                   p[3];
        case Id::SaturablePower:
            return p[0] * x * x / (x + p[1]);
    }
    return 0.0;
}

std::vector<double> ModelFunction::initial_guess(const std::vector<double>& xs,
                                                 const std::vector<double>& ys) const {
    const auto [min_it, max_it] = std::minmax_element(ys.begin(), ys.end());
    const double ymin = *min_it, ymax = *max_it;

    switch (id) {
        case Id::ExpDecay: {
            // log-linear regression on baseline-subtracted data
            const bool decaying = ys.front() >= ys.back();
            const double c0 = decaying ? ymin : ymax;
            const double a0 = ys.front() - c0;
            std::vector<double> lx, ly;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double d = ys[i] - c0;
                if (std::fabs(d) > 1e-3 * std::max(std::fabs(a0), 1e-300))
                    lx.push_back(xs[i]), ly.push_back(std::log(std::fabs(d)));
            }
            double tau0 = (xs.back() - xs.front()) / 2.0;
            if (lx.size() >= 2) {
                double intercept = 0.0;
                const double slope = linear_regression_slope(lx, ly, intercept);
                if (slope < 0.0) tau0 = -1.0 / slope;
            }
            return {a0 == 0.0 ? (ymax - ymin) : a0, std::max(tau0, 1e-12), c0};
        }
        case Id::Lorentzian:
        case Id::DetunedRabiLine: {
            // peak position plus half-height scan for the width
            std::size_t peak = 0;
            for (std::size_t i = 0; i < ys.size(); ++i)
                if (ys[i] > ys[peak]) peak = i;
            const double c0 = ymin;
            const double a0 = ymax - ymin;
            const double half = c0 + a0 / 2.0;
            double left = xs.front(), right = xs.back();
            for (std::size_t i = peak; i-- > 0;)
                if (ys[i] < half) {
                    left = xs[i];
                    break;
                }
            for (std::size_t i = peak + 1; i < ys.size(); ++i)
                if (ys[i] < half) {
                    right = xs[i];
                    break;
                }
            const double width = std::max(right - left, (xs.back() - xs.front()) / 100.0);
            if (id == Id::Lorentzian) return {a0, xs[peak], width, c0};
            const double omega0 = pulse_duration_s > 0.0 ? 1.0 / (2e3 * pulse_duration_s) : width;
            return {a0, xs[peak], omega0, c0};
        }
        case Id::DampedRabi: {
            // dominant discrete-Fourier component on the mean-subtracted trace
            const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / double(ys.size());
            const std::size_t n = ys.size();
            const double dt = (xs.back() - xs.front()) / double(n - 1);
            double best_mag = -1.0;
            std::size_t best_k = 1;
            for (std::size_t k = 1; k <= n / 2; ++k) {
                double re = 0.0, im = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double ph = kTwoPi * double(k) * double(j) / double(n);
                    re += (ys[j] - mean) * std::cos(ph);
                    im -= (ys[j] - mean) * std::sin(ph);
                }
                const double mag = re * re + im * im;
                if (mag > best_mag) {
                    best_mag = mag;
                    best_k = k;
                }
            }
            const double omega0 = double(best_k) / (double(n) * dt) / 1e3;  // kHz
            const double c0 = ys.front();
            const double a0 = std::max(2.0 * (mean - c0), 1e-3 * (ymax - ymin + 1e-300));
            const double t2p0 = (xs.back() - xs.front()) / 2.0;
            return {a0, t2p0, omega0, c0};
        }
        case Id::SaturablePower: {
            // quadratic coefficient at the low end, linear at the high end
            std::size_t lo = 0, hi = xs.size() - 1;
            const double c_low = xs[lo] > 0.0 ? ys[lo] / (xs[lo] * xs[lo]) : 1.0;
            const double k0 = xs[hi] > 0.0 ? ys[hi] / xs[hi] : 1.0;
            const double psat0 = c_low > 0.0 ? std::max(k0 / c_low, 1e-9) : 1.0;
            return {std::max(k0, 1e-9), psat0};
        }
    }
    return std::vector<double>(n_params(), 1.0);
}

std::vector<std::vector<double>> numeric_jacobian(const ModelFunction& model,
                                                  const std::vector<double>& xs,
                                                  const std::vector<double>& p) {
    std::vector<std::vector<double>> jac(xs.size(), std::vector<double>(p.size()));
    std::vector<double> f0(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) f0[i] = model.eval(xs[i], p);
    for (std::size_t j = 0; j < p.size(); ++j) {
        std::vector<double> ph = p;
        const double h = forward_step(p[j]);
        ph[j] += h;
        for (std::size_t i = 0; i < xs.size(); ++i)
            jac[i][j] = (model.eval(xs[i], ph) - f0[i]) / h;
    }
    return jac;
}

FitResult fit(const ModelFunction& model, const std::vector<double>& xs,
              const std::vector<double>& ys, const std::vector<double>& sigmas,
              const std::vector<double>& init) {
    const std::size_t n = xs.size();
    const std::size_t np = model.n_params();
    if (ys.size() != n) throw FitError("fit: xs and ys length mismatch");
    if (!sigmas.empty() && sigmas.size() != n) throw FitError("fit: sigmas length mismatch");
    if (n < np + 1) throw FitError("fit: need at least n_params + 1 points");
    for (double x : xs)
        if (!std::isfinite(x)) throw FitError("fit: non-finite x");
    if (!init.empty() && init.size() != np) throw FitError("fit: bad initial parameter count");

    std::vector<double> w(n, 1.0);
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] > 0.0)) throw FitError("fit: sigmas must be positive");
        w[i] = 1.0 / sigmas[i];
    }

    auto clamp_params = [&](std::vector<double>& p) {
        for (std::size_t j = 0; j < np; ++j) p[j] = std::clamp(p[j], model.lower[j], model.upper[j]);
    };
    auto ssr_of = [&](const std::vector<double>& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = (ys[i] - model.eval(xs[i], p)) * w[i];
            s += r * r;
        }
        return s;
    };

    std::vector<double> p = init.empty() ? model.initial_guess(xs, ys) : init;
    clamp_params(p);

    FitResult result;
    double ssr = ssr_of(p);
    if (!std::isfinite(ssr)) throw FitError("fit: model not finite at the initial guess");

    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;
    for (; iter < kMaxIterations && !converged; ++iter) {
        const auto jac = numeric_jacobian(model, xs, p);

        // weighted normal equations
        std::vector<std::vector<double>> jtj(np, std::vector<double>(np, 0.0));
        std::vector<double> jtr(np, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = (ys[i] - model.eval(xs[i], p)) * w[i];
            for (std::size_t a = 0; a < np; ++a) {
                const double ja = jac[i][a] * w[i];
                jtr[a] += ja * r;
                for (std::size_t b = a; b < np; ++b) jtj[a][b] += ja * jac[i][b] * w[i];
            }
        }
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = 0; b < a; ++b) jtj[a][b] = jtj[b][a];

        double grad_inf = 0.0;
        for (double g : jtr) grad_inf = std::max(grad_inf, std::fabs(g));
        if (grad_inf < kGradTol) {
            converged = true;
            break;
        }

        // Marquardt damping on the diagonal
        auto damped = jtj;
        for (std::size_t a = 0; a < np; ++a)
            damped[a][a] += lambda * (jtj[a][a] > 1e-300 ? jtj[a][a] : 1.0);

        std::vector<double> step;
        if (!solve_linear(damped, jtr, step))
            throw FitError("fit: singular normal equations (degenerate data)");

        std::vector<double> p_new = p;
        for (std::size_t j = 0; j < np; ++j) p_new[j] += step[j];
        clamp_params(p_new);

        const double ssr_new = ssr_of(p_new);
        if (std::isfinite(ssr_new) && ssr_new <= ssr) {
            double rel_change = 0.0;
            for (std::size_t j = 0; j < np; ++j)
                rel_change = std::max(rel_change,
                                      std::fabs(p_new[j] - p[j]) / std::max(std::fabs(p[j]), 1e-300));
            p = p_new;
            ssr = ssr_new;
            lambda = std::max(lambda / 3.0, 1e-14);
            if (rel_change < kParamTol) converged = true;
        } else {
            lambda = std::min(lambda * 5.0, 1e14);
        }
    }

    result.estimates = p;
    result.residual_norm = ssr;
    result.n_iterations = iter;
    result.converged = converged;
    if (!converged) result.warnings.push_back("iteration cap reached before convergence");

    // covariance: residual-variance scaled inverse of the normal equations
    const auto jac = numeric_jacobian(model, xs, p);
    std::vector<std::vector<double>> jtj(np, std::vector<double>(np, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = 0; b < np; ++b)
                jtj[a][b] += jac[i][a] * w[i] * jac[i][b] * w[i];
    const double dof = double(n) - double(np);
    const double s2 = dof > 0.0 ? ssr / dof : 0.0;
    std::vector<std::vector<double>> inv;
    if (invert_matrix(jtj, inv)) {
        for (auto& row : inv)
            for (auto& v : row) v *= s2;
        result.covariance = inv;
    } else {
        result.covariance.assign(np, std::vector<double>(np, 0.0));
        result.warnings.push_back("covariance unavailable: normal equations singular at optimum");
    }
    return result;
}

PowerFitResult fit_power_dependence(const std::vector<double>& powers_mW,
                                    const std::vector<double>& rates_MHz) {
    if (powers_mW.size() != rates_MHz.size())
        throw FitError("fit_power_dependence: length mismatch");
    if (powers_mW.size() < 2) throw FitError("fit_power_dependence: need at least two points");

    PowerFitResult out;
    const auto [pmin_it, pmax_it] = std::minmax_element(powers_mW.begin(), powers_mW.end());
    if (!(*pmin_it > 0.0)) throw FitError("fit_power_dependence: powers must be positive");
    const double decades = std::log10(*pmax_it / *pmin_it);
    if (powers_mW.size() < 5 || decades < 2.0)
        out.warnings.push_back("sparse sweep: at least 5 points over 2 decades recommended");

    ModelFunction model = ModelFunction::saturable_power();
    model.upper[1] = 1e3 * (*pmax_it);  // saturation beyond this is unidentifiable
    out.fit = fit(model, powers_mW, rates_MHz);

    if (out.fit.estimates[1] >= 0.99 * model.upper[1])
        out.warnings.push_back("saturation power at its upper bound: data does not leave the quadratic regime");

    const auto& p = out.fit.estimates;
    auto loglog_slope = [&](double x) {
        const double eps = 1e-3;
        const double r0 = model.eval(x, p), r1 = model.eval(x * (1.0 + eps), p);
        return (std::log(r1) - std::log(r0)) / std::log1p(eps);
    };
    out.low_power_slope = loglog_slope(*pmin_it);
    out.high_power_slope = loglog_slope(*pmax_it);
    return out;
}

}
