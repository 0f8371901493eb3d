#ifndef NVSIM_FIT_HPP
#define NVSIM_FIT_HPP

#include <string>
#include <vector>

namespace nvsim {

// Model library for the traces this toolkit produces. x units: seconds for
// time-domain models, kHz for line models, mW for the saturable rate law.
struct ModelFunction {
    enum class Id { ExpDecay, Lorentzian, DetunedRabiLine, DampedRabi, SaturablePower };

    Id id = Id::ExpDecay;
    std::vector<std::string> param_names;
    std::vector<double> lower;  // enforced by projection
    std::vector<double> upper;
    double pulse_duration_s = 0.0;  // DetunedRabiLine only

    std::size_t n_params() const { return param_names.size(); }
    double eval(double x, const std::vector<double>& p) const;
    std::vector<double> initial_guess(const std::vector<double>& xs,
                                      const std::vector<double>& ys) const;

    static ModelFunction exp_decay();        // A exp(-t/tau) + c
    static ModelFunction lorentzian();       // A (G/2)^2/((x-x0)^2+(G/2)^2) + c
    static ModelFunction detuned_rabi_line(double pulse_duration_s);
    static ModelFunction damped_rabi();      // A (1 - exp(-t/T2p) cos(2pi O t))/2 + c
    static ModelFunction saturable_power();  // k P^2/(P+Psat)
    static ModelFunction by_name(const std::string& name, double pulse_duration_s = 0.0);
};

struct FitResult {
    std::vector<double> estimates;
    std::vector<std::vector<double>> covariance;  // residual-variance scaled
    double residual_norm = 0.0;                   // weighted sum of squares
    int n_iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with a numeric
// forward-difference Jacobian. Unit weights unless sigmas are given.
FitResult fit(const ModelFunction& model, const std::vector<double>& xs,
              const std::vector<double>& ys, const std::vector<double>& sigmas = {},
              const std::vector<double>& init = {});

struct PowerFitResult {
    FitResult fit;
    double low_power_slope = 0.0;   // d log R / d log P at the lowest power
    double high_power_slope = 0.0;  // at the highest power
    std::vector<std::string> warnings;
};

// Fits SaturablePower and reports the log-log slopes of the fitted law at
// the sweep extremes.
PowerFitResult fit_power_dependence(const std::vector<double>& powers_mW,
                                    const std::vector<double>& rates_MHz);

// Forward-difference Jacobian as used inside fit(); exposed so its accuracy
// can be checked against an independent reference.
std::vector<std::vector<double>> numeric_jacobian(const ModelFunction& model,
                                                  const std::vector<double>& xs,
                                                  const std::vector<double>& p);

}

#endif
