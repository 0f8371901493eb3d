#include "nvsim/charge_kinetics.hpp"

#include <cmath>
#include <stdexcept>

namespace nvsim {

void RateLaw::validate() const {
    if (k_MHz_per_mW < 0.0) throw std::invalid_argument("rate law: k must be nonnegative");
    if (!(p_sat_mW > 0.0)) throw std::invalid_argument("rate law: P_sat must be positive");
}

double rate_MHz(const RateLaw& law, double power_mW, double eta) {
    law.validate();
    if (power_mW < 0.0) throw std::invalid_argument("rate: negative power");
    return eta * law.k_MHz_per_mW * power_mW * power_mW / (power_mW + law.p_sat_mW);
}

void ChargePopulations::validate() const {
    if (p_bright < -1e-12 || p_dark < -1e-12 || std::fabs(p_bright + p_dark - 1.0) > 1e-9)
        throw std::invalid_argument("charge populations must be a distribution");
}

void ChargeKinetics::validate() const {
    red_bright_to_dark.validate();
    green_bright_to_dark.validate();
    green_dark_to_bright.validate();
    red_dark_to_bright.validate();
    if (!(misalignment_eta > 0.0) || misalignment_eta > 1.0)
        throw std::invalid_argument("misalignment eta must be in (0, 1]");
    if (ms0_polarization < 0.0 || ms0_polarization > 1.0)
        throw std::invalid_argument("m_S=0 polarization must be in [0, 1]");
}

std::pair<double, double> ChargeKinetics::rates_MHz(Laser laser, double power_mW) const {
    switch (laser) {
        case Laser::Red:
            return {rate_MHz(red_bright_to_dark, power_mW, misalignment_eta),
                    rate_MHz(red_dark_to_bright, power_mW)};
        case Laser::Green:
            return {rate_MHz(green_bright_to_dark, power_mW, misalignment_eta),
                    rate_MHz(green_dark_to_bright, power_mW)};
        case Laser::Off:
            return {0.0, 0.0};
    }
    return {0.0, 0.0};
}

ChargePopulations evolve_populations(ChargePopulations pop, const ChargeKinetics& kin, Laser laser,
                                     double power_mW, double duration_s) {
    pop.validate();
    if (duration_s < 0.0) throw std::invalid_argument("evolve_populations: negative duration");
    const auto [r_bd_MHz, r_db_MHz] = kin.rates_MHz(laser, power_mW);
    const double total = (r_bd_MHz + r_db_MHz) * 1e6;  // 1/s
    if (total == 0.0 || duration_s == 0.0) return pop;

    const double p_bright_inf = r_db_MHz / (r_bd_MHz + r_db_MHz);
    const double decay = std::exp(-total * duration_s);
    const double p_bright = p_bright_inf + (pop.p_bright - p_bright_inf) * decay;
    return {p_bright, 1.0 - p_bright};
}

ChargePopulations steady_state(const ChargeKinetics& kin, Laser laser, double power_mW) {
    const auto [r_bd, r_db] = kin.rates_MHz(laser, power_mW);
    if (r_bd + r_db <= 0.0)
        throw std::runtime_error("steady_state: both transfer rates vanish, no steady state");
    const double p_dark = r_bd / (r_bd + r_db);
    return {1.0 - p_dark, p_dark};
}

std::vector<double> fluorescence_trace(const ChargeKinetics& kin, Laser laser, double power_mW,
                                       const std::vector<double>& times_s, double counts_bright_kcps,
                                       double counts_dark_kcps, ChargePopulations initial) {
    std::vector<double> out;
    out.reserve(times_s.size());
    double prev = -1.0;
    for (double t : times_s) {
        if (t < 0.0 || t < prev)
            throw std::invalid_argument("fluorescence_trace: times must be sorted and nonnegative");
        prev = t;
        const auto pop = evolve_populations(initial, kin, laser, power_mW, t);
        out.push_back(counts_dark_kcps + (counts_bright_kcps - counts_dark_kcps) * pop.p_bright);
    }
    return out;
}

}
