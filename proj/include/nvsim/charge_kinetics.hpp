#ifndef NVSIM_CHARGE_KINETICS_HPP
#define NVSIM_CHARGE_KINETICS_HPP

#include <utility>
#include <vector>

namespace nvsim {

// Saturable two-photon rate law R(P) = eta * k * P^2 / (P + P_sat):
// quadratic for P << P_sat, linear for P >> P_sat.
struct RateLaw {
    double k_MHz_per_mW = 0.0;
    double p_sat_mW = 1.0;

    void validate() const;
};

double rate_MHz(const RateLaw& law, double power_mW, double eta = 1.0);

enum class Laser { Red, Green, Off };

struct ChargePopulations {
    double p_bright = 1.0;
    double p_dark = 0.0;

    void validate() const;
};

struct ChargeKinetics {
    RateLaw red_bright_to_dark;
    RateLaw green_bright_to_dark;
    RateLaw green_dark_to_bright;
    RateLaw red_dark_to_bright;     // donors are not ionized by red light
    double misalignment_eta = 1.0;  // scales bright->dark rates only
    double ms0_polarization = 0.92; // fraction entering the bright m_S=0 sublevel

    void validate() const;
    // {R_bright_to_dark, R_dark_to_bright} in MHz for the given drive
    std::pair<double, double> rates_MHz(Laser laser, double power_mW) const;
};

// Closed-form solution of dp_B/dt = -R_BD p_B + R_DB p_D.
ChargePopulations evolve_populations(ChargePopulations pop, const ChargeKinetics& kin,
                                     Laser laser, double power_mW, double duration_s);

// p_dark = R_BD / (R_BD + R_DB). Throws if both rates vanish.
ChargePopulations steady_state(const ChargeKinetics& kin, Laser laser, double power_mW);

// signal(t) = counts_dark + (counts_bright - counts_dark) * p_B(t)
std::vector<double> fluorescence_trace(const ChargeKinetics& kin, Laser laser, double power_mW,
                                       const std::vector<double>& times_s,
                                       double counts_bright_kcps, double counts_dark_kcps,
                                       ChargePopulations initial = {1.0, 0.0});

}

#endif
