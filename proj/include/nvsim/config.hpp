#ifndef NVSIM_CONFIG_HPP
#define NVSIM_CONFIG_HPP

#include <map>
#include <string>

#include "nvsim/charge_kinetics.hpp"
#include "nvsim/qnd.hpp"
#include "nvsim/spin_levels.hpp"

#include <json.hpp>

namespace nvsim {

// Fully resolved constants table. Defaults here match data/nvsim_defaults.cfg;
// precedence is defaults < config file < flag overrides.
struct Config {
    // field and spectroscopy constants
    double b_field_T = 0.6;
    double polarization_threshold_T = 0.4;
    double dark_m_M = 0.5;  // polarized electronic projection mu

    // per-isotope constants; hyperfine a is the dark-state constant, the
    // level formula uses the product a*m_M
    double n14_gamma_MHz_per_T = 3.0766;
    double n15_gamma_MHz_per_T = -4.3156;
    double n14_quadrupole_MHz = -4.654;
    double n14_dark_a_MHz = -6.06;   // |a*m_M| = 3.03
    double n15_dark_a_MHz = -8.484;  // |a*m_M| = 4.242

    // nuclear relaxation per manifold
    double bright_t1_s = 0.800;
    double bright_t2_s = 1.0;
    double dark_t1_s = 0.090;
    double dark_t2_s = 6e-6;

    // charge kinetics (rate-law split k vs P_sat is a calibration choice)
    double red_bd_k_MHz_per_mW = 1.0 / 60.0;  // tau = 120 us at 1 mW
    double red_bd_psat_mW = 1.0;
    double red_db_k_MHz_per_mW = 0.0;
    double red_db_psat_mW = 1.0;
    double green_bd_k_MHz_per_mW = 0.006;
    double green_bd_psat_mW = 1.0;
    double green_db_k_MHz_per_mW = 0.014;
    double green_db_psat_mW = 1.0;
    double misalignment_eta = 1.0;
    double ms0_polarization = 0.92;
    double red_power_mW = 1.0;
    double green_power_mW = 1.0;

    // readout
    double readout_fidelity = 0.98;
    std::string readout_mode = "bernoulli";  // or "photon"
    int photon_repetitions = 100;
    double photon_mean_counts_0 = 0.30;
    double photon_mean_counts_1 = 0.15;
    double photon_threshold = 22.0;

    // fluorescence calibration
    double counts_bright_kcps = 200.0;
    double counts_dark_kcps = 10.0;

    SpinSystem make_system(IsotopeKind kind) const;
    ChargeKinetics make_kinetics() const;
    ReadoutModel make_readout() const;

    // key = value overrides; unknown keys throw
    void apply(const std::map<std::string, std::string>& kv);

    nlohmann::json to_json() const;
    static Config from_json(const nlohmann::json& j);
};

// Parses the structured key = value config text ('#' comments).
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Defaults overlaid with the file, if a path is given.
Config load_config(const std::string& path = "");

IsotopeKind isotope_from_string(const std::string& s);

}

#endif
