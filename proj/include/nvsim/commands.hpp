#ifndef NVSIM_COMMANDS_HPP
#define NVSIM_COMMANDS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nvsim/config.hpp"

#include <json.hpp>

namespace nvsim {

// CLI usage / input validation error: exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommandResult {
    std::string csv;
    nlohmann::json manifest;
};

struct SpectrumArgs {
    std::string isotope = "N14";
    std::string manifolds = "bright,dark";  // which line sets the analytic column includes
    double fmin_MHz = 2.0;
    double fmax_MHz = 7.0;
    int points = 251;
    double rabi_kHz = 25.0;
    double pulse_s = 20e-6;
    double init_m_I = 1e99;  // sentinel: isotope default
    std::uint64_t shots = 1000;
    std::uint64_t seed = 1;
};

struct RabiArgs {
    std::string isotope = "N14";
    double frequency_MHz = 0.0;  // 0: resonant on the selected transition
    int transition_index = 0;    // among bright transitions touching the init level
    std::string manifold = "bright";
    double rabi_kHz = 25.0;
    double tmax_s = 100e-6;
    int points = 41;
    double init_m_I = 1e99;
    std::uint64_t shots = 1000;
    std::uint64_t seed = 1;
};

struct KineticsArgs {
    std::string laser = "red";
    double power_mW = 1.0;
    double tau_target_s = 0.0;  // > 0: rescale the pump rate to hit this decay time
    double tmax_s = 0.0;        // 0: five decay times
    int points = 101;
};

struct PowerdepArgs {
    std::string laser = "red";  // red: bright->dark rate, green: dark->bright
    double pmin_mW = 1e-3;
    double pmax_mW = 1e3;
    int points = 61;
};

struct Map2dArgs {
    std::string isotope = "N15";
    double fmin_MHz = 1.4;
    double fmax_MHz = 2.9;
    int freq_points = 31;
    double red_min_s = 1e-6;
    double red_max_s = 600e-6;
    int red_points = 12;
    bool red_log = true;
    double red_power_mW = 1.0;
    double rabi_kHz = 50.0;
    double pulse_s = 50e-6;
    double init_m_I = 1e99;
    std::uint64_t shots = 1000;
    std::uint64_t seed = 1;
};

struct RunArgs {
    std::string seq_path;
    std::string seq_text;  // used when nonempty (manifest replay)
    std::string isotope = "N15";
    std::uint64_t shots = 1000;
    std::uint64_t seed = 1;
};

struct FitArgs {
    std::string model = "expdecay";
    std::string csv_path;
    std::string csv_text;  // used when nonempty
    double pulse_duration_s = 0.0;  // rabiline only
};

CommandResult cmd_spectrum(const Config& cfg, const SpectrumArgs& args);
CommandResult cmd_rabi(const Config& cfg, const RabiArgs& args);
CommandResult cmd_kinetics(const Config& cfg, const KineticsArgs& args);
CommandResult cmd_powerdep(const Config& cfg, const PowerdepArgs& args);
CommandResult cmd_map2d(const Config& cfg, const Map2dArgs& args);
CommandResult cmd_run(const Config& cfg, const RunArgs& args);
CommandResult cmd_fit(const Config& cfg, const FitArgs& args);

// Re-executes the command a manifest describes; byte-identical CSV for the
// same binary version.
CommandResult rerun_from_manifest(const nlohmann::json& manifest);

}

#endif
