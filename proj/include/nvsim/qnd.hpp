#ifndef NVSIM_QND_HPP
#define NVSIM_QND_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "nvsim/charge_kinetics.hpp"
#include "nvsim/pulse_dsl.hpp"
#include "nvsim/spin_levels.hpp"

namespace nvsim {

enum class ReadoutMode { Bernoulli, PhotonCounting };

struct PhotonParams {
    int n_repetitions = 100;
    double mean_counts_0 = 0.30;  // per repetition, nuclear spin still in target
    double mean_counts_1 = 0.15;  // per repetition, nuclear spin flipped
    double threshold = 22.0;      // total counts
};

struct ReadoutModel {
    double fidelity = 0.98;  // single F for init and readout
    ReadoutMode mode = ReadoutMode::Bernoulli;
    PhotonParams photon;

    void validate() const;
    // Fidelity implied by Poisson threshold discrimination (PhotonCounting),
    // or F itself in Bernoulli mode.
    double implied_readout_fidelity() const;
};

enum class ChargeState { BrightMs0, BrightOther, Dark };

struct ShotRecord {
    ChargeState initial_charge;
    ChargeState charge_at_rf;  // charge at first rf pulse (at readout if no rf)
    double nuclear_m_I;        // final nuclear state
    bool nuclear_flip_true;
    bool reported_flip;
    std::uint64_t rng_stream_id;
    int n_charge_jumps;
};

struct ChargeBreakdown {
    std::array<std::uint64_t, 3> n{};      // indexed by ChargeState
    std::array<std::uint64_t, 3> flips{};  // reported flips per charge state
};

struct ExperimentResult {
    std::uint64_t n_shots = 0;
    std::uint64_t n_flips = 0;
    double flip_fraction = 0.0;
    double stderr_binomial = 0.0;  // sqrt(f(1-f)/n)
    ChargeBreakdown by_charge;
    std::vector<ShotRecord> shots;  // filled only when requested
};

enum class ExecMode { Serial, Parallel };

struct RunOptions {
    std::optional<ChargePopulations> initial_populations;  // default: green steady state
    double reference_green_power_mW = 1.0;
    double polarization_threshold_T = 0.4;  // dark branch visibility switch
    ExecMode mode = ExecMode::Parallel;
    bool record_shots = false;
    std::uint64_t max_draws_per_shot = 1u << 20;
};

// Monte Carlo execution of a concrete pulse program: samples the charge
// trajectory as a jump process, carries the nuclear spin across charge
// changes, applies rf flips with Bloch-integrated probabilities, and reads
// out with finite fidelity. Identical (program, params, seed, n_shots)
// give bit-identical results in Serial and Parallel mode.
ExperimentResult run_sequence(const PulseProgram& program, const SpinSystem& system,
                              const ChargeKinetics& kinetics, const ReadoutModel& readout,
                              std::uint64_t n_shots, std::uint64_t seed,
                              const RunOptions& options = {});

// Scan helpers: each grid point is one run_sequence on a templated program.
struct ScanTemplate {
    double init_m_I = 0.0;
    double rf_frequency_MHz = 0.0;
    double rabi_kHz = 25.0;
    double rf_duration_s = 20e-6;
    std::optional<std::pair<Laser, double>> pump;  // laser + power before rf
    double pump_duration_s = 0.0;
};

PulseProgram make_scan_program(const ScanTemplate& tpl);

std::vector<ExperimentResult> rabi_scan(const std::vector<double>& durations_s,
                                        const ScanTemplate& tpl, const SpinSystem& system,
                                        const ChargeKinetics& kinetics, const ReadoutModel& readout,
                                        std::uint64_t n_shots, std::uint64_t seed,
                                        const RunOptions& options = {});

std::vector<ExperimentResult> spectrum_scan(const std::vector<double>& frequencies_MHz,
                                            const ScanTemplate& tpl, const SpinSystem& system,
                                            const ChargeKinetics& kinetics,
                                            const ReadoutModel& readout, std::uint64_t n_shots,
                                            std::uint64_t seed, const RunOptions& options = {});

struct Map2dResult {
    std::vector<double> frequencies_MHz;   // columns
    std::vector<double> red_lengths_s;     // rows
    std::vector<ExperimentResult> cells;   // row-major
    const ExperimentResult& at(std::size_t row, std::size_t col) const {
        return cells[row * frequencies_MHz.size() + col];
    }
};

Map2dResult map2d(const std::vector<double>& frequencies_MHz,
                  const std::vector<double>& red_lengths_s, double red_power_mW,
                  const ScanTemplate& tpl, const SpinSystem& system,
                  const ChargeKinetics& kinetics, const ReadoutModel& readout,
                  std::uint64_t n_shots, std::uint64_t seed, const RunOptions& options = {});

struct DeducedPopulations {
    double p_bright = 0.0;   // clamped to [0,1]
    double p_dark = 0.0;
    double remainder = 0.0;  // 1 - p_bright - p_dark
    double p_bright_raw = 0.0;
    double p_dark_raw = 0.0;
};

// Inverts the contrast model: p_B = (A_b - (1-F^2))/(2F^2-1), dark lines
// carry half the dark population so p_D picks up a factor 2.
DeducedPopulations deduce_populations(double bright_amp, double dark_amp, double fidelity);

// Contrast-model expectation (1-F^2) + (2F^2-1) * sum_m p_m * P_bloch(m) for
// a concrete program, with deterministic charge evolution and ideal init.
double analytic_flip_expectation(const PulseProgram& program, const SpinSystem& system,
                                 const ChargeKinetics& kinetics, const ReadoutModel& readout,
                                 const RunOptions& options = {});

}

#endif
