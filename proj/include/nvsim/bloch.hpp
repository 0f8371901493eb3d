#ifndef NVSIM_BLOCH_HPP
#define NVSIM_BLOCH_HPP

#include <cstdint>
#include <vector>

namespace nvsim {

// Effectively infinite relaxation time (seconds) for undamped evolution.
inline constexpr double kNoRelaxation = 1e9;

// Rectangular rf drive on one nuclear transition. rabi_kHz is the
// on-resonance Rabi frequency in cycles: a pi-pulse lasts 1/(2*Omega).
struct DriveParams {
    double rabi_kHz = 0.0;
    double detuning_kHz = 0.0;  // rf frequency minus transition frequency
    double duration_s = 0.0;
};

struct BlochState {
    double u = 0.0;
    double v = 0.0;
    double w = 1.0;

    double norm_sq() const { return u * u + v * v + w * w; }
};

struct IntegrationOptions {
    double step_scale = 1.0;            // test hook: 0.5 halves the step
    std::uint64_t max_steps = 50000000; // per evolve() call
};

// Fixed-step RK4 integration of the Bloch equations with transverse (T2)
// and longitudinal (T1, equilibrium w=0) relaxation.
BlochState evolve(BlochState state, const DriveParams& drive, double t2_s, double t1_s,
                  const IntegrationOptions& opts = {});

// (1 - w_final)/2 starting from w=1.
double flip_probability(const DriveParams& drive, double t2_s, double t1_s,
                        const IntegrationOptions& opts = {});

// flip_probability over a detuning grid; grid points are independent and
// evaluated in parallel when OpenMP is enabled.
std::vector<double> line_profile(double rabi_kHz, double pulse_duration_s, double t2_s,
                                 const std::vector<double>& detuning_grid_kHz,
                                 double t1_s = kNoRelaxation,
                                 const IntegrationOptions& opts = {});

// Serial reference for line_profile, kept for comparison tests and benchmarks.
std::vector<double> line_profile_serial(double rabi_kHz, double pulse_duration_s, double t2_s,
                                        const std::vector<double>& detuning_grid_kHz,
                                        double t1_s = kNoRelaxation,
                                        const IntegrationOptions& opts = {});

// Free polarization decay toward the infinite-temperature equilibrium (0).
double t1_relaxation(double polarization, double dwell_s, double t1_s);

}

#endif
