#include "nvsim/qnd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nvsim/bloch.hpp"
#include "nvsim/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nvsim {

namespace {

constexpr double kLevelTol = 1e-9;

double poisson_cdf(double threshold, double mean) {
    if (threshold < 0.0) return 0.0;
    const auto kmax = static_cast<long>(std::floor(threshold));
    double sum = 0.0;
    for (long k = 0; k <= kmax; ++k)
        sum += std::exp(double(k) * std::log(mean) - mean - std::lgamma(double(k) + 1.0));
    return std::min(sum, 1.0);
}

// Charge-conditioned rf response, precompiled per rf instruction so the shot
// loop only draws Bernoulli flips. Variants: bright m_S=0, dark +mu, dark -mu.
struct RfAction {
    bool addresses_levels = false;
    double m_from = 0.0;
    double m_to = 0.0;
    double p_flip = 0.0;
};

struct CompiledRf {
    std::array<RfAction, 3> variant;
};

struct Compiled {
    std::vector<CompiledRf> rf;            // parallel to rf instructions, by order of appearance
    std::vector<int> rf_index;             // per instruction, -1 if not rf
    std::vector<double> levels;
    double bright_t1, dark_t1;
    ChargePopulations initial;
    bool split_dark_branch = false;        // below the polarization threshold field
    int first_rf_instruction = -1;
};

RfAction compile_rf_for_manifold(const SpinSystem& system, const Manifold& manifold,
                                 double freq_MHz, double rabi_kHz, double duration_s) {
    const auto trans = transitions(system, manifold);
    if (trans.empty()) throw std::invalid_argument("run_sequence: program references an undefined transition");
    const Transition* nearest = &trans[0];
    for (const auto& t : trans)
        if (std::fabs(freq_MHz - t.frequency_MHz) < std::fabs(freq_MHz - nearest->frequency_MHz))
            nearest = &t;
    const double detuning_kHz = (freq_MHz - nearest->frequency_MHz) * 1e3;
    RfAction action;
    action.addresses_levels = true;
    action.m_from = nearest->m_I_from;
    action.m_to = nearest->m_I_to;
    action.p_flip = flip_probability({rabi_kHz, detuning_kHz, duration_s},
                                     manifold.t2_nuclear_s, manifold.t1_nuclear_s);
    return action;
}

Compiled compile(const PulseProgram& program, const SpinSystem& system,
                 const ChargeKinetics& kinetics, const RunOptions& options) {
    system.validate();
    kinetics.validate();
    if (!program.sweeps.empty())
        throw std::invalid_argument("run_sequence: program has unexpanded sweeps");
    if (program.instructions.empty() ||
        program.instructions.back().kind != Instruction::Kind::Readout)
        throw std::invalid_argument("run_sequence: program must end with a readout");

    Compiled c;
    c.levels = system.isotope.levels();
    c.bright_t1 = system.bright().t1_nuclear_s;
    c.dark_t1 = system.dark().t1_nuclear_s;

    Manifold mirrored = system.dark();
    mirrored.electronic_projection_m = -mirrored.electronic_projection_m;
    SpinSystem mirrored_system = system;
    for (auto& m : mirrored_system.manifolds)
        if (m.kind == ManifoldKind::Dark) m.electronic_projection_m = -m.electronic_projection_m;

    const auto visible = dark_line_visibility(system.b_field_T, options.polarization_threshold_T);
    c.split_dark_branch = visible.size() > 1;

    bool saw_init = false;
    int n_readout = 0;
    for (std::size_t i = 0; i < program.instructions.size(); ++i) {
        const auto& ins = program.instructions[i];
        c.rf_index.push_back(-1);
        switch (ins.kind) {
            case Instruction::Kind::InitNuclear: {
                bool known = false;
                for (double m : c.levels) known |= std::fabs(m - ins.init_m_I) < kLevelTol;
                if (!known)
                    throw std::invalid_argument(
                        "run_sequence: init target m_I=" + std::to_string(ins.init_m_I) +
                        " is not a level of this isotope");
                saw_init = true;
                break;
            }
            case Instruction::Kind::Rf: {
                if (!saw_init)
                    throw std::invalid_argument("run_sequence: rf precedes nuclear init");
                const double freq_MHz = ins.frequency.literal * 1e-6;
                const double rabi_kHz = ins.rabi.literal * 1e-3;
                const double duration_s = ins.duration.literal;
                if (!(freq_MHz > 0.0))
                    throw std::invalid_argument("run_sequence: rf frequency must be positive");
                CompiledRf crf;
                crf.variant[0] = compile_rf_for_manifold(system, system.bright(), freq_MHz,
                                                         rabi_kHz, duration_s);
                crf.variant[1] = compile_rf_for_manifold(system, system.dark(), freq_MHz, rabi_kHz,
                                                         duration_s);
                crf.variant[2] = compile_rf_for_manifold(mirrored_system, mirrored_system.dark(),
                                                         freq_MHz, rabi_kHz, duration_s);
                c.rf_index.back() = static_cast<int>(c.rf.size());
                if (c.first_rf_instruction < 0) c.first_rf_instruction = static_cast<int>(i);
                c.rf.push_back(crf);
                break;
            }
            case Instruction::Kind::Readout:
                ++n_readout;
                if (i + 1 != program.instructions.size())
                    throw std::invalid_argument("run_sequence: readout must be last");
                break;
            default:
                break;
        }
    }
    if (n_readout != 1) throw std::invalid_argument("run_sequence: exactly one readout required");
    if (!saw_init)
        throw std::invalid_argument("run_sequence: program needs an init nuclear instruction");

    c.initial = options.initial_populations
                    ? *options.initial_populations
                    : steady_state(kinetics, Laser::Green, options.reference_green_power_mW);
    c.initial.validate();
    return c;
}

struct ShotOutcome {
    ChargeState initial_charge;
    ChargeState charge_at_rf;
    double m_I;
    bool nuclear_flip_true;
    bool reported_flip;
    int n_jumps;
};

class ShotSimulator {
public:
    ShotSimulator(const PulseProgram& program, const Compiled& compiled,
                  const ChargeKinetics& kinetics, const ReadoutModel& readout)
        : program_(program), c_(compiled), kin_(kinetics), readout_(readout) {}

    ShotOutcome run(ShotRng& rng, std::uint64_t draw_budget) const {
        ShotOutcome out{};
        ChargeState charge = sample_initial_charge(rng);
        out.initial_charge = charge;
        out.charge_at_rf = charge;
        bool rf_seen = false;

        double m_I = c_.levels.front();
        double target = c_.levels.front();
        int jumps = 0;

        for (std::size_t i = 0; i < program_.instructions.size(); ++i) {
            const auto& ins = program_.instructions[i];
            if (rng.draws() > draw_budget)
                throw std::runtime_error("run_sequence: rng stream exhausted (draw budget)");
            switch (ins.kind) {
                case Instruction::Kind::InitNuclear:
                    target = ins.init_m_I;
                    m_I = sample_init(rng, target);
                    break;
                case Instruction::Kind::Wait:
                    depolarize(rng, ins.duration.literal, charge, m_I);
                    break;
                case Instruction::Kind::Laser:
                    run_laser(rng, ins, charge, m_I, jumps, draw_budget);
                    break;
                case Instruction::Kind::Rf: {
                    if (!rf_seen) {
                        out.charge_at_rf = charge;
                        rf_seen = true;
                    }
                    apply_rf(rng, c_.rf[static_cast<std::size_t>(c_.rf_index[i])], charge, m_I);
                    break;
                }
                case Instruction::Kind::Readout: {
                    out.nuclear_flip_true = std::fabs(m_I - target) > kLevelTol;
                    out.reported_flip = report(rng, out.nuclear_flip_true);
                    break;
                }
            }
        }
        if (!rf_seen) out.charge_at_rf = charge;
        out.m_I = m_I;
        out.n_jumps = jumps;
        return out;
    }

private:
    ChargeState sample_initial_charge(ShotRng& rng) const {
        if (rng.bernoulli(c_.initial.p_dark)) return ChargeState::Dark;
        return rng.bernoulli(kin_.ms0_polarization) ? ChargeState::BrightMs0
                                                    : ChargeState::BrightOther;
    }

    double sample_init(ShotRng& rng, double target) const {
        if (rng.bernoulli(readout_.fidelity)) return target;
        // failed init lands in a random other level
        std::vector<double> others;
        for (double m : c_.levels)
            if (std::fabs(m - target) > kLevelTol) others.push_back(m);
        return others[pick_index(rng, others.size())];
    }

    static std::size_t pick_index(ShotRng& rng, std::size_t n) {
        auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    void depolarize(ShotRng& rng, double dwell_s, ChargeState charge, double& m_I) const {
        if (dwell_s <= 0.0) return;
        const double t1 = charge == ChargeState::Dark ? c_.dark_t1 : c_.bright_t1;
        if (rng.bernoulli(-std::expm1(-dwell_s / t1)))
            m_I = c_.levels[pick_index(rng, c_.levels.size())];
    }

    void run_laser(ShotRng& rng, const Instruction& ins, ChargeState& charge, double& m_I,
                   int& jumps, std::uint64_t draw_budget) const {
        const double power_mW = ins.power.literal * 1e3;  // W -> mW
        const auto [r_bd_MHz, r_db_MHz] = kin_.rates_MHz(ins.laser_color, power_mW);
        double remaining = ins.duration.literal;
        while (remaining > 0.0) {
            if (rng.draws() > draw_budget)
                throw std::runtime_error("run_sequence: rng stream exhausted (draw budget)");
            const double rate_out_per_s =
                (charge == ChargeState::Dark ? r_db_MHz : r_bd_MHz) * 1e6;
            double dwell = remaining;
            bool jump = false;
            if (rate_out_per_s > 0.0) {
                const double wait = rng.exponential(rate_out_per_s);
                if (wait < remaining) {
                    dwell = wait;
                    jump = true;
                }
            }
            depolarize(rng, dwell, charge, m_I);
            remaining -= dwell;
            if (jump) {
                ++jumps;
                if (charge == ChargeState::Dark) {
                    charge = rng.bernoulli(kin_.ms0_polarization) ? ChargeState::BrightMs0
                                                                  : ChargeState::BrightOther;
                } else {
                    charge = ChargeState::Dark;
                }
            }
        }
    }

    void apply_rf(ShotRng& rng, const CompiledRf& rf, ChargeState charge, double& m_I) const {
        const RfAction* action = nullptr;
        switch (charge) {
            case ChargeState::BrightMs0: action = &rf.variant[0]; break;
            case ChargeState::BrightOther: return;  // shelved population is off resonance
            case ChargeState::Dark: {
                const bool mirrored = c_.split_dark_branch && rng.bernoulli(0.5);
                action = &rf.variant[mirrored ? 2 : 1];
                break;
            }
        }
        if (!action->addresses_levels) return;
        if (std::fabs(m_I - action->m_from) < kLevelTol) {
            if (rng.bernoulli(action->p_flip)) m_I = action->m_to;
        } else if (std::fabs(m_I - action->m_to) < kLevelTol) {
            if (rng.bernoulli(action->p_flip)) m_I = action->m_from;
        }
    }

    bool report(ShotRng& rng, bool measured_flip) const {
        if (readout_.mode == ReadoutMode::Bernoulli)
            return rng.bernoulli(readout_.fidelity) ? measured_flip : !measured_flip;
        const auto& ph = readout_.photon;
        const double mean = double(ph.n_repetitions) *
                            (measured_flip ? ph.mean_counts_1 : ph.mean_counts_0);
        const double counts = static_cast<double>(rng.poisson(mean));
        const bool flipped_is_high =
            ph.mean_counts_1 >= ph.mean_counts_0;
        return flipped_is_high ? counts > ph.threshold : counts <= ph.threshold;
    }

    const PulseProgram& program_;
    const Compiled& c_;
    const ChargeKinetics& kin_;
    const ReadoutModel& readout_;
};

}  // namespace

void ReadoutModel::validate() const {
    if (!(fidelity > 0.5) || fidelity > 1.0)
        throw std::invalid_argument("readout fidelity must be in (0.5, 1]");
    if (mode == ReadoutMode::PhotonCounting) {
        if (photon.n_repetitions < 1)
            throw std::invalid_argument("photon readout needs at least one repetition");
        if (photon.mean_counts_0 < 0.0 || photon.mean_counts_1 < 0.0 || photon.threshold < 0.0)
            throw std::invalid_argument("photon readout parameters must be nonnegative");
        const double implied = implied_readout_fidelity();
        if (!(implied > 0.5) || implied > 1.0)
            throw std::invalid_argument("photon threshold discrimination gives fidelity outside (0.5, 1]");
    }
}

double ReadoutModel::implied_readout_fidelity() const {
    if (mode == ReadoutMode::Bernoulli) return fidelity;
    const double mean0 = double(photon.n_repetitions) * photon.mean_counts_0;
    const double mean1 = double(photon.n_repetitions) * photon.mean_counts_1;
    const double cdf0 = poisson_cdf(photon.threshold, mean0);
    const double cdf1 = poisson_cdf(photon.threshold, mean1);
    if (mean1 >= mean0) return 0.5 * (cdf0 + (1.0 - cdf1));
    return 0.5 * ((1.0 - cdf0) + cdf1);
}

ExperimentResult run_sequence(const PulseProgram& program, const SpinSystem& system,
                              const ChargeKinetics& kinetics, const ReadoutModel& readout,
                              std::uint64_t n_shots, std::uint64_t seed,
                              const RunOptions& options) {
    if (n_shots < 1) throw std::invalid_argument("run_sequence: need at least one shot");
    readout.validate();
    const Compiled compiled = compile(program, system, kinetics, options);
    const ShotSimulator sim(program, compiled, kinetics, readout);

    ExperimentResult result;
    result.n_shots = n_shots;
    if (options.record_shots) result.shots.resize(n_shots);

    std::uint64_t n_flips = 0;
    std::array<std::uint64_t, 3> n_by{};
    std::array<std::uint64_t, 3> flips_by{};
    std::string error;

    const auto n = static_cast<std::int64_t>(n_shots);
    const bool parallel = options.mode == ExecMode::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel) \
    reduction(+ : n_flips) reduction(+ : n_by) reduction(+ : flips_by)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        ShotRng rng(seed, static_cast<std::uint64_t>(i));
        try {
            const ShotOutcome shot = sim.run(rng, options.max_draws_per_shot);
            const auto charge_idx = static_cast<std::size_t>(shot.charge_at_rf);
            n_by[charge_idx] += 1;
            if (shot.reported_flip) {
                ++n_flips;
                flips_by[charge_idx] += 1;
            }
            if (options.record_shots) {
                result.shots[static_cast<std::size_t>(i)] =
                    ShotRecord{shot.initial_charge, shot.charge_at_rf,    shot.m_I,
                               shot.nuclear_flip_true, shot.reported_flip,
                               static_cast<std::uint64_t>(i), shot.n_jumps};
            }
        } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (error.empty()) error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error(error);

    result.n_flips = n_flips;
    result.by_charge.n = n_by;
    result.by_charge.flips = flips_by;
    const double f = double(n_flips) / double(n_shots);
    result.flip_fraction = f;
    result.stderr_binomial = std::sqrt(f * (1.0 - f) / double(n_shots));
    return result;
}

PulseProgram make_scan_program(const ScanTemplate& tpl) {
    PulseProgram p;
    p.name = "scan";
    Instruction init;
    init.kind = Instruction::Kind::InitNuclear;
    init.init_m_I = tpl.init_m_I;
    p.instructions.push_back(init);
    if (tpl.pump) {
        Instruction laser;
        laser.kind = Instruction::Kind::Laser;
        laser.laser_color = tpl.pump->first;
        laser.power = Value{tpl.pump->second * 1e-3, -1};  // mW -> W
        laser.duration = Value{tpl.pump_duration_s, -1};
        p.instructions.push_back(laser);
    }
    Instruction rf;
    rf.kind = Instruction::Kind::Rf;
    rf.frequency = Value{tpl.rf_frequency_MHz * 1e6, -1};
    rf.rabi = Value{tpl.rabi_kHz * 1e3, -1};
    rf.duration = Value{tpl.rf_duration_s, -1};
    p.instructions.push_back(rf);
    Instruction readout;
    readout.kind = Instruction::Kind::Readout;
    p.instructions.push_back(readout);
    return p;
}

namespace {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return ShotRng(master, ~index).next_u64();
}

template <typename MakeProgram>
std::vector<ExperimentResult> grid_scan(std::size_t n_points, MakeProgram&& make,
                                        const SpinSystem& system, const ChargeKinetics& kinetics,
                                        const ReadoutModel& readout, std::uint64_t n_shots,
                                        std::uint64_t seed, const RunOptions& options) {
    std::vector<ExperimentResult> out(n_points);
    RunOptions point_options = options;
    point_options.mode = ExecMode::Serial;  // parallelism lives at the grid level
    std::string error;

    const auto n = static_cast<std::int64_t>(n_points);
    const bool parallel = options.mode == ExecMode::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            const PulseProgram program = make(static_cast<std::size_t>(i));
            out[static_cast<std::size_t>(i)] =
                run_sequence(program, system, kinetics, readout, n_shots,
                             derive_seed(seed, static_cast<std::uint64_t>(i)), point_options);
        } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (error.empty()) error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error(error);
    return out;
}

}  // namespace

std::vector<ExperimentResult> rabi_scan(const std::vector<double>& durations_s,
                                        const ScanTemplate& tpl, const SpinSystem& system,
                                        const ChargeKinetics& kinetics, const ReadoutModel& readout,
                                        std::uint64_t n_shots, std::uint64_t seed,
                                        const RunOptions& options) {
    if (durations_s.empty()) throw std::invalid_argument("rabi_scan: empty grid");
    return grid_scan(
        durations_s.size(),
        [&](std::size_t i) {
            ScanTemplate t = tpl;
            t.rf_duration_s = durations_s[i];
            return make_scan_program(t);
        },
        system, kinetics, readout, n_shots, seed, options);
}

std::vector<ExperimentResult> spectrum_scan(const std::vector<double>& frequencies_MHz,
                                            const ScanTemplate& tpl, const SpinSystem& system,
                                            const ChargeKinetics& kinetics,
                                            const ReadoutModel& readout, std::uint64_t n_shots,
                                            std::uint64_t seed, const RunOptions& options) {
    if (frequencies_MHz.empty()) throw std::invalid_argument("spectrum_scan: empty grid");
    return grid_scan(
        frequencies_MHz.size(),
        [&](std::size_t i) {
            ScanTemplate t = tpl;
            t.rf_frequency_MHz = frequencies_MHz[i];
            return make_scan_program(t);
        },
        system, kinetics, readout, n_shots, seed, options);
}

Map2dResult map2d(const std::vector<double>& frequencies_MHz,
                  const std::vector<double>& red_lengths_s, double red_power_mW,
                  const ScanTemplate& tpl, const SpinSystem& system, const ChargeKinetics& kinetics,
                  const ReadoutModel& readout, std::uint64_t n_shots, std::uint64_t seed,
                  const RunOptions& options) {
    if (frequencies_MHz.empty() || red_lengths_s.empty())
        throw std::invalid_argument("map2d: empty grid");
    Map2dResult result;
    result.frequencies_MHz = frequencies_MHz;
    result.red_lengths_s = red_lengths_s;
    const std::size_t n_cols = frequencies_MHz.size();
    result.cells = grid_scan(
        n_cols * red_lengths_s.size(),
        [&](std::size_t i) {
            ScanTemplate t = tpl;
            t.pump = std::make_pair(Laser::Red, red_power_mW);
            t.pump_duration_s = red_lengths_s[i / n_cols];
            t.rf_frequency_MHz = frequencies_MHz[i % n_cols];
            return make_scan_program(t);
        },
        system, kinetics, readout, n_shots, seed, options);
    return result;
}

DeducedPopulations deduce_populations(double bright_amp, double dark_amp, double fidelity) {
    if (bright_amp < 0.0 || bright_amp > 1.0 || dark_amp < 0.0 || dark_amp > 1.0)
        throw std::invalid_argument("deduce_populations: amplitudes must be in [0, 1]");
    const double denom = 2.0 * fidelity * fidelity - 1.0;
    if (!(denom > 0.0))
        throw std::invalid_argument("deduce_populations: F <= 1/sqrt(2), contrast denominator nonpositive");
    const double base = 1.0 - fidelity * fidelity;

    DeducedPopulations d;
    d.p_bright_raw = (bright_amp - base) / denom;
    d.p_dark_raw = 2.0 * (dark_amp - base) / denom;  // dark lines carry half the population
    d.p_bright = std::clamp(d.p_bright_raw, 0.0, 1.0);
    d.p_dark = std::clamp(d.p_dark_raw, 0.0, 1.0);
    d.remainder = 1.0 - d.p_bright - d.p_dark;
    return d;
}

double analytic_flip_expectation(const PulseProgram& program, const SpinSystem& system,
                                 const ChargeKinetics& kinetics, const ReadoutModel& readout,
                                 const RunOptions& options) {
    const Compiled compiled = compile(program, system, kinetics, options);
    const double f = readout.fidelity;

    // deterministic charge populations up to the first rf pulse
    ChargePopulations pop = compiled.initial;
    for (const auto& ins : program.instructions) {
        if (ins.kind == Instruction::Kind::Rf) break;
        if (ins.kind == Instruction::Kind::Laser)
            pop = evolve_populations(pop, kinetics, ins.laser_color, ins.power.literal * 1e3,
                                     ins.duration.literal);
    }

    double target = 0.0;
    for (const auto& ins : program.instructions)
        if (ins.kind == Instruction::Kind::InitNuclear) {
            target = ins.init_m_I;
            break;
        }

    // per charge variant, XOR-compose flips of all rf pulses on transitions
    // that involve the init level (charge frozen from the first rf on)
    std::array<double, 3> p_flip{};
    for (const auto& rf : compiled.rf) {
        for (std::size_t v = 0; v < 3; ++v) {
            const auto& a = rf.variant[v];
            const bool involves = a.addresses_levels &&
                                  (std::fabs(a.m_from - target) < kLevelTol ||
                                   std::fabs(a.m_to - target) < kLevelTol);
            const double q = involves ? a.p_flip : 0.0;
            p_flip[v] = p_flip[v] * (1.0 - q) + q * (1.0 - p_flip[v]);
        }
    }

    const double w_dark_mirrored = compiled.split_dark_branch ? 0.5 : 0.0;
    const double p_true_flip = pop.p_bright * kinetics.ms0_polarization * p_flip[0] +
                               pop.p_dark * (1.0 - w_dark_mirrored) * p_flip[1] +
                               pop.p_dark * w_dark_mirrored * p_flip[2];
    return (1.0 - f * f) + (2.0 * f * f - 1.0) * p_true_flip;
}

}
