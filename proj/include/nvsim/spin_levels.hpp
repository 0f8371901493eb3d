#ifndef NVSIM_SPIN_LEVELS_HPP
#define NVSIM_SPIN_LEVELS_HPP

#include <cstddef>
#include <vector>

namespace nvsim {

enum class IsotopeKind { N14, N15 };

struct Isotope {
    IsotopeKind kind = IsotopeKind::N14;
    double spin = 1.0;               // I: 1 for N14, 1/2 for N15
    double gamma_MHz_per_T = 0.0;    // gyromagnetic ratio gamma/2pi, signed
    double quadrupole_MHz = 0.0;     // Q, zero for N15

    void validate() const;
    // m_I values, ascending (-I ... +I in integer steps)
    std::vector<double> levels() const;
};

enum class ManifoldKind { BrightMs0, Dark };

// One electronic environment the nucleus can sit in. The bright m_S=0
// manifold carries no first-order hyperfine shift; the dark manifold couples
// to an electronic moment projection m_M = +-1/2.
struct Manifold {
    ManifoldKind kind = ManifoldKind::BrightMs0;
    double electronic_projection_m = 0.0;  // 0 (bright) or +-1/2 (dark)
    double hyperfine_a_MHz = 0.0;          // a; product a*m_M enters the levels
    double t1_nuclear_s = 1.0;
    double t2_nuclear_s = 1.0;

    void validate() const;
    double hyperfine_shift_MHz() const { return hyperfine_a_MHz * electronic_projection_m; }
};

struct SpinSystem {
    Isotope isotope;
    double b_field_T = 0.0;
    std::vector<Manifold> manifolds;  // exactly one BrightMs0, >=1 Dark

    void validate() const;
    const Manifold& bright() const;
    const Manifold& dark() const;
    std::size_t index_of(const Manifold& m) const;
};

struct Level {
    double m_I;
    double energy_MHz;
};

struct Transition {
    std::size_t manifold_index;
    double m_I_from;
    double m_I_to;       // m_I_to = m_I_from + 1
    double frequency_MHz;
};

// Secular level energies E(m_I) = Q*m_I^2 + (-gamma*B + a*m_M)*m_I, gauge
// fixed so E(0) = 0 for integer spin and the two-level mean is 0 for I=1/2.
std::vector<Level> level_energies(const SpinSystem& system, const Manifold& manifold);

// All |delta m_I| = 1 transitions, sorted by frequency ascending.
std::vector<Transition> transitions(const SpinSystem& system, const Manifold& manifold);

enum class DarkBranch { PolarizedMu, MirroredMinusMu };

// Which dark-state hyperfine branches show up in a spectrum: only the
// polarized projection +mu above the threshold field, both branches below.
std::vector<DarkBranch> dark_line_visibility(double b_field_T, double polarization_threshold_T);

}

#endif
