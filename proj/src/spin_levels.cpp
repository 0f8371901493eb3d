#include "nvsim/spin_levels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nvsim {

namespace {

bool near(double a, double b, double tol = 1e-12) { return std::fabs(a - b) <= tol; }

}

void Isotope::validate() const {
    if (kind == IsotopeKind::N14) {
        if (!near(spin, 1.0)) throw std::invalid_argument("N14 must have I = 1");
    } else {
        if (!near(spin, 0.5)) throw std::invalid_argument("N15 must have I = 1/2");
        if (quadrupole_MHz != 0.0)
            throw std::invalid_argument("N15 carries no quadrupole splitting");
    }
    if (gamma_MHz_per_T == 0.0) throw std::invalid_argument("gyromagnetic ratio must be nonzero");
}

std::vector<double> Isotope::levels() const {
    std::vector<double> out;
    for (double m = -spin; m <= spin + 1e-9; m += 1.0) out.push_back(m);
    return out;
}

void Manifold::validate() const {
    if (kind == ManifoldKind::BrightMs0) {
        if (electronic_projection_m != 0.0)
            throw std::invalid_argument("bright m_S=0 manifold must have m_M = 0");
    } else {
        if (!near(std::fabs(electronic_projection_m), 0.5))
            throw std::invalid_argument("dark manifold must have |m_M| = 1/2");
    }
    if (!(t1_nuclear_s > 0.0) || !(t2_nuclear_s > 0.0))
        throw std::invalid_argument("relaxation times must be positive");
    if (t2_nuclear_s > 2.0 * t1_nuclear_s)
        throw std::invalid_argument("T2 must not exceed 2 T1");
}

void SpinSystem::validate() const {
    isotope.validate();
    if (b_field_T < 0.0) throw std::invalid_argument("B field must be nonnegative");
    std::size_t n_bright = 0, n_dark = 0;
    for (const auto& m : manifolds) {
        m.validate();
        (m.kind == ManifoldKind::BrightMs0 ? n_bright : n_dark)++;
    }
    if (n_bright != 1 || n_dark < 1)
        throw std::invalid_argument("system needs exactly one bright and at least one dark manifold");
}

const Manifold& SpinSystem::bright() const {
    for (const auto& m : manifolds)
        if (m.kind == ManifoldKind::BrightMs0) return m;
    throw std::logic_error("no bright manifold");
}

const Manifold& SpinSystem::dark() const {
    for (const auto& m : manifolds)
        if (m.kind == ManifoldKind::Dark) return m;
    throw std::logic_error("no dark manifold");
}

std::size_t SpinSystem::index_of(const Manifold& m) const {
    const auto* base = manifolds.data();
    if (&m >= base && &m < base + manifolds.size())
        return static_cast<std::size_t>(&m - base);
    throw std::invalid_argument("manifold does not belong to this system");
}

std::vector<Level> level_energies(const SpinSystem& system, const Manifold& manifold) {
    const double q = system.isotope.quadrupole_MHz;
    // linear coefficient: nuclear Zeeman plus hyperfine field of the manifold
    const double x = -system.isotope.gamma_MHz_per_T * system.b_field_T +
                     manifold.hyperfine_shift_MHz();

    std::vector<Level> out;
    for (double m : system.isotope.levels()) out.push_back({m, q * m * m + x * m});

    // gauge: E(0) = 0 for integer spin, zero mean for the I=1/2 doublet
    double offset = 0.0;
    if (near(std::round(system.isotope.spin), system.isotope.spin)) {
        for (const auto& l : out)
            if (near(l.m_I, 0.0)) offset = l.energy_MHz;
    } else {
        for (const auto& l : out) offset += l.energy_MHz;
        offset /= static_cast<double>(out.size());
    }
    for (auto& l : out) l.energy_MHz -= offset;
    return out;
}

std::vector<Transition> transitions(const SpinSystem& system, const Manifold& manifold) {
    const auto levels = level_energies(system, manifold);
    const std::size_t idx = system.index_of(manifold);

    std::vector<Transition> out;
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        out.push_back({idx, levels[i].m_I, levels[i + 1].m_I,
                       std::fabs(levels[i + 1].energy_MHz - levels[i].energy_MHz)});
    }
    std::sort(out.begin(), out.end(),
              [](const Transition& a, const Transition& b) { return a.frequency_MHz < b.frequency_MHz; });
    return out;
}

std::vector<DarkBranch> dark_line_visibility(double b_field_T, double polarization_threshold_T) {
    if (b_field_T < 0.0) throw std::invalid_argument("B field must be nonnegative");
    if (b_field_T >= polarization_threshold_T) return {DarkBranch::PolarizedMu};
    return {DarkBranch::PolarizedMu, DarkBranch::MirroredMinusMu};
}

}
