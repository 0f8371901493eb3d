#ifndef NVSIM_PULSE_DSL_HPP
#define NVSIM_PULSE_DSL_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nvsim/charge_kinetics.hpp"  // Laser

namespace nvsim {

// Physical dimension of a DSL quantity. Values are stored in canonical base
// units: Hz, s, W, T.
enum class Dimension { Frequency, Time, Power, Field, Scalar };

struct ParseError : std::runtime_error {
    ParseError(int line, int column, const std::string& what);
    int line;
    int column;
};

struct SweepDecl {
    std::string name;
    double lo = 0.0;  // base units
    double hi = 0.0;
    int count = 0;
    bool log_scale = false;
    Dimension dim = Dimension::Scalar;

    std::vector<double> grid() const;  // throws on log grid with lo <= 0
    bool operator==(const SweepDecl&) const = default;
};

// A quantity field: either a literal in base units or a reference to a sweep.
struct Value {
    double literal = 0.0;
    int sweep_index = -1;  // >= 0: index into PulseProgram::sweeps

    bool is_sweep() const { return sweep_index >= 0; }
    bool operator==(const Value&) const = default;
};

struct Instruction {
    enum class Kind { InitNuclear, Laser, Rf, Wait, Readout };

    Kind kind = Kind::Readout;
    double init_m_I = 0.0;              // InitNuclear
    Laser laser_color = Laser::Red;     // Laser
    Value power;                        // Laser (W)
    Value frequency;                    // Rf (Hz)
    Value rabi;                         // Rf (Hz)
    Value duration;                     // Laser, Rf, Wait (s)

    bool operator==(const Instruction&) const = default;
};

struct PulseProgram {
    std::string name;
    std::vector<SweepDecl> sweeps;      // declaration order
    std::vector<Instruction> instructions;

    bool operator==(const PulseProgram&) const = default;
};

// Parses the line-oriented sequence language. Throws ParseError with
// 1-based line/column on any lexical, unit or structural violation.
PulseProgram parse(std::string_view text);

// Canonical text: sweep declarations first, one instruction per line,
// quantities rendered in the largest unit with magnitude >= 1, LF endings.
// parse(serialize(p)) is structurally equal to p.
std::string serialize(const PulseProgram& program);

struct ConcreteProgram {
    PulseProgram program;  // no sweeps, all values literal
    std::vector<std::pair<std::string, double>> assignment;  // base units
};

// Cartesian expansion, row-major with the first-declared sweep outermost.
// At most two sweep dimensions.
std::vector<ConcreteProgram> expand_sweeps(const PulseProgram& program);

// Parses a standalone quantity like "120us" or "4.654MHz" into base units.
// Shared by CLI flags that accept unit-suffixed values.
double parse_quantity(std::string_view text, Dimension dim);

}

#endif
