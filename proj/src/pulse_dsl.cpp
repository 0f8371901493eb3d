#include "nvsim/pulse_dsl.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <sstream>

#include "nvsim/csv.hpp"  // format_double

namespace nvsim {

namespace {

struct UnitDef {
    const char* symbol;
    Dimension dim;
    double scale;  // to base unit
};

constexpr std::array<UnitDef, 13> kUnits{{
    {"Hz", Dimension::Frequency, 1.0},
    {"kHz", Dimension::Frequency, 1e3},
    {"MHz", Dimension::Frequency, 1e6},
    {"ns", Dimension::Time, 1e-9},
    {"us", Dimension::Time, 1e-6},
    {"ms", Dimension::Time, 1e-3},
    {"s", Dimension::Time, 1.0},
    {"nW", Dimension::Power, 1e-9},
    {"uW", Dimension::Power, 1e-6},
    {"mW", Dimension::Power, 1e-3},
    {"W", Dimension::Power, 1.0},
    {"mT", Dimension::Field, 1e-3},
    {"T", Dimension::Field, 1.0},
}};

const char* dim_name(Dimension d) {
    switch (d) {
        case Dimension::Frequency: return "frequency";
        case Dimension::Time: return "time";
        case Dimension::Power: return "power";
        case Dimension::Field: return "field";
        case Dimension::Scalar: return "scalar";
    }
    return "?";
}

std::string err_text(int line, int column, const std::string& what) {
    std::ostringstream os;
    os << "parse error at line " << line << ", column " << column << ": " << what;
    return os.str();
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Scanner over one comment-stripped source line.
struct LineScanner {
    std::string_view text;
    int line_no;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what, std::size_t at) const {
        throw ParseError(line_no, static_cast<int>(at) + 1, what);
    }
    [[noreturn]] void fail(const std::string& what) const { fail(what, pos); }

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }
    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }
    bool try_consume(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c, const std::string& what) {
        if (!try_consume(c)) fail(what);
    }

    std::string read_word() {
        skip_ws();
        const std::size_t start = pos;
        while (pos < text.size() && word_char(text[pos])) ++pos;
        if (pos == start) fail("expected a word");
        return std::string(text.substr(start, pos - start));
    }

    // decimal literal, optional sign, no exponent
    double read_number() {
        skip_ws();
        const std::size_t start = pos;
        if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
        std::size_t digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos, ++digits;
        if (pos < text.size() && text[pos] == '.') {
            // lookahead so "1..2" range dots are not eaten as a decimal point
            if (pos + 1 < text.size() && text[pos + 1] == '.') {
                // range operator, stop here
            } else {
                ++pos;
                while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
                    ++pos, ++digits;
            }
        }
        if (digits == 0) fail("malformed quantity: expected a decimal number", start);
        return std::stod(std::string(text.substr(start, pos - start)));
    }

    int read_count() {
        skip_ws();
        const std::size_t start = pos;
        std::size_t digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos, ++digits;
        if (digits == 0) fail("expected a point count", start);
        const long v = std::stol(std::string(text.substr(start, pos - start)));
        if (v < 1) fail("point count must be at least 1", start);
        return static_cast<int>(v);
    }

    std::string read_quoted_string() {
        skip_ws();
        if (pos >= text.size() || text[pos] != '"') fail("expected a quoted name");
        ++pos;
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] != '"') ++pos;
        if (pos >= text.size()) fail("unterminated string", start - 1);
        std::string s(text.substr(start, pos - start));
        ++pos;
        return s;
    }
};

struct ScannedQuantity {
    double base_value;
    Dimension dim;  // Scalar for a bare 0 (wildcard)
};

ScannedQuantity read_quantity(LineScanner& sc) {
    const std::size_t num_pos = sc.pos;
    const double v = sc.read_number();
    // unit must follow directly or after spaces
    sc.skip_ws();
    if (sc.pos >= sc.text.size() || !word_char(sc.text[sc.pos])) {
        if (v == 0.0) return {0.0, Dimension::Scalar};  // unitless zero
        sc.fail("malformed quantity: missing unit", num_pos);
    }
    const std::size_t unit_pos = sc.pos;
    const std::string unit = sc.read_word();
    for (const auto& u : kUnits)
        if (unit == u.symbol) return {v * u.scale, u.dim};
    sc.fail("unknown unit '" + unit + "'", unit_pos);
}

ScannedQuantity expect_quantity(LineScanner& sc, Dimension dim) {
    const std::size_t at = sc.pos;
    auto q = read_quantity(sc);
    if (q.dim != dim && q.dim != Dimension::Scalar)
        sc.fail(std::string("unit mismatch: expected ") + dim_name(dim), at);
    q.dim = dim;
    return q;
}

struct ParserState {
    PulseProgram program;
    std::vector<int> sweep_decl_lines;
    std::vector<bool> sweep_referenced;

    int declare_sweep(LineScanner& sc, SweepDecl decl, std::size_t name_pos) {
        for (const auto& s : program.sweeps)
            if (s.name == decl.name) sc.fail("duplicate sweep name '" + decl.name + "'", name_pos);
        program.sweeps.push_back(std::move(decl));
        sweep_decl_lines.push_back(sc.line_no);
        sweep_referenced.push_back(false);
        return static_cast<int>(program.sweeps.size()) - 1;
    }
};

// bounds + count + optional scale word: "1us..1ms 4 log" or ", 50 log)"
SweepDecl read_sweep_body(LineScanner& sc, const std::string& name, bool comma_separated) {
    SweepDecl decl;
    decl.name = name;
    const auto lo = read_quantity(sc);
    sc.skip_ws();
    if (!(sc.pos + 1 < sc.text.size() && sc.text[sc.pos] == '.' && sc.text[sc.pos + 1] == '.'))
        sc.fail("expected '..' in sweep range");
    sc.pos += 2;
    const auto hi = read_quantity(sc);
    if (lo.dim != Dimension::Scalar && hi.dim != Dimension::Scalar && lo.dim != hi.dim)
        sc.fail("sweep bounds have mismatched units");
    decl.dim = lo.dim != Dimension::Scalar ? lo.dim : hi.dim;
    decl.lo = lo.base_value;
    decl.hi = hi.base_value;
    if (comma_separated) sc.expect(',', "expected ',' before sweep point count");
    decl.count = sc.read_count();
    sc.skip_ws();
    if (sc.pos < sc.text.size() && word_char(sc.text[sc.pos])) {
        const std::size_t at = sc.pos;
        const std::string scale = sc.read_word();
        if (scale == "log")
            decl.log_scale = true;
        else if (scale == "lin")
            decl.log_scale = false;
        else
            sc.fail("expected 'lin' or 'log'", at);
    }
    return decl;
}

Value read_value(LineScanner& sc, ParserState& st, Dimension dim) {
    sc.skip_ws();
    const std::size_t at = sc.pos;
    if (sc.peek() == '$') {
        ++sc.pos;
        const std::string name = sc.read_word();
        for (std::size_t i = 0; i < st.program.sweeps.size(); ++i) {
            if (st.program.sweeps[i].name != name) continue;
            auto& decl = st.program.sweeps[i];
            if (decl.dim == Dimension::Scalar) decl.dim = dim;  // adopt on first use
            if (decl.dim != dim)
                sc.fail(std::string("unit mismatch: sweep '") + name + "' is not a " + dim_name(dim), at);
            st.sweep_referenced[i] = true;
            return Value{0.0, static_cast<int>(i)};
        }
        sc.fail("unknown sweep variable '" + name + "'", at);
    }
    if (word_char(sc.text[sc.pos]) && !std::isdigit(static_cast<unsigned char>(sc.text[sc.pos])) &&
        sc.text[sc.pos] != '+' && sc.text[sc.pos] != '-') {
        const std::string word = sc.read_word();
        if (word != "sweep") sc.fail("expected a quantity, $reference or sweep(...)", at);
        sc.expect('(', "expected '(' after sweep");
        const std::size_t name_pos = sc.pos;
        const std::string name = sc.read_word();
        sc.expect(',', "expected ',' after sweep name");
        SweepDecl decl = read_sweep_body(sc, name, /*comma_separated=*/true);
        sc.expect(')', "expected ')' to close sweep(...)");
        if (decl.dim == Dimension::Scalar) decl.dim = dim;
        if (decl.dim != dim)
            sc.fail(std::string("unit mismatch: expected ") + dim_name(dim), at);
        const int idx = st.declare_sweep(sc, std::move(decl), name_pos);
        st.sweep_referenced[static_cast<std::size_t>(idx)] = true;
        return Value{0.0, idx};
    }
    const auto q = expect_quantity(sc, dim);
    return Value{q.base_value, -1};
}

void expect_key(LineScanner& sc, const char* key) {
    const std::size_t at = sc.pos;
    const std::string word = sc.read_word();
    if (word != key) sc.fail(std::string("expected '") + key + "='", at);
    sc.expect('=', std::string("expected '=' after '") + key + "'");
}

Value read_keyed_value(LineScanner& sc, ParserState& st, const char* key, Dimension dim) {
    expect_key(sc, key);
    return read_value(sc, st, dim);
}

void check_literal(LineScanner& sc, const Value& v, bool positive, const char* what) {
    if (v.is_sweep()) return;
    if (positive ? !(v.literal > 0.0) : v.literal < 0.0)
        sc.fail(std::string(what) + (positive ? " must be positive" : " must be nonnegative"));
}

}  // namespace

ParseError::ParseError(int line_, int column_, const std::string& what)
    : std::runtime_error(err_text(line_, column_, what)), line(line_), column(column_) {}

std::vector<double> SweepDecl::grid() const {
    if (count < 1) throw std::invalid_argument("sweep '" + name + "': empty grid");
    if (count == 1) return {lo};
    std::vector<double> out(static_cast<std::size_t>(count));
    if (log_scale) {
        if (!(lo > 0.0) || !(hi > 0.0))
            throw std::invalid_argument("sweep '" + name + "': log grid needs positive bounds");
        const double ratio = hi / lo;
        for (int i = 0; i < count; ++i)
            out[static_cast<std::size_t>(i)] = lo * std::pow(ratio, double(i) / double(count - 1));
    } else {
        for (int i = 0; i < count; ++i)
            out[static_cast<std::size_t>(i)] = lo + (hi - lo) * double(i) / double(count - 1);
    }
    return out;
}

PulseProgram parse(std::string_view text) {
    ParserState st;
    bool saw_seq = false, saw_end = false, saw_init = false;
    int readout_line = 0;

    int line_no = 0;
    std::size_t cursor = 0;
    while (cursor <= text.size()) {
        const std::size_t nl = text.find('\n', cursor);
        std::string_view raw =
            text.substr(cursor, nl == std::string_view::npos ? text.size() - cursor : nl - cursor);
        cursor = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const std::size_t hash = raw.find('#');
        if (hash != std::string_view::npos) raw = raw.substr(0, hash);

        LineScanner sc{raw, line_no};
        if (sc.at_end()) continue;

        if (!saw_seq) {
            const std::size_t at = sc.pos;
            if (sc.read_word() != "seq") sc.fail("program must start with: seq \"name\"", at);
            st.program.name = sc.read_quoted_string();
            if (!sc.at_end()) sc.fail("unexpected trailing text after seq header");
            saw_seq = true;
            continue;
        }
        if (saw_end) sc.fail("unexpected text after 'end'");

        const std::size_t kw_pos = sc.pos;
        const std::string kw = sc.read_word();
        if (kw == "end") {
            if (!sc.at_end()) sc.fail("unexpected trailing text after 'end'");
            saw_end = true;
            continue;
        }
        if (readout_line != 0) sc.fail("readout must be the last instruction", kw_pos);

        Instruction ins;
        if (kw == "init") {
            const std::size_t at = sc.pos;
            if (sc.read_word() != "nuclear") sc.fail("expected 'nuclear' after init", at);
            expect_key(sc, "m_I");
            ins.kind = Instruction::Kind::InitNuclear;
            ins.init_m_I = sc.read_number();
            saw_init = true;
        } else if (kw == "laser") {
            const std::size_t at = sc.pos;
            const std::string color = sc.read_word();
            if (color == "red")
                ins.laser_color = Laser::Red;
            else if (color == "green")
                ins.laser_color = Laser::Green;
            else
                sc.fail("laser color must be 'red' or 'green'", at);
            ins.kind = Instruction::Kind::Laser;
            ins.power = read_keyed_value(sc, st, "power", Dimension::Power);
            check_literal(sc, ins.power, false, "laser power");
            ins.duration = read_keyed_value(sc, st, "duration", Dimension::Time);
            check_literal(sc, ins.duration, false, "duration");
        } else if (kw == "rf") {
            ins.kind = Instruction::Kind::Rf;
            ins.frequency = read_keyed_value(sc, st, "freq", Dimension::Frequency);
            check_literal(sc, ins.frequency, true, "rf frequency");
            ins.rabi = read_keyed_value(sc, st, "rabi", Dimension::Frequency);
            check_literal(sc, ins.rabi, false, "rabi frequency");
            ins.duration = read_keyed_value(sc, st, "duration", Dimension::Time);
            check_literal(sc, ins.duration, false, "duration");
            if (!saw_init) sc.fail("rf requires a preceding 'init nuclear'", kw_pos);
        } else if (kw == "wait") {
            ins.kind = Instruction::Kind::Wait;
            ins.duration = read_keyed_value(sc, st, "duration", Dimension::Time);
            check_literal(sc, ins.duration, false, "duration");
        } else if (kw == "readout") {
            ins.kind = Instruction::Kind::Readout;
            readout_line = line_no;
        } else if (kw == "sweep") {
            const std::size_t name_pos = sc.pos;
            const std::string name = sc.read_word();
            SweepDecl decl = read_sweep_body(sc, name, /*comma_separated=*/false);
            st.declare_sweep(sc, std::move(decl), name_pos);
            if (!sc.at_end()) sc.fail("unexpected trailing text in sweep declaration");
            continue;
        } else {
            sc.fail("unknown keyword '" + kw + "'", kw_pos);
        }
        if (!sc.at_end()) sc.fail("unexpected trailing text");
        st.program.instructions.push_back(ins);
    }

    if (!saw_seq) throw ParseError(1, 1, "empty input: expected seq \"name\"");
    if (!saw_end) throw ParseError(line_no, 1, "missing 'end'");
    if (readout_line == 0)
        throw ParseError(line_no, 1, "program must contain exactly one readout, as the last instruction");
    for (std::size_t i = 0; i < st.program.sweeps.size(); ++i)
        if (!st.sweep_referenced[i])
            throw ParseError(st.sweep_decl_lines[i], 1,
                             "sweep '" + st.program.sweeps[i].name + "' is never referenced");
    return st.program;
}

namespace {

struct UnitLadder {
    const UnitDef* units;
    std::size_t n;
};

UnitLadder ladder_for(Dimension dim) {
    switch (dim) {
        case Dimension::Frequency: return {&kUnits[0], 3};
        case Dimension::Time: return {&kUnits[3], 4};
        case Dimension::Power: return {&kUnits[7], 4};
        case Dimension::Field: return {&kUnits[11], 2};
        case Dimension::Scalar: return {nullptr, 0};
    }
    return {nullptr, 0};
}

std::string format_quantity(double base_value, Dimension dim) {
    const auto lad = ladder_for(dim);
    if (lad.n == 0) return format_double(base_value);
    // largest unit with magnitude >= 1; smallest unit otherwise; base for 0
    const UnitDef* pick = nullptr;
    if (base_value == 0.0) {
        for (std::size_t i = 0; i < lad.n; ++i)
            if (lad.units[i].scale == 1.0) pick = &lad.units[i];
    } else {
        pick = &lad.units[0];
        for (std::size_t i = 0; i < lad.n; ++i)
            if (std::fabs(base_value) / lad.units[i].scale >= 1.0) pick = &lad.units[i];
    }
    return format_double(base_value / pick->scale) + pick->symbol;
}

std::string format_value(const Value& v, Dimension dim, const PulseProgram& p) {
    if (v.is_sweep()) return "$" + p.sweeps[static_cast<std::size_t>(v.sweep_index)].name;
    return format_quantity(v.literal, dim);
}

}  // namespace

std::string serialize(const PulseProgram& program) {
    std::string out = "seq \"" + program.name + "\"\n";
    for (const auto& s : program.sweeps) {
        out += "sweep " + s.name + " " + format_quantity(s.lo, s.dim) + ".." +
               format_quantity(s.hi, s.dim) + " " + std::to_string(s.count) +
               (s.log_scale ? " log" : " lin") + "\n";
    }
    for (const auto& ins : program.instructions) {
        switch (ins.kind) {
            case Instruction::Kind::InitNuclear:
                out += "init nuclear m_I=" + format_double(ins.init_m_I);
                break;
            case Instruction::Kind::Laser:
                out += std::string("laser ") + (ins.laser_color == Laser::Red ? "red" : "green") +
                       " power=" + format_value(ins.power, Dimension::Power, program) +
                       " duration=" + format_value(ins.duration, Dimension::Time, program);
                break;
            case Instruction::Kind::Rf:
                out += "rf freq=" + format_value(ins.frequency, Dimension::Frequency, program) +
                       " rabi=" + format_value(ins.rabi, Dimension::Frequency, program) +
                       " duration=" + format_value(ins.duration, Dimension::Time, program);
                break;
            case Instruction::Kind::Wait:
                out += "wait duration=" + format_value(ins.duration, Dimension::Time, program);
                break;
            case Instruction::Kind::Readout:
                out += "readout";
                break;
        }
        out += "\n";
    }
    out += "end\n";
    return out;
}

double parse_quantity(std::string_view text, Dimension dim) {
    LineScanner sc{text, 1};
    const auto q = expect_quantity(sc, dim);
    if (!sc.at_end()) sc.fail("unexpected trailing text");
    return q.base_value;
}

std::vector<ConcreteProgram> expand_sweeps(const PulseProgram& program) {
    if (program.sweeps.size() > 2)
        throw std::invalid_argument("expand_sweeps: at most two sweep dimensions are supported");

    std::vector<std::vector<double>> grids;
    for (const auto& s : program.sweeps) {
        grids.push_back(s.grid());
        if (grids.back().empty()) throw std::invalid_argument("expand_sweeps: empty grid");
    }

    auto substitute = [&](const std::vector<double>& values) {
        ConcreteProgram cp;
        cp.program.name = program.name;
        for (std::size_t i = 0; i < values.size(); ++i)
            cp.assignment.emplace_back(program.sweeps[i].name, values[i]);
        for (Instruction ins : program.instructions) {
            for (Value* v : {&ins.power, &ins.frequency, &ins.rabi, &ins.duration}) {
                if (v->is_sweep()) {
                    v->literal = values[static_cast<std::size_t>(v->sweep_index)];
                    v->sweep_index = -1;
                }
            }
            cp.program.instructions.push_back(ins);
        }
        return cp;
    };

    std::vector<ConcreteProgram> out;
    if (grids.empty()) {
        out.push_back(substitute({}));
    } else if (grids.size() == 1) {
        for (double v : grids[0]) out.push_back(substitute({v}));
    } else {
        for (double outer : grids[0])
            for (double inner : grids[1]) out.push_back(substitute({outer, inner}));
    }
    return out;
}

}
