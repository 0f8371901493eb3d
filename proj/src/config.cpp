#include "nvsim/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nvsim {

namespace {

struct DoubleKey {
    const char* key;
    double Config::* member;
};

// config-file key table; keys mirror data/nvsim_defaults.cfg
constexpr DoubleKey kDoubleKeys[] = {
    {"field.B_T", &Config::b_field_T},
    {"field.polarization_threshold_T", &Config::polarization_threshold_T},
    {"spin.dark.m_M", &Config::dark_m_M},
    {"spin.N14.gamma_MHz_per_T", &Config::n14_gamma_MHz_per_T},
    {"spin.N15.gamma_MHz_per_T", &Config::n15_gamma_MHz_per_T},
    {"spin.N14.quadrupole_MHz", &Config::n14_quadrupole_MHz},
    {"spin.N14.dark.hyperfine_a_MHz", &Config::n14_dark_a_MHz},
    {"spin.N15.dark.hyperfine_a_MHz", &Config::n15_dark_a_MHz},
    {"spin.bright.T1_s", &Config::bright_t1_s},
    {"spin.bright.T2_s", &Config::bright_t2_s},
    {"spin.dark.T1_s", &Config::dark_t1_s},
    {"spin.dark.T2_s", &Config::dark_t2_s},
    {"kinetics.red.bright_to_dark.k_MHz_per_mW", &Config::red_bd_k_MHz_per_mW},
    {"kinetics.red.bright_to_dark.Psat_mW", &Config::red_bd_psat_mW},
    {"kinetics.red.dark_to_bright.k_MHz_per_mW", &Config::red_db_k_MHz_per_mW},
    {"kinetics.red.dark_to_bright.Psat_mW", &Config::red_db_psat_mW},
    {"kinetics.green.bright_to_dark.k_MHz_per_mW", &Config::green_bd_k_MHz_per_mW},
    {"kinetics.green.bright_to_dark.Psat_mW", &Config::green_bd_psat_mW},
    {"kinetics.green.dark_to_bright.k_MHz_per_mW", &Config::green_db_k_MHz_per_mW},
    {"kinetics.green.dark_to_bright.Psat_mW", &Config::green_db_psat_mW},
    {"kinetics.misalignment_eta", &Config::misalignment_eta},
    {"kinetics.ms0_polarization", &Config::ms0_polarization},
    {"kinetics.red.reference_power_mW", &Config::red_power_mW},
    {"kinetics.green.reference_power_mW", &Config::green_power_mW},
    {"readout.fidelity", &Config::readout_fidelity},
    {"readout.photon.mean_counts_0", &Config::photon_mean_counts_0},
    {"readout.photon.mean_counts_1", &Config::photon_mean_counts_1},
    {"readout.photon.threshold", &Config::photon_threshold},
    {"fluorescence.bright_kcps", &Config::counts_bright_kcps},
    {"fluorescence.dark_kcps", &Config::counts_dark_kcps},
};

double parse_number(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        while (used < value.size() && std::isspace(static_cast<unsigned char>(value[used]))) ++used;
        if (used != value.size()) throw std::invalid_argument("trailing text");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad numeric value for '" + key + "': " + value);
    }
}

}  // namespace

SpinSystem Config::make_system(IsotopeKind kind) const {
    SpinSystem sys;
    if (kind == IsotopeKind::N14) {
        sys.isotope = {IsotopeKind::N14, 1.0, n14_gamma_MHz_per_T, n14_quadrupole_MHz};
    } else {
        sys.isotope = {IsotopeKind::N15, 0.5, n15_gamma_MHz_per_T, 0.0};
    }
    sys.b_field_T = b_field_T;
    Manifold bright{ManifoldKind::BrightMs0, 0.0, 0.0, bright_t1_s, bright_t2_s};
    Manifold dark{ManifoldKind::Dark, dark_m_M,
                  kind == IsotopeKind::N14 ? n14_dark_a_MHz : n15_dark_a_MHz, dark_t1_s, dark_t2_s};
    sys.manifolds = {bright, dark};
    sys.validate();
    return sys;
}

ChargeKinetics Config::make_kinetics() const {
    ChargeKinetics kin;
    kin.red_bright_to_dark = {red_bd_k_MHz_per_mW, red_bd_psat_mW};
    kin.red_dark_to_bright = {red_db_k_MHz_per_mW, red_db_psat_mW};
    kin.green_bright_to_dark = {green_bd_k_MHz_per_mW, green_bd_psat_mW};
    kin.green_dark_to_bright = {green_db_k_MHz_per_mW, green_db_psat_mW};
    kin.misalignment_eta = misalignment_eta;
    kin.ms0_polarization = ms0_polarization;
    kin.validate();
    return kin;
}

ReadoutModel Config::make_readout() const {
    ReadoutModel r;
    r.fidelity = readout_fidelity;
    if (readout_mode == "bernoulli") {
        r.mode = ReadoutMode::Bernoulli;
    } else if (readout_mode == "photon") {
        r.mode = ReadoutMode::PhotonCounting;
    } else {
        throw std::invalid_argument("config: readout.mode must be 'bernoulli' or 'photon'");
    }
    r.photon = {photon_repetitions, photon_mean_counts_0, photon_mean_counts_1, photon_threshold};
    r.validate();
    return r;
}

void Config::apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "readout.mode") {
            readout_mode = value;
            continue;
        }
        if (key == "readout.photon.repetitions") {
            photon_repetitions = static_cast<int>(parse_number(key, value));
            continue;
        }
        bool found = false;
        for (const auto& dk : kDoubleKeys) {
            if (key == dk.key) {
                this->*dk.member = parse_number(key, value);
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

nlohmann::json Config::to_json() const {
    nlohmann::json j;
    for (const auto& dk : kDoubleKeys) j[dk.key] = this->*dk.member;
    j["readout.mode"] = readout_mode;
    j["readout.photon.repetitions"] = photon_repetitions;
    return j;
}

Config Config::from_json(const nlohmann::json& j) {
    Config cfg;
    for (const auto& dk : kDoubleKeys)
        if (j.contains(dk.key)) cfg.*dk.member = j.at(dk.key).get<double>();
    if (j.contains("readout.mode")) cfg.readout_mode = j.at("readout.mode").get<std::string>();
    if (j.contains("readout.photon.repetitions"))
        cfg.photon_repetitions = j.at("readout.photon.repetitions").get<int>();
    return cfg;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": empty key or value");
        kv[key] = value;
    }
    return kv;
}

Config load_config(const std::string& path) {
    Config cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    cfg.apply(parse_config_text(buf.str()));
    return cfg;
}

IsotopeKind isotope_from_string(const std::string& s) {
    if (s == "N14" || s == "n14" || s == "14N") return IsotopeKind::N14;
    if (s == "N15" || s == "n15" || s == "15N") return IsotopeKind::N15;
    throw std::invalid_argument("unknown isotope '" + s + "' (use N14 or N15)");
}

}
