#include "nvsim/commands.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nvsim/bloch.hpp"
#include "nvsim/csv.hpp"
#include "nvsim/fit.hpp"
#include "nvsim/pulse_dsl.hpp"
#include "nvsim/version.hpp"

namespace nvsim {

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
    return out;
}

std::vector<double> logspace(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > 0.0)) throw UsageError("log grid needs positive bounds");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            n == 1 ? lo : lo * std::pow(hi / lo, double(i) / double(n - 1));
    return out;
}

RunOptions options_from(const Config& cfg) {
    RunOptions o;
    o.reference_green_power_mW = cfg.green_power_mW;
    o.polarization_threshold_T = cfg.polarization_threshold_T;
    return o;
}

double default_init_m_I(IsotopeKind kind) { return kind == IsotopeKind::N14 ? 0.0 : 0.5; }

nlohmann::json manifest_header(const Config& cfg, const char* command) {
    nlohmann::json m;
    m["tool"] = "nvsim";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = cfg.to_json();
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void apply_manifold_selection(const std::string& manifolds, RunOptions& options) {
    if (manifolds == "bright")
        options.initial_populations = ChargePopulations{1.0, 0.0};
    else if (manifolds == "dark")
        options.initial_populations = ChargePopulations{0.0, 1.0};
    else if (manifolds != "bright,dark" && manifolds != "dark,bright")
        throw UsageError("--manifolds must be 'bright', 'dark' or 'bright,dark'");
}

}  // namespace

CommandResult cmd_spectrum(const Config& cfg, const SpectrumArgs& args) {
    if (!(args.fmin_MHz < args.fmax_MHz)) throw UsageError("spectrum: need fmin < fmax");
    if (args.points < 2) throw UsageError("spectrum: need at least 2 points");
    if (args.shots < 1) throw UsageError("spectrum: need at least one shot");

    const IsotopeKind kind = isotope_from_string(args.isotope);
    const SpinSystem system = cfg.make_system(kind);
    const ChargeKinetics kinetics = cfg.make_kinetics();
    const ReadoutModel readout = cfg.make_readout();
    RunOptions options = options_from(cfg);
    apply_manifold_selection(args.manifolds, options);

    ScanTemplate tpl;
    tpl.init_m_I = args.init_m_I < 1e98 ? args.init_m_I : default_init_m_I(kind);
    tpl.rabi_kHz = args.rabi_kHz;
    tpl.rf_duration_s = args.pulse_s;

    const auto freqs = linspace(args.fmin_MHz, args.fmax_MHz, args.points);
    const auto results =
        spectrum_scan(freqs, tpl, system, kinetics, readout, args.shots, args.seed, options);

    CsvWriter csv({"frequency_MHz", "flip_fraction", "stderr", "analytic_expectation"});
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        ScanTemplate t = tpl;
        t.rf_frequency_MHz = freqs[i];
        const double analytic = analytic_flip_expectation(make_scan_program(t), system, kinetics,
                                                          readout, options);
        csv.add_row({freqs[i], results[i].flip_fraction, results[i].stderr_binomial, analytic});
    }

    nlohmann::json m = manifest_header(cfg, "spectrum");
    m["args"] = {{"isotope", args.isotope}, {"manifolds", args.manifolds},
                 {"fmin_MHz", args.fmin_MHz}, {"fmax_MHz", args.fmax_MHz},
                 {"points", args.points},    {"rabi_kHz", args.rabi_kHz},
                 {"pulse_s", args.pulse_s},  {"init_m_I", tpl.init_m_I},
                 {"shots", args.shots},      {"seed", args.seed}};
    return {csv.str(), m};
}

CommandResult cmd_rabi(const Config& cfg, const RabiArgs& args) {
    if (args.points < 2) throw UsageError("rabi: need at least 2 points");
    if (!(args.tmax_s > 0.0)) throw UsageError("rabi: tmax must be positive");
    if (args.shots < 1) throw UsageError("rabi: need at least one shot");

    const IsotopeKind kind = isotope_from_string(args.isotope);
    const SpinSystem system = cfg.make_system(kind);
    const ChargeKinetics kinetics = cfg.make_kinetics();
    const ReadoutModel readout = cfg.make_readout();
    const RunOptions options = options_from(cfg);

    ScanTemplate tpl;
    tpl.init_m_I = args.init_m_I < 1e98 ? args.init_m_I : default_init_m_I(kind);
    tpl.rabi_kHz = args.rabi_kHz;

    double freq = args.frequency_MHz;
    if (freq <= 0.0) {
        const Manifold& manifold = args.manifold == "dark" ? system.dark() : system.bright();
        std::vector<Transition> touching;
        for (const auto& t : transitions(system, manifold))
            if (std::fabs(t.m_I_from - tpl.init_m_I) < 1e-9 ||
                std::fabs(t.m_I_to - tpl.init_m_I) < 1e-9)
                touching.push_back(t);
        if (touching.empty()) throw UsageError("rabi: no transition touches the init level");
        if (args.transition_index < 0 ||
            static_cast<std::size_t>(args.transition_index) >= touching.size())
            throw UsageError("rabi: transition index out of range");
        freq = touching[static_cast<std::size_t>(args.transition_index)].frequency_MHz;
    }
    tpl.rf_frequency_MHz = freq;

    const auto durations = linspace(0.0, args.tmax_s, args.points);
    const auto results =
        rabi_scan(durations, tpl, system, kinetics, readout, args.shots, args.seed, options);

    CsvWriter csv({"duration_s", "flip_fraction", "stderr", "analytic_expectation"});
    for (std::size_t i = 0; i < durations.size(); ++i) {
        ScanTemplate t = tpl;
        t.rf_duration_s = durations[i];
        const double analytic = analytic_flip_expectation(make_scan_program(t), system, kinetics,
                                                          readout, options);
        csv.add_row({durations[i], results[i].flip_fraction, results[i].stderr_binomial, analytic});
    }

    nlohmann::json m = manifest_header(cfg, "rabi");
    m["args"] = {{"isotope", args.isotope},   {"frequency_MHz", args.frequency_MHz},
                 {"transition_index", args.transition_index},
                 {"manifold", args.manifold}, {"rabi_kHz", args.rabi_kHz},
                 {"tmax_s", args.tmax_s},     {"points", args.points},
                 {"init_m_I", tpl.init_m_I},  {"shots", args.shots},
                 {"seed", args.seed}};
    return {csv.str(), m};
}

CommandResult cmd_kinetics(const Config& cfg, const KineticsArgs& args) {
    if (args.points < 2) throw UsageError("kinetics: need at least 2 points");
    if (!(args.power_mW > 0.0)) throw UsageError("kinetics: power must be positive");

    Laser laser;
    if (args.laser == "red")
        laser = Laser::Red;
    else if (args.laser == "green")
        laser = Laser::Green;
    else
        throw UsageError("kinetics: --laser must be red or green");

    Config adjusted = cfg;
    if (args.tau_target_s > 0.0) {
        // rescale the pump rate so the total decay time at this power matches
        const double target_rate_MHz = 1e-6 / args.tau_target_s;
        if (laser == Laser::Red) {
            const double p = args.power_mW;
            adjusted.red_bd_k_MHz_per_mW = target_rate_MHz * (p + adjusted.red_bd_psat_mW) /
                                           (adjusted.misalignment_eta * p * p);
        } else {
            const ChargeKinetics kin0 = cfg.make_kinetics();
            const auto [bd, db] = kin0.rates_MHz(Laser::Green, args.power_mW);
            const double scale = target_rate_MHz / (bd + db);
            adjusted.green_bd_k_MHz_per_mW *= scale;
            adjusted.green_db_k_MHz_per_mW *= scale;
        }
    }
    const ChargeKinetics kinetics = adjusted.make_kinetics();

    const auto [r_bd, r_db] = kinetics.rates_MHz(laser, args.power_mW);
    const double total_per_s = (r_bd + r_db) * 1e6;
    if (total_per_s <= 0.0) throw UsageError("kinetics: both rates vanish at this power");
    const double tmax = args.tmax_s > 0.0 ? args.tmax_s : 5.0 / total_per_s;

    const ChargePopulations initial =
        laser == Laser::Red ? ChargePopulations{1.0, 0.0} : ChargePopulations{0.0, 1.0};

    CsvWriter csv({"time_s", "p_bright", "p_dark", "fluorescence_kcps"});
    for (double t : linspace(0.0, tmax, args.points)) {
        const auto pop = evolve_populations(initial, kinetics, laser, args.power_mW, t);
        const double signal =
            cfg.counts_dark_kcps + (cfg.counts_bright_kcps - cfg.counts_dark_kcps) * pop.p_bright;
        csv.add_row({t, pop.p_bright, pop.p_dark, signal});
    }

    nlohmann::json m = manifest_header(cfg, "kinetics");
    m["args"] = {{"laser", args.laser},
                 {"power_mW", args.power_mW},
                 {"tau_target_s", args.tau_target_s},
                 {"tmax_s", args.tmax_s},
                 {"points", args.points}};
    return {csv.str(), m};
}

CommandResult cmd_powerdep(const Config& cfg, const PowerdepArgs& args) {
    if (args.points < 2) throw UsageError("powerdep: need at least 2 points");
    if (!(args.pmin_mW > 0.0) || !(args.pmin_mW < args.pmax_mW))
        throw UsageError("powerdep: need 0 < pmin < pmax");

    const ChargeKinetics kinetics = cfg.make_kinetics();
    CsvWriter csv({"x", "y"});
    for (double p : logspace(args.pmin_mW, args.pmax_mW, args.points)) {
        const double r = args.laser == "red"
                             ? rate_MHz(kinetics.red_bright_to_dark, p, kinetics.misalignment_eta)
                             : rate_MHz(kinetics.green_dark_to_bright, p);
        csv.add_row({p, r});
    }

    nlohmann::json m = manifest_header(cfg, "powerdep");
    m["args"] = {{"laser", args.laser},
                 {"pmin_mW", args.pmin_mW},
                 {"pmax_mW", args.pmax_mW},
                 {"points", args.points}};
    return {csv.str(), m};
}

CommandResult cmd_map2d(const Config& cfg, const Map2dArgs& args) {
    if (!(args.fmin_MHz < args.fmax_MHz)) throw UsageError("map2d: need fmin < fmax");
    if (args.freq_points < 2 || args.red_points < 2)
        throw UsageError("map2d: need at least 2 points per axis");
    if (args.shots < 1) throw UsageError("map2d: need at least one shot");

    const IsotopeKind kind = isotope_from_string(args.isotope);
    const SpinSystem system = cfg.make_system(kind);
    const ChargeKinetics kinetics = cfg.make_kinetics();
    const ReadoutModel readout = cfg.make_readout();
    const RunOptions options = options_from(cfg);

    ScanTemplate tpl;
    tpl.init_m_I = args.init_m_I < 1e98 ? args.init_m_I : default_init_m_I(kind);
    tpl.rabi_kHz = args.rabi_kHz;
    tpl.rf_duration_s = args.pulse_s;

    const auto freqs = linspace(args.fmin_MHz, args.fmax_MHz, args.freq_points);
    const auto reds = args.red_log ? logspace(args.red_min_s, args.red_max_s, args.red_points)
                                   : linspace(args.red_min_s, args.red_max_s, args.red_points);
    const Map2dResult map = map2d(freqs, reds, args.red_power_mW, tpl, system, kinetics, readout,
                                  args.shots, args.seed, options);

    std::vector<std::string> header{"red_length_s"};
    for (double f : freqs) header.push_back(format_double(f));
    CsvWriter csv(header);
    for (std::size_t r = 0; r < reds.size(); ++r) {
        std::vector<double> row{reds[r]};
        for (std::size_t c = 0; c < freqs.size(); ++c) row.push_back(map.at(r, c).flip_fraction);
        csv.add_row(row);
    }

    nlohmann::json m = manifest_header(cfg, "map2d");
    m["args"] = {{"isotope", args.isotope},     {"fmin_MHz", args.fmin_MHz},
                 {"fmax_MHz", args.fmax_MHz},   {"freq_points", args.freq_points},
                 {"red_min_s", args.red_min_s}, {"red_max_s", args.red_max_s},
                 {"red_points", args.red_points}, {"red_log", args.red_log},
                 {"red_power_mW", args.red_power_mW}, {"rabi_kHz", args.rabi_kHz},
                 {"pulse_s", args.pulse_s},     {"init_m_I", tpl.init_m_I},
                 {"shots", args.shots},         {"seed", args.seed}};
    return {csv.str(), m};
}

CommandResult cmd_run(const Config& cfg, const RunArgs& args) {
    if (args.shots < 1) throw UsageError("run: need at least one shot");
    const std::string text = !args.seq_text.empty() ? args.seq_text : read_file(args.seq_path);
    const PulseProgram program = parse(text);  // ParseError carries line/column

    const IsotopeKind kind = isotope_from_string(args.isotope);
    const SpinSystem system = cfg.make_system(kind);
    const ChargeKinetics kinetics = cfg.make_kinetics();
    const ReadoutModel readout = cfg.make_readout();
    const RunOptions options = options_from(cfg);

    const auto concrete = expand_sweeps(program);

    std::vector<std::string> header;
    for (const auto& s : program.sweeps) header.push_back(s.name);
    header.insert(header.end(), {"flip_fraction", "stderr", "n_shots"});
    CsvWriter csv(header);

    for (std::size_t i = 0; i < concrete.size(); ++i) {
        const auto result =
            run_sequence(concrete[i].program, system, kinetics, readout, args.shots,
                         ShotRng(args.seed, ~i).next_u64(), options);
        std::vector<double> row;
        for (const auto& [name, value] : concrete[i].assignment) row.push_back(value);
        row.insert(row.end(), {result.flip_fraction, result.stderr_binomial,
                               static_cast<double>(result.n_shots)});
        csv.add_row(row);
    }

    nlohmann::json m = manifest_header(cfg, "run");
    m["args"] = {{"seq_path", args.seq_path},
                 {"seq_text", text},
                 {"isotope", args.isotope},
                 {"shots", args.shots},
                 {"seed", args.seed}};
    return {csv.str(), m};
}

CommandResult cmd_fit(const Config& cfg, const FitArgs& args) {
    const std::string text = !args.csv_text.empty() ? args.csv_text : read_file(args.csv_path);
    const CsvTable table = parse_csv(text);
    const int xi = table.column("x"), yi = table.column("y"), si = table.column("sigma");
    if (xi < 0 || yi < 0) throw UsageError("fit: CSV must have columns x,y[,sigma]");

    std::vector<double> xs, ys, sigmas;
    for (const auto& row : table.rows) {
        xs.push_back(row[static_cast<std::size_t>(xi)]);
        ys.push_back(row[static_cast<std::size_t>(yi)]);
        if (si >= 0) sigmas.push_back(row[static_cast<std::size_t>(si)]);
    }

    const ModelFunction model = ModelFunction::by_name(args.model, args.pulse_duration_s);
    const FitResult result = fit(model, xs, ys, sigmas);

    nlohmann::json out;
    out["model"] = args.model;
    for (std::size_t i = 0; i < model.param_names.size(); ++i)
        out["estimates"][model.param_names[i]] = result.estimates[i];
    out["covariance"] = result.covariance;
    out["residual_norm"] = result.residual_norm;
    out["n_iterations"] = result.n_iterations;
    out["converged"] = result.converged;
    out["warnings"] = result.warnings;

    nlohmann::json m = manifest_header(cfg, "fit");
    m["args"] = {{"model", args.model},
                 {"csv_path", args.csv_path},
                 {"csv_text", text},
                 {"pulse_duration_s", args.pulse_duration_s}};
    return {out.dump(2) + "\n", m};
}

CommandResult rerun_from_manifest(const nlohmann::json& manifest) {
    const Config cfg = Config::from_json(manifest.at("config"));
    const std::string command = manifest.at("command").get<std::string>();
    const auto& a = manifest.at("args");

    if (command == "spectrum") {
        SpectrumArgs args;
        args.isotope = a.at("isotope");
        args.manifolds = a.at("manifolds");
        args.fmin_MHz = a.at("fmin_MHz");
        args.fmax_MHz = a.at("fmax_MHz");
        args.points = a.at("points");
        args.rabi_kHz = a.at("rabi_kHz");
        args.pulse_s = a.at("pulse_s");
        args.init_m_I = a.at("init_m_I");
        args.shots = a.at("shots");
        args.seed = a.at("seed");
        return cmd_spectrum(cfg, args);
    }
    if (command == "rabi") {
        RabiArgs args;
        args.isotope = a.at("isotope");
        args.frequency_MHz = a.at("frequency_MHz");
        args.transition_index = a.at("transition_index");
        args.manifold = a.at("manifold");
        args.rabi_kHz = a.at("rabi_kHz");
        args.tmax_s = a.at("tmax_s");
        args.points = a.at("points");
        args.init_m_I = a.at("init_m_I");
        args.shots = a.at("shots");
        args.seed = a.at("seed");
        return cmd_rabi(cfg, args);
    }
    if (command == "kinetics") {
        KineticsArgs args;
        args.laser = a.at("laser");
        args.power_mW = a.at("power_mW");
        args.tau_target_s = a.at("tau_target_s");
        args.tmax_s = a.at("tmax_s");
        args.points = a.at("points");
        return cmd_kinetics(cfg, args);
    }
    if (command == "powerdep") {
        PowerdepArgs args;
        args.laser = a.at("laser");
        args.pmin_mW = a.at("pmin_mW");
        args.pmax_mW = a.at("pmax_mW");
        args.points = a.at("points");
        return cmd_powerdep(cfg, args);
    }
    if (command == "map2d") {
        Map2dArgs args;
        args.isotope = a.at("isotope");
        args.fmin_MHz = a.at("fmin_MHz");
        args.fmax_MHz = a.at("fmax_MHz");
        args.freq_points = a.at("freq_points");
        args.red_min_s = a.at("red_min_s");
        args.red_max_s = a.at("red_max_s");
        args.red_points = a.at("red_points");
        args.red_log = a.at("red_log");
        args.red_power_mW = a.at("red_power_mW");
        args.rabi_kHz = a.at("rabi_kHz");
        args.pulse_s = a.at("pulse_s");
        args.init_m_I = a.at("init_m_I");
        args.shots = a.at("shots");
        args.seed = a.at("seed");
        return cmd_map2d(cfg, args);
    }
    if (command == "run") {
        RunArgs args;
        args.seq_path = a.at("seq_path");
        args.seq_text = a.at("seq_text");
        args.isotope = a.at("isotope");
        args.shots = a.at("shots");
        args.seed = a.at("seed");
        return cmd_run(cfg, args);
    }
    if (command == "fit") {
        FitArgs args;
        args.model = a.at("model");
        args.csv_path = a.at("csv_path");
        args.csv_text = a.at("csv_text");
        args.pulse_duration_s = a.at("pulse_duration_s");
        return cmd_fit(cfg, args);
    }
    throw UsageError("manifest: unknown command '" + command + "'");
}

}
