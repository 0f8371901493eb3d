// nvsim: forward simulator for the charge-state and nuclear-spin dynamics of
// a single NV defect. Every command writes a CSV (JSON for `fit`) plus a
// manifest that reproduces the output bit-exactly with the same binary.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nvsim/commands.hpp"
#include "nvsim/pulse_dsl.hpp"
#include "nvsim/version.hpp"

namespace {

struct GlobalOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_prefix = "nvsim_out";
};

nvsim::Config resolve_config(const GlobalOpts& g) {
    std::string path = g.config_path;
    if (path.empty())
        if (const char* env = std::getenv("NVSIM_CONFIG")) path = env;
    nvsim::Config cfg;
    try {
        cfg = nvsim::load_config(path);
        std::map<std::string, std::string> kv;
        for (const auto& ov : g.overrides) {
            const auto eq = ov.find('=');
            if (eq == std::string::npos)
                throw nvsim::UsageError("--set expects key=value, got '" + ov + "'");
            kv[ov.substr(0, eq)] = ov.substr(eq + 1);
        }
        cfg.apply(kv);
    } catch (const nvsim::UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw nvsim::UsageError(e.what());
    }
    return cfg;
}

void write_output(const GlobalOpts& g, const nvsim::CommandResult& result, bool json_payload) {
    const std::string data_path = g.out_prefix + (json_payload ? ".json" : ".csv");
    const std::string manifest_path = g.out_prefix + ".manifest.json";
    {
        std::ofstream out(data_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + data_path + "'");
        out << result.csv;
    }
    {
        std::ofstream out(manifest_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + manifest_path + "'");
        out << result.manifest.dump(2) << "\n";
    }
    std::cout << "wrote " << data_path << " and " << manifest_path << "\n";
}

double time_flag(const std::string& text, const char* flag) {
    try {
        return nvsim::parse_quantity(text, nvsim::Dimension::Time);
    } catch (const std::exception&) {
        throw nvsim::UsageError(std::string(flag) + " expects a duration like 120us");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nvsim: NV charge-state / nuclear-spin forward simulator"};
    app.set_version_flag("--version", std::string("nvsim ") + nvsim::kVersion);
    app.require_subcommand(1);

    GlobalOpts global;
    app.add_option("--config", global.config_path,
                   "constants file (default: $NVSIM_CONFIG, else built-in defaults)");
    app.add_option("--set", global.overrides, "override a config key, e.g. --set field.B_T=0.3");
    app.add_option("--out", global.out_prefix, "output prefix (default nvsim_out)");

    nvsim::SpectrumArgs spectrum;
    double spectrum_field = 0.0;
    std::string spectrum_pulse = "20us";
    auto* cmd_spectrum = app.add_subcommand("spectrum", "NMR spectrum over an rf frequency grid");
    cmd_spectrum->add_option("--isotope", spectrum.isotope, "N14 or N15");
    cmd_spectrum->add_option("--field-T", spectrum_field, "magnetic field override (tesla)");
    cmd_spectrum->add_option("--manifolds", spectrum.manifolds, "bright, dark or bright,dark");
    cmd_spectrum->add_option("--fmin", spectrum.fmin_MHz, "scan start (MHz)");
    cmd_spectrum->add_option("--fmax", spectrum.fmax_MHz, "scan end (MHz)");
    cmd_spectrum->add_option("--points", spectrum.points, "grid points");
    cmd_spectrum->add_option("--rabi-kHz", spectrum.rabi_kHz, "drive strength");
    cmd_spectrum->add_option("--pulse", spectrum_pulse, "rf pulse length, e.g. 20us");
    cmd_spectrum->add_option("--init-mI", spectrum.init_m_I, "initialized nuclear level");
    cmd_spectrum->add_option("--shots", spectrum.shots, "Monte Carlo shots per point");
    cmd_spectrum->add_option("--seed", spectrum.seed, "master RNG seed");

    nvsim::RabiArgs rabi;
    std::string rabi_tmax = "100us";
    auto* cmd_rabi = app.add_subcommand("rabi", "Rabi trace over rf pulse duration");
    cmd_rabi->add_option("--isotope", rabi.isotope, "N14 or N15");
    cmd_rabi->add_option("--freq-MHz", rabi.frequency_MHz, "rf frequency (default: resonant)");
    cmd_rabi->add_option("--transition", rabi.transition_index, "transition index at resonance");
    cmd_rabi->add_option("--manifold", rabi.manifold, "bright or dark line");
    cmd_rabi->add_option("--rabi-kHz", rabi.rabi_kHz, "drive strength");
    cmd_rabi->add_option("--tmax", rabi_tmax, "longest pulse, e.g. 100us");
    cmd_rabi->add_option("--points", rabi.points, "grid points");
    cmd_rabi->add_option("--init-mI", rabi.init_m_I, "initialized nuclear level");
    cmd_rabi->add_option("--shots", rabi.shots, "Monte Carlo shots per point");
    cmd_rabi->add_option("--seed", rabi.seed, "master RNG seed");

    nvsim::KineticsArgs kinetics;
    std::string kinetics_tau, kinetics_tmax;
    auto* cmd_kinetics = app.add_subcommand("kinetics", "charge population transfer vs time");
    cmd_kinetics->add_option("--laser", kinetics.laser, "red or green");
    cmd_kinetics->add_option("--power-mW", kinetics.power_mW, "laser power");
    cmd_kinetics->add_option("--tau-target", kinetics_tau, "rescale pump rate, e.g. 120us");
    cmd_kinetics->add_option("--tmax", kinetics_tmax, "trace length (default five decay times)");
    cmd_kinetics->add_option("--points", kinetics.points, "grid points");

    nvsim::PowerdepArgs powerdep;
    auto* cmd_powerdep = app.add_subcommand("powerdep", "transfer rate vs laser power");
    cmd_powerdep->add_option("--laser", powerdep.laser, "red (pump) or green (recovery)");
    cmd_powerdep->add_option("--pmin-mW", powerdep.pmin_mW, "lowest power");
    cmd_powerdep->add_option("--pmax-mW", powerdep.pmax_mW, "highest power");
    cmd_powerdep->add_option("--points", powerdep.points, "grid points");

    nvsim::Map2dArgs map2d;
    std::string map_red_min = "1us", map_red_max = "600us", map_pulse = "50us";
    auto* cmd_map2d = app.add_subcommand("map2d", "NMR amplitude vs rf frequency and red pulse length");
    cmd_map2d->add_option("--isotope", map2d.isotope, "N14 or N15");
    cmd_map2d->add_option("--fmin", map2d.fmin_MHz, "scan start (MHz)");
    cmd_map2d->add_option("--fmax", map2d.fmax_MHz, "scan end (MHz)");
    cmd_map2d->add_option("--freq-points", map2d.freq_points, "frequency grid points");
    cmd_map2d->add_option("--red-min", map_red_min, "shortest red pulse");
    cmd_map2d->add_option("--red-max", map_red_max, "longest red pulse");
    cmd_map2d->add_option("--red-points", map2d.red_points, "red pulse grid points");
    cmd_map2d->add_flag("--red-lin,!--red-log", map2d.red_log, "linear/log red pulse grid")
        ->default_val(true);
    cmd_map2d->add_option("--red-power-mW", map2d.red_power_mW, "red laser power");
    cmd_map2d->add_option("--rabi-kHz", map2d.rabi_kHz, "drive strength");
    cmd_map2d->add_option("--pulse", map_pulse, "rf pulse length");
    cmd_map2d->add_option("--init-mI", map2d.init_m_I, "initialized nuclear level");
    cmd_map2d->add_option("--shots", map2d.shots, "Monte Carlo shots per point");
    cmd_map2d->add_option("--seed", map2d.seed, "master RNG seed");

    nvsim::RunArgs run;
    auto* cmd_run = app.add_subcommand("run", "execute a .seq pulse program");
    cmd_run->add_option("file", run.seq_path, "sequence file")->required();
    cmd_run->add_option("--isotope", run.isotope, "N14 or N15");
    cmd_run->add_option("--shots", run.shots, "Monte Carlo shots per grid point");
    cmd_run->add_option("--seed", run.seed, "master RNG seed");

    nvsim::FitArgs fit;
    std::string fit_pulse;
    auto* cmd_fit = app.add_subcommand("fit", "least-squares fit of a model to CSV data");
    cmd_fit->add_option("model", fit.model, "expdecay|lorentzian|rabiline|dampedrabi|saturable")
        ->required();
    cmd_fit->add_option("csv", fit.csv_path, "input CSV with columns x,y[,sigma]")->required();
    cmd_fit->add_option("--pulse", fit_pulse, "pulse duration for rabiline, e.g. 20us");

    auto* cmd_replay = app.add_subcommand("replay", "re-execute a run from its manifest");
    std::string replay_path;
    cmd_replay->add_option("manifest", replay_path, "manifest JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const nvsim::Config cfg = resolve_config(global);
        nvsim::CommandResult result;
        bool json_payload = false;

        if (*cmd_spectrum) {
            nvsim::Config c = cfg;
            if (spectrum_field > 0.0) c.b_field_T = spectrum_field;
            spectrum.pulse_s = time_flag(spectrum_pulse, "--pulse");
            result = nvsim::cmd_spectrum(c, spectrum);
        } else if (*cmd_rabi) {
            rabi.tmax_s = time_flag(rabi_tmax, "--tmax");
            result = nvsim::cmd_rabi(cfg, rabi);
        } else if (*cmd_kinetics) {
            if (!kinetics_tau.empty()) kinetics.tau_target_s = time_flag(kinetics_tau, "--tau-target");
            if (!kinetics_tmax.empty()) kinetics.tmax_s = time_flag(kinetics_tmax, "--tmax");
            result = nvsim::cmd_kinetics(cfg, kinetics);
        } else if (*cmd_powerdep) {
            result = nvsim::cmd_powerdep(cfg, powerdep);
        } else if (*cmd_map2d) {
            map2d.red_min_s = time_flag(map_red_min, "--red-min");
            map2d.red_max_s = time_flag(map_red_max, "--red-max");
            map2d.pulse_s = time_flag(map_pulse, "--pulse");
            result = nvsim::cmd_map2d(cfg, map2d);
        } else if (*cmd_run) {
            result = nvsim::cmd_run(cfg, run);
        } else if (*cmd_fit) {
            if (!fit_pulse.empty()) fit.pulse_duration_s = time_flag(fit_pulse, "--pulse");
            result = nvsim::cmd_fit(cfg, fit);
            json_payload = true;
        } else if (*cmd_replay) {
            std::ifstream in(replay_path);
            if (!in) throw nvsim::UsageError("cannot open manifest '" + replay_path + "'");
            nlohmann::json manifest;
            in >> manifest;
            result = nvsim::rerun_from_manifest(manifest);
            json_payload = manifest.at("command") == "fit";
        }

        write_output(global, result, json_payload);
        return 0;
    } catch (const nvsim::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nvsim::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
