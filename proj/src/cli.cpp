#include "gansic/cli.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gansic/gradcheck.hpp"
#include "gansic/harness.hpp"

namespace gansic {
namespace {

namespace fs = std::filesystem;

// Faults that should exit 2 (bad invocation or configuration) rather than 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t threads = 1;
};

void flatten_keys(const nlohmann::json& j, const std::string& prefix, std::string& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object())
            flatten_keys(*it, key, out);
        else
            out += "  " + key + " = " + it->dump() + "\n";
    }
}

std::string config_key_reference() {
    std::string out =
        "Configuration keys (JSON config file and --set overrides), with defaults:\n";
    flatten_keys(ScenarioConfig{}.to_json(), "", out);
    out +=
        "Methods: map, sic, deepsic_static (static sweeps), deepsic_dynamic,\n"
        "gansic_initial, gansic_joint (dynamic sweeps).";
    return out;
}

ScenarioConfig load_config(const CliOptions& opt) {
    nlohmann::json doc = nlohmann::json::object();
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw ConfigError("cannot open config file: " + opt.config_path);
        doc = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded() || !doc.is_object())
            throw ConfigError("config file is not a JSON object: " + opt.config_path);
    }
    try {
        for (const std::string& assignment : opt.overrides) apply_override(doc, assignment);
        if (opt.seed_set) doc["seed"] = opt.seed;
        return ScenarioConfig::from_json(doc);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

fs::path prepare_out_dir(const CliOptions& opt) {
    const fs::path dir(opt.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory: " + dir.string());
    return dir;
}

void print_rows(const SweepResult& result, std::ostream& out) {
    for (const SweepRow& r : result.rows)
        out << r.method << " " << r.channel << " snr=" << format_double(r.snr_db)
            << " ser=" << format_double(r.ser) << " (" << r.errors << "/" << r.symbols
            << " symbols)\n";
}

int run_sweep(bool dynamic, const CliOptions& opt, std::ostream& out) {
    const ScenarioConfig cfg = load_config(opt);
    const fs::path dir = prepare_out_dir(opt);
    const SweepResult result = dynamic ? run_dynamic_sweep(cfg) : run_static_sweep(cfg);
    emit_csv(result, dir / "results.csv");
    emit_plot(result, dir / "results.svg");
    print_rows(result, out);
    out << "wrote " << (dir / "results.csv").string() << " and "
        << (dir / "results.svg").string() << "\n";
    return 0;
}

int run_plot(const CliOptions& opt, std::ostream& out) {
    const fs::path dir = prepare_out_dir(opt);
    const fs::path csv = dir / "results.csv";
    if (!fs::exists(csv)) throw ConfigError("cannot open results file: " + csv.string());
    const SweepResult result = parse_csv(csv);
    emit_plot(result, dir / "results.svg");
    print_rows(result, out);
    out << "wrote " << (dir / "results.svg").string() << "\n";
    return 0;
}

// The online-training workflows share one body: train-gan runs the
// adversarial pair alone, online alternates it with detector updates, and
// joint runs the fused step. One block per configured SNR, in order.
int run_online(const std::string& workflow, const CliOptions& opt, std::ostream& out) {
    const ScenarioConfig cfg = load_config(opt);
    const fs::path dir = prepare_out_dir(opt);
    const Constellation cons = Constellation::bpsk();
    const std::string channel = channel_kind_name(cfg.channel_kind);
    const DenseMatrix H = exp_decay_profile(cfg.receivers, cfg.users);

    Rng init_rng(Rng::derive_seed(cfg.seed, "init/" + workflow + "/" + channel));
    GeneratorNet g = make_generator(cfg.users, cfg.receivers, cfg.gan.hidden, cfg.gan.noise_dim,
                                    cfg.gan.pilot_len, init_rng);
    DiscriminatorNet d = make_discriminator(cfg.users, cfg.receivers, cfg.gan.hidden,
                                            cfg.gan.pilot_len, init_rng);
    DeepSicNet det = make_deepsic(cfg.deepsic.layers, cfg.users, cfg.receivers, cons,
                                  cfg.deepsic.hidden, init_rng);
    GanConfig gan_cfg;
    gan_cfg.batch = cfg.gan.batch;
    gan_cfg.non_saturating = cfg.gan.non_saturating;
    OnlineState state(std::move(g), std::move(d), std::move(det), gan_cfg, AdamConfig{},
                      LossLayers::All);

    OnlineLoopConfig loop;
    loop.snr_schedule_db = cfg.snr_db;
    loop.train_gan_budget = cfg.online.train_gan_budget;
    loop.update_detector_budget = workflow == "train_gan" ? 0 : cfg.online.update_detector_budget;
    loop.detector_batch = cfg.online.detector_batch;
    loop.pilot_len = cfg.gan.pilot_len;
    loop.mode = workflow == "gansic_joint" ? OnlineMode::Joint : OnlineMode::Initial;
    loop.joint.lambda_det = cfg.online.lambda_det;
    loop.joint.detector_grad_into_G = cfg.online.detector_grad_into_G;
    loop.probe_interval = cfg.online.probe_interval;
    loop.probe_symbols = cfg.online.probe_symbols;

    Rng run_rng(Rng::derive_seed(cfg.seed, workflow + "/" + channel + "/run"));
    const OnlineRunResult result = online_loop(state, cfg.channel_kind, H, cons, loop, run_rng);

    emit_trace_csv(result.trace, dir / "trace.csv");
    save_generator(dir / "generator.json", state.g);
    save_discriminator(dir / "discriminator.json", state.d, cfg.receivers, cfg.users);
    if (workflow != "train_gan") save_deepsic(dir / "detector.json", state.detector);

    // One summary line per SNR block: the final losses and probe reading
    // reached inside that block (full detail lives in trace.csv).
    const std::size_t steps_per_block =
        loop.train_gan_budget + (loop.mode == OnlineMode::Initial ? loop.update_detector_budget
                                                                  : 0);
    const double kNan = std::numeric_limits<double>::quiet_NaN();
    std::size_t row = 0;
    for (std::size_t block = 0; block < loop.snr_schedule_db.size(); ++block) {
        const std::size_t first = row;
        while (row < result.trace.size() && result.trace[row].step <= (block + 1) * steps_per_block)
            ++row;
        if (row == first) break;
        double f_d = kNan, f_g = kNan, f_q = kNan, probe = kNan;
        for (std::size_t i = row; i-- > first;) {
            const OnlineTraceRow& r = result.trace[i];
            if (std::isnan(f_d) && !std::isnan(r.f_d)) f_d = r.f_d;
            if (std::isnan(f_g) && !std::isnan(r.f_g)) f_g = r.f_g;
            if (std::isnan(f_q) && !std::isnan(r.f_q)) f_q = r.f_q;
            if (std::isnan(probe) && !std::isnan(r.probe_ser)) probe = r.probe_ser;
        }
        out << "block " << block << " snr=" << format_double(loop.snr_schedule_db[block])
            << " steps=" << (row - first);
        if (!std::isnan(f_d)) out << " f_D=" << format_double(f_d);
        if (!std::isnan(f_g)) out << " f_G=" << format_double(f_g);
        if (!std::isnan(f_q)) out << " f_Q=" << format_double(f_q);
        if (!std::isnan(probe)) out << " probe_ser=" << format_double(probe);
        out << " snapshot=" << result.trace[row - 1].snapshot_version << "\n";
    }
    out << "consumed " << result.vectors_consumed << " channel vectors";
    if (result.stream_exhausted) out << " (stream budget exhausted)";
    out << "; wrote " << (dir / "trace.csv").string() << "\n";
    return 0;
}

int run_gradcheck_cmd(const CliOptions& opt, std::ostream& out) {
    const ScenarioConfig cfg = load_config(opt);
    const std::vector<GradCheckReport> reports = run_gradcheck_suites(cfg.seed);
    bool ok = true;
    for (const GradCheckReport& r : reports) {
        out << r.suite << ": max_rel_err=" << format_double(r.max_rel_err) << " over " << r.checked
            << " partials\n";
        ok = ok && r.max_rel_err < 1e-4;
    }
    out << (ok ? "all gradients verified" : "gradient check FAILED") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{
        "MIMO symbol-detection laboratory: adversarially trained soft "
        "interference cancellation and its baselines"};
    app.require_subcommand(1);
    app.footer(config_key_reference());

    CliOptions opt;
    app.add_option("--config", opt.config_path, "ScenarioConfig JSON file (defaults when omitted)");
    app.add_option("--out", opt.out_dir, "output directory for all artifacts")
        ->capture_default_str();
    app.add_option("--set", opt.overrides, "dotted config override, e.g. channel.kind=poisson")
        ->type_name("KEY=VALUE");
    app.add_option("--seed", opt.seed, "master seed override")
        ->each([&opt](const std::string&) { opt.seed_set = true; });
    app.add_option("--threads", opt.threads, "worker threads (1 = serial; results are identical)")
        ->check(CLI::PositiveNumber);

    CLI::App* sweep_static =
        app.add_subcommand("sweep-static", "SER vs SNR, per-SNR training; writes results.csv/.svg");
    CLI::App* sweep_dynamic = app.add_subcommand(
        "sweep-dynamic", "SER vs SNR, pooled/online training; writes results.csv/.svg");
    CLI::App* train_gan = app.add_subcommand(
        "train-gan", "adversarial channel-twin training only; writes trace.csv and checkpoints");
    CLI::App* online = app.add_subcommand(
        "online", "alternating adversarial + detector training; writes trace.csv and checkpoints");
    CLI::App* joint = app.add_subcommand(
        "joint", "fused adversarial + detector training; writes trace.csv and checkpoints");
    CLI::App* plot =
        app.add_subcommand("plot", "re-render results.svg from results.csv in the output dir");
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference verification of every gradient path");
    for (CLI::App* sub : {sweep_static, sweep_dynamic, train_gan, online, joint, plot, gradcheck})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        app.exit(e, err, err);
        return 2;
    }

    try {
        if (sweep_static->parsed()) return run_sweep(/*dynamic=*/false, opt, out);
        if (sweep_dynamic->parsed()) return run_sweep(/*dynamic=*/true, opt, out);
        if (train_gan->parsed()) return run_online("train_gan", opt, out);
        if (online->parsed()) return run_online("gansic_initial", opt, out);
        if (joint->parsed()) return run_online("gansic_joint", opt, out);
        if (plot->parsed()) return run_plot(opt, out);
        if (gradcheck->parsed()) return run_gradcheck_cmd(opt, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "error: no subcommand\n";
    return 2;
}

}  // namespace gansic
