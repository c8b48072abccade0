#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gansic/channel.hpp"
#include "gansic/online.hpp"

namespace gansic {

// Shortest decimal form that parses back to exactly the same double; the
// one representation used in CSV cells and seed-label formatting.
std::string format_double(double v);
double parse_double(const std::string& s);

struct EvalBudget {
    std::size_t vectors = 100000;     // transmitted vectors per (method, snr) cell
    std::size_t min_vectors = 1000;   // floor honored even when stopping early
    std::size_t target_errors = 200;  // early stop once reached; 0 disables
};

struct DeepSicSettings {
    std::size_t layers = 5;
    std::size_t hidden = 64;
    std::size_t epochs = 50;
    std::size_t batch = 64;
};

struct GanSettings {
    std::size_t hidden = 512;
    std::size_t noise_dim = 4;
    std::size_t pilot_len = 10;
    std::size_t batch = 64;
    bool non_saturating = false;
};

struct OnlineSettings {
    std::size_t train_gan_budget = 2000;       // per SNR block
    std::size_t update_detector_budget = 2000; // per SNR block
    std::size_t detector_batch = 64;
    double lambda_det = 1.0;
    bool detector_grad_into_G = false;
    std::size_t probe_interval = 500;   // detector steps between SER probes; 0 disables
    std::size_t probe_symbols = 10000;  // held-out symbols per probe
};

// One experiment description: channel family, SNR grid, methods, budgets.
// Populated from strict JSON — unknown keys anywhere are rejected, and the
// same schema accepts dotted-path overrides.
struct ScenarioConfig {
    std::uint64_t seed = 1;
    ChannelKind channel_kind = ChannelKind::LinearGaussian;
    std::size_t users = 4;
    std::size_t receivers = 4;
    std::vector<double> snr_db = {0, 2, 4, 6, 8, 10, 12, 14};
    std::vector<std::string> methods = {"map", "sic"};
    std::size_t train_pairs_per_snr = 5000;
    EvalBudget eval;
    DeepSicSettings deepsic;
    GanSettings gan;
    OnlineSettings online;

    void validate() const;
    nlohmann::json to_json() const;
    static ScenarioConfig from_json(const nlohmann::json& j);
};

// Applies `key=value` with dotted keys (e.g. online.lambda_det=0.5) onto a
// config JSON document; the value text is parsed as JSON when possible and
// taken as a string otherwise. Unknown keys surface when the merged document
// is re-validated by from_json.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// The exponential-decay profile used throughout: H_ij = e^{-|i-j|}.
DenseMatrix exp_decay_profile(std::size_t receivers, std::size_t users);

ChannelModel scenario_channel(const ScenarioConfig& cfg, double snr_db);

struct SweepRow {
    std::string method;
    std::string channel;
    double snr_db = 0.0;
    double ser = 0.0;
    std::uint64_t errors = 0;
    std::uint64_t symbols = 0;
    std::uint64_t seed = 0;  // the cell's derived evaluation seed
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

// Static regime: every method sees a fixed channel per cell. deepsic_static
// trains a fresh network on train_pairs_per_snr labeled pairs at that exact
// SNR before evaluating. Allowed methods: map, sic, deepsic_static.
SweepResult run_static_sweep(const ScenarioConfig& cfg);

// Dynamic regime: deepsic_dynamic trains once on the pooled ensemble over
// all SNRs and is then frozen; gansic_initial / gansic_joint run the online
// loop block by block over the SNR schedule and are evaluated at the end of
// each block; map and sic evaluate directly. Allowed methods: map, sic,
// deepsic_dynamic, gansic_initial, gansic_joint.
SweepResult run_dynamic_sweep(const ScenarioConfig& cfg);

void emit_csv(const SweepResult& result, const std::filesystem::path& path);
SweepResult parse_csv(const std::filesystem::path& path);

// Self-contained SVG: SER vs SNR, log10 y axis, one polyline + legend entry
// per method in first-appearance order.
void emit_plot(const SweepResult& result, const std::filesystem::path& path);

void emit_trace_csv(const std::vector<OnlineTraceRow>& trace, const std::filesystem::path& path);

}  // namespace gansic
