#include "gansic/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gansic/classic.hpp"
#include "gansic/deepsic.hpp"

namespace gansic {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: " + s);
    return v;
}

namespace {

const std::vector<std::string> kAllMethods = {"map",           "sic",
                                              "deepsic_static", "deepsic_dynamic",
                                              "gansic_initial", "gansic_joint"};

void expect_keys(const nlohmann::json& j, const std::string& scope,
                 std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw std::invalid_argument("config section is not an object: " + scope);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known =
            std::any_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; });
        if (!known) throw std::invalid_argument("unknown config key: " + scope + it.key());
    }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ScenarioConfig::validate() const {
    if (users == 0 || receivers == 0)
        throw std::invalid_argument("config: users and receivers must be positive");
    if (snr_db.empty()) throw std::invalid_argument("config: snr_db list is empty");
    if (methods.empty()) throw std::invalid_argument("config: methods list is empty");
    for (const std::string& m : methods)
        if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end())
            throw std::invalid_argument("config: unknown method: " + m);
    if (train_pairs_per_snr == 0)
        throw std::invalid_argument("config: train_pairs_per_snr must be positive");
    if (eval.vectors < eval.min_vectors)
        throw std::invalid_argument("config: eval.vectors below eval.min_vectors");
    if (eval.min_vectors * users < 1000)
        throw std::invalid_argument("config: evaluation floor below 1000 symbols");
    if (deepsic.layers == 0 || deepsic.hidden == 0 || deepsic.epochs == 0 || deepsic.batch == 0)
        throw std::invalid_argument("config: deepsic sizes must be positive");
    if (gan.hidden == 0 || gan.noise_dim == 0 || gan.pilot_len == 0 || gan.batch == 0)
        throw std::invalid_argument("config: gan sizes must be positive");
    if (online.detector_batch == 0)
        throw std::invalid_argument("config: online.detector_batch must be positive");
    if (online.lambda_det < 0.0)
        throw std::invalid_argument("config: online.lambda_det must be nonnegative");
    if (online.probe_interval > 0 && online.probe_symbols < users)
        throw std::invalid_argument("config: online.probe_symbols below one vector");
}

nlohmann::json ScenarioConfig::to_json() const {
    return nlohmann::json{
        {"seed", seed},
        {"channel",
         {{"kind", channel_kind_name(channel_kind)}, {"users", users}, {"receivers", receivers}}},
        {"snr_db", snr_db},
        {"methods", methods},
        {"train_pairs_per_snr", train_pairs_per_snr},
        {"eval",
         {{"vectors", eval.vectors},
          {"min_vectors", eval.min_vectors},
          {"target_errors", eval.target_errors}}},
        {"deepsic",
         {{"layers", deepsic.layers},
          {"hidden", deepsic.hidden},
          {"epochs", deepsic.epochs},
          {"batch", deepsic.batch}}},
        {"gan",
         {{"hidden", gan.hidden},
          {"noise_dim", gan.noise_dim},
          {"pilot_len", gan.pilot_len},
          {"batch", gan.batch},
          {"non_saturating", gan.non_saturating}}},
        {"online",
         {{"train_gan_budget", online.train_gan_budget},
          {"update_detector_budget", online.update_detector_budget},
          {"detector_batch", online.detector_batch},
          {"lambda_det", online.lambda_det},
          {"detector_grad_into_G", online.detector_grad_into_G},
          {"probe_interval", online.probe_interval},
          {"probe_symbols", online.probe_symbols}}}};
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
    ScenarioConfig cfg;
    expect_keys(j, "", {"seed", "channel", "snr_db", "methods", "train_pairs_per_snr", "eval",
                        "deepsic", "gan", "online"});
    read_field(j, "seed", cfg.seed);
    if (j.contains("channel")) {
        const nlohmann::json& c = j.at("channel");
        expect_keys(c, "channel.", {"kind", "users", "receivers"});
        if (c.contains("kind")) cfg.channel_kind = channel_kind_from_name(c.at("kind"));
        read_field(c, "users", cfg.users);
        read_field(c, "receivers", cfg.receivers);
    }
    read_field(j, "snr_db", cfg.snr_db);
    read_field(j, "methods", cfg.methods);
    read_field(j, "train_pairs_per_snr", cfg.train_pairs_per_snr);
    if (j.contains("eval")) {
        const nlohmann::json& e = j.at("eval");
        expect_keys(e, "eval.", {"vectors", "min_vectors", "target_errors"});
        read_field(e, "vectors", cfg.eval.vectors);
        read_field(e, "min_vectors", cfg.eval.min_vectors);
        read_field(e, "target_errors", cfg.eval.target_errors);
    }
    if (j.contains("deepsic")) {
        const nlohmann::json& d = j.at("deepsic");
        expect_keys(d, "deepsic.", {"layers", "hidden", "epochs", "batch"});
        read_field(d, "layers", cfg.deepsic.layers);
        read_field(d, "hidden", cfg.deepsic.hidden);
        read_field(d, "epochs", cfg.deepsic.epochs);
        read_field(d, "batch", cfg.deepsic.batch);
    }
    if (j.contains("gan")) {
        const nlohmann::json& g = j.at("gan");
        expect_keys(g, "gan.", {"hidden", "noise_dim", "pilot_len", "batch", "non_saturating"});
        read_field(g, "hidden", cfg.gan.hidden);
        read_field(g, "noise_dim", cfg.gan.noise_dim);
        read_field(g, "pilot_len", cfg.gan.pilot_len);
        read_field(g, "batch", cfg.gan.batch);
        read_field(g, "non_saturating", cfg.gan.non_saturating);
    }
    if (j.contains("online")) {
        const nlohmann::json& o = j.at("online");
        expect_keys(o, "online.",
                    {"train_gan_budget", "update_detector_budget", "detector_batch", "lambda_det",
                     "detector_grad_into_G", "probe_interval", "probe_symbols"});
        read_field(o, "train_gan_budget", cfg.online.train_gan_budget);
        read_field(o, "update_detector_budget", cfg.online.update_detector_budget);
        read_field(o, "detector_batch", cfg.online.detector_batch);
        read_field(o, "lambda_det", cfg.online.lambda_det);
        read_field(o, "detector_grad_into_G", cfg.online.detector_grad_into_G);
        read_field(o, "probe_interval", cfg.online.probe_interval);
        read_field(o, "probe_symbols", cfg.online.probe_symbols);
    }
    cfg.validate();
    return cfg;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override must be key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    nlohmann::json value = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = text;

    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw std::invalid_argument("override has an empty key segment: " + key);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

DenseMatrix exp_decay_profile(std::size_t receivers, std::size_t users) {
    DenseMatrix H(receivers, users);
    for (std::size_t i = 0; i < receivers; ++i)
        for (std::size_t j = 0; j < users; ++j)
            H.at(i, j) = std::exp(-std::abs(static_cast<double>(i) - static_cast<double>(j)));
    return H;
}

ChannelModel scenario_channel(const ScenarioConfig& cfg, double snr_db) {
    ChannelModel model;
    model.kind = cfg.channel_kind;
    model.H = exp_decay_profile(cfg.receivers, cfg.users);
    model.noise_var = std::pow(10.0, -snr_db / 10.0);
    model.validate();
    return model;
}

namespace {

SweepRow eval_cell(const ScenarioConfig& cfg, const std::string& method, const ChannelModel& model,
                   double snr_db, const Constellation& cons, const BatchDetector& detector) {
    const std::string channel = channel_kind_name(cfg.channel_kind);
    const std::uint64_t seed = Rng::derive_seed(
        cfg.seed, "eval/" + method + "/" + channel + "/" + format_double(snr_db));
    Rng rng(seed);
    SerOptions opts;
    opts.max_vectors = cfg.eval.vectors;
    opts.min_vectors = cfg.eval.min_vectors;
    opts.target_errors = cfg.eval.target_errors;
    const SerResult r = ser_estimate(detector, model, cons, rng, opts);
    return {method, channel, snr_db, r.ser, r.errors, r.symbols, seed};
}

BatchDetector map_batch_detector(const ChannelModel& model, const Constellation& cons,
                                 std::size_t users) {
    return per_vector_detector(
        [model, cons](std::span<const double> y) { return map_detect(y, model, cons); }, users);
}

// The interference-cancellation baseline always runs its linear-Gaussian
// update, so on the other channels it detects against the mismatched linear
// model with the same H and noise power — the regime where its performance
// collapses and the learned detectors do not.
BatchDetector sic_batch_detector(const ChannelModel& model, const Constellation& cons,
                                 std::size_t users) {
    ChannelModel linearized = model;
    linearized.kind = ChannelKind::LinearGaussian;
    return per_vector_detector(
        [linearized, cons](std::span<const double> y) {
            return iterative_sic(y, linearized, cons, SicConfig{}).hard;
        },
        users);
}

BatchDetector deepsic_batch_detector(DeepSicNet net) {
    return [net = std::move(net)](const DenseMatrix& ys) { return deepsic_detect(net, ys); };
}

DeepSicNet train_static_deepsic(const ScenarioConfig& cfg, const ChannelModel& model,
                                const Constellation& cons, double snr_db) {
    const std::string label = std::string("train/deepsic_static/") +
                              channel_kind_name(cfg.channel_kind) + "/" + format_double(snr_db);
    Rng rng(Rng::derive_seed(cfg.seed, label));
    const LabeledBatch data = sample_labeled_batch(model, cons, cfg.train_pairs_per_snr, rng);
    DeepSicNet net =
        make_deepsic(cfg.deepsic.layers, cfg.users, cfg.receivers, cons, cfg.deepsic.hidden, rng);
    DeepSicTrainer trainer(net);
    train_deepsic(net, trainer, data, cfg.deepsic.epochs, cfg.deepsic.batch, rng);
    return net;
}

DeepSicNet train_dynamic_deepsic(const ScenarioConfig& cfg, const Constellation& cons) {
    const std::string channel = channel_kind_name(cfg.channel_kind);
    LabeledBatch pooled;
    pooled.users = cfg.users;
    pooled.ys = DenseMatrix(cfg.snr_db.size() * cfg.train_pairs_per_snr, cfg.receivers);
    pooled.labels.reserve(pooled.ys.rows * cfg.users);
    std::size_t row = 0;
    for (const double snr : cfg.snr_db) {
        Rng rng(Rng::derive_seed(cfg.seed, "train/deepsic_dynamic/" + channel + "/" +
                                               format_double(snr)));
        const LabeledBatch part =
            sample_labeled_batch(scenario_channel(cfg, snr), cons, cfg.train_pairs_per_snr, rng);
        for (std::size_t n = 0; n < part.size(); ++n, ++row)
            std::copy(part.ys.row(n), part.ys.row(n) + part.ys.cols, pooled.ys.row(row));
        pooled.labels.insert(pooled.labels.end(), part.labels.begin(), part.labels.end());
    }

    Rng fit_rng(Rng::derive_seed(cfg.seed, "fit/deepsic_dynamic/" + channel));
    DeepSicNet net = make_deepsic(cfg.deepsic.layers, cfg.users, cfg.receivers, cons,
                                  cfg.deepsic.hidden, fit_rng);
    DeepSicTrainer trainer(net);
    train_deepsic(net, trainer, pooled, cfg.deepsic.epochs, cfg.deepsic.batch, fit_rng);
    return net;
}

void require_methods(const ScenarioConfig& cfg, const std::set<std::string>& allowed,
                     const char* sweep_name) {
    for (const std::string& m : cfg.methods)
        if (!allowed.count(m))
            throw std::invalid_argument(std::string("method not available in ") + sweep_name +
                                        " sweep: " + m);
}

}  // namespace

SweepResult run_static_sweep(const ScenarioConfig& cfg) {
    cfg.validate();
    require_methods(cfg, {"map", "sic", "deepsic_static"}, "static");
    const Constellation cons = Constellation::bpsk();

    SweepResult out;
    for (const std::string& method : cfg.methods) {
        for (const double snr : cfg.snr_db) {
            const ChannelModel model = scenario_channel(cfg, snr);
            BatchDetector detector;
            if (method == "map") {
                detector = map_batch_detector(model, cons, cfg.users);
            } else if (method == "sic") {
                detector = sic_batch_detector(model, cons, cfg.users);
            } else {
                detector = deepsic_batch_detector(train_static_deepsic(cfg, model, cons, snr));
            }
            out.rows.push_back(eval_cell(cfg, method, model, snr, cons, detector));
        }
    }
    return out;
}

SweepResult run_dynamic_sweep(const ScenarioConfig& cfg) {
    cfg.validate();
    require_methods(cfg, {"map", "sic", "deepsic_dynamic", "gansic_initial", "gansic_joint"},
                    "dynamic");
    const Constellation cons = Constellation::bpsk();
    const std::string channel = channel_kind_name(cfg.channel_kind);
    const DenseMatrix H = exp_decay_profile(cfg.receivers, cfg.users);

    SweepResult out;
    for (const std::string& method : cfg.methods) {
        if (method == "map" || method == "sic") {
            for (const double snr : cfg.snr_db) {
                const ChannelModel model = scenario_channel(cfg, snr);
                const BatchDetector detector = method == "map"
                                                   ? map_batch_detector(model, cons, cfg.users)
                                                   : sic_batch_detector(model, cons, cfg.users);
                out.rows.push_back(eval_cell(cfg, method, model, snr, cons, detector));
            }
        } else if (method == "deepsic_dynamic") {
            const DeepSicNet net = train_dynamic_deepsic(cfg, cons);
            for (const double snr : cfg.snr_db) {
                const ChannelModel model = scenario_channel(cfg, snr);
                out.rows.push_back(
                    eval_cell(cfg, method, model, snr, cons, deepsic_batch_detector(net)));
            }
        } else {
            // Online adversarial training, carried across the SNR blocks in
            // schedule order; the detector is evaluated at the end of each
            // block against that block's channel.
            Rng init_rng(Rng::derive_seed(cfg.seed, "init/" + method + "/" + channel));
            GeneratorNet g = make_generator(cfg.users, cfg.receivers, cfg.gan.hidden,
                                            cfg.gan.noise_dim, cfg.gan.pilot_len, init_rng);
            DiscriminatorNet d = make_discriminator(cfg.users, cfg.receivers, cfg.gan.hidden,
                                                    cfg.gan.pilot_len, init_rng);
            DeepSicNet det = make_deepsic(cfg.deepsic.layers, cfg.users, cfg.receivers, cons,
                                          cfg.deepsic.hidden, init_rng);
            GanConfig gan_cfg;
            gan_cfg.batch = cfg.gan.batch;
            gan_cfg.non_saturating = cfg.gan.non_saturating;
            OnlineState state(std::move(g), std::move(d), std::move(det), gan_cfg, AdamConfig{},
                              LossLayers::All);

            for (std::size_t block = 0; block < cfg.snr_db.size(); ++block) {
                const double snr = cfg.snr_db[block];
                OnlineLoopConfig loop;
                loop.snr_schedule_db = {snr};
                loop.train_gan_budget = cfg.online.train_gan_budget;
                loop.update_detector_budget = cfg.online.update_detector_budget;
                loop.detector_batch = cfg.online.detector_batch;
                loop.pilot_len = cfg.gan.pilot_len;
                loop.mode =
                    method == "gansic_joint" ? OnlineMode::Joint : OnlineMode::Initial;
                loop.joint.lambda_det = cfg.online.lambda_det;
                loop.joint.detector_grad_into_G = cfg.online.detector_grad_into_G;
                Rng block_rng(Rng::derive_seed(
                    cfg.seed, method + "/" + channel + "/block/" + std::to_string(block)));
                online_loop(state, cfg.channel_kind, H, cons, loop, block_rng);

                const ChannelModel model = scenario_channel(cfg, snr);
                const BatchDetector detector = [&state](const DenseMatrix& ys) {
                    return deepsic_detect(state.detector, ys);
                };
                out.rows.push_back(eval_cell(cfg, method, model, snr, cons, detector));
            }
        }
    }
    return out;
}

void emit_csv(const SweepResult& result, const std::filesystem::path& path) {
    if (result.rows.empty()) throw std::invalid_argument("emit_csv: empty result");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "method,channel,snr_db,ser,errors,symbols,seed\n";
    for (const SweepRow& r : result.rows)
        out << r.method << ',' << r.channel << ',' << format_double(r.snr_db) << ','
            << format_double(r.ser) << ',' << r.errors << ',' << r.symbols << ',' << r.seed
            << '\n';
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

SweepResult parse_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "method,channel,snr_db,ser,errors,symbols,seed")
        throw std::runtime_error("unexpected CSV header in " + path.string());
    SweepResult out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7) throw std::runtime_error("malformed CSV row: " + line);
        SweepRow row;
        row.method = cells[0];
        row.channel = cells[1];
        row.snr_db = parse_double(cells[2]);
        row.ser = parse_double(cells[3]);
        row.errors = std::stoull(cells[4]);
        row.symbols = std::stoull(cells[5]);
        row.seed = std::stoull(cells[6]);
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

constexpr double kPlotFloor = 1e-6;  // SER rendered on a fixed 1e-6..1 log axis

double plot_x(double snr, double lo, double hi) {
    if (hi == lo) return 315.0;  // single-SNR result: center of the plot area
    return 70.0 + (snr - lo) / (hi - lo) * 490.0;
}

double plot_y(double ser) {
    const double v = std::log10(std::max(ser, kPlotFloor));  // [-6, 0]
    return 40.0 - v / 6.0 * 460.0;                           // 40 at 1e0, 500 at 1e-6
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void emit_plot(const SweepResult& result, const std::filesystem::path& path) {
    if (result.rows.empty()) throw std::invalid_argument("emit_plot: empty result");
    double lo = result.rows.front().snr_db, hi = lo;
    std::vector<std::string> methods;
    for (const SweepRow& r : result.rows) {
        lo = std::min(lo, r.snr_db);
        hi = std::max(hi, r.snr_db);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
    }

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"780\" height=\"560\" "
           "viewBox=\"0 0 780 560\">\n";
    out << "<rect width=\"780\" height=\"560\" fill=\"white\"/>\n";
    out << "<line x1=\"70\" y1=\"500\" x2=\"560\" y2=\"500\" stroke=\"black\"/>\n";
    out << "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"500\" stroke=\"black\"/>\n";
    out << "<text x=\"315\" y=\"540\" text-anchor=\"middle\" font-size=\"14\">SNR (dB)</text>\n";
    out << "<text x=\"20\" y=\"270\" text-anchor=\"middle\" font-size=\"14\" "
           "transform=\"rotate(-90 20 270)\">SER</text>\n";

    for (int decade = 0; decade >= -6; --decade) {
        const double y = plot_y(std::pow(10.0, decade));
        out << "<line x1=\"66\" y1=\"" << format_double(y) << "\" x2=\"70\" y2=\""
            << format_double(y) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"62\" y=\"" << format_double(y + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">1e" << decade << "</text>\n";
    }
    std::set<double> snrs;
    for (const SweepRow& r : result.rows) snrs.insert(r.snr_db);
    for (const double snr : snrs) {
        const double x = plot_x(snr, lo, hi);
        out << "<line x1=\"" << format_double(x) << "\" y1=\"500\" x2=\"" << format_double(x)
            << "\" y2=\"504\" stroke=\"black\"/>\n";
        out << "<text x=\"" << format_double(x)
            << "\" y=\"518\" text-anchor=\"middle\" font-size=\"11\">" << format_double(snr)
            << "</text>\n";
    }

    for (std::size_t m = 0; m < methods.size(); ++m) {
        const char* color = kPalette[m % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (const SweepRow& r : result.rows) {
            if (r.method != methods[m]) continue;
            out << (first ? "" : " ") << format_double(plot_x(r.snr_db, lo, hi)) << ','
                << format_double(plot_y(r.ser));
            first = false;
        }
        out << "\"/>\n";
        for (const SweepRow& r : result.rows) {
            if (r.method != methods[m]) continue;
            out << "<circle cx=\"" << format_double(plot_x(r.snr_db, lo, hi)) << "\" cy=\""
                << format_double(plot_y(r.ser)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        const double ly = 60.0 + 20.0 * static_cast<double>(m);
        out << "<rect x=\"580\" y=\"" << format_double(ly - 9)
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"598\" y=\"" << format_double(ly) << "\" font-size=\"12\">" << methods[m]
            << "</text>\n";
    }
    out << "</svg>\n";
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

void emit_trace_csv(const std::vector<OnlineTraceRow>& trace,
                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "step,procedure,f_D,f_G,f_Q,probe_ser,snapshot_version\n";
    for (const OnlineTraceRow& r : trace)
        out << r.step << ',' << r.procedure << ',' << format_double(r.f_d) << ','
            << format_double(r.f_g) << ',' << format_double(r.f_q) << ','
            << format_double(r.probe_ser) << ',' << r.snapshot_version << '\n';
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace gansic
