#include "gansic/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace gansic {

using nlohmann::json;

namespace {

json matrix_to_json(const DenseMatrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

DenseMatrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("checkpoint: bad weight matrix");
    const std::size_t rows = j.size();
    const std::size_t cols = j.at(0).size();
    DenseMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const json& row = j.at(r);
        if (row.size() != cols) throw std::invalid_argument("checkpoint: ragged weight matrix");
        for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = row.at(c).get<double>();
    }
    return m;
}

}  // namespace

json network_to_json(const NetworkParams& net) {
    net.validate();
    json layers = json::array();
    for (const Layer& layer : net.layers) {
        json jl;
        jl["weight"] = matrix_to_json(layer.weight);
        jl["bias"] = layer.bias;
        jl["activation"] = activation_name(layer.activation);
        if (layer.batchnorm) {
            const BatchNormState& bn = *layer.batchnorm;
            jl["batchnorm"] = {{"gamma", bn.gamma},
                               {"beta", bn.beta},
                               {"running_mean", bn.running_mean},
                               {"running_var", bn.running_var}};
        }
        layers.push_back(std::move(jl));
    }
    return json{{"layers", std::move(layers)}};
}

NetworkParams network_from_json(const json& j) {
    NetworkParams net;
    for (const json& jl : j.at("layers")) {
        Layer layer;
        layer.weight = matrix_from_json(jl.at("weight"));
        layer.bias = jl.at("bias").get<std::vector<double>>();
        layer.activation = activation_from_name(jl.at("activation").get<std::string>());
        if (jl.contains("batchnorm")) {
            const json& jb = jl.at("batchnorm");
            BatchNormState bn;
            bn.gamma = jb.at("gamma").get<std::vector<double>>();
            bn.beta = jb.at("beta").get<std::vector<double>>();
            bn.running_mean = jb.at("running_mean").get<std::vector<double>>();
            bn.running_var = jb.at("running_var").get<std::vector<double>>();
            layer.batchnorm = std::move(bn);
        }
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

json adam_to_json(const AdamState& state) {
    return json{{"m", state.m},
                {"v", state.v},
                {"t", state.t},
                {"alpha", state.config.alpha},
                {"beta1", state.config.beta1},
                {"beta2", state.config.beta2},
                {"eps", state.config.eps}};
}

AdamState adam_from_json(const json& j) {
    AdamState state;
    state.m = j.at("m").get<std::vector<double>>();
    state.v = j.at("v").get<std::vector<double>>();
    if (state.m.size() != state.v.size())
        throw std::invalid_argument("checkpoint: adam moment lengths differ");
    state.t = j.at("t").get<std::uint64_t>();
    state.config.alpha = j.at("alpha").get<double>();
    state.config.beta1 = j.at("beta1").get<double>();
    state.config.beta2 = j.at("beta2").get<double>();
    state.config.eps = j.at("eps").get<double>();
    return state;
}

void save_checkpoint(const std::filesystem::path& path, json body) {
    body["format_version"] = kCheckpointFormatVersion;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    out << body.dump(2) << '\n';
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

json load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    json j = json::parse(in);
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version in " + path.string());
    return j;
}

}  // namespace gansic
