/**
 * @file network_io.cpp
 * @brief JSON persistence of surrogate networks.
 *
 * Doubles are written in shortest round-trip form, so write -> read -> write
 * reproduces the file byte for byte.
 */

#include "irrig/surrogate.hpp"

#include "irrig/error.hpp"

#include <json.hpp>

#include <fstream>

namespace irrig {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

Json scaler_to_json(const MinMaxScaler& s) {
    Json j;
    j["min"] = s.min;
    j["range"] = s.range;
    std::vector<bool> deg(s.degenerate.begin(), s.degenerate.end());
    j["degenerate"] = deg;
    return j;
}

MinMaxScaler scaler_from_json(const Json& j) {
    MinMaxScaler s;
    s.min = j.at("min").get<std::vector<double>>();
    s.range = j.at("range").get<std::vector<double>>();
    s.degenerate = j.at("degenerate").get<std::vector<bool>>();
    return s;
}

}  // namespace

void save_network(const MLPNetwork& net, std::ostream& out) {
    net.validate();
    Json j;
    j["format"] = "irrig-mlp";
    j["version"] = kFormatVersion;
    j["lag"] = net.lag;
    j["layer_sizes"] = net.layer_sizes;
    Json layers = Json::array();
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& w = net.weights[l];
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(w.size()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
        Json layer;
        layer["weights"] = flat;
        layer["biases"] = std::vector<double>(net.biases[l].data(), net.biases[l].data() + net.biases[l].size());
        layers.push_back(std::move(layer));
    }
    j["layers"] = std::move(layers);
    j["input_scaler"] = scaler_to_json(net.input_scaler);
    j["output_scaler"] = scaler_to_json(net.output_scaler);
    j["metadata"] = net.metadata;
    out << j.dump(1) << '\n';
}

MLPNetwork load_network(std::istream& in) {
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("network file: ") + e.what());
    }
    MLPNetwork net;
    try {
        if (j.at("format").get<std::string>() != "irrig-mlp") throw ValidationError("network file: unknown format");
        if (j.at("version").get<int>() != kFormatVersion) throw ValidationError("network file: unsupported version");
        net.lag = j.at("lag").get<int>();
        net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        const auto& layers = j.at("layers");
        if (layers.size() + 1 != net.layer_sizes.size()) throw ValidationError("network file: layer count mismatch");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto flat = layers[l].at("weights").get<std::vector<double>>();
            const auto bias = layers[l].at("biases").get<std::vector<double>>();
            const int rows = net.layer_sizes[l + 1], cols = net.layer_sizes[l];
            if (flat.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) ||
                bias.size() != static_cast<std::size_t>(rows))
                throw ValidationError("network file: layer " + std::to_string(l) + " has wrong shape");
            Eigen::MatrixXd w(rows, cols);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
            net.weights.push_back(std::move(w));
            net.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bias.data(), rows));
        }
        net.input_scaler = scaler_from_json(j.at("input_scaler"));
        net.output_scaler = scaler_from_json(j.at("output_scaler"));
        net.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("network file: ") + e.what());
    }
    net.validate();
    return net;
}

void save_network(const MLPNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write network file " + path);
    save_network(net, out);
}

MLPNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open network file " + path);
    return load_network(in);
}

}  // namespace irrig
