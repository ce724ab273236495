#pragma once

// JSON encoding of reservoirs, models and episodes. Doubles are written in
// shortest round-trip form, so every value reloads bit-exactly.

#include "rmm/machines.hpp"
#include "rmm/memory_machine.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace rmm {

using json = nlohmann::json;

inline constexpr int model_format_version = 1;

namespace detail {

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const json& data = j.at("data");
    if (Index(data.size()) != rows) throw io_error("matrix: row count mismatch");
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const json& row = data.at(std::size_t(r));
        if (Index(row.size()) != cols) throw io_error("matrix: column count mismatch");
        for (Index c = 0; c < cols; ++c) m(r, c) = row.at(std::size_t(c)).get<double>();
    }
    return m;
}

inline json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vector vector_from_json(const json& j) {
    Vector v(Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(Index(i)) = j.at(i).get<double>();
    return v;
}

/// Row-major nested array without shape header, used by the dataset format.
inline json rows_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix rows_from_json(const json& j, Index fallback_cols = 0) {
    const Index rows = Index(j.size());
    const Index cols = rows > 0 ? Index(j.at(0).size()) : fallback_cols;
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const json& row = j.at(std::size_t(r));
        if (Index(row.size()) != cols) throw io_error("dataset: ragged row");
        for (Index c = 0; c < cols; ++c) m(r, c) = row.at(std::size_t(c)).get<double>();
    }
    return m;
}

} // namespace detail

// ---------------------------------------------------------------- components

inline json to_json(const Reservoir& r) {
    json j = {{"kind", to_string(r.kind)},
              {"activation", to_string(r.activation)},
              {"input_weights", detail::matrix_to_json(r.input_weights)},
              {"recurrent_weights", detail::matrix_to_json(r.recurrent_weights)},
              {"bias", detail::vector_to_json(r.bias)},
              {"initial_state", detail::vector_to_json(r.initial_state)}};
    if (r.ldn) j["ldn"] = {{"order", r.ldn->order}, {"window", r.ldn->window}, {"dt", r.ldn->dt}};
    return j;
}

inline Reservoir reservoir_from_json(const json& j) {
    Reservoir r;
    r.kind = parse_reservoir_kind(j.at("kind").get<std::string>());
    r.activation = parse_activation(j.at("activation").get<std::string>());
    r.input_weights = detail::matrix_from_json(j.at("input_weights"));
    r.recurrent_weights = detail::matrix_from_json(j.at("recurrent_weights"));
    r.bias = detail::vector_from_json(j.at("bias"));
    r.initial_state = detail::vector_from_json(j.at("initial_state"));
    if (j.contains("ldn")) {
        const json& l = j.at("ldn");
        r.ldn = LdnMeta{l.at("order").get<int>(), l.at("window").get<double>(), l.at("dt").get<double>()};
    }
    const Index n = r.recurrent_weights.rows();
    if (r.recurrent_weights.cols() != n || r.input_weights.rows() != n || r.bias.size() != n ||
        r.initial_state.size() != n)
        throw io_error("reservoir: inconsistent dimensions");
    return r;
}

inline json to_json(const RidgeReadout& r) {
    return {{"weights", detail::matrix_to_json(r.weights)}, {"intercept", detail::vector_to_json(r.intercept)}};
}

inline RidgeReadout readout_from_json(const json& j) {
    return {detail::matrix_from_json(j.at("weights")), detail::vector_from_json(j.at("intercept"))};
}

inline json to_json(const LinearClassifier& c) {
    json j = {{"weights", detail::matrix_to_json(c.weights)},
              {"biases", detail::vector_to_json(c.biases)},
              {"classes", c.classes},
              {"training_accuracy", c.training_accuracy}};
    if (c.features)
        j["features"] = {{"omega", detail::matrix_to_json(c.features->omega)},
                         {"phase", detail::vector_to_json(c.features->phase)}};
    return j;
}

inline LinearClassifier classifier_from_json(const json& j) {
    LinearClassifier c;
    c.weights = detail::matrix_from_json(j.at("weights"));
    c.biases = detail::vector_from_json(j.at("biases"));
    c.classes = j.at("classes").get<std::vector<int>>();
    c.training_accuracy = j.value("training_accuracy", 1.0);
    if (j.contains("features")) {
        const json& f = j.at("features");
        c.features = RandomFeatures{detail::matrix_from_json(f.at("omega")), detail::vector_from_json(f.at("phase"))};
        if (c.features->phase.size() != c.features->omega.rows() || c.features->lifted_size() != c.weights.cols())
            throw io_error("classifier: inconsistent feature dimensions");
    }
    if (c.classes.empty() || Index(c.classes.size()) != c.weights.rows() || c.biases.size() != c.weights.rows())
        throw io_error("classifier: inconsistent dimensions");
    return c;
}

inline json to_json(const AssociationMetric& m) {
    json ops = json::array();
    for (const Matrix& op : m.bank.operators) ops.push_back(detail::matrix_to_json(op));
    return {{"alpha", detail::matrix_to_json(m.alpha)},
            {"theta", m.theta},
            {"delays", m.bank.delays},
            {"window", m.bank.window},
            {"operators", std::move(ops)}};
}

inline AssociationMetric metric_from_json(const json& j) {
    AssociationMetric m;
    m.alpha = detail::matrix_from_json(j.at("alpha"));
    m.theta = j.at("theta").get<double>();
    m.bank.delays = j.at("delays").get<std::vector<int>>();
    m.bank.window = j.at("window").get<double>();
    for (const json& op : j.at("operators")) m.bank.operators.push_back(detail::matrix_from_json(op));
    if (m.bank.operators.size() != m.bank.delays.size() || m.alpha.rows() != Index(m.bank.size()) ||
        m.alpha.cols() != Index(m.bank.size()))
        throw io_error("metric: inconsistent dimensions");
    return m;
}

// ---------------------------------------------------------------- models

inline json to_json(const Model& model) {
    json j = {{"format_version", model_format_version}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            j["reservoir"] = to_json(m.reservoir);
            j["readout"] = to_json(m.readout);
            if constexpr (std::is_same_v<T, EsnBaseline>) {
                j["model"] = "esn";
            } else if constexpr (std::is_same_v<T, Rmm>) {
                j["model"] = "rmm";
                j["L"] = m.L;
                j["address_classifier"] = to_json(m.address_classifier);
            } else {
                j["model"] = "armm";
                j["L"] = m.L;
                j["write_classifier"] = to_json(m.write_classifier);
                j["metric"] = to_json(m.metric);
            }
        },
        model);
    return j;
}

inline Model model_from_json(const json& j) {
    const int version = j.at("format_version").get<int>();
    if (version != model_format_version) throw io_error("model: unsupported format_version " + std::to_string(version));
    const std::string kind = j.at("model").get<std::string>();
    Reservoir reservoir = reservoir_from_json(j.at("reservoir"));
    RidgeReadout readout = readout_from_json(j.at("readout"));
    if (kind == "esn") return EsnBaseline{std::move(reservoir), std::move(readout)};
    if (kind == "rmm") {
        Rmm r;
        r.reservoir = std::move(reservoir);
        r.readout = std::move(readout);
        r.L = j.at("L").get<int>();
        r.address_classifier = classifier_from_json(j.at("address_classifier"));
        return r;
    }
    if (kind == "armm") {
        Armm a;
        a.reservoir = std::move(reservoir);
        a.readout = std::move(readout);
        a.L = j.at("L").get<int>();
        a.write_classifier = classifier_from_json(j.at("write_classifier"));
        a.metric = metric_from_json(j.at("metric"));
        return a;
    }
    throw io_error("model: unknown model kind '" + kind + "'");
}

inline void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write model file " + path);
    out << to_json(model).dump() << '\n';
    if (!out) throw io_error("failed writing model file " + path);
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read model file " + path);
    try {
        return model_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw io_error(std::string("model file ") + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------- episodes

inline json to_json(const Episode& ep) {
    json j = {{"inputs", detail::rows_to_json(ep.inputs)},
              {"addresses", ep.addresses},
              {"outputs", detail::rows_to_json(ep.outputs)}};
    if (ep.initial_address != 0) j["initial_address"] = ep.initial_address;
    return j;
}

inline Episode episode_from_json(const json& j) {
    Episode ep;
    ep.inputs = detail::rows_from_json(j.at("inputs"));
    ep.addresses = j.at("addresses").get<std::vector<int>>();
    ep.outputs = detail::rows_from_json(j.at("outputs"));
    ep.initial_address = j.value("initial_address", 0);
    try {
        ep.validate();
    } catch (const invalid_argument& e) {
        throw io_error(e.what());
    }
    return ep;
}

/// One JSON record per line.
inline void write_episodes(std::ostream& out, std::span<const Episode> episodes) {
    for (const Episode& ep : episodes) out << to_json(ep).dump() << '\n';
}

inline std::vector<Episode> read_episodes(std::istream& in) {
    std::vector<Episode> episodes;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            episodes.push_back(episode_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw io_error("dataset line " + std::to_string(number) + ": " + e.what());
        } catch (const io_error& e) {
            throw io_error("dataset line " + std::to_string(number) + ": " + e.what());
        }
    }
    return episodes;
}

inline void save_episodes(std::span<const Episode> episodes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write dataset file " + path);
    write_episodes(out, episodes);
    if (!out) throw io_error("failed writing dataset file " + path);
}

inline std::vector<Episode> load_episodes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read dataset file " + path);
    return read_episodes(in);
}

} // namespace rmm
