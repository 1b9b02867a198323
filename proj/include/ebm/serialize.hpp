#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

#include <json.hpp>

#include "ebm/crbm.hpp"
#include "ebm/dbn.hpp"
#include "ebm/model.hpp"
#include "ebm/trainer.hpp"

namespace ebm {

inline constexpr int kModelFormatVersion = 1;

// Optional per-dimension affine preprocessing recorded next to the model so
// encode/reconstruct runs see the same scaling that training saw.
struct Standardization {
    Vector mean;
    Vector stddev;

    bool operator==(const Standardization&) const = default;
};

using AnyModel = std::variant<RbmParams, BmParams, CrbmParams, DbnStack, Mlp>;

struct ModelFile {
    AnyModel model;
    std::optional<Standardization> standardization;
};

namespace detail {

using nlohmann::json;

inline const json& field(const json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'");
    return *it;
}

template <class T>
T field_as(const json& j, const char* name) {
    try {
        return field(j, name).get<T>();
    } catch (const ParseError&) {
        throw;
    } catch (const json::exception&) {
        throw ParseError(std::string("field '") + name + "' has the wrong type");
    }
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_array(const json& arr, const char* name, std::size_t rows,
                                std::size_t cols) {
    if (!arr.is_array() || arr.size() != rows)
        throw ParseError(std::string("field '") + name + "' must have " + std::to_string(rows) +
                         " rows");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const json& row = arr[i];
        if (!row.is_array() || row.size() != cols)
            throw ParseError(std::string("field '") + name + "' row " + std::to_string(i) +
                             " must have " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number())
                throw ParseError(std::string("field '") + name + "' contains a non-number");
            m(i, c) = row[c].get<double>();
        }
    }
    return m;
}

inline Matrix matrix_from_json(const json& j, const char* name, std::size_t rows,
                               std::size_t cols) {
    return matrix_from_array(field(j, name), name, rows, cols);
}

inline Vector vector_from_json(const json& j, const char* name, std::size_t len) {
    const json& arr = field(j, name);
    if (!arr.is_array() || arr.size() != len)
        throw ParseError(std::string("field '") + name + "' must have " + std::to_string(len) +
                         " entries");
    Vector v(len);
    for (std::size_t i = 0; i < len; ++i) {
        if (!arr[i].is_number())
            throw ParseError(std::string("field '") + name + "' contains a non-number");
        v[i] = arr[i].get<double>();
    }
    return v;
}

inline json rbm_to_json(const RbmParams& p) {
    json j;
    j["d"] = p.visible_dim;
    j["p"] = p.hidden_dim;
    j["families"] = {{"visible", family_name(p.visible_family)},
                     {"hidden", family_name(p.hidden_family)}};
    j["W"] = matrix_to_json(p.weights);
    j["b"] = p.visible_bias;
    j["c"] = p.hidden_bias;
    j["poisson_total_count"] = p.poisson_total_count;
    return j;
}

inline RbmParams rbm_from_json(const json& j) {
    RbmParams p;
    p.visible_dim = field_as<std::size_t>(j, "d");
    p.hidden_dim = field_as<std::size_t>(j, "p");
    if (p.visible_dim == 0 || p.hidden_dim == 0)
        throw ParseError("fields 'd' and 'p' must be positive");
    const json& fams = field(j, "families");
    p.visible_family = family_from_name(field_as<std::string>(fams, "visible"));
    p.hidden_family = family_from_name(field_as<std::string>(fams, "hidden"));
    p.weights = matrix_from_json(j, "W", p.visible_dim, p.hidden_dim);
    p.visible_bias = vector_from_json(j, "b", p.visible_dim);
    p.hidden_bias = vector_from_json(j, "c", p.hidden_dim);
    if (j.contains("poisson_total_count"))
        p.poisson_total_count = field_as<double>(j, "poisson_total_count");
    validate(p);
    return p;
}

inline const char* activation_name(Activation a) {
    return a == Activation::Sigmoid ? "sigmoid" : "identity";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    throw ParseError("unknown activation '" + s + "'");
}

} // namespace detail

inline std::string model_kind_name(const AnyModel& model) {
    switch (model.index()) {
        case 0: return "rbm";
        case 1: return "bm";
        case 2: return "crbm";
        case 3: return "dbn_stack";
        case 4: return "mlp";
    }
    return "?";
}

inline nlohmann::json model_to_json(const ModelFile& file) {
    using detail::json;
    using detail::matrix_to_json;
    json j;
    j["format_version"] = kModelFormatVersion;
    j["model_kind"] = model_kind_name(file.model);

    if (const auto* rbm = std::get_if<RbmParams>(&file.model)) {
        j.update(detail::rbm_to_json(*rbm));
    } else if (const auto* bm = std::get_if<BmParams>(&file.model)) {
        j.update(detail::rbm_to_json(bm->rbm));
        j["L"] = matrix_to_json(bm->visible_lateral);
        j["J"] = matrix_to_json(bm->hidden_lateral);
    } else if (const auto* crbm = std::get_if<CrbmParams>(&file.model)) {
        j.update(detail::rbm_to_json(crbm->rbm));
        j["history_length"] = crbm->history_length;
        json g = json::array();
        json q = json::array();
        for (const Matrix& m : crbm->past_to_visible) g.push_back(matrix_to_json(m));
        for (const Matrix& m : crbm->past_to_hidden) q.push_back(matrix_to_json(m));
        j["G"] = std::move(g);
        j["Q"] = std::move(q);
    } else if (const auto* stack = std::get_if<DbnStack>(&file.model)) {
        j["layer_sizes"] = stack->layer_sizes;
        json layers = json::array();
        for (const RbmParams& layer : stack->layers) layers.push_back(detail::rbm_to_json(layer));
        j["layers"] = std::move(layers);
    } else if (const auto* mlp = std::get_if<Mlp>(&file.model)) {
        j["code_layer"] = mlp->code_layer;
        json layers = json::array();
        for (const MlpLayer& layer : mlp->layers) {
            json lj;
            lj["in"] = layer.weight.rows();
            lj["out"] = layer.weight.cols();
            lj["weight"] = matrix_to_json(layer.weight);
            lj["bias"] = layer.bias;
            lj["activation"] = detail::activation_name(layer.activation);
            layers.push_back(std::move(lj));
        }
        j["layers"] = std::move(layers);
    }

    if (file.standardization) {
        j["standardization"] = {{"mean", file.standardization->mean},
                                {"stddev", file.standardization->stddev}};
    }
    return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
    using detail::field;
    using detail::field_as;
    const int version = field_as<int>(j, "format_version");
    if (version != kModelFormatVersion)
        throw VersionError("unsupported model format version " + std::to_string(version) +
                           " (expected " + std::to_string(kModelFormatVersion) + ")");
    const std::string kind = field_as<std::string>(j, "model_kind");

    ModelFile file;
    if (kind == "rbm") {
        file.model = detail::rbm_from_json(j);
    } else if (kind == "bm") {
        BmParams bm;
        bm.rbm = detail::rbm_from_json(j);
        bm.visible_lateral =
            detail::matrix_from_json(j, "L", bm.rbm.visible_dim, bm.rbm.visible_dim);
        bm.hidden_lateral = detail::matrix_from_json(j, "J", bm.rbm.hidden_dim, bm.rbm.hidden_dim);
        validate(bm);
        file.model = std::move(bm);
    } else if (kind == "crbm") {
        CrbmParams crbm;
        crbm.rbm = detail::rbm_from_json(j);
        crbm.history_length = field_as<std::size_t>(j, "history_length");
        const auto& g = field(j, "G");
        const auto& q = field(j, "Q");
        if (!g.is_array() || g.size() != crbm.history_length)
            throw ParseError("field 'G' must list one matrix per history step");
        if (!q.is_array() || q.size() != crbm.history_length)
            throw ParseError("field 'Q' must list one matrix per history step");
        for (std::size_t t = 0; t < crbm.history_length; ++t) {
            crbm.past_to_visible.push_back(detail::matrix_from_array(
                g[t], "G", crbm.rbm.visible_dim, crbm.rbm.visible_dim));
            crbm.past_to_hidden.push_back(detail::matrix_from_array(
                q[t], "Q", crbm.rbm.visible_dim, crbm.rbm.hidden_dim));
        }
        validate(crbm);
        file.model = std::move(crbm);
    } else if (kind == "dbn_stack") {
        DbnStack stack;
        stack.layer_sizes = field_as<std::vector<std::size_t>>(j, "layer_sizes");
        const auto& layers = field(j, "layers");
        if (!layers.is_array()) throw ParseError("field 'layers' must be an array");
        for (const auto& lj : layers) stack.layers.push_back(detail::rbm_from_json(lj));
        validate(stack);
        file.model = std::move(stack);
    } else if (kind == "mlp") {
        Mlp mlp;
        mlp.code_layer = field_as<std::size_t>(j, "code_layer");
        const auto& layers = field(j, "layers");
        if (!layers.is_array()) throw ParseError("field 'layers' must be an array");
        for (const auto& lj : layers) {
            MlpLayer layer;
            const auto in = field_as<std::size_t>(lj, "in");
            const auto out = field_as<std::size_t>(lj, "out");
            layer.weight = detail::matrix_from_json(lj, "weight", in, out);
            layer.bias = detail::vector_from_json(lj, "bias", out);
            layer.activation =
                detail::activation_from_name(field_as<std::string>(lj, "activation"));
            mlp.layers.push_back(std::move(layer));
        }
        validate(mlp);
        file.model = std::move(mlp);
    } else {
        throw ParseError("unknown model_kind '" + kind + "'");
    }

    if (j.contains("standardization")) {
        const auto& sj = field(j, "standardization");
        Standardization s;
        s.mean = field_as<Vector>(sj, "mean");
        s.stddev = field_as<Vector>(sj, "stddev");
        file.standardization = std::move(s);
    }
    return file;
}

inline void save_model(const ModelFile& file, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << model_to_json(file).dump(2) << '\n';
    if (!out) throw Error("failed writing '" + path + "'");
}

inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

// Typed convenience wrappers.
inline void save_model(const RbmParams& p, const std::string& path) {
    save_model(ModelFile{p, std::nullopt}, path);
}
inline void save_model(const BmParams& p, const std::string& path) {
    save_model(ModelFile{p, std::nullopt}, path);
}
inline void save_model(const CrbmParams& p, const std::string& path) {
    save_model(ModelFile{p, std::nullopt}, path);
}
inline void save_model(const DbnStack& p, const std::string& path) {
    save_model(ModelFile{p, std::nullopt}, path);
}
inline void save_model(const Mlp& p, const std::string& path) {
    save_model(ModelFile{p, std::nullopt}, path);
}

template <class T>
T load_model_as(const std::string& path) {
    ModelFile file = load_model(path);
    if (auto* p = std::get_if<T>(&file.model)) return std::move(*p);
    throw ValidationError("model file '" + path + "' holds a " + model_kind_name(file.model) +
                          ", which is not the expected kind");
}

// Newline-delimited training report, one record per epoch.
inline void write_report(const TrainReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    for (const EpochRecord& rec : report.epochs) {
        nlohmann::json j;
        j["epoch"] = rec.epoch;
        j["recon_error"] = rec.recon_error;
        j["grad_norm"] = rec.grad_norm;
        if (rec.loglik) j["loglik"] = *rec.loglik;
        j["seconds"] = rec.seconds;
        out << j.dump() << '\n';
    }
    if (!out) throw Error("failed writing '" + path + "'");
}

} // namespace ebm
