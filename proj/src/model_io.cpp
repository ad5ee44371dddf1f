#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "mannerist/errors.hpp"
#include "mannerist/ocsvm.hpp"
#include "text_util.hpp"

namespace mannerist {

namespace {

using nlohmann::json;

std::string quoted(const std::string& s) { return json(s).dump(); }

void append_array(std::string& out, std::span<const double> values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ',';
        detail::append_double(out, values[i]);
    }
    out += ']';
}

template <typename T>
T required(const json& obj, const char* key) {
    if (!obj.contains(key)) throw SchemaError(std::string("model is missing '") + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model field '") + key + "': " + e.what());
    }
}

} // namespace

// Written by hand rather than through json::dump so that every float carries
// exactly 17 significant digits.
std::string save_model(const SvmModel& model) {
    std::string out = "{\n";
    out += "  \"version\": " + quoted(std::string(kModelSchemaVersion)) + ",\n";
    auto field = [&out](const char* key, double v) {
        out += "  \"";
        out += key;
        out += "\": ";
        detail::append_double(out, v);
        out += ",\n";
    };
    field("gamma", model.gamma);
    field("nu", model.nu);
    field("rho", model.rho);
    field("threshold", model.threshold);
    out += "  \"feature_order_hash\": " + quoted(model.feature_order_hash) + ",\n";
    out += "  \"feature_subset\": [";
    for (std::size_t i = 0; i < model.feature_subset.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(model.feature_subset[i]);
    }
    out += "],\n";
    const auto& md = model.metadata;
    out += "  \"metadata\": {\"training_size\": " + std::to_string(md.training_size) +
           ", \"training_date\": " + quoted(md.training_date) +
           ", \"persona_label\": " + quoted(md.persona_label) + ", \"family\": " + quoted(md.family) +
           ", \"calibration_target\": " + detail::format_double(md.calibration_target) + "},\n";
    out += "  \"alphas\": ";
    append_array(out, model.alphas);
    out += ",\n  \"support_vectors\": [";
    const auto dim = model.dimension();
    for (Eigen::Index r = 0; r < model.support_vectors.rows(); ++r) {
        out += r == 0 ? "\n    " : ",\n    ";
        append_array(out, {model.support_vectors.row(r).data(), dim});
    }
    out += "\n  ]\n}\n";
    return out;
}

SvmModel load_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("model is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("model must be a JSON object");
    const auto version = required<std::string>(doc, "version");
    if (version != kModelSchemaVersion) {
        throw IncompatibleError("model schema " + version + " is not " + std::string(kModelSchemaVersion));
    }

    SvmModel model;
    model.gamma = required<double>(doc, "gamma");
    model.nu = required<double>(doc, "nu");
    model.rho = required<double>(doc, "rho");
    model.threshold = required<double>(doc, "threshold");
    model.feature_order_hash = required<std::string>(doc, "feature_order_hash");
    model.feature_subset = required<std::vector<std::size_t>>(doc, "feature_subset");
    model.alphas = required<std::vector<double>>(doc, "alphas");
    const auto vectors = required<std::vector<std::vector<double>>>(doc, "support_vectors");
    const auto metadata = required<json>(doc, "metadata");
    if (!metadata.is_object()) throw SchemaError("model metadata must be an object");
    model.metadata.training_size = required<std::size_t>(metadata, "training_size");
    model.metadata.training_date = required<std::string>(metadata, "training_date");
    model.metadata.persona_label = required<std::string>(metadata, "persona_label");
    model.metadata.family = metadata.value("family", std::string{});
    model.metadata.calibration_target = metadata.value("calibration_target", 0.0);

    if (!(model.gamma > 0.0)) throw SchemaError("gamma must be positive");
    if (!(model.nu > 0.0 && model.nu <= 1.0)) throw SchemaError("nu must be in (0, 1]");
    if (vectors.size() != model.alphas.size()) {
        throw SchemaError("alphas and support_vectors differ in length");
    }
    if (vectors.empty()) throw SchemaError("model has no support vectors");
    for (std::size_t i = 0; i < model.feature_subset.size(); ++i) {
        if (model.feature_subset[i] >= kPairCount ||
            (i > 0 && model.feature_subset[i] <= model.feature_subset[i - 1])) {
            throw SchemaError("feature_subset must be strictly increasing pair indices");
        }
    }
    const std::size_t dim = model.feature_subset.empty() ? kPairCount : model.feature_subset.size();
    model.support_vectors.resize(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        if (vectors[r].size() != dim) {
            throw SchemaError("support vector " + std::to_string(r) + " has dimension " +
                              std::to_string(vectors[r].size()) + ", expected " + std::to_string(dim));
        }
        for (std::size_t c = 0; c < dim; ++c) {
            model.support_vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vectors[r][c];
        }
    }
    for (const double a : model.alphas) {
        if (!(a > 0.0)) throw SchemaError("alphas must be positive");
    }
    return model;
}

} // namespace mannerist
