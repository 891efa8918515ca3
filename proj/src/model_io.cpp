#include "iwkrr/model_io.hpp"

#include "iwkrr/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace iwkrr {

using nlohmann::json;

std::string model_to_json(const FittedModel& model) {
    json j;
    j["kind"] = to_string(model.kind);
    j["kernel"] = "RBF";
    j["gamma"] = model.kernel.gamma;
    j["lambda"] = model.lambda;
    json centers = json::array();
    for (Index i = 0; i < model.centers.rows(); ++i) {
        json row = json::array();
        for (Index k = 0; k < model.centers.cols(); ++k) row.push_back(model.centers(i, k));
        centers.push_back(std::move(row));
    }
    j["centers"] = std::move(centers);
    j["coefficients"] = std::vector<double>(model.coefficients.data(),
                                            model.coefficients.data() + model.coefficients.size());
    return j.dump(1);
}

FittedModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        FittedModel model;
        model.kind = estimator_kind_from_string(j.at("kind").get<std::string>());
        detail::require(j.value("kernel", std::string("RBF")) == "RBF", "model kernel must be RBF");
        model.kernel = rbf(j.at("gamma").get<double>());
        model.kernel.validate();
        model.lambda = j.at("lambda").get<double>();
        const auto& centers = j.at("centers");
        const auto coeffs = j.at("coefficients").get<std::vector<double>>();
        detail::require(centers.size() == coeffs.size(), "model has " + std::to_string(centers.size()) +
                                                             " centers but " + std::to_string(coeffs.size()) +
                                                             " coefficients");
        detail::require(!centers.empty(), "model has no centers");
        const auto d = centers.front().size();
        model.centers.resize(static_cast<Index>(centers.size()), static_cast<Index>(d));
        for (std::size_t i = 0; i < centers.size(); ++i) {
            const auto row = centers[i].get<std::vector<double>>();
            detail::require(row.size() == d, "model center rows are ragged at row " + std::to_string(i));
            for (std::size_t k = 0; k < d; ++k)
                model.centers(static_cast<Index>(i), static_cast<Index>(k)) = row[k];
        }
        model.coefficients = Eigen::Map<const Vector>(coeffs.data(), static_cast<Index>(coeffs.size()));
        return model;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write model file " + path.string());
    out << model_to_json(model) << '\n';
}

FittedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read model file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace iwkrr
