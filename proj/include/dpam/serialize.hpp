#pragma once
#include <fstream>
#include <sstream>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <dpam/model.hpp>

namespace dpam {

inline constexpr int model_format_version = 1;

namespace detail {

using nlohmann::json;

inline json vec_json(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd json_vec(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Loss loss_from(const std::string& s)
{
    if (s == "squared") return Loss::squared;
    if (s == "logistic") return Loss::logistic;
    throw ValidationError("unknown loss '" + s + "'");
}

inline TuningMode tuning_from(const std::string& s)
{
    if (s == "validation") return TuningMode::validation;
    if (s == "kfold") return TuningMode::kfold;
    if (s == "fixed") return TuningMode::fixed;
    throw ValidationError("unknown tuning mode '" + s + "'");
}

inline json spec_json(const ModelSpec& s)
{
    json j;
    j["order"] = s.order;
    j["max_order"] = s.max_order;
    j["n_knots"] = s.n_knots;
    j["projection"] = {{"kind", s.projection.is_averaging() ? "averaging" : "fixed_point"},
                       {"fixed_index", s.projection.fixed_index}};
    j["loss"] = to_string(s.loss);
    j["rho_grid"] = s.rho_grid;
    j["lambda_grid"] = s.lambda_grid;
    j["grid_points"] = s.grid_points;
    j["rho_high"] = s.rho_high;
    j["rho_low"] = s.rho_low;
    j["lambda_low"] = s.lambda_low;
    j["rho_factors"] = s.rho_factors;
    j["lambda_factors"] = s.lambda_factors;
    j["tuning"] = to_string(s.tuning);
    j["folds"] = s.folds;
    j["holdout_fraction"] = s.holdout_fraction;
    j["seed"] = s.seed;
    j["solver"] = {{"tol", s.solver.tol},
                   {"max_cycles", s.solver.max_cycles},
                   {"lasso_tol", s.solver.lasso_tol}};
    return j;
}

inline ModelSpec json_spec(const json& j)
{
    ModelSpec s;
    s.order = j.at("order").get<int>();
    s.max_order = j.at("max_order").get<std::size_t>();
    s.n_knots = j.at("n_knots").get<std::vector<std::size_t>>();
    const auto& pj = j.at("projection");
    const std::string kind = pj.at("kind").get<std::string>();
    if (kind == "averaging") {
        s.projection = ProjectionChoice::averaging();
    } else if (kind == "fixed_point") {
        s.projection = ProjectionChoice::fixed_point(pj.at("fixed_index").get<std::vector<std::size_t>>());
    } else {
        throw ValidationError("unknown projection '" + kind + "'");
    }
    s.loss = loss_from(j.at("loss").get<std::string>());
    s.rho_grid = j.at("rho_grid").get<std::vector<double>>();
    s.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    s.grid_points = j.at("grid_points").get<std::size_t>();
    s.rho_high = j.at("rho_high").get<double>();
    s.rho_low = j.at("rho_low").get<double>();
    s.lambda_low = j.at("lambda_low").get<double>();
    s.rho_factors = j.at("rho_factors").get<std::vector<double>>();
    s.lambda_factors = j.at("lambda_factors").get<std::vector<double>>();
    s.tuning = tuning_from(j.at("tuning").get<std::string>());
    s.folds = j.at("folds").get<std::size_t>();
    s.holdout_fraction = j.at("holdout_fraction").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& sj = j.at("solver");
    s.solver.tol = sj.at("tol").get<double>();
    s.solver.max_cycles = sj.at("max_cycles").get<std::size_t>();
    s.solver.lasso_tol = sj.at("lasso_tol").get<double>();
    return s;
}

} // namespace detail

/// Model document as JSON (see README for the field list).
inline nlohmann::json model_to_json(const FittedModel& m)
{
    using detail::json;
    json j;
    j["format"] = "dpam-model";
    j["version"] = model_format_version;
    j["spec"] = detail::spec_json(m.spec);
    j["n_features"] = m.n_features;
    j["feature_names"] = m.feature_names;
    j["used"] = m.used;
    json knots = json::array();
    for (const auto& k : m.knots.covariates) knots.push_back(k.marginal);
    j["knots"] = knots;
    j["intercept"] = m.intercept;
    j["rho"] = m.rho;
    j["lambda"] = m.lambda;
    json blocks = json::array();
    for (const auto& b : m.blocks) {
        blocks.push_back({{"covariates", b.covariates},
                          {"means", detail::vec_json(b.means)},
                          {"coefficients", detail::vec_json(b.coefficients)}});
    }
    j["blocks"] = blocks;
    j["training"] = {{"fitted", detail::vec_json(m.fitted)},
                     {"objective", m.objective},
                     {"cycles", m.cycles},
                     {"converged", m.converged},
                     {"warnings", m.warnings}};
    json rows = json::array();
    for (const auto& r : m.tuning) {
        rows.push_back({{"rho", r.rho}, {"lambda", r.lambda}, {"metric", r.metric},
                        {"active_blocks", r.active_blocks}, {"nonzero", r.nonzero}});
    }
    j["tuning"] = {{"metric", m.metric_name}, {"rows", rows}};
    return j;
}

inline FittedModel model_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format").get<std::string>() != "dpam-model") throw ValidationError("not a model document");
        const int version = j.at("version").get<int>();
        if (version != model_format_version) {
            throw ValidationError("unsupported model document version " + std::to_string(version));
        }
        FittedModel m;
        m.spec = detail::json_spec(j.at("spec"));
        m.n_features = j.at("n_features").get<std::size_t>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.used = j.at("used").get<std::vector<std::size_t>>();
        for (std::size_t u : m.used) {
            if (u >= m.n_features) throw ValidationError("used covariate index out of range");
        }
        m.knots.order = m.spec.order;
        for (const auto& k : j.at("knots")) {
            m.knots.covariates.push_back(knots_from_marginal(k.get<std::vector<double>>(), m.spec.order));
        }
        if (m.knots.dimension() != m.used.size()) throw ValidationError("knot list does not match the used covariates");
        m.intercept = j.at("intercept").get<double>();
        m.rho = j.at("rho").get<double>();
        m.lambda = j.at("lambda").get<double>();
        for (const auto& b : j.at("blocks")) {
            BlockFit bf;
            bf.covariates = b.at("covariates").get<Subset>();
            bf.means = detail::json_vec(b.at("means"));
            bf.coefficients = detail::json_vec(b.at("coefficients"));
            m.blocks.push_back(std::move(bf));
        }
        const auto& t = j.at("training");
        m.fitted = detail::json_vec(t.at("fitted"));
        m.objective = t.at("objective").get<double>();
        m.cycles = t.at("cycles").get<std::size_t>();
        m.converged = t.at("converged").get<bool>();
        m.warnings = t.at("warnings").get<std::vector<std::string>>();
        m.metric_name = j.at("tuning").at("metric").get<std::string>();
        for (const auto& r : j.at("tuning").at("rows")) {
            m.tuning.push_back({r.at("rho").get<double>(), r.at("lambda").get<double>(), r.at("metric").get<double>(),
                                r.at("active_blocks").get<std::size_t>(), r.at("nonzero").get<std::size_t>()});
        }
        m.rebuild();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
}

inline std::string serialize_model(const FittedModel& m)
{
    return model_to_json(m).dump(1) + "\n";
}

inline FittedModel deserialize_model(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("model document is not valid JSON: ") + e.what());
    }
    return model_from_json(j);
}

inline FittedModel load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

} // namespace dpam
