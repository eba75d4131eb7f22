// dpam: fit, predict, partial dependence and simulation from the command line.
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>
#include <CLI11.hpp>
#include <dpam/csv.hpp>
#include <dpam/model.hpp>
#include <dpam/serialize.hpp>
#include <dpam/simulation.hpp>

namespace {

using namespace dpam;

// Outputs are staged in memory and written only after the command succeeds,
// each through a temporary file that is renamed into place.
class Outputs
{
public:
    std::ostringstream& add(const std::string& path)
    {
        entries_.push_back({path, std::make_unique<std::ostringstream>()});
        return *entries_.back().buffer;
    }

    void commit()
    {
        std::vector<std::string> written;
        try {
            for (auto& e : entries_) {
                if (e.path == "-") {
                    std::cout << e.buffer->str() << std::flush;
                    continue;
                }
                const std::string tmp = e.path + ".part";
                {
                    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                    if (!out) throw IoError("cannot write '" + e.path + "'");
                    out << e.buffer->str();
                    out.close();
                    if (!out) {
                        std::filesystem::remove(tmp);
                        throw IoError("cannot write '" + e.path + "'");
                    }
                }
                std::filesystem::rename(tmp, e.path);
                written.push_back(e.path);
            }
        } catch (...) {
            std::error_code ec;
            for (const auto& p : written) std::filesystem::remove(p, ec);
            throw;
        }
    }

private:
    struct Entry
    {
        std::string path;
        std::unique_ptr<std::ostringstream> buffer;
    };
    std::vector<Entry> entries_;
};

struct FitArgs
{
    std::string data, response, out, report, blocks, validation, save_config;
    std::vector<std::string> features;
    int order = 2;
    std::size_t max_order = 2;
    std::vector<std::size_t> knots{11};
    std::string projection = "averaging";
    std::vector<std::size_t> fixed_index;
    std::string loss = "squared";
    std::vector<double> rho_grid, lambda_grid;
    std::size_t grid_points = 8;
    double rho_high = 0.1, rho_low = 1e-3, lambda_low = 1e-2;
    std::vector<double> rho_factors, lambda_factors;
    std::string tuning = "validation";
    std::size_t folds = 5;
    double holdout = 0.25;
    std::uint64_t seed = 1;
    double tol = -1.0;
    std::size_t max_cycles = 200;
};

struct PredictArgs
{
    std::string model, data, out = "-";
};

struct PdpArgs
{
    std::string model, data, out = "-";
    std::vector<std::string> subsets;
    std::size_t points = 20;
};

struct SimArgs
{
    std::string scenario = "linear-anova", out = "-", reps_out;
    std::size_t reps = 0, n = 0, test_size = 10000, grid_points = 8;
    std::uint64_t seed = 1;
    std::vector<std::string> methods;
};

Loss parse_loss(const std::string& s)
{
    if (s == "squared") return Loss::squared;
    if (s == "logistic") return Loss::logistic;
    throw ValidationError("unknown loss '" + s + "' (squared or logistic)");
}

ModelSpec spec_from(const FitArgs& a, std::size_t threads)
{
    ModelSpec s;
    s.order = a.order;
    s.max_order = a.max_order;
    s.n_knots = a.knots;
    if (a.projection == "averaging") {
        s.projection = ProjectionChoice::averaging();
    } else if (a.projection == "fixed") {
        s.projection = ProjectionChoice::fixed_point(a.fixed_index);
    } else {
        throw ValidationError("unknown projection '" + a.projection + "' (averaging or fixed)");
    }
    s.loss = parse_loss(a.loss);
    s.rho_grid = a.rho_grid;
    s.lambda_grid = a.lambda_grid;
    s.grid_points = a.grid_points;
    s.rho_high = a.rho_high;
    s.rho_low = a.rho_low;
    s.lambda_low = a.lambda_low;
    s.rho_factors = a.rho_factors;
    s.lambda_factors = a.lambda_factors;
    if (a.tuning == "validation") s.tuning = TuningMode::validation;
    else if (a.tuning == "kfold") s.tuning = TuningMode::kfold;
    else if (a.tuning == "fixed") s.tuning = TuningMode::fixed;
    else throw ValidationError("unknown tuning mode '" + a.tuning + "' (validation, kfold or fixed)");
    s.folds = a.folds;
    s.holdout_fraction = a.holdout;
    s.seed = a.seed;
    s.solver.tol = a.tol;
    s.solver.max_cycles = a.max_cycles;
    s.solver.record_trace = false;
    s.threads = threads;
    return s;
}

Eigen::MatrixXd select_columns(const Table& t, const std::vector<std::string>& names)
{
    Eigen::MatrixXd X(t.values.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = t.values.col(static_cast<Eigen::Index>(t.column(names[j])));
    return X;
}

std::string stem_path(const std::string& out, const std::string& suffix)
{
    const std::filesystem::path p(out);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

int cmd_fit(const FitArgs& a, std::size_t threads, const CLI::App& app)
{
    const ModelSpec spec = spec_from(a, threads);
    spec.validate();
    const Table t = read_csv_file(a.data);
    const std::size_t ycol = t.column(a.response);
    std::vector<std::string> names = a.features;
    if (names.empty()) {
        for (const auto& h : t.header) {
            if (h != a.response) names.push_back(h);
        }
    }
    for (const auto& f : names) {
        if (f == a.response) throw ValidationError("response '" + f + "' is also listed as a feature");
    }
    const Eigen::MatrixXd X = select_columns(t, names);
    const Eigen::VectorXd y = t.values.col(static_cast<Eigen::Index>(ycol));

    std::optional<ValidationData> val;
    if (!a.validation.empty()) {
        const Table v = read_csv_file(a.validation);
        val = ValidationData{select_columns(v, names), v.values.col(static_cast<Eigen::Index>(v.column(a.response)))};
    }
    FittedModel m = fit(X, y, spec, val ? &*val : nullptr);
    m.feature_names = names;
    for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';

    Outputs outs;
    outs.add(a.out) << serialize_model(m);

    auto& rep = outs.add(a.report.empty() ? stem_path(a.out, ".tuning.csv") : a.report);
    rep << "rho,lambda," << m.metric_name << ",active_blocks,nonzero\n";
    for (const auto& r : tune_report(m)) {
        rep << format_number(r.rho) << ',' << format_number(r.lambda) << ',' << format_number(r.metric) << ','
            << r.active_blocks << ',' << r.nonzero << '\n';
    }

    auto& blk = outs.add(a.blocks.empty() ? stem_path(a.out, ".blocks.csv") : a.blocks);
    blk << "block,covariates,order,columns,nonzero,norm\n";
    const Eigen::MatrixXd comp = m.component_matrix(X);
    for (std::size_t b : m.active_blocks()) {
        std::string cov;
        for (std::size_t j : m.blocks[b].covariates) cov += (cov.empty() ? "" : ":") + names[j];
        const auto& c = m.blocks[b].coefficients;
        const double norm = comp.col(static_cast<Eigen::Index>(b)).norm() / std::sqrt(static_cast<double>(X.rows()));
        blk << b << ',' << csv_field(cov) << ',' << m.blocks[b].covariates.size() << ',' << c.size() << ','
            << (c.array() != 0.0).count() << ',' << format_number(norm) << '\n';
    }
    if (!a.save_config.empty()) outs.add(a.save_config) << app.config_to_str(false, false);
    outs.commit();
    std::cout << "selected rho=" << format_number(m.rho) << " lambda=" << format_number(m.lambda)
              << ", active blocks: " << m.active_blocks().size() << " of " << m.blocks.size() << '\n';
    return 0;
}

Eigen::MatrixXd model_inputs(const FittedModel& m, const Table& t)
{
    if (m.feature_names.size() != m.n_features) throw ValidationError("model document lacks feature names");
    try {
        return select_columns(t, m.feature_names);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("input does not match the model schema: ") + e.what());
    }
}

int cmd_predict(const PredictArgs& a)
{
    const FittedModel m = load_model(a.model);
    const Table t = read_csv_file(a.data);
    const Eigen::MatrixXd X = model_inputs(m, t);
    const bool logistic = m.spec.loss == Loss::logistic;
    Outputs outs;
    auto& os = outs.add(a.out);
    os << (logistic ? "prediction,probability\n" : "prediction\n");
    if (X.rows() > 0) {
        const Eigen::VectorXd eta = m.predict(X);
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            os << format_number(eta[i]);
            if (logistic) os << ',' << format_number(detail::expit(eta[i]));
            os << '\n';
        }
    }
    outs.commit();
    return 0;
}

int cmd_pdp(const PdpArgs& a)
{
    const FittedModel m = load_model(a.model);
    const Table t = read_csv_file(a.data);
    const Eigen::MatrixXd X = model_inputs(m, t);
    Outputs outs;
    auto& os = outs.add(a.out);
    os << "subset,var1,x1,var2,x2,pdp\n";
    for (const auto& spec : a.subsets) {
        Subset S;
        std::vector<std::string> names;
        std::stringstream ss(spec);
        for (std::string part; std::getline(ss, part, ':');) {
            const auto it = std::find(m.feature_names.begin(), m.feature_names.end(), part);
            if (it == m.feature_names.end()) throw ValidationError("unknown covariate '" + part + "' in subset '" + spec + "'");
            S.push_back(static_cast<std::size_t>(it - m.feature_names.begin()));
            names.push_back(part);
        }
        if (S.size() > 2) throw UnsupportedError("subset '" + spec + "' has more than 2 covariates");
        const auto grid = pdp_grid(X, S, a.points);
        const auto values = partial_dependence(m, S, grid, X);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            os << csv_field(spec) << ',' << csv_field(names[0]) << ',' << format_number(grid[g][0]) << ',';
            if (S.size() == 2) os << csv_field(names[1]) << ',' << format_number(grid[g][1]);
            else os << ',';
            os << ',' << format_number(values[g]) << '\n';
        }
    }
    outs.commit();
    return 0;
}

int cmd_simulate(const SimArgs& a, std::size_t threads)
{
    Scenario s = make_scenario(a.scenario);
    if (a.n > 0) s.n = a.n;
    s.seed = a.seed;
    s.test_size = a.test_size;
    const std::size_t reps = a.reps > 0 ? a.reps : s.reps;
    std::vector<Method> methods;
    for (auto& me : standard_methods(s)) {
        me.spec.grid_points = a.grid_points;
        std::string key = me.label;
        std::replace(key.begin(), key.end(), ' ', '-');
        key.erase(std::remove(key.begin(), key.end(), '='), key.end());   // "ATV-m2"
        if (a.methods.empty() || std::find(a.methods.begin(), a.methods.end(), key) != a.methods.end()) {
            methods.push_back(me);
        }
    }
    if (methods.empty()) throw ValidationError("no method matches --methods (use ATV-m1, FTV-m1, ATV-m2, FTV-m2)");
    const SimulationResult r = run_replications(s, methods, reps, threads);
    Outputs outs;
    write_summary_csv(outs.add(a.out), r);
    if (!a.reps_out.empty()) write_replications_csv(outs.add(a.reps_out), r);
    outs.commit();
    return 0;
}

const char* class_name(ErrorClass c)
{
    switch (c) {
        case ErrorClass::validation:  return "validation";
        case ErrorClass::unsupported: return "unsupported";
        case ErrorClass::numerical:   return "numerical";
        case ErrorClass::io:          return "io";
    }
    return "runtime";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Doubly penalized functional ANOVA modeling with hierarchical total variation"};
    app.set_config("--config", "", "TOML config file; explicit flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Maximum worker threads (0 = all cores)");

    FitArgs fa;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV file");
    fit_cmd->add_option("--data", fa.data, "Training CSV")->required();
    fit_cmd->add_option("--response", fa.response, "Response column name")->required();
    fit_cmd->add_option("--out", fa.out, "Model document (JSON)")->required();
    fit_cmd->add_option("--report", fa.report, "Tuning report CSV (default <out>.tuning.csv)");
    fit_cmd->add_option("--blocks", fa.blocks, "Active-block summary CSV (default <out>.blocks.csv)");
    fit_cmd->add_option("--features", fa.features, "Feature columns (default: all but the response)")->delimiter(',');
    fit_cmd->add_option("--validation", fa.validation, "Validation CSV (validation tuning without a holdout split)");
    fit_cmd->add_option("-m,--order", fa.order, "Cross-order m (1 or 2)")->capture_default_str();
    fit_cmd->add_option("-K,--max-order", fa.max_order, "Maximum interaction order (1 or 2)")->capture_default_str();
    fit_cmd->add_option("--knots", fa.knots, "Quantile knots per covariate (one value or one per feature)")->delimiter(',')->capture_default_str();
    fit_cmd->add_option("--projection", fa.projection, "averaging or fixed")->capture_default_str();
    fit_cmd->add_option("--fixed-index", fa.fixed_index, "Fixed-point knot index per feature (0-based; default 0)")->delimiter(',');
    fit_cmd->add_option("--loss", fa.loss, "squared or logistic")->capture_default_str();
    fit_cmd->add_option("--rho-grid", fa.rho_grid, "Explicit rho values")->delimiter(',');
    fit_cmd->add_option("--lambda-grid", fa.lambda_grid, "Explicit lambda values")->delimiter(',');
    fit_cmd->add_option("--grid-points", fa.grid_points, "Points per automatic grid")->capture_default_str();
    fit_cmd->add_option("--rho-high", fa.rho_high, "Automatic rho grid top, relative to rho_max")->capture_default_str();
    fit_cmd->add_option("--rho-low", fa.rho_low, "Automatic rho grid bottom, relative to rho_max")->capture_default_str();
    fit_cmd->add_option("--lambda-low", fa.lambda_low, "Automatic lambda grid bottom, relative to lambda_max")->capture_default_str();
    fit_cmd->add_option("--rho-factors", fa.rho_factors, "Per-order rho multipliers")->delimiter(',');
    fit_cmd->add_option("--lambda-factors", fa.lambda_factors, "Per-order lambda multipliers")->delimiter(',');
    fit_cmd->add_option("--tuning", fa.tuning, "validation, kfold or fixed")->capture_default_str();
    fit_cmd->add_option("--folds", fa.folds, "Folds for kfold tuning")->capture_default_str();
    fit_cmd->add_option("--holdout", fa.holdout, "Held-out fraction for validation tuning without --validation")->capture_default_str();
    fit_cmd->add_option("--seed", fa.seed, "Seed for data splits")->capture_default_str();
    fit_cmd->add_option("--tol", fa.tol, "Relative objective tolerance (default per loss)");
    fit_cmd->add_option("--max-cycles", fa.max_cycles, "Cycle cap of the block descent")->capture_default_str();
    fit_cmd->add_option("--save-config", fa.save_config, "Write the effective settings as a config file")->configurable(false);

    PredictArgs pa;
    auto* pred_cmd = app.add_subcommand("predict", "Predict from a saved model");
    pred_cmd->add_option("--model", pa.model, "Model document")->required();
    pred_cmd->add_option("--data", pa.data, "Feature CSV")->required();
    pred_cmd->add_option("--out", pa.out, "Predictions CSV ('-' for stdout)")->capture_default_str();

    PdpArgs da;
    auto* pdp_cmd = app.add_subcommand("pdp", "Partial dependence tables");
    pdp_cmd->add_option("--model", da.model, "Model document")->required();
    pdp_cmd->add_option("--data", da.data, "Training CSV")->required();
    pdp_cmd->add_option("--subset", da.subsets, "Covariates, e.g. x1 or x1:x2 (repeatable)")->required();
    pdp_cmd->add_option("--grid-points", da.points, "Grid points per axis")->capture_default_str();
    pdp_cmd->add_option("--out", da.out, "Output CSV ('-' for stdout)")->capture_default_str();

    SimArgs sa;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation benchmark");
    sim_cmd->add_option("--scenario", sa.scenario, "linear-anova, logistic-anova or lattice-2d")->capture_default_str();
    sim_cmd->add_option("--reps", sa.reps, "Replications (default per scenario)");
    sim_cmd->add_option("--n", sa.n, "Training and validation size (default per scenario)");
    sim_cmd->add_option("--seed", sa.seed, "Base seed; replication r uses seed + r")->capture_default_str();
    sim_cmd->add_option("--test-size", sa.test_size, "Test points")->capture_default_str();
    sim_cmd->add_option("--grid-points", sa.grid_points, "Points per tuning grid")->capture_default_str();
    sim_cmd->add_option("--methods", sa.methods, "Subset of ATV-m1, FTV-m1, ATV-m2, FTV-m2")->delimiter(',');
    sim_cmd->add_option("--out", sa.out, "Summary CSV ('-' for stdout)")->capture_default_str();
    sim_cmd->add_option("--reps-out", sa.reps_out, "Per-replication CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*fit_cmd) return cmd_fit(fa, threads, app);
        if (*pred_cmd) return cmd_predict(pa);
        if (*pdp_cmd) return cmd_pdp(da);
        if (*sim_cmd) return cmd_simulate(sa, threads);
    } catch (const Error& e) {
        std::cerr << "error[" << class_name(e.error_class()) << "]: " << e.what() << '\n';
        const bool usage = e.error_class() == ErrorClass::validation || e.error_class() == ErrorClass::unsupported;
        return usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error[runtime]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
