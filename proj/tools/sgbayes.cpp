// sgbayes: build sparse-grid surrogates and calibrate model parameters.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sgbayes/config.hpp"
#include "sgbayes/external_model.hpp"
#include "sgbayes/persistence.hpp"
#include "sgbayes/pipeline.hpp"
#include "sgbayes/synthetic_les.hpp"

using namespace sgbayes;
namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string output;
};

RunConfig resolve(const CommonOptions& opt) {
    std::vector<std::string> overrides = opt.sets;
    if (opt.seed) overrides.push_back("seed=" + std::to_string(*opt.seed));
    if (opt.jobs) overrides.push_back("surrogate.jobs=" + std::to_string(*opt.jobs));
    if (!opt.output.empty()) overrides.push_back("output.directory=" + Json(opt.output).dump());
    return opt.config.empty() ? RunConfig(Json::object(), overrides) : RunConfig::load(opt.config, overrides);
}

fs::path prepare_output(const RunConfig& cfg, const std::string& command) {
    const fs::path dir = cfg.output_dir();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    atomic_write(dir / (command + "-config.json"), cfg.effective().dump(2) + "\n");
    return dir;
}

// Reads the configured data file or synthesizes data from θ*. `model` is
// created on first use so a data file needs no model at all.
Eigen::VectorXd reference_data(const RunConfig& cfg, const fs::path& out, std::shared_ptr<CountingModel>& model) {
    if (auto path = cfg.data_path()) return read_reference_data(*path);
    if (!model) model = std::make_shared<CountingModel>(cfg.make_model());
    Eigen::VectorXd theta;
    if (auto t = cfg.theta_star())
        theta = *t;
    else if (model->spec().backend == Backend::synthetic_les)
        theta = SyntheticLesConfig{}.true_theta;
    else
        throw ConfigurationError("set posterior.data or posterior.theta_star to define the reference data");
    const auto data = make_reference_data(*model, theta, cfg.noise(), cfg.data_seed());
    write_reference_data(out / "data.csv", data);
    return data;
}

void write_sampling_outputs(const fs::path& dir, const std::string& prefix, const SamplingResult& r,
                            const RunConfig& cfg, std::size_t model_runs) {
    write_chain_csv(dir / (prefix + "chain.csv"), r.chain);
    for (std::size_t n = 0; n < r.marginals.size(); ++n)
        write_histogram_csv(dir / (prefix + "marginal_" + std::to_string(n + 1) + ".csv"), r.marginals[n]);
    for (const auto& [pair, h] : r.joints)
        write_joint_histogram_csv(
            dir / (prefix + "joint_" + std::to_string(pair.first + 1) + "_" + std::to_string(pair.second + 1) + ".csv"),
            h);
    Json summary = Json::parse(summary_json(r.summary));
    Json modes = Json::array();
    for (const auto& h : r.marginals) modes.push_back(h.mode());
    summary["marginal_modes"] = modes;
    summary["model_evaluations"] = model_runs;
    summary["seed"] = cfg.dram().seed;
    summary["seconds"] = r.seconds;
    atomic_write(dir / (prefix + "summary.json"), summary.dump(2) + "\n");

    std::printf("accepted: %.3f (stage 1 %.3f, stage 2 %.3f)\n", r.summary.accept_total, r.summary.accept_stage1,
                r.summary.accept_stage2);
    std::printf("%4s %14s %14s %14s %10s\n", "dim", "mean", "sd", "mode", "ess");
    for (Eigen::Index n = 0; n < r.summary.mean.size(); ++n)
        std::printf("%4td %14.6g %14.6g %14.6g %10.1f\n", n + 1, r.summary.mean[n], r.summary.sd[n],
                    r.marginals[static_cast<std::size_t>(n)].mode(), r.summary.ess[n]);
    std::printf("model evaluations during sampling: %zu\n", model_runs);
}

int cmd_build(const CommonOptions& opt) {
    const auto cfg = resolve(opt);
    const auto dir = prepare_output(cfg, "build");
    const auto model = cfg.make_model();
    const EvaluationCache cache(cfg.cache_dir());
    const auto result = build_surrogate(*model, cfg.build_plan(), &cache);
    store_surrogate(result.surrogate, cfg.surrogate_path());
    atomic_write(dir / "build_report.json", report_json(result.report));
    std::fputs(report_table(result.report).c_str(), stdout);
    std::printf("surrogate: %s (%zu points)\n", cfg.surrogate_path().c_str(), result.surrogate.size());
    return 0;
}

int cmd_sample(const CommonOptions& opt) {
    const auto cfg = resolve(opt);
    const auto dir = prepare_output(cfg, "sample");
    auto surrogate = std::make_shared<SurrogateModel>(load_surrogate(cfg.surrogate_path()));
    if (surrogate->metadata.model_id != cfg.model_id())
        throw ConfigurationError("surrogate " + cfg.surrogate_path().string() + " was built for model '" +
                                 surrogate->metadata.model_id + "', not '" + cfg.model_id() + "'");
    std::shared_ptr<CountingModel> model;
    const auto data = reference_data(cfg, dir, model);
    const std::size_t before = model ? model->count() : 0;
    const auto result = run_calibration(surrogate, PriorSpec{surrogate->domain()}, cfg.likelihood(data), cfg.dram(),
                                        cfg.bins());
    write_sampling_outputs(dir, "", result, cfg, (model ? model->count() : 0) - before);
    return 0;
}

int cmd_direct(const CommonOptions& opt, bool force) {
    const auto cfg = resolve(opt);
    if (cfg.at("model.backend") == "external" && !force)
        throw RefusalError("direct sampling would run the external model at every proposal; pass --force to allow it");
    const auto dir = prepare_output(cfg, "direct");
    std::shared_ptr<CountingModel> model;
    const auto data = reference_data(cfg, dir, model);
    if (!model) model = std::make_shared<CountingModel>(cfg.make_model());
    const std::size_t before = model->count();
    const auto result =
        run_direct_mcmc(model, PriorSpec{model->domain()}, cfg.likelihood(data), cfg.dram(), cfg.bins(), force);
    write_sampling_outputs(dir, "direct_", result, cfg, model->count() - before);
    return 0;
}

std::vector<Eigen::VectorXd> read_points(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open points file " + path.string());
    std::vector<Eigen::VectorXd> points;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::istringstream fields(line);
        bool numeric = true;
        for (std::string field; std::getline(fields, field, ',');) {
            const auto first = field.find_first_not_of(" \t\r");
            const auto last = field.find_last_not_of(" \t\r");
            const std::string token = first == std::string::npos ? "" : field.substr(first, last - first + 1);
            double v = 0.0;
            const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc{} || end != token.data() + token.size() || token.empty()) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (points.empty() && number == 1) continue;  // header
            throw ConfigurationError(path.string() + ":" + std::to_string(number) + ": not a row of numbers");
        }
        points.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
    }
    return points;
}

int cmd_eval(const CommonOptions& opt, const std::string& points_file, const std::string& which,
             const std::string& out_file) {
    const auto cfg = resolve(opt);
    const auto dir = prepare_output(cfg, "eval");
    const bool use_surrogate = which != "model";
    const bool use_model = which != "surrogate";
    const auto points = read_points(points_file);

    std::optional<SurrogateModel> surrogate;
    if (use_surrogate) surrogate = load_surrogate(cfg.surrogate_path());
    std::vector<Eigen::VectorXd> truth;
    if (use_model) {
        const auto model = cfg.make_model();
        truth = evaluate_batch(*model, points, cfg.build_plan().jobs);
    }

    std::string csv = "point,output";
    if (use_surrogate) csv += ",surrogate";
    if (use_model) csv += ",model";
    csv += "\n";
    char buf[64];
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Eigen::VectorXd s = use_surrogate ? surrogate->eval(points[p]) : Eigen::VectorXd();
        const Eigen::Index nd = use_surrogate ? s.size() : truth[p].size();
        for (Eigen::Index k = 0; k < nd; ++k) {
            csv += std::to_string(p + 1) + "," + std::to_string(k + 1);
            if (use_surrogate) {
                std::snprintf(buf, sizeof buf, ",%.17g", s[k]);
                csv += buf;
            }
            if (use_model) {
                std::snprintf(buf, sizeof buf, ",%.17g", truth[p][k]);
                csv += buf;
            }
            csv += "\n";
        }
    }
    const fs::path target = out_file.empty() ? dir / "eval.csv" : fs::path(out_file);
    atomic_write(target, csv);
    std::printf("%zu points written to %s\n", points.size(), target.c_str());
    return 0;
}

int cmd_diagnose(const std::string& chain_file, std::size_t burn_in, std::size_t max_lag,
                 const std::string& json_file) {
    const auto chain = read_chain_csv(chain_file);
    const auto summary = diagnostics(chain, burn_in, max_lag);
    const auto text = summary_json(summary);
    if (!json_file.empty()) atomic_write(json_file, text);
    std::printf("samples: %zu after burn-in %zu\n", summary.samples, burn_in);
    std::printf("accepted: %.3f (stage 1 %.3f, stage 2 %.3f, stage 2 after a stage-1 reject %.3f)\n",
                summary.accept_total, summary.accept_stage1, summary.accept_stage2, summary.stage2_conditional);
    std::printf("%4s %14s %14s %10s %10s\n", "dim", "mean", "sd", "ess", "acf(1)");
    for (Eigen::Index n = 0; n < summary.mean.size(); ++n)
        std::printf("%4td %14.6g %14.6g %10.1f %10.4f\n", n + 1, summary.mean[n], summary.sd[n], summary.ess[n],
                    summary.autocorrelation.cols() > 1 ? summary.autocorrelation(n, 1) : 1.0);
    return 0;
}

std::string one_line(std::string text) {
    for (auto& c : text)
        if (c == '\n' || c == '\r') c = ' ';
    return text;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("-c,--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--set", opt.sets, "Override a setting, e.g. --set surrogate.alpha=1e-2")->take_all();
    cmd->add_option("--seed", opt.seed, "Master seed");
    cmd->add_option("--jobs", opt.jobs, "Concurrent model evaluations")->check(CLI::PositiveNumber);
    cmd->add_option("-o,--output", opt.output, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-grid surrogates and Bayesian calibration"};
    app.require_subcommand(1);

    CommonOptions opt;
    auto* build = app.add_subcommand("build", "Build the adaptive surrogate and store it");
    add_common(build, opt);

    auto* sample = app.add_subcommand("sample", "Calibrate with DRAM on the stored surrogate");
    add_common(sample, opt);

    bool force = false;
    auto* direct = app.add_subcommand("direct", "Calibrate with DRAM on the true model");
    add_common(direct, opt);
    direct->add_flag("--force", force, "Allow direct sampling of an external model");

    std::string points_file, which = "both", out_file;
    auto* eval = app.add_subcommand("eval", "Evaluate surrogate and model at listed points");
    add_common(eval, opt);
    eval->add_option("--points", points_file, "CSV file with one parameter vector per row")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--which", which, "surrogate, model or both")
        ->check(CLI::IsMember({"surrogate", "model", "both"}));
    eval->add_option("--out", out_file, "Output CSV (default <output>/eval.csv)");

    std::string chain_file, json_file;
    std::size_t burn_in = 0, max_lag = 100;
    auto* diagnose = app.add_subcommand("diagnose", "Summarize a stored chain");
    diagnose->add_option("chain", chain_file, "Chain CSV")->required()->check(CLI::ExistingFile);
    diagnose->add_option("--burn-in", burn_in, "Leading iterations to discard");
    diagnose->add_option("--max-lag", max_lag, "Largest autocorrelation lag");
    diagnose->add_option("--json", json_file, "Also write the summary as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) return cmd_build(opt);
        if (*sample) return cmd_sample(opt);
        if (*direct) return cmd_direct(opt, force);
        if (*eval) return cmd_eval(opt, points_file, which, out_file);
        if (*diagnose) return cmd_diagnose(chain_file, burn_in, max_lag, json_file);
    } catch (const ModelExecutionError& e) {
        std::fprintf(stderr, "error: %s: %s at %s\n", e.error_class(), one_line(e.what()).c_str(), e.point().c_str());
        if (!e.diagnostics().empty()) std::fprintf(stderr, "%s\n", e.diagnostics().c_str());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.error_class(), one_line(e.what()).c_str());
        return e.error_class() == std::string_view("ConfigurationError") ? 2 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: InternalError: %s\n", one_line(e.what()).c_str());
        return 1;
    }
    return 1;
}
