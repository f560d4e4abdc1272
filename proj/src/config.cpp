#include "sgbayes/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sgbayes/external_model.hpp"
#include "sgbayes/persistence.hpp"
#include "sgbayes/synthetic_les.hpp"

namespace sgbayes {

namespace fs = std::filesystem;

namespace {

Json synthetic_defaults() {
    const SyntheticLesConfig c;
    return {{"stations", c.stations},         {"y_first", c.y_first},
            {"y_step", c.y_step},             {"y_center", c.y_center},
            {"y_scale", c.y_scale},           {"y_plus_first", c.y_plus_first},
            {"y_plus_last", c.y_plus_last},   {"a_plus", c.a_plus},
            {"n", c.n},                       {"delta_fine", c.delta_fine},
            {"delta_coarse", c.delta_coarse}, {"length_ref", c.length_ref}};
}

std::string join(std::string_view prefix, std::string_view key) {
    return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

// Overlays `user` onto `base`, rejecting keys the schema does not know.
void merge(Json& base, const Json& user, const std::string& prefix) {
    if (!user.is_object())
        throw ConfigurationError(prefix.empty() ? "configuration must be a JSON object"
                                                : "config key " + prefix + " must be an object");
    for (const auto& item : user.items()) {
        const std::string path = join(prefix, item.key());
        if (!base.contains(item.key())) throw ConfigurationError("unknown config key " + path);
        Json& slot = base[item.key()];
        if (slot.is_object())
            merge(slot, item.value(), path);
        else
            slot = item.value();
    }
}

Eigen::VectorXd to_vector(const Json& j, std::string_view name) {
    if (!j.is_array()) throw ConfigurationError("config key " + std::string(name) + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number())
            throw ConfigurationError("config key " + std::string(name) + " must be an array of numbers");
        v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    }
    return v;
}

template <typename T>
T get_as(const Json& j, std::string_view name) {
    bool ok;
    if constexpr (std::is_same_v<T, bool>)
        ok = j.is_boolean();
    else if constexpr (std::is_unsigned_v<T>)
        ok = j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
    else if constexpr (std::is_integral_v<T>)
        ok = j.is_number_integer();
    else if constexpr (std::is_floating_point_v<T>)
        ok = j.is_number();
    else
        ok = j.is_string();
    if (!ok) throw ConfigurationError("config key " + std::string(name) + " has the wrong type: " + j.dump());
    return j.get<T>();
}

}  // namespace

Json default_config() {
    Json j;
    j["seed"] = 1;
    j["model"] = {{"backend", "synthetic-les"},
                  {"lower", nullptr},
                  {"upper", nullptr},
                  {"analytic", {{"kind", "gaussian-peak"}, {"weights", nullptr}, {"shifts", nullptr}}},
                  {"synthetic", synthetic_defaults()},
                  {"external",
                   {{"executable", nullptr},
                    {"output_dim", nullptr},
                    {"workdir", nullptr},
                    {"timeout_seconds", 0.0},
                    {"max_concurrent", 1}}}};
    j["surrogate"] = {{"start_level", 5},   {"max_level", 8}, {"alpha", 1e-3}, {"mode", "relative"},
                      {"budget", nullptr}, {"jobs", 1},      {"file", "surrogate.sgs"}};
    j["posterior"] = {{"likelihood", "MVN"}, {"sigma", 0.1},  {"zeta", 500.0}, {"data", nullptr},
                      {"theta_star", nullptr}, {"noise", 0.1}, {"seed", nullptr}};
    const DramConfig d;
    j["mcmc"] = {{"samples", d.samples},
                 {"burn_in", d.burn_in},
                 {"initial", nullptr},
                 {"adapt_start", d.adapt_start},
                 {"adapt_interval", d.adapt_interval},
                 {"scale", d.scale},
                 {"regularizer", d.regularizer},
                 {"stages", d.stages},
                 {"gamma", d.gamma},
                 {"seed", nullptr},
                 {"bins", 50}};
    j["output"] = {{"directory", "sgbayes-out"}, {"cache_dir", nullptr}};
    return j;
}

void apply_override(Json& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ConfigurationError("override '" + std::string(assignment) + "' is not of the form section.key=value");
    const std::string path(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    Json patch = value;
    std::vector<std::string> parts;
    std::istringstream split(path);
    for (std::string part; std::getline(split, part, '.');) {
        if (part.empty()) throw ConfigurationError("override key '" + path + "' has an empty component");
        parts.push_back(part);
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    merge(config, patch, "");
}

RunConfig::RunConfig(const Json& user, std::span<const std::string> overrides) : effective_(default_config()) {
    merge(effective_, user, "");
    for (const auto& o : overrides) apply_override(effective_, o);
    // Surface type errors and inconsistencies now rather than mid-run.
    (void)seed();
    build_plan();
    dram().validate();
    (void)bins();
    (void)likelihood_kind_from_string(get_as<std::string>(at("posterior.likelihood"), "posterior.likelihood"));
    (void)theta_star();
    (void)noise();
    (void)data_seed();
    (void)output_dir();
}

RunConfig RunConfig::load(const fs::path& file, std::span<const std::string> overrides) {
    std::ifstream in(file);
    if (!in) throw NotFoundError("cannot open config file " + file.string());
    Json user = Json::parse(in, nullptr, false, true);
    if (user.is_discarded()) throw ConfigurationError("config file " + file.string() + " is not valid JSON");
    return RunConfig(user, overrides);
}

const Json& RunConfig::at(std::string_view dotted) const {
    const Json* node = &effective_;
    std::size_t start = 0;
    while (start <= dotted.size()) {
        const auto dot = dotted.find('.', start);
        const std::string key(dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start));
        if (!node->is_object() || !node->contains(key))
            throw ConfigurationError("unknown config key " + std::string(dotted));
        node = &(*node)[key];
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return *node;
}

std::uint64_t RunConfig::seed() const { return get_as<std::uint64_t>(at("seed"), "seed"); }

std::string RunConfig::model_id() const {
    const auto backend = get_as<std::string>(at("model.backend"), "model.backend");
    Json identity = {{"backend", backend}, {"lower", at("model.lower")}, {"upper", at("model.upper")}};
    if (backend == "analytic") {
        identity["analytic"] = at("model.analytic");
    } else if (backend == "synthetic-les") {
        identity["synthetic"] = at("model.synthetic");
    } else if (backend == "external") {
        Json ext = at("model.external");
        // runtime knobs that do not change the outputs
        ext.erase("workdir");
        ext.erase("timeout_seconds");
        ext.erase("max_concurrent");
        identity["external"] = ext;
    }
    return backend + "-" + checksum(identity.dump());
}

std::shared_ptr<ForwardModel> RunConfig::make_model() const {
    const auto backend = get_as<std::string>(at("model.backend"), "model.backend");
    const Json& lower = at("model.lower");
    const Json& upper = at("model.upper");
    if (lower.is_null() != upper.is_null())
        throw ConfigurationError("model.lower and model.upper must be given together");
    std::optional<Box> box;
    if (!lower.is_null()) box = Box(to_vector(lower, "model.lower"), to_vector(upper, "model.upper"));

    if (backend == "synthetic-les") {
        SyntheticLesConfig c;
        const Json& s = at("model.synthetic");
        c.stations = get_as<int>(s["stations"], "model.synthetic.stations");
        c.y_first = get_as<double>(s["y_first"], "model.synthetic.y_first");
        c.y_step = get_as<double>(s["y_step"], "model.synthetic.y_step");
        c.y_center = get_as<double>(s["y_center"], "model.synthetic.y_center");
        c.y_scale = get_as<double>(s["y_scale"], "model.synthetic.y_scale");
        c.y_plus_first = get_as<double>(s["y_plus_first"], "model.synthetic.y_plus_first");
        c.y_plus_last = get_as<double>(s["y_plus_last"], "model.synthetic.y_plus_last");
        c.a_plus = get_as<double>(s["a_plus"], "model.synthetic.a_plus");
        c.n = get_as<double>(s["n"], "model.synthetic.n");
        c.delta_fine = get_as<double>(s["delta_fine"], "model.synthetic.delta_fine");
        c.delta_coarse = get_as<double>(s["delta_coarse"], "model.synthetic.delta_coarse");
        c.length_ref = get_as<double>(s["length_ref"], "model.synthetic.length_ref");
        if (box) c.domain = *box;
        return std::make_shared<SyntheticLesModel>(c);
    }
    if (backend == "analytic") {
        if (!box) throw ConfigurationError("the analytic backend needs model.lower and model.upper");
        const Json& a = at("model.analytic");
        const auto kind = analytic_kind_from_string(get_as<std::string>(a["kind"], "model.analytic.kind"));
        if (a["weights"].is_null() && a["shifts"].is_null()) return std::make_shared<AnalyticModel>(kind, *box);
        const Eigen::VectorXd w = a["weights"].is_null() ? Eigen::VectorXd::Ones(static_cast<Eigen::Index>(box->dim()))
                                                         : to_vector(a["weights"], "model.analytic.weights");
        const Eigen::VectorXd u = a["shifts"].is_null() ? Eigen::VectorXd((box->lower() + box->upper()) / 2.0)
                                                        : to_vector(a["shifts"], "model.analytic.shifts");
        return std::make_shared<AnalyticModel>(kind, *box, w, u);
    }
    if (backend == "external") {
        if (!box) throw ConfigurationError("the external backend needs model.lower and model.upper");
        const Json& e = at("model.external");
        if (e["executable"].is_null()) throw ConfigurationError("the external backend needs model.external.executable");
        if (e["output_dim"].is_null()) throw ConfigurationError("the external backend needs model.external.output_dim");
        ExternalModelConfig c;
        c.executable = get_as<std::string>(e["executable"], "model.external.executable");
        c.domain = *box;
        c.output_dim = get_as<std::size_t>(e["output_dim"], "model.external.output_dim");
        if (!e["workdir"].is_null()) c.workdir = get_as<std::string>(e["workdir"], "model.external.workdir");
        c.timeout_seconds = get_as<double>(e["timeout_seconds"], "model.external.timeout_seconds");
        c.max_concurrent = get_as<std::size_t>(e["max_concurrent"], "model.external.max_concurrent");
        return std::make_shared<ExternalModel>(c);
    }
    throw ConfigurationError("unknown model.backend '" + backend + "'");
}

BuildPlan RunConfig::build_plan() const {
    BuildPlan plan;
    const Json& s = at("surrogate");
    plan.model_id = model_id();
    plan.start_level = get_as<int>(s["start_level"], "surrogate.start_level");
    plan.max_level = get_as<int>(s["max_level"], "surrogate.max_level");
    if (s["alpha"].is_string() && (s["alpha"] == "inf" || s["alpha"] == "infinity"))
        plan.alpha = std::numeric_limits<double>::infinity();
    else
        plan.alpha = get_as<double>(s["alpha"], "surrogate.alpha");
    plan.mode = refinement_mode_from_string(get_as<std::string>(s["mode"], "surrogate.mode"));
    if (!s["budget"].is_null()) plan.budget = get_as<std::size_t>(s["budget"], "surrogate.budget");
    plan.jobs = get_as<std::size_t>(s["jobs"], "surrogate.jobs");
    plan.seed = seed();
    if (plan.start_level < 0 || plan.start_level > plan.max_level)
        throw ConfigurationError("surrogate.start_level must lie in [0, surrogate.max_level]");
    if (!(plan.alpha >= 0.0)) throw ConfigurationError("surrogate.alpha must be non-negative");
    if (plan.jobs == 0) throw ConfigurationError("surrogate.jobs must be positive");
    return plan;
}

DramConfig RunConfig::dram() const {
    DramConfig d;
    const Json& m = at("mcmc");
    d.samples = get_as<std::size_t>(m["samples"], "mcmc.samples");
    d.burn_in = get_as<std::size_t>(m["burn_in"], "mcmc.burn_in");
    if (!m["initial"].is_null()) d.initial = to_vector(m["initial"], "mcmc.initial");
    if (m["adapt_start"].is_null())
        d.adapt_start = never;
    else
        d.adapt_start = get_as<std::size_t>(m["adapt_start"], "mcmc.adapt_start");
    d.adapt_interval = get_as<std::size_t>(m["adapt_interval"], "mcmc.adapt_interval");
    d.scale = get_as<double>(m["scale"], "mcmc.scale");
    d.regularizer = get_as<double>(m["regularizer"], "mcmc.regularizer");
    d.stages = get_as<int>(m["stages"], "mcmc.stages");
    d.gamma = get_as<double>(m["gamma"], "mcmc.gamma");
    d.seed = m["seed"].is_null() ? derive_seed(seed(), 2) : get_as<std::uint64_t>(m["seed"], "mcmc.seed");
    return d;
}

std::size_t RunConfig::bins() const {
    const auto b = get_as<std::size_t>(at("mcmc.bins"), "mcmc.bins");
    if (b == 0) throw ConfigurationError("mcmc.bins must be positive");
    return b;
}

LikelihoodSpec RunConfig::likelihood(Eigen::VectorXd data) const {
    const Json& p = at("posterior");
    const auto kind = likelihood_kind_from_string(get_as<std::string>(p["likelihood"], "posterior.likelihood"));
    LikelihoodSpec spec;
    if (kind == LikelihoodKind::exp) {
        spec = LikelihoodSpec::exp(std::move(data), get_as<double>(p["zeta"], "posterior.zeta"));
    } else if (p["sigma"].is_array()) {
        spec.kind = LikelihoodKind::mvn;
        spec.sigma = to_vector(p["sigma"], "posterior.sigma");
        spec.data = std::move(data);
    } else {
        spec = LikelihoodSpec::mvn(std::move(data), get_as<double>(p["sigma"], "posterior.sigma"));
    }
    spec.validate();
    return spec;
}

std::optional<fs::path> RunConfig::data_path() const {
    const Json& d = at("posterior.data");
    if (d.is_null()) return std::nullopt;
    return fs::path(get_as<std::string>(d, "posterior.data"));
}

std::optional<Eigen::VectorXd> RunConfig::theta_star() const {
    const Json& t = at("posterior.theta_star");
    if (t.is_null()) return std::nullopt;
    return to_vector(t, "posterior.theta_star");
}

double RunConfig::noise() const {
    const double n = get_as<double>(at("posterior.noise"), "posterior.noise");
    if (!(n >= 0.0)) throw ConfigurationError("posterior.noise must be non-negative");
    return n;
}

std::uint64_t RunConfig::data_seed() const {
    const Json& s = at("posterior.seed");
    return s.is_null() ? derive_seed(seed(), 1) : get_as<std::uint64_t>(s, "posterior.seed");
}

fs::path RunConfig::output_dir() const {
    return fs::path(get_as<std::string>(at("output.directory"), "output.directory"));
}

fs::path RunConfig::surrogate_path() const {
    const fs::path file(get_as<std::string>(at("surrogate.file"), "surrogate.file"));
    return file.is_absolute() ? file : output_dir() / file;
}

fs::path RunConfig::cache_dir() const {
    if (const char* env = std::getenv("SGBAYES_CACHE_DIR"); env && *env) return fs::path(env);
    const Json& c = at("output.cache_dir");
    if (!c.is_null()) return fs::path(get_as<std::string>(c, "output.cache_dir"));
    return output_dir() / "cache";
}

}  // namespace sgbayes
