#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

#include "sgbayes/bayes.hpp"
#include "sgbayes/forward_model.hpp"
#include "sgbayes/mcmc.hpp"
#include "sgbayes/pipeline.hpp"

namespace sgbayes {

using Json = nlohmann::ordered_json;

/// Every accepted key with its default. A null default means "unset": the
/// value is derived or, where no derivation exists, required.
Json default_config();

/// Run configuration: defaults, then a config document, then `--set`
/// overrides. Unknown keys are rejected at every level.
class RunConfig {
public:
    RunConfig() : RunConfig(Json::object()) {}
    explicit RunConfig(const Json& user, std::span<const std::string> overrides = {});

    static RunConfig load(const std::filesystem::path& file, std::span<const std::string> overrides = {});

    /// Defaults merged with the user's settings; writing this out and
    /// loading it again gives the same run.
    const Json& effective() const noexcept { return effective_; }

    std::uint64_t seed() const;

    /// Backend name plus a checksum of the settings that determine the
    /// model outputs, so cache entries never mix different models.
    std::string model_id() const;
    std::shared_ptr<ForwardModel> make_model() const;

    BuildPlan build_plan() const;
    DramConfig dram() const;
    std::size_t bins() const;
    LikelihoodSpec likelihood(Eigen::VectorXd data) const;

    std::optional<std::filesystem::path> data_path() const;
    std::optional<Eigen::VectorXd> theta_star() const;
    double noise() const;
    std::uint64_t data_seed() const;

    std::filesystem::path output_dir() const;
    std::filesystem::path surrogate_path() const;
    /// SGBAYES_CACHE_DIR if set, else output.cache_dir, else <output>/cache.
    std::filesystem::path cache_dir() const;

    /// Typed access by dotted path; type mismatches raise ConfigurationError.
    const Json& at(std::string_view dotted) const;

private:
    Json effective_;
};

/// Applies `section.key=value`. The value is read as JSON when it parses,
/// otherwise as a plain string.
void apply_override(Json& config, std::string_view assignment);

}  // namespace sgbayes
