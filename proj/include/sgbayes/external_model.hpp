#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "sgbayes/forward_model.hpp"

namespace sgbayes {

struct ExternalModelConfig {
    std::string name = "external";
    std::filesystem::path executable;
    Box domain;
    std::size_t output_dim = 0;
    /// Scratch space for parameter/output files. Empty means a fresh
    /// directory under the system temp path.
    std::filesystem::path workdir;
    /// Wall-clock limit per run in seconds; 0 disables it.
    double timeout_seconds = 0.0;
    std::size_t max_concurrent = 1;
};

/// Runs `<exe> <param_file> <output_file>` once per new parameter point.
/// Results are memoized by the exact bit pattern of θ, so repeated requests
/// do not launch the executable again.
class ExternalModel final : public ForwardModel {
public:
    explicit ExternalModel(ExternalModelConfig config);

    const ExternalModelConfig& config() const noexcept { return config_; }
    std::size_t launches() const noexcept { return launches_.load(); }

protected:
    Eigen::VectorXd do_evaluate(const Eigen::VectorXd& theta) const override;

private:
    Eigen::VectorXd run(const Eigen::VectorXd& theta) const;

    ExternalModelConfig config_;
    mutable std::atomic<std::size_t> launches_{0};
    mutable std::atomic<std::size_t> serial_{0};
    mutable std::counting_semaphore<> slots_;
    mutable std::mutex memo_mutex_;
    mutable std::map<std::vector<std::uint64_t>, Eigen::VectorXd> memo_;
};

/// Writes the parameter file: N_θ on the first line, then one value per line
/// with enough digits to round-trip.
void write_parameter_file(const std::filesystem::path& path, const Eigen::VectorXd& theta);

/// Strict reader for the output file. Throws ModelExecutionError on any
/// deviation from the format or a count other than `expected`.
Eigen::VectorXd read_output_file(const std::filesystem::path& path, std::size_t expected);

}  // namespace sgbayes
