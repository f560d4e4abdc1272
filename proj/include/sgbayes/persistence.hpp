#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sgbayes/mcmc.hpp"
#include "sgbayes/surrogate.hpp"

namespace sgbayes {

inline constexpr std::string_view surrogate_format = "sgbayes-surrogate-v1";
inline constexpr std::string_view cache_format = "sgbayes-cache-v1";

/// Writes `content` to a temporary file next to `path`, syncs it and renames
/// it into place, so readers see either the old or the new file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// CRC-32 as eight lowercase hex digits.
std::string checksum(std::string_view bytes);

/// Shortest exact hex-float spelling, e.g. 0x1.8p+1.
std::string hex_double(double v);
double parse_double(std::string_view token);

std::string serialize_surrogate(const SurrogateModel& s);
SurrogateModel deserialize_surrogate(std::string_view text, std::vector<std::string>* warnings = nullptr);

void store_surrogate(const SurrogateModel& s, const std::filesystem::path& path);

/// Throws LoadError on a missing file, unknown version, truncation or a
/// checksum mismatch. Warnings (such as an empty point list) go to
/// `warnings` when given, otherwise to stderr.
SurrogateModel load_surrogate(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Persistent model outputs keyed by model id and grid-point identity. One
/// file per entry, each written atomically, so concurrent readers and
/// writers (threads or processes) never observe a torn record.
class EvaluationCache {
public:
    explicit EvaluationCache(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Stored output, or nullopt on a miss. A record that exists but cannot
    /// be read, or that was stored for a different θ, raises CacheError.
    std::optional<Eigen::VectorXd> get(const std::string& model_id, const MultiIndex& point,
                                       const Eigen::VectorXd& theta) const;

    void put(const std::string& model_id, const MultiIndex& point, const Eigen::VectorXd& theta,
             const Eigen::VectorXd& value) const;

    std::size_t count(const std::string& model_id) const;

    std::filesystem::path entry_path(const std::string& model_id, const MultiIndex& point) const;

private:
    std::filesystem::path root_;
};

/// `iter,theta_1..theta_N,log_post,stage`, one row per iteration.
void write_chain_csv(const std::filesystem::path& path, const Chain& chain);
Chain read_chain_csv(const std::filesystem::path& path);

/// `bin_left,bin_right,density`
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);

/// `x_left,x_right,y_left,y_right,density`
void write_joint_histogram_csv(const std::filesystem::path& path, const JointHistogram& h);

}  // namespace sgbayes
