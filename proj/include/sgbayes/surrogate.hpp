#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sgbayes/grid_core.hpp"
#include "sgbayes/sparse_grid.hpp"

namespace sgbayes {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PointValues = std::unordered_map<MultiIndex, Eigen::VectorXd, MultiIndexHash>;

/// How surplus magnitudes are compared with the refinement tolerance.
///  - relative: max_k |c_k| / scale_k, scale_k = max over the grid of |value_k|
///    (1 when that maximum is below 1e-14)
///  - absolute: max_k |c_k|
enum class RefinementMode { relative, absolute };

const char* to_string(RefinementMode mode) noexcept;
RefinementMode refinement_mode_from_string(const std::string& text);

/// Build provenance carried alongside a surrogate.
struct SurrogateMetadata {
    std::string model_id;
    double alpha = 1e-3;
    RefinementMode mode = RefinementMode::relative;
    int start_level = 0;
    int level_reached = 0;
};

/// Adaptive hierarchical sparse-grid interpolant of a vector-valued map on
/// a box. Holds one surplus vector and one recorded model output per node.
/// A finished model is immutable in practice; `eval` is const and safe to
/// call concurrently.
class SurrogateModel {
public:
    SurrogateModel() = default;
    SurrogateModel(Box domain, std::size_t output_dim);

    /// Rebuilds a model from stored records without recomputing anything.
    static SurrogateModel from_records(Box domain, std::size_t output_dim,
                                       std::vector<MultiIndex> points, RowMatrix surpluses,
                                       RowMatrix values, SurrogateMetadata metadata);

    const Box& domain() const noexcept { return domain_; }
    std::size_t input_dim() const noexcept { return domain_.dim(); }
    std::size_t output_dim() const noexcept { return output_dim_; }
    std::size_t size() const noexcept { return grid_.size(); }
    const SparseGrid& grid() const noexcept { return grid_; }
    const RowMatrix& surpluses() const noexcept { return surpluses_; }
    const RowMatrix& values() const noexcept { return values_; }

    SurrogateMetadata metadata;

    /// Adds nodes strictly deeper than every stored node. Their surpluses are
    /// the recorded values minus the current interpolant at each node, so all
    /// of them see only coarser levels.
    void append_level(std::span<const MultiIndex> points, const RowMatrix& values);

    /// Interpolant at a physical point. Throws DomainError outside the box.
    Eigen::VectorXd eval(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

    /// Interpolant at a point of the unit cube (no range check).
    Eigen::VectorXd eval_unit(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Per-output normalization used by relative refinement.
    Eigen::VectorXd output_scale() const;

    /// Surplus magnitude of node `k` under `mode`.
    double surplus_magnitude(std::size_t k, RefinementMode mode) const;
    double surplus_magnitude(std::size_t k, RefinementMode mode, const Eigen::VectorXd& scale) const;

    /// Largest surplus magnitude among nodes with |i| == level (0 if none).
    double max_surplus_on_level(int level, RefinementMode mode) const;

private:
    void index_point(std::size_t row);

    Box domain_;
    std::size_t output_dim_ = 0;
    SparseGrid grid_;
    RowMatrix surpluses_;
    RowMatrix values_;

    // Evaluation index: distinct level vectors in first-appearance order and,
    // per level vector, the rows of its nodes keyed by position vector. On a
    // fixed level vector at most one node has a non-zero basis product at
    // any point, so evaluation is one lookup per level vector.
    struct IndexHash {
        std::size_t operator()(const std::vector<std::int32_t>& v) const noexcept;
    };
    struct LevelBlock {
        std::vector<int> level;
        std::unordered_map<std::vector<std::int32_t>, std::size_t, IndexHash> rows;
    };
    std::vector<LevelBlock> blocks_;
    std::unordered_map<std::vector<std::int32_t>, std::size_t, IndexHash> block_of_level_;
};

/// Hierarchical surpluses for every node of `grid`, processing levels in
/// ascending |i|. Throws IncompleteDataError if any node lacks a value.
SurrogateModel compute_surpluses(const SparseGrid& grid, const PointValues& values,
                                 const Box& domain);

/// Children (deduplicated, not yet in the grid) of every deepest-level node
/// whose surplus magnitude exceeds `alpha`. Empty when refinement is done.
std::vector<MultiIndex> refine(const SurrogateModel& model, double alpha,
                               RefinementMode mode = RefinementMode::relative);

}  // namespace sgbayes
