#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgbayes/error.hpp"

namespace sgbayes {

// ---------------------------------------------------------------------------
// One-dimensional hierarchical point sets
// ---------------------------------------------------------------------------

/// Number of nodes added by level `level`: 1, 2, then 2^(level-1).
constexpr std::int64_t node_count(int level) noexcept {
    if (level <= 0) return 1;
    if (level == 1) return 2;
    return std::int64_t{1} << (level - 1);
}

/// Total number of distinct nodes in the nested grid of levels 0..level.
constexpr std::int64_t cumulative_node_count(int level) noexcept {
    std::int64_t total = 0;
    for (int k = 0; k <= level; ++k) total += node_count(k);
    return total;
}

/// Coordinate in [0,1] of node `index` (1-based) on `level`. All values are
/// dyadic rationals, so they are exact in binary floating point.
template <typename Scalar = double>
Scalar node_coordinate(int level, std::int64_t index) {
    if (level < 0 || index < 1 || index > node_count(level))
        throw DomainError("node (" + std::to_string(level) + "," + std::to_string(index) +
                          ") does not exist");
    if (level == 0) return Scalar(0.5);
    if (level == 1) return index == 1 ? Scalar(0) : Scalar(1);
    return Scalar(2 * index - 1) / Scalar(cumulative_node_count(level) - 1);
}

struct Node1D {
    int level = 0;
    std::int64_t index = 1;
    double x = 0.5;

    friend bool operator==(const Node1D&, const Node1D&) = default;
};

/// The m(level) nodes of one level, ascending in index.
std::vector<Node1D> nodes_of_level(int level);

/// Piecewise-linear hierarchical hat without range checking. Level 0 is the
/// constant 1; level 1 has one-sided hats on [0,1/2] and [1/2,1]; deeper
/// levels have half-width 2^-level.
template <typename Scalar>
Scalar basis_value(int level, std::int64_t index, Scalar x) noexcept {
    using std::abs;
    if (level == 0) return Scalar(1);
    if (level == 1) {
        if (index == 1) return x <= Scalar(0.5) ? Scalar(1) - Scalar(2) * x : Scalar(0);
        return x >= Scalar(0.5) ? Scalar(2) * x - Scalar(1) : Scalar(0);
    }
    const Scalar inv_half_width = Scalar(std::int64_t{1} << level);
    const Scalar center = Scalar(2 * index - 1) / inv_half_width;
    const Scalar v = Scalar(1) - abs(x - center) * inv_half_width;
    return v > Scalar(0) ? v : Scalar(0);
}

template <typename Scalar>
Scalar basis_eval(int level, std::int64_t index, Scalar x) {
    if (!(x >= Scalar(0) && x <= Scalar(1)))
        throw DomainError("basis argument outside [0,1]");
    if (level < 0 || index < 1 || index > node_count(level))
        throw DomainError("invalid basis node");
    return basis_value(level, index, x);
}

template <typename Scalar>
Scalar basis_eval(const Node1D& node, Scalar x) {
    return basis_eval(node.level, node.index, x);
}

// ---------------------------------------------------------------------------
// Multi-indices
// ---------------------------------------------------------------------------

/// Identity of a sparse-grid node: a level and a 1-based position per
/// dimension. Node identity is always this integer pair, never coordinates.
struct MultiIndex {
    std::vector<int> level;
    std::vector<std::int32_t> index;

    MultiIndex() = default;
    MultiIndex(std::vector<int> levels, std::vector<std::int32_t> indices);

    /// The root node (level 0 in every dimension).
    static MultiIndex root(std::size_t dim);

    std::size_t dim() const noexcept { return level.size(); }
    int total_level() const noexcept;
    bool is_valid() const noexcept;

    /// Canonical text key, e.g. "2.1.0:3.1.1".
    std::string key() const;
    static MultiIndex from_key(const std::string& key);

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend auto operator<=>(const MultiIndex& a, const MultiIndex& b) {
        if (auto c = a.total_level() <=> b.total_level(); c != 0) return c;
        if (auto c = a.level <=> b.level; c != 0) return c;
        return a.index <=> b.index;
    }
};

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& p) const noexcept;
};

/// Children of `p` along dimension `dim` (0-based): level incremented and
/// position mapped to (2j-1, 2j). Indices outside the target level's range
/// (which the formula produces for the right end point of level 1) are
/// dropped, so the result holds zero, one or two nodes.
std::vector<MultiIndex> children(const MultiIndex& p, std::size_t dim);

/// All children of `p` across every dimension.
std::vector<MultiIndex> all_children(const MultiIndex& p);

// ---------------------------------------------------------------------------
// Rectangular domains
// ---------------------------------------------------------------------------

/// Axis-aligned box Π [lower_n, upper_n] with lower_n < upper_n.
class Box {
public:
    Box() = default;
    Box(Eigen::VectorXd lower, Eigen::VectorXd upper);

    static Box unit(std::size_t dim);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(lower_.size()); }
    const Eigen::VectorXd& lower() const noexcept { return lower_; }
    const Eigen::VectorXd& upper() const noexcept { return upper_; }
    Eigen::VectorXd width() const { return upper_ - lower_; }
    Eigen::VectorXd center() const { return 0.5 * (lower_ + upper_); }

    template <typename Derived>
    bool contains(const Eigen::MatrixBase<Derived>& theta) const {
        return theta.size() == lower_.size() && (theta.array() >= lower_.array()).all() &&
               (theta.array() <= upper_.array()).all();
    }

    /// Affine map from the unit cube; 0 and 1 land exactly on the bounds.
    template <typename Derived>
    Eigen::VectorXd to_physical(const Eigen::MatrixBase<Derived>& unit) const {
        Eigen::VectorXd theta = lower_.array() + unit.array() * (upper_ - lower_).array();
        for (Eigen::Index n = 0; n < theta.size(); ++n) {
            if (unit[n] == 0.0) theta[n] = lower_[n];
            if (unit[n] == 1.0) theta[n] = upper_[n];
        }
        return theta;
    }

    /// Inverse affine map; end points map exactly onto 0 and 1.
    template <typename Derived>
    Eigen::VectorXd to_unit(const Eigen::MatrixBase<Derived>& theta) const {
        Eigen::VectorXd u = ((theta - lower_).array() / (upper_ - lower_).array()).matrix();
        for (Eigen::Index n = 0; n < u.size(); ++n) {
            if (theta[n] == lower_[n]) u[n] = 0.0;
            if (theta[n] == upper_[n]) u[n] = 1.0;
        }
        return u;
    }

    friend bool operator==(const Box& a, const Box& b) {
        return a.lower_.size() == b.lower_.size() && a.lower_ == b.lower_ && a.upper_ == b.upper_;
    }

private:
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
};

/// Coordinates of `p` in the unit cube.
Eigen::VectorXd unit_coordinates(const MultiIndex& p);

/// Coordinates of `p` mapped affinely into `domain`.
Eigen::VectorXd point_coordinates(const MultiIndex& p, const Box& domain);

}  // namespace sgbayes
