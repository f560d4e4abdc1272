#pragma once

#include <cstddef>
#include <optional>
#include <unordered_map>
#include <vector>

#include "sgbayes/grid_core.hpp"

namespace sgbayes {

/// Set of distinct sparse-grid nodes of a fixed dimension, kept in insertion
/// order. Insertion order is the evaluation order, which makes floating-point
/// sums reproducible across copies and reloads.
class SparseGrid {
public:
    SparseGrid() = default;
    explicit SparseGrid(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }

    const std::vector<MultiIndex>& points() const noexcept { return points_; }
    const MultiIndex& operator[](std::size_t k) const { return points_[k]; }

    bool contains(const MultiIndex& p) const { return lookup_.count(p) != 0; }
    std::optional<std::size_t> find(const MultiIndex& p) const;

    /// Adds `p`; returns false if it is already present.
    bool insert(MultiIndex p);

    /// Deepest |i| present, or -1 for an empty grid.
    int max_level() const noexcept { return max_level_; }

    std::size_t count_on_level(int level) const;

private:
    std::size_t dim_ = 0;
    int max_level_ = -1;
    std::vector<MultiIndex> points_;
    std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
};

/// Every multi-index i with |i| <= max_level, in ascending |i|.
std::vector<std::vector<int>> level_vectors(std::size_t dim, int max_level);

/// The full isotropic grid { (i,j) : |i| <= max_level, j in B_i }.
SparseGrid isotropic_grid(std::size_t dim, int max_level);

}  // namespace sgbayes
