#include "sgbayes/sparse_grid.hpp"

#include <algorithm>

namespace sgbayes {

std::optional<std::size_t> SparseGrid::find(const MultiIndex& p) const {
    auto it = lookup_.find(p);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

bool SparseGrid::insert(MultiIndex p) {
    if (p.dim() != dim_) throw DomainError("multi-index dimension does not match grid");
    if (!p.is_valid()) throw DomainError("invalid multi-index " + p.key());
    if (lookup_.count(p)) return false;
    max_level_ = std::max(max_level_, p.total_level());
    lookup_.emplace(p, points_.size());
    points_.push_back(std::move(p));
    return true;
}

std::size_t SparseGrid::count_on_level(int level) const {
    return static_cast<std::size_t>(std::count_if(points_.begin(), points_.end(), [level](const auto& p) {
        return p.total_level() == level;
    }));
}

namespace {

// Compositions of `total` into `dim` non-negative parts, lexicographic.
void compositions(std::size_t dim, int total, std::vector<int>& prefix,
                  std::vector<std::vector<int>>& out) {
    if (prefix.size() + 1 == dim) {
        prefix.push_back(total);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int first = total; first >= 0; --first) {
        prefix.push_back(first);
        compositions(dim, total - first, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace

std::vector<std::vector<int>> level_vectors(std::size_t dim, int max_level) {
    if (dim == 0) throw DomainError("grid dimension must be at least 1");
    std::vector<std::vector<int>> out;
    std::vector<int> prefix;
    for (int total = 0; total <= max_level; ++total) compositions(dim, total, prefix, out);
    return out;
}

SparseGrid isotropic_grid(std::size_t dim, int max_level) {
    if (max_level < 0) throw DomainError("negative sparse-grid level");
    SparseGrid grid(dim);
    for (const auto& levels : level_vectors(dim, max_level)) {
        // Odometer over the index box B_i.
        std::vector<std::int32_t> idx(dim, 1);
        while (true) {
            grid.insert(MultiIndex(levels, idx));
            std::size_t n = dim;
            while (n > 0) {
                --n;
                if (idx[n] < node_count(levels[n])) {
                    ++idx[n];
                    break;
                }
                idx[n] = 1;
                if (n == 0) {
                    n = dim + 1;  // wrapped completely
                    break;
                }
            }
            if (n == dim + 1) break;
        }
    }
    return grid;
}

}  // namespace sgbayes
