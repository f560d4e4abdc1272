#include "sgbayes/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace sgbayes {

const char* to_string(RefinementMode mode) noexcept {
    return mode == RefinementMode::relative ? "relative" : "absolute";
}

RefinementMode refinement_mode_from_string(const std::string& text) {
    if (text == "relative") return RefinementMode::relative;
    if (text == "absolute") return RefinementMode::absolute;
    throw ConfigurationError("unknown refinement mode '" + text + "'");
}

std::size_t SurrogateModel::IndexHash::operator()(const std::vector<std::int32_t>& v) const noexcept {
    std::size_t h = 0x84222325cbf29ce4ULL;
    for (auto x : v) h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

SurrogateModel::SurrogateModel(Box domain, std::size_t output_dim)
    : domain_(std::move(domain)), output_dim_(output_dim), grid_(domain_.dim()),
      surpluses_(0, static_cast<Eigen::Index>(output_dim)),
      values_(0, static_cast<Eigen::Index>(output_dim)) {
    if (output_dim == 0) throw ConfigurationError("surrogate output dimension must be at least 1");
}

SurrogateModel SurrogateModel::from_records(Box domain, std::size_t output_dim,
                                            std::vector<MultiIndex> points, RowMatrix surpluses,
                                            RowMatrix values, SurrogateMetadata metadata) {
    SurrogateModel model(std::move(domain), output_dim);
    const auto rows = static_cast<Eigen::Index>(points.size());
    if (surpluses.rows() != rows || values.rows() != rows ||
        surpluses.cols() != static_cast<Eigen::Index>(output_dim) ||
        values.cols() != static_cast<Eigen::Index>(output_dim))
        throw DomainError("surrogate records have inconsistent shapes");
    for (auto& p : points) {
        if (!model.grid_.insert(std::move(p))) throw DomainError("duplicate node in surrogate records");
    }
    model.surpluses_ = std::move(surpluses);
    model.values_ = std::move(values);
    for (std::size_t k = 0; k < model.grid_.size(); ++k) model.index_point(k);
    model.metadata = std::move(metadata);
    return model;
}

void SurrogateModel::index_point(std::size_t row) {
    const MultiIndex& p = grid_[row];
    std::vector<std::int32_t> level_key(p.level.begin(), p.level.end());
    auto it = block_of_level_.find(level_key);
    if (it == block_of_level_.end()) {
        it = block_of_level_.emplace(level_key, blocks_.size()).first;
        blocks_.push_back(LevelBlock{p.level, {}});
    }
    blocks_[it->second].rows.emplace(p.index, row);
}

void SurrogateModel::append_level(std::span<const MultiIndex> points, const RowMatrix& values) {
    if (values.rows() != static_cast<Eigen::Index>(points.size()) ||
        values.cols() != static_cast<Eigen::Index>(output_dim_))
        throw DomainError("value block shape does not match the appended nodes");
    const int deepest = grid_.max_level();
    for (const auto& p : points) {
        if (p.total_level() <= deepest)
            throw DomainError("appended node " + p.key() + " is not deeper than the current grid");
        if (grid_.contains(p)) throw DomainError("node " + p.key() + " already present");
    }

    RowMatrix surplus(values.rows(), values.cols());
    for (std::size_t k = 0; k < points.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        surplus.row(r) = values.row(r) - eval_unit(unit_coordinates(points[k])).transpose();
    }

    const Eigen::Index old_rows = surpluses_.rows();
    surpluses_.conservativeResize(old_rows + surplus.rows(), Eigen::NoChange);
    values_.conservativeResize(old_rows + values.rows(), Eigen::NoChange);
    surpluses_.bottomRows(surplus.rows()) = surplus;
    values_.bottomRows(values.rows()) = values;
    for (const auto& p : points) {
        if (!grid_.insert(p)) throw DomainError("duplicate node " + p.key() + " in appended block");
        index_point(grid_.size() - 1);
    }
}

Eigen::VectorXd SurrogateModel::eval(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    if (theta.size() != static_cast<Eigen::Index>(input_dim()))
        throw DomainError("evaluation point has wrong dimension");
    if (!domain_.contains(theta)) throw DomainError("evaluation point outside the surrogate domain");
    return eval_unit(domain_.to_unit(theta));
}

Eigen::VectorXd SurrogateModel::eval_unit(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(output_dim_));
    const std::size_t dim = input_dim();
    std::vector<std::int32_t> candidate(dim);
    for (const auto& block : blocks_) {
        double weight = 1.0;
        for (std::size_t n = 0; n < dim && weight != 0.0; ++n) {
            const int l = block.level[n];
            const double xn = x[static_cast<Eigen::Index>(n)];
            std::int32_t j = 1;
            if (l == 1) {
                j = xn < 0.5 ? 1 : 2;
            } else if (l >= 2) {
                const auto cells = static_cast<double>(node_count(l));
                j = static_cast<std::int32_t>(std::floor(xn * cells)) + 1;
                j = std::clamp<std::int32_t>(j, 1, static_cast<std::int32_t>(node_count(l)));
            }
            candidate[n] = j;
            weight *= basis_value(l, j, xn);
        }
        if (weight == 0.0) continue;
        auto it = block.rows.find(candidate);
        if (it == block.rows.end()) continue;
        out.noalias() += weight * surpluses_.row(static_cast<Eigen::Index>(it->second)).transpose();
    }
    return out;
}

Eigen::VectorXd SurrogateModel::output_scale() const {
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(output_dim_));
    if (values_.rows() == 0) return scale;
    scale = values_.cwiseAbs().colwise().maxCoeff().transpose();
    for (Eigen::Index k = 0; k < scale.size(); ++k)
        if (scale[k] < 1e-14) scale[k] = 1.0;
    return scale;
}

double SurrogateModel::surplus_magnitude(std::size_t k, RefinementMode mode,
                                         const Eigen::VectorXd& scale) const {
    const auto row = surpluses_.row(static_cast<Eigen::Index>(k)).transpose();
    if (mode == RefinementMode::absolute) return row.cwiseAbs().maxCoeff();
    return (row.cwiseAbs().array() / scale.array()).maxCoeff();
}

double SurrogateModel::surplus_magnitude(std::size_t k, RefinementMode mode) const {
    return surplus_magnitude(k, mode, output_scale());
}

double SurrogateModel::max_surplus_on_level(int level, RefinementMode mode) const {
    const Eigen::VectorXd scale = output_scale();
    double best = 0.0;
    for (std::size_t k = 0; k < grid_.size(); ++k)
        if (grid_[k].total_level() == level) best = std::max(best, surplus_magnitude(k, mode, scale));
    return best;
}

SurrogateModel compute_surpluses(const SparseGrid& grid, const PointValues& values,
                                 const Box& domain) {
    if (grid.dim() != domain.dim()) throw DomainError("grid and domain dimensions differ");
    if (grid.empty()) throw IncompleteDataError("cannot build a surrogate from an empty grid");

    std::map<int, std::vector<MultiIndex>> by_level;
    for (const auto& p : grid.points()) by_level[p.total_level()].push_back(p);

    std::size_t output_dim = 0;
    for (const auto& p : grid.points()) {
        auto it = values.find(p);
        if (it == values.end()) throw IncompleteDataError("no model value for node " + p.key());
        if (output_dim == 0) output_dim = static_cast<std::size_t>(it->second.size());
        if (static_cast<std::size_t>(it->second.size()) != output_dim)
            throw IncompleteDataError("inconsistent output length at node " + p.key());
    }

    SurrogateModel model(domain, output_dim);
    for (const auto& [level, points] : by_level) {
        RowMatrix block(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(output_dim));
        for (std::size_t k = 0; k < points.size(); ++k)
            block.row(static_cast<Eigen::Index>(k)) = values.at(points[k]).transpose();
        model.append_level(points, block);
    }
    model.metadata.level_reached = grid.max_level();
    return model;
}

std::vector<MultiIndex> refine(const SurrogateModel& model, double alpha, RefinementMode mode) {
    if (!(alpha >= 0.0)) throw ConfigurationError("refinement tolerance must be non-negative");
    const SparseGrid& grid = model.grid();
    const int deepest = grid.max_level();
    const Eigen::VectorXd scale = model.output_scale();
    std::set<MultiIndex> fresh;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k].total_level() != deepest) continue;
        if (!(model.surplus_magnitude(k, mode, scale) > alpha)) continue;
        for (auto& child : all_children(grid[k]))
            if (!grid.contains(child)) fresh.insert(std::move(child));
    }
    return {fresh.begin(), fresh.end()};
}

}  // namespace sgbayes
