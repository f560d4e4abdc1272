#include "sgbayes/grid_core.hpp"

#include <charconv>
#include <sstream>

namespace sgbayes {

std::vector<Node1D> nodes_of_level(int level) {
    if (level < 0) throw DomainError("negative level");
    std::vector<Node1D> nodes;
    const auto count = node_count(level);
    nodes.reserve(static_cast<std::size_t>(count));
    for (std::int64_t j = 1; j <= count; ++j)
        nodes.push_back(Node1D{level, j, node_coordinate(level, j)});
    return nodes;
}

MultiIndex::MultiIndex(std::vector<int> levels, std::vector<std::int32_t> indices)
    : level(std::move(levels)), index(std::move(indices)) {
    if (level.size() != index.size())
        throw DomainError("multi-index level and position vectors differ in length");
}

MultiIndex MultiIndex::root(std::size_t dim) {
    return MultiIndex(std::vector<int>(dim, 0), std::vector<std::int32_t>(dim, 1));
}

int MultiIndex::total_level() const noexcept {
    int total = 0;
    for (int l : level) total += l;
    return total;
}

bool MultiIndex::is_valid() const noexcept {
    if (level.size() != index.size()) return false;
    for (std::size_t n = 0; n < level.size(); ++n) {
        if (level[n] < 0 || index[n] < 1 || index[n] > node_count(level[n])) return false;
    }
    return true;
}

std::string MultiIndex::key() const {
    std::string out;
    out.reserve(level.size() * 6);
    for (std::size_t n = 0; n < level.size(); ++n) {
        if (n) out += '.';
        out += std::to_string(level[n]);
    }
    out += ':';
    for (std::size_t n = 0; n < index.size(); ++n) {
        if (n) out += '.';
        out += std::to_string(index[n]);
    }
    return out;
}

namespace {

template <typename Int>
std::vector<Int> parse_dotted(std::string_view text, const std::string& whole) {
    std::vector<Int> values;
    while (true) {
        const auto dot = text.find('.');
        const auto token = text.substr(0, dot);
        Int v{};
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty())
            throw DomainError("malformed multi-index key '" + whole + "'");
        values.push_back(v);
        if (dot == std::string_view::npos) break;
        text.remove_prefix(dot + 1);
    }
    return values;
}

}  // namespace

MultiIndex MultiIndex::from_key(const std::string& key) {
    const auto colon = key.find(':');
    if (colon == std::string::npos) throw DomainError("malformed multi-index key '" + key + "'");
    std::string_view view(key);
    MultiIndex p(parse_dotted<int>(view.substr(0, colon), key),
                 parse_dotted<std::int32_t>(view.substr(colon + 1), key));
    if (!p.is_valid()) throw DomainError("invalid multi-index '" + key + "'");
    return p;
}

std::size_t MultiIndexHash::operator()(const MultiIndex& p) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    for (std::size_t n = 0; n < p.level.size(); ++n) {
        mix(static_cast<std::uint64_t>(p.level[n]));
        mix(static_cast<std::uint64_t>(p.index[n]));
    }
    return h;
}

std::vector<MultiIndex> children(const MultiIndex& p, std::size_t dim) {
    if (dim >= p.dim()) throw DomainError("child dimension out of range");
    std::vector<MultiIndex> out;
    const int child_level = p.level[dim] + 1;
    for (std::int32_t child_index : {2 * p.index[dim] - 1, 2 * p.index[dim]}) {
        if (child_index > node_count(child_level)) continue;
        MultiIndex c = p;
        c.level[dim] = child_level;
        c.index[dim] = child_index;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<MultiIndex> all_children(const MultiIndex& p) {
    std::vector<MultiIndex> out;
    out.reserve(2 * p.dim());
    for (std::size_t n = 0; n < p.dim(); ++n) {
        auto c = children(p, n);
        out.insert(out.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
    }
    return out;
}

Box::Box(Eigen::VectorXd lower, Eigen::VectorXd upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size())
        throw ConfigurationError("box bounds must be non-empty and of equal length");
    for (Eigen::Index n = 0; n < lower_.size(); ++n) {
        if (!std::isfinite(lower_[n]) || !std::isfinite(upper_[n]) || !(lower_[n] < upper_[n])) {
            std::ostringstream msg;
            msg << "degenerate box in dimension " << n + 1 << ": [" << lower_[n] << ", "
                << upper_[n] << "]";
            throw ConfigurationError(msg.str());
        }
    }
}

Box Box::unit(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return Box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d));
}

Eigen::VectorXd unit_coordinates(const MultiIndex& p) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(p.dim()));
    for (std::size_t n = 0; n < p.dim(); ++n)
        x[static_cast<Eigen::Index>(n)] = node_coordinate(p.level[n], p.index[n]);
    return x;
}

Eigen::VectorXd point_coordinates(const MultiIndex& p, const Box& domain) {
    if (p.dim() != domain.dim()) throw DomainError("multi-index and domain dimensions differ");
    return domain.to_physical(unit_coordinates(p));
}

}  // namespace sgbayes
