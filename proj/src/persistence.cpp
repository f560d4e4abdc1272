#include "sgbayes/persistence.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

namespace sgbayes {

namespace fs = std::filesystem;

namespace {

std::atomic<std::uint64_t> temp_serial{0};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return std::move(buf).str();
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    while (true) {
        const auto at = text.find(sep);
        out.push_back(text.substr(0, at));
        if (at == std::string_view::npos) return out;
        text.remove_prefix(at + 1);
    }
}

std::vector<std::string_view> words(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t k = 0;
    while (k < line.size()) {
        while (k < line.size() && line[k] == ' ') ++k;
        const auto start = k;
        while (k < line.size() && line[k] != ' ') ++k;
        if (k > start) out.push_back(line.substr(start, k - start));
    }
    return out;
}

std::string decimal(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_decimal(std::string_view token) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
        throw LoadError("not a number: '" + std::string(token) + "'");
    return v;
}

// Splits `text` into body and trailing checksum line and verifies it.
std::string_view verified_body(std::string_view text, const std::string& what) {
    if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
    const auto nl = text.rfind('\n');
    if (nl == std::string_view::npos) throw LoadError(what + ": truncated (no checksum line)");
    const auto last = text.substr(nl + 1);
    if (last.substr(0, 9) != "checksum ") throw LoadError(what + ": truncated (no checksum line)");
    const auto body = text.substr(0, nl + 1);
    if (checksum(body) != last.substr(9)) throw LoadError(what + ": checksum mismatch");
    return body;
}

void append_hex_row(std::string& out, const auto& row) {
    for (Eigen::Index k = 0; k < row.size(); ++k) {
        out += ' ';
        out += hex_double(row[k]);
    }
}

class LineReader {
public:
    LineReader(std::string_view body, std::string what) : lines_(split(body, '\n')), what_(std::move(what)) {
        if (!lines_.empty() && lines_.back().empty()) lines_.pop_back();
    }

    std::string_view next() {
        if (at_ >= lines_.size()) throw LoadError(what_ + ": truncated");
        return lines_[at_++];
    }

    /// Next line, which must start with `tag`; returns the remaining words.
    std::vector<std::string_view> tagged(std::string_view tag) {
        auto w = words(next());
        if (w.empty() || w.front() != tag) throw LoadError(what_ + ": expected '" + std::string(tag) + "'");
        w.erase(w.begin());
        return w;
    }

    std::string_view single(std::string_view tag) {
        const auto w = tagged(tag);
        if (w.size() != 1) throw LoadError(what_ + ": malformed '" + std::string(tag) + "' line");
        return w.front();
    }

    bool done() const { return at_ == lines_.size(); }
    const std::string& what() const { return what_; }

private:
    std::vector<std::string_view> lines_;
    std::size_t at_ = 0;
    std::string what_;
};

template <typename Int>
Int parse_int(std::string_view token, const std::string& what) {
    Int v{};
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
        throw LoadError(what + ": bad integer '" + std::string(token) + "'");
    return v;
}

Eigen::VectorXd parse_hex_words(std::span<const std::string_view> w, std::size_t n, const std::string& what) {
    if (w.size() != n) throw LoadError(what + ": expected " + std::to_string(n) + " values");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) v[static_cast<Eigen::Index>(k)] = parse_double(w[k]);
    return v;
}

std::string sanitize(const std::string& id) {
    std::string out = id;
    for (char& c : out)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    if (out.empty() || out == "." || out == "..") throw CacheError("invalid model id '" + id + "' for the cache");
    return out;
}

}  // namespace

void atomic_write(const fs::path& path, std::string_view content) {
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    const fs::path tmp = dir / ("." + path.filename().string() + ".tmp-" + std::to_string(::getpid()) + "-" +
                                std::to_string(temp_serial++));
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot create " + tmp.string() + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < content.size()) {
        const ssize_t n = ::write(fd, content.data() + written, content.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            ::unlink(tmp.c_str());
            throw IoError("cannot write " + tmp.string() + ": " + std::strerror(err));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        ::unlink(tmp.c_str());
        throw IoError("cannot flush " + tmp.string());
    }
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        const int err = errno;
        ::unlink(tmp.c_str());
        throw IoError("cannot rename into " + path.string() + ": " + std::strerror(err));
    }
}

std::string checksum(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in bounded chunks.
    while (!bytes.empty()) {
        const auto n = std::min<std::size_t>(bytes.size(), 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n));
        bytes.remove_prefix(n);
    }
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

std::string hex_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double(std::string_view token) {
    if (token == "inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    std::string_view t = token;
    const bool negative = !t.empty() && t.front() == '-';
    if (negative) t.remove_prefix(1);
    if (t.size() < 3 || t[0] != '0' || (t[1] != 'x' && t[1] != 'X'))
        throw LoadError("not a hex float: '" + std::string(token) + "'");
    t.remove_prefix(2);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v, std::chars_format::hex);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        throw LoadError("not a hex float: '" + std::string(token) + "'");
    return negative ? -v : v;
}

std::string serialize_surrogate(const SurrogateModel& s) {
    const auto& meta = s.metadata;
    std::string out;
    out.reserve(64 + s.size() * (32 + 50 * s.output_dim()));
    out += surrogate_format;
    out += "\nmodel_id " + meta.model_id;
    out += "\ninput_dim " + std::to_string(s.input_dim());
    out += "\noutput_dim " + std::to_string(s.output_dim());
    out += "\nlower";
    append_hex_row(out, s.domain().lower());
    out += "\nupper";
    append_hex_row(out, s.domain().upper());
    out += "\nalpha " + hex_double(meta.alpha);
    out += "\nmode " + std::string(to_string(meta.mode));
    out += "\nstart_level " + std::to_string(meta.start_level);
    out += "\nlevel_reached " + std::to_string(meta.level_reached);
    out += "\npoints " + std::to_string(s.size()) + "\n";
    for (std::size_t k = 0; k < s.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        out += "point " + s.grid()[k].key() + " s";
        append_hex_row(out, s.surpluses().row(row));
        out += " v";
        append_hex_row(out, s.values().row(row));
        out += '\n';
    }
    out += "checksum " + checksum(out) + "\n";
    return out;
}

SurrogateModel deserialize_surrogate(std::string_view text, std::vector<std::string>* warnings) {
    const std::string what = "surrogate file";
    const auto first = text.substr(0, text.find('\n'));
    if (first != surrogate_format)
        throw LoadError(what + ": unsupported format '" + std::string(first.substr(0, 64)) + "', expected '" +
                        std::string(surrogate_format) + "'");
    LineReader in(verified_body(text, what), what);
    in.next();

    SurrogateMetadata meta;
    {
        const auto line = in.next();
        if (line.substr(0, 9) != "model_id ") throw LoadError(what + ": expected 'model_id'");
        meta.model_id = std::string(line.substr(9));
    }
    const auto nt = parse_int<std::size_t>(in.single("input_dim"), what);
    const auto nd = parse_int<std::size_t>(in.single("output_dim"), what);
    if (nt == 0 || nd == 0) throw LoadError(what + ": dimensions must be positive");
    const auto lower = parse_hex_words(in.tagged("lower"), nt, what);
    const auto upper = parse_hex_words(in.tagged("upper"), nt, what);
    meta.alpha = parse_double(in.single("alpha"));
    try {
        meta.mode = refinement_mode_from_string(std::string(in.single("mode")));
    } catch (const ConfigurationError& e) {
        throw LoadError(what + ": " + e.what());
    }
    meta.start_level = parse_int<int>(in.single("start_level"), what);
    meta.level_reached = parse_int<int>(in.single("level_reached"), what);
    const auto count = parse_int<std::size_t>(in.single("points"), what);

    std::vector<MultiIndex> points;
    points.reserve(count);
    RowMatrix surpluses(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(nd));
    RowMatrix values(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(nd));
    for (std::size_t k = 0; k < count; ++k) {
        const auto w = in.tagged("point");
        if (w.size() != 2 * nd + 3 || w[1] != "s" || w[nd + 2] != "v")
            throw LoadError(what + ": malformed point record " + std::to_string(k + 1));
        try {
            points.push_back(MultiIndex::from_key(std::string(w[0])));
        } catch (const DomainError& e) {
            throw LoadError(what + ": " + e.what());
        }
        if (points.back().dim() != nt) throw LoadError(what + ": point dimension mismatch");
        const std::span<const std::string_view> all(w);
        surpluses.row(static_cast<Eigen::Index>(k)) = parse_hex_words(all.subspan(2, nd), nd, what).transpose();
        values.row(static_cast<Eigen::Index>(k)) = parse_hex_words(all.subspan(nd + 3, nd), nd, what).transpose();
    }
    if (!in.done()) throw LoadError(what + ": trailing content after point records");

    try {
        auto model = SurrogateModel::from_records(Box(lower, upper), nd, std::move(points), std::move(surpluses),
                                                  std::move(values), std::move(meta));
        if (model.size() == 0) {
            const std::string msg = "surrogate has no points and evaluates to zero everywhere";
            if (warnings)
                warnings->push_back(msg);
            else
                std::cerr << "warning: " << msg << '\n';
        }
        return model;
    } catch (const LoadError&) {
        throw;
    } catch (const Error& e) {
        throw LoadError(what + ": " + e.what());
    }
}

void store_surrogate(const SurrogateModel& s, const fs::path& path) { atomic_write(path, serialize_surrogate(s)); }

SurrogateModel load_surrogate(const fs::path& path, std::vector<std::string>* warnings) {
    if (!fs::exists(path)) throw NotFoundError("surrogate file not found: " + path.string());
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw LoadError(e.what());
    }
    return deserialize_surrogate(text, warnings);
}

EvaluationCache::EvaluationCache(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw CacheError("cannot create cache directory " + root_.string() + ": " + ec.message());
}

fs::path EvaluationCache::entry_path(const std::string& model_id, const MultiIndex& point) const {
    return root_ / sanitize(model_id) / (point.key() + ".txt");
}

std::optional<Eigen::VectorXd> EvaluationCache::get(const std::string& model_id, const MultiIndex& point,
                                                    const Eigen::VectorXd& theta) const {
    const fs::path path = entry_path(model_id, point);
    std::error_code ec;
    if (!fs::exists(path, ec)) {
        if (ec) throw CacheError("cannot access " + path.string() + ": " + ec.message());
        return std::nullopt;
    }
    try {
        const std::string text = read_file(path);
        if (text.substr(0, text.find('\n')) != cache_format) throw LoadError("unsupported cache record format");
        LineReader in(verified_body(text, "cache record"), "cache record");
        in.next();
        const auto t = in.tagged("theta");
        const auto v = in.tagged("value");
        if (!in.done()) throw LoadError("trailing content");
        const auto stored = parse_hex_words(t, t.size(), in.what());
        if (stored.size() != theta.size() || stored != theta)
            throw CacheError("cache record " + path.string() + " was stored for a different parameter point");
        return parse_hex_words(v, v.size(), in.what());
    } catch (const CacheError&) {
        throw;
    } catch (const Error& e) {
        throw CacheError("unreadable cache record " + path.string() + ": " + e.what());
    }
}

void EvaluationCache::put(const std::string& model_id, const MultiIndex& point, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& value) const {
    const fs::path path = entry_path(model_id, point);
    std::string body(cache_format);
    body += "\ntheta";
    append_hex_row(body, theta);
    body += "\nvalue";
    append_hex_row(body, value);
    body += '\n';
    body += "checksum " + checksum(body) + "\n";
    try {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(ec.message());
        atomic_write(path, body);
    } catch (const IoError& e) {
        throw CacheError("cannot store cache record " + path.string() + ": " + e.what());
    }
}

std::size_t EvaluationCache::count(const std::string& model_id) const {
    const fs::path dir = root_ / sanitize(model_id);
    std::error_code ec;
    if (!fs::exists(dir, ec)) return 0;
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const auto name = entry.path().filename().string();
        n += !name.starts_with(".") && entry.path().extension() == ".txt";
    }
    if (ec) throw CacheError("cannot list " + dir.string() + ": " + ec.message());
    return n;
}

void write_chain_csv(const fs::path& path, const Chain& chain) {
    std::string out = "iter";
    for (std::size_t n = 1; n <= chain.dim(); ++n) out += ",theta_" + std::to_string(n);
    out += ",log_post,stage\n";
    for (std::size_t t = 0; t < chain.size(); ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        out += std::to_string(t + 1);
        for (Eigen::Index n = 0; n < chain.draws.cols(); ++n) out += "," + decimal(chain.draws(row, n));
        out += "," + decimal(chain.log_post[row]) + "," + to_string(chain.stages[t]) + "\n";
    }
    atomic_write(path, out);
}

Chain read_chain_csv(const fs::path& path) {
    if (!fs::exists(path)) throw NotFoundError("chain file not found: " + path.string());
    const std::string text = read_file(path);
    auto lines = split(text, '\n');
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw LoadError(path.string() + ": empty chain file");

    const auto header = split(lines[0], ',');
    if (header.size() < 4 || header.front() != "iter" || header[header.size() - 2] != "log_post" ||
        header.back() != "stage")
        throw LoadError(path.string() + ": expected header iter,theta_1..theta_N,log_post,stage");
    const std::size_t d = header.size() - 3;
    for (std::size_t n = 0; n < d; ++n)
        if (header[n + 1] != "theta_" + std::to_string(n + 1)) throw LoadError(path.string() + ": bad header");

    Chain chain;
    const auto rows = static_cast<Eigen::Index>(lines.size() - 1);
    chain.draws.resize(rows, static_cast<Eigen::Index>(d));
    chain.log_post.resize(rows);
    chain.stages.reserve(lines.size() - 1);
    for (std::size_t t = 1; t < lines.size(); ++t) {
        const auto cells = split(lines[t], ',');
        const std::string where = path.string() + ": row " + std::to_string(t);
        if (cells.size() != d + 3) throw LoadError(where + " has the wrong number of columns");
        if (parse_int<std::size_t>(cells[0], where) != t) throw LoadError(where + " is out of order");
        const auto row = static_cast<Eigen::Index>(t - 1);
        try {
            for (std::size_t n = 0; n < d; ++n) chain.draws(row, static_cast<Eigen::Index>(n)) = parse_decimal(cells[n + 1]);
            chain.log_post[row] = parse_decimal(cells[d + 1]);
        } catch (const LoadError& e) {
            throw LoadError(where + ": " + e.what());
        }
        chain.stages.push_back(stage_from_string(std::string(cells[d + 2])));
    }
    return chain;
}

void write_histogram_csv(const fs::path& path, const Histogram& h) {
    std::string out = "bin_left,bin_right,density\n";
    for (std::size_t b = 0; b < h.bins(); ++b)
        out += decimal(h.left(b)) + "," + decimal(h.right(b)) + "," + decimal(h.density[static_cast<Eigen::Index>(b)]) + "\n";
    atomic_write(path, out);
}

void write_joint_histogram_csv(const fs::path& path, const JointHistogram& h) {
    const auto bx = h.density.rows(), by = h.density.cols();
    const double wx = (h.hi_x - h.lo_x) / static_cast<double>(bx);
    const double wy = (h.hi_y - h.lo_y) / static_cast<double>(by);
    std::string out = "x_left,x_right,y_left,y_right,density\n";
    for (Eigen::Index i = 0; i < bx; ++i) {
        const double xl = h.lo_x + wx * static_cast<double>(i), xr = i + 1 == bx ? h.hi_x : xl + wx;
        for (Eigen::Index j = 0; j < by; ++j) {
            const double yl = h.lo_y + wy * static_cast<double>(j), yr = j + 1 == by ? h.hi_y : yl + wy;
            out += decimal(xl) + "," + decimal(xr) + "," + decimal(yl) + "," + decimal(yr) + "," +
                   decimal(h.density(i, j)) + "\n";
        }
    }
    atomic_write(path, out);
}

}  // namespace sgbayes
