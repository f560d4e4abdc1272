#include "sgbayes/external_model.hpp"

#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace sgbayes {

namespace fs = std::filesystem;

namespace {

std::string format_point(const Eigen::VectorXd& theta) {
    std::string out = "(";
    char buf[32];
    for (Eigen::Index n = 0; n < theta.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%.17g", theta[n]);
        if (n) out += ", ";
        out += buf;
    }
    return out + ")";
}

std::string slurp(const fs::path& path, std::size_t limit = 4096) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.size() > limit) text = "..." + text.substr(text.size() - limit);
    return text;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_failure(const fs::path& path, const std::string& why) {
    throw ModelExecutionError("malformed output file " + path.string() + ": " + why, "", "");
}

fs::path default_workdir() {
    return fs::temp_directory_path() / ("sgbayes-ext-" + std::to_string(::getpid()));
}

}  // namespace

void write_parameter_file(const fs::path& path, const Eigen::VectorXd& theta) {
    std::ofstream out(path);
    if (!out) throw ModelExecutionError("cannot write parameter file " + path.string(), format_point(theta), "");
    out << theta.size() << '\n';
    char buf[32];
    for (Eigen::Index n = 0; n < theta.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%.17g", theta[n]);
        out << buf << '\n';
    }
    if (!out.flush()) throw ModelExecutionError("cannot write parameter file " + path.string(), format_point(theta), "");
}

Eigen::VectorXd read_output_file(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) parse_failure(path, "missing");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!text.empty() && text.back() == '\n') text.pop_back();

    std::vector<std::string_view> lines;
    std::string_view rest(text);
    while (true) {
        const auto nl = rest.find('\n');
        lines.push_back(trim(rest.substr(0, nl)));
        if (nl == std::string_view::npos) break;
        rest.remove_prefix(nl + 1);
    }

    std::size_t count = 0;
    {
        const auto head = lines.front();
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), count);
        if (ec != std::errc{} || ptr != head.data() + head.size() || head.empty())
            parse_failure(path, "first line must be the output count");
    }
    if (count != expected)
        parse_failure(path, "declares " + std::to_string(count) + " outputs, expected " + std::to_string(expected));
    if (lines.size() != count + 1)
        parse_failure(path, "declares " + std::to_string(count) + " outputs but has " +
                                std::to_string(lines.size() - 1) + " value lines");

    Eigen::VectorXd values(static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) {
        const auto line = lines[k + 1];
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (line.empty() || ec != std::errc{} || ptr != line.data() + line.size() || !std::isfinite(v))
            parse_failure(path, "line " + std::to_string(k + 2) + " is not a finite number");
        values[static_cast<Eigen::Index>(k)] = v;
    }
    return values;
}

ExternalModel::ExternalModel(ExternalModelConfig config)
    : ForwardModel(ModelSpec{config.name, config.domain.dim(), config.output_dim, config.domain, Backend::external}),
      config_(std::move(config)),
      slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_concurrent))) {
    if (config_.executable.empty()) throw ConfigurationError("external model needs an executable");
    if (config_.timeout_seconds < 0.0) throw ConfigurationError("external model timeout must be non-negative");
    if (config_.workdir.empty()) config_.workdir = default_workdir();
}

Eigen::VectorXd ExternalModel::do_evaluate(const Eigen::VectorXd& theta) const {
    std::vector<std::uint64_t> key(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index n = 0; n < theta.size(); ++n) key[static_cast<std::size_t>(n)] = std::bit_cast<std::uint64_t>(theta[n]);
    {
        std::lock_guard lock(memo_mutex_);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    slots_.acquire();
    Eigen::VectorXd result;
    try {
        result = run(theta);
    } catch (...) {
        slots_.release();
        throw;
    }
    slots_.release();
    std::lock_guard lock(memo_mutex_);
    return memo_.emplace(std::move(key), std::move(result)).first->second;
}

Eigen::VectorXd ExternalModel::run(const Eigen::VectorXd& theta) const {
    const std::string point = format_point(theta);
    if (!fs::exists(config_.executable))
        throw ModelExecutionError("executable not found: " + config_.executable.string(), point, "");

    const fs::path dir = config_.workdir / ("eval-" + std::to_string(::getpid()) + "-" + std::to_string(serial_++));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ModelExecutionError("cannot create work directory " + dir.string() + ": " + ec.message(), point, "");

    const fs::path params = dir / "params.txt";
    const fs::path output = dir / "output.txt";
    const fs::path out_log = dir / "stdout.txt";
    const fs::path err_log = dir / "stderr.txt";
    write_parameter_file(params, theta);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);

    std::string exe = config_.executable.string();
    std::string p = params.string();
    std::string o = output.string();
    char* argv[] = {exe.data(), p.data(), o.data(), nullptr};

    pid_t pid = 0;
    const int rc = posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw ModelExecutionError("cannot launch " + exe + ": " + std::strerror(rc), point, "");
    ++launches_;

    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::duration<double>(config_.timeout_seconds);
    int status = 0;
    bool timed_out = false;
    auto pause = std::chrono::microseconds(200);
    while (true) {
        const pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0 && errno != EINTR) throw ModelExecutionError("waitpid failed for " + exe, point, "");
        if (config_.timeout_seconds > 0.0 && clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            timed_out = true;
            break;
        }
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::microseconds(20000));
    }

    const auto diagnostics = [&] { return "workdir " + dir.string() + "; stderr: " + slurp(err_log); };
    if (timed_out)
        throw ModelExecutionError("model run exceeded " + std::to_string(config_.timeout_seconds) + " s", point,
                                  diagnostics());
    if (WIFSIGNALED(status))
        throw ModelExecutionError("model process killed by signal " + std::to_string(WTERMSIG(status)), point,
                                  diagnostics());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw ModelExecutionError("model process exited with status " + std::to_string(WEXITSTATUS(status)), point,
                                  diagnostics());

    Eigen::VectorXd values;
    try {
        values = read_output_file(output, output_dim());
    } catch (const ModelExecutionError& e) {
        throw ModelExecutionError(e.what(), point, diagnostics());
    }
    fs::remove_all(dir, ec);
    return values;
}

}  // namespace sgbayes
