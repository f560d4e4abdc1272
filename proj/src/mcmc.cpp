#include "sgbayes/mcmc.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace sgbayes {

namespace {

constexpr double ninf = -std::numeric_limits<double>::infinity();

std::string describe(const Eigen::VectorXd& theta) {
    std::ostringstream out;
    out.precision(17);
    out << '(';
    for (Eigen::Index n = 0; n < theta.size(); ++n) out << (n ? ", " : "") << theta[n];
    out << ')';
    return out.str();
}

// log(1 - exp(a)) for a <= 0.
double log1mexp(double a) {
    if (a == ninf) return 0.0;
    return a > -0.693 ? std::log(-std::expm1(a)) : std::log1p(-std::exp(a));
}

class Sampler {
public:
    Sampler(const LogDensity& target, const DramConfig& config, const std::optional<Box>& box)
        : target_(target), config_(config), box_(box), rng_(config.seed) {}

    Chain run();

private:
    double evaluate(const Eigen::VectorXd& theta, std::size_t iter);
    bool inside(const Eigen::VectorXd& theta) const { return !box_ || box_->contains(theta); }
    void set_covariance(const Eigen::MatrixXd& cov);
    Eigen::VectorXd draw(const Eigen::VectorXd& from, double shrink);
    // ½ aᵀ C⁻¹ a for the current stage-1 covariance.
    double half_quad(const Eigen::VectorXd& a) const { return 0.5 * chol_.matrixL().solve(a).squaredNorm(); }

    const LogDensity& target_;
    const DramConfig& config_;
    const std::optional<Box>& box_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::MatrixXd lower_;
};

double Sampler::evaluate(const Eigen::VectorXd& theta, std::size_t iter) {
    const double v = target_(theta);
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw NumericalError("target returned " + std::to_string(v) + " at " + describe(theta) + " (iteration " +
                             std::to_string(iter) + ")");
    return v;
}

void Sampler::set_covariance(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) return;  // keep the previous proposal
    chol_ = std::move(llt);
    lower_ = chol_.matrixL();
}

Eigen::VectorXd Sampler::draw(const Eigen::VectorXd& from, double shrink) {
    Eigen::VectorXd z(from.size());
    for (auto& v : z) v = normal_(rng_);
    return from + shrink * (lower_ * z);
}

Chain Sampler::run() {
    Eigen::VectorXd x = config_.initial;
    if (x.size() == 0) {
        if (!box_) throw ConfigurationError("sampler needs an initial point or a box");
        x = box_->center();
    }
    const auto d = static_cast<std::size_t>(x.size());
    if (box_ && box_->dim() != d) throw ConfigurationError("initial point and box dimensions differ");
    if (!inside(x)) throw InitializationError("initial point " + describe(x) + " lies outside the box");

    Eigen::MatrixXd c0 = config_.initial_cov;
    if (c0.size() == 0) {
        if (!box_) throw ConfigurationError("sampler needs an initial covariance or a box");
        c0 = (0.1 * box_->width()).array().square().matrix().asDiagonal();
    }
    if (static_cast<std::size_t>(c0.rows()) != d || static_cast<std::size_t>(c0.cols()) != d)
        throw ConfigurationError("initial covariance has the wrong shape");
    chol_.compute(c0);
    if (chol_.info() != Eigen::Success) throw ConfigurationError("initial covariance is not positive definite");
    lower_ = chol_.matrixL();

    double lx = evaluate(x, 0);
    if (lx == ninf) throw InitializationError("target is -inf at the initial point " + describe(x));

    const double sd = config_.scale > 0.0 ? config_.scale : 2.4 * 2.4 / static_cast<double>(d);
    const double shrink = 1.0 / config_.gamma;
    const Eigen::MatrixXd jitter = config_.regularizer * Eigen::MatrixXd::Identity(d, d);

    // Running mean and scatter of every state visited, start included.
    Eigen::VectorXd mean = x;
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
    std::size_t seen = 1;

    Chain chain;
    chain.draws.resize(static_cast<Eigen::Index>(config_.samples), static_cast<Eigen::Index>(d));
    chain.log_post.resize(static_cast<Eigen::Index>(config_.samples));
    chain.stages.reserve(config_.samples);

    for (std::size_t t = 1; t <= config_.samples; ++t) {
        Stage stage = Stage::reject;

        const Eigen::VectorXd y1 = draw(x, 1.0);
        const double l1 = inside(y1) ? evaluate(y1, t) : ninf;
        const double log_a1 = std::min(0.0, l1 - lx);
        if (l1 != ninf && std::log(uniform_(rng_)) < log_a1) {
            x = y1;
            lx = l1;
            stage = Stage::stage1_accept;
        } else if (config_.stages >= 2) {
            const Eigen::VectorXd y2 = draw(x, shrink);
            const double l2 = inside(y2) ? evaluate(y2, t) : ninf;
            if (l2 != ninf) {
                // Reverse-move stage-1 rejection probability 1 - α1(y2, y1).
                const double rev = l1 == ninf ? 0.0 : (l1 >= l2 ? ninf : log1mexp(l1 - l2));
                if (rev != ninf) {
                    const double log_a2 = l2 - lx + half_quad(y1 - x) - half_quad(y1 - y2) + rev - log1mexp(log_a1);
                    if (std::log(uniform_(rng_)) < std::min(0.0, log_a2)) {
                        x = y2;
                        lx = l2;
                        stage = Stage::stage2_accept;
                    }
                }
            }
        }

        const auto row = static_cast<Eigen::Index>(t - 1);
        chain.draws.row(row) = x.transpose();
        chain.log_post[row] = lx;
        chain.stages.push_back(stage);

        ++seen;
        const Eigen::VectorXd delta = x - mean;
        mean += delta / static_cast<double>(seen);
        scatter += delta * (x - mean).transpose();

        if (config_.adapt_start != never && t >= config_.adapt_start && t % config_.adapt_interval == 0) {
            const Eigen::MatrixXd cov = scatter / static_cast<double>(seen - 1);
            if (cov.trace() > 0.0) set_covariance(sd * cov + jitter);
        }
    }
    return chain;
}

}  // namespace

void DramConfig::validate() const {
    if (samples == 0) throw ConfigurationError("mcmc.samples must be positive");
    if (burn_in >= samples) throw ConfigurationError("mcmc.burn_in must be smaller than mcmc.samples");
    if (adapt_interval == 0) throw ConfigurationError("mcmc.adapt_interval must be positive");
    if (scale < 0.0) throw ConfigurationError("mcmc.scale must be non-negative");
    if (regularizer < 0.0) throw ConfigurationError("mcmc.regularizer must be non-negative");
    if (stages != 1 && stages != 2) throw ConfigurationError("mcmc.stages must be 1 or 2");
    if (!(gamma > 1.0)) throw ConfigurationError("mcmc.gamma must exceed 1");
}

const char* to_string(Stage stage) noexcept {
    switch (stage) {
        case Stage::stage1_accept: return "stage1-accept";
        case Stage::stage2_accept: return "stage2-accept";
        case Stage::reject: return "reject";
    }
    return "unknown";
}

Stage stage_from_string(const std::string& text) {
    if (text == "stage1-accept") return Stage::stage1_accept;
    if (text == "stage2-accept") return Stage::stage2_accept;
    if (text == "reject") return Stage::reject;
    throw LoadError("unknown chain stage '" + text + "'");
}

Chain sample(const LogDensity& target, const DramConfig& config, const std::optional<Box>& box) {
    config.validate();
    return Sampler(target, config, box).run();
}

Eigen::VectorXd autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t max_lag) {
    const auto n = static_cast<std::size_t>(x.size());
    max_lag = std::min(max_lag, n == 0 ? 0 : n - 1);
    Eigen::VectorXd rho = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(max_lag + 1));
    const Eigen::ArrayXd c = x.array() - x.mean();
    const double c0 = c.square().sum();
    if (!(c0 > 0.0)) return rho;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        const auto m = static_cast<Eigen::Index>(n - k);
        rho[static_cast<Eigen::Index>(k)] = (c.head(m) * c.tail(m)).sum() / c0;
    }
    return rho;
}

double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& x) {
    const auto n = static_cast<std::size_t>(x.size());
    if (n < 4) return static_cast<double>(n);
    const Eigen::ArrayXd c = x.array() - x.mean();
    const double c0 = c.square().sum();
    if (!(c0 > 0.0)) return 1.0;
    auto rho = [&](std::size_t k) {
        const auto m = static_cast<Eigen::Index>(n - k);
        return (c.head(m) * c.tail(m)).sum() / c0;
    };
    // Sum of paired autocorrelations Γ_m = ρ_2m + ρ_2m+1 while positive,
    // forced to be non-increasing.
    double sum = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        double gamma = (m == 0 ? 1.0 : rho(2 * m)) + rho(2 * m + 1);
        if (gamma <= 0.0) break;
        gamma = std::min(gamma, prev);
        sum += gamma;
        prev = gamma;
    }
    const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / static_cast<double>(n));
    return static_cast<double>(n) / tau;
}

ChainSummary diagnostics(const Chain& chain, std::size_t burn_in, std::size_t max_lag) {
    if (chain.size() == 0) throw ConfigurationError("diagnostics need a non-empty chain");
    if (burn_in >= chain.size()) throw ConfigurationError("burn-in leaves no samples");
    ChainSummary s;
    s.samples = chain.size() - burn_in;
    std::size_t a1 = 0, a2 = 0;
    for (std::size_t t = burn_in; t < chain.size(); ++t) {
        a1 += chain.stages[t] == Stage::stage1_accept;
        a2 += chain.stages[t] == Stage::stage2_accept;
    }
    const auto n = static_cast<double>(s.samples);
    s.accept_stage1 = static_cast<double>(a1) / n;
    s.accept_stage2 = static_cast<double>(a2) / n;
    s.accept_total = static_cast<double>(a1 + a2) / n;
    s.stage2_conditional = a1 < s.samples ? static_cast<double>(a2) / static_cast<double>(s.samples - a1) : 0.0;

    const auto rows = static_cast<Eigen::Index>(s.samples);
    const auto kept = chain.draws.bottomRows(rows);
    const auto d = static_cast<Eigen::Index>(chain.dim());
    s.mean = kept.colwise().mean().transpose();
    s.sd.resize(d);
    s.ess.resize(d);
    const std::size_t lags = std::min(max_lag, s.samples - 1);
    s.autocorrelation.resize(d, static_cast<Eigen::Index>(lags + 1));
    for (Eigen::Index k = 0; k < d; ++k) {
        const Eigen::VectorXd col = kept.col(k);
        s.sd[k] = rows > 1 ? std::sqrt((col.array() - s.mean[k]).square().sum() / static_cast<double>(rows - 1)) : 0.0;
        s.autocorrelation.row(k) = autocorrelation(col, lags).transpose();
        s.ess[k] = effective_sample_size(col);
    }
    return s;
}

double Histogram::mode() const {
    Eigen::Index b = 0;
    density.maxCoeff(&b);
    return 0.5 * (left(static_cast<std::size_t>(b)) + right(static_cast<std::size_t>(b)));
}

Histogram histogram(const Eigen::Ref<const Eigen::VectorXd>& samples, std::size_t bins, double lo, double hi) {
    if (bins < 2) throw ConfigurationError("histograms need at least two bins");
    if (!(hi > lo)) throw ConfigurationError("histogram range is empty");
    if (samples.size() == 0) throw ConfigurationError("histogram of an empty sample");
    Histogram h{lo, hi, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bins))};
    const double w = h.width();
    for (const double v : samples) {
        if (!(v >= lo && v <= hi)) continue;
        const auto b = std::min(static_cast<std::size_t>((v - lo) / w), bins - 1);
        h.density[static_cast<Eigen::Index>(b)] += 1.0;
    }
    h.density /= static_cast<double>(samples.size()) * w;
    return h;
}

Histogram marginal_histogram(const Chain& chain, std::size_t burn_in, std::size_t dim, std::size_t bins, double lo,
                             double hi) {
    if (dim >= chain.dim()) throw ConfigurationError("histogram dimension out of range");
    if (burn_in >= chain.size()) throw ConfigurationError("burn-in leaves no samples");
    const auto rows = static_cast<Eigen::Index>(chain.size() - burn_in);
    return histogram(chain.draws.col(static_cast<Eigen::Index>(dim)).tail(rows), bins, lo, hi);
}

JointHistogram joint_histogram(const Chain& chain, std::size_t burn_in, std::size_t dim_x, std::size_t dim_y,
                               std::size_t bins, const Box& range) {
    if (bins < 2) throw ConfigurationError("histograms need at least two bins");
    if (dim_x >= chain.dim() || dim_y >= chain.dim() || range.dim() != chain.dim())
        throw ConfigurationError("histogram dimension out of range");
    if (burn_in >= chain.size()) throw ConfigurationError("burn-in leaves no samples");
    const auto ix = static_cast<Eigen::Index>(dim_x), iy = static_cast<Eigen::Index>(dim_y);
    JointHistogram h{range.lower()[ix], range.upper()[ix], range.lower()[iy], range.upper()[iy],
                     Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins))};
    const double wx = (h.hi_x - h.lo_x) / static_cast<double>(bins);
    const double wy = (h.hi_y - h.lo_y) / static_cast<double>(bins);
    for (std::size_t t = burn_in; t < chain.size(); ++t) {
        const double x = chain.draws(static_cast<Eigen::Index>(t), ix);
        const double y = chain.draws(static_cast<Eigen::Index>(t), iy);
        if (!(x >= h.lo_x && x <= h.hi_x && y >= h.lo_y && y <= h.hi_y)) continue;
        const auto bx = std::min(static_cast<std::size_t>((x - h.lo_x) / wx), bins - 1);
        const auto by = std::min(static_cast<std::size_t>((y - h.lo_y) / wy), bins - 1);
        h.density(static_cast<Eigen::Index>(bx), static_cast<Eigen::Index>(by)) += 1.0;
    }
    h.density /= static_cast<double>(chain.size() - burn_in) * wx * wy;
    return h;
}

double total_variation(const Histogram& p, const Histogram& q) {
    if (p.bins() != q.bins() || p.lo != q.lo || p.hi != q.hi)
        throw ConfigurationError("total variation needs histograms on the same bins");
    return 0.5 * (p.density - q.density).cwiseAbs().sum() * p.width();
}

}  // namespace sgbayes
