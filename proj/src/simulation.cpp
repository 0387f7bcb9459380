#include "elmeta/simulation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "elmeta/analysis.hpp"
#include "elmeta/classic.hpp"
#include "elmeta/distributions.hpp"
#include "elmeta/error.hpp"

namespace elmeta {

namespace {

// chi2(4): mean 4, variance 8. log-normal(1,1): mean e^{1.5}, variance (e-1)e^3.
const double kChiSqMean = 4.0;
const double kChiSqSd = std::sqrt(8.0);
const double kLogNormalMean = std::exp(1.5);
const double kLogNormalSd = std::sqrt((std::exp(1.0) - 1.0) * std::exp(3.0));

template <class Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
    const auto threads = static_cast<std::int64_t>(
        std::min<std::int64_t>(worker_count(), std::max<std::int64_t>(count, 1)));
    if (threads <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (std::int64_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::int64_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

[[noreturn]] void bad_config(const std::string& key, const std::string& why) {
    throw Error(ErrorCode::BadConfig, key + ": " + why);
}

// Running mean and sum of squared deviations (Welford).
struct Moments {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
};

}  // namespace

unsigned worker_count() {
    if (const char* env = std::getenv("ELMETA_THREADS")) {
        unsigned v = 0;
        const auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
        if (ec == std::errc() && v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

const char* to_string(Scenario scenario) noexcept {
    switch (scenario) {
        case Scenario::S1: return "S1";
        case Scenario::S2: return "S2";
        case Scenario::S3: return "S3";
        case Scenario::S4: return "S4";
        case Scenario::FixedChiSq: return "FixedChiSq";
    }
    return "Unknown";
}

Scenario parse_scenario(std::string_view text) {
    for (Scenario s : {Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::FixedChiSq}) {
        if (text == to_string(s)) return s;
    }
    bad_config("scenario", "unknown scenario '" + std::string(text) + "'");
}

SampleSizeRule SampleSizeRule::uniform_scaled(double lo, double hi, double factor) {
    SampleSizeRule r;
    r.kind = Kind::UniformScaled;
    r.lo = lo;
    r.hi = hi;
    r.factor = factor;
    return r;
}

SampleSizeRule SampleSizeRule::uniform_k(double lo, double hi) {
    SampleSizeRule r;
    r.kind = Kind::UniformK;
    r.lo = lo;
    r.hi = hi;
    r.factor = 1.0;
    return r;
}

SampleSizeRule SampleSizeRule::fixed_size(std::int64_t n) {
    SampleSizeRule r;
    r.kind = Kind::Fixed;
    r.fixed = n;
    return r;
}

namespace {

std::vector<double> parse_call_arguments(std::string_view text, std::string_view name) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open ||
        text.substr(0, open) != name) {
        bad_config("n_rule", "cannot parse '" + std::string(text) + "'");
    }
    std::vector<double> args;
    std::string_view inner = text.substr(open + 1, close - open - 1);
    while (!inner.empty()) {
        const auto comma = inner.find(',');
        std::string item(inner.substr(0, comma));
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            bad_config("n_rule", "bad number '" + item + "'");
        }
        args.push_back(v);
        if (comma == std::string_view::npos) break;
        inner.remove_prefix(comma + 1);
    }
    return args;
}

std::string_view strip(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string format_number(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace

SampleSizeRule SampleSizeRule::parse(std::string_view text) {
    text = strip(text);
    const auto name = text.substr(0, text.find('('));
    if (name == "uniform_scaled") {
        const auto a = parse_call_arguments(text, name);
        if (a.size() != 3) bad_config("n_rule", "uniform_scaled takes (lo, hi, factor)");
        return uniform_scaled(a[0], a[1], a[2]);
    }
    if (name == "uniform_k") {
        const auto a = parse_call_arguments(text, name);
        if (a.size() != 2) bad_config("n_rule", "uniform_k takes (lo, hi)");
        return uniform_k(a[0], a[1]);
    }
    if (name == "fixed") {
        const auto a = parse_call_arguments(text, name);
        if (a.size() != 1 || a[0] != std::floor(a[0])) bad_config("n_rule", "fixed takes one integer");
        return fixed_size(static_cast<std::int64_t>(a[0]));
    }
    bad_config("n_rule", "unknown rule '" + std::string(text) + "'");
}

std::int64_t SampleSizeRule::draw(std::int64_t k, RandomStream& rng) const {
    switch (kind) {
        case Kind::UniformScaled:
            return std::llround(factor * rng.uniform(lo, hi));
        case Kind::UniformK:
            return std::llround(rng.uniform(lo * static_cast<double>(k), hi * static_cast<double>(k)));
        case Kind::Fixed:
            return fixed;
    }
    return fixed;
}

std::int64_t SampleSizeRule::minimum(std::int64_t k) const {
    switch (kind) {
        case Kind::UniformScaled: return std::llround(factor * lo);
        case Kind::UniformK: return std::llround(lo * static_cast<double>(k));
        case Kind::Fixed: return fixed;
    }
    return fixed;
}

std::string SampleSizeRule::to_string() const {
    switch (kind) {
        case Kind::UniformScaled:
            return "uniform_scaled(" + format_number(lo) + "," + format_number(hi) + "," +
                   format_number(factor) + ")";
        case Kind::UniformK:
            return "uniform_k(" + format_number(lo) + "," + format_number(hi) + ")";
        case Kind::Fixed:
            return "fixed(" + std::to_string(fixed) + ")";
    }
    return "";
}

void SimulationConfig::validate() const {
    if (!std::isfinite(theta)) bad_config("theta", "must be finite");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) bad_config("sigma2", "must be positive");
    if (!(tau2 >= 0.0) || !std::isfinite(tau2)) bad_config("tau2", "must be non-negative");
    if (scenario == Scenario::FixedChiSq && tau2 != 0.0) {
        bad_config("tau2", "the fixed-effect chi-square scenario has no between-study variance");
    }
    if (studies < 2) bad_config("K", "at least two studies are required");
    if (replicates < 1) bad_config("replicates", "must be at least 1");
    if (!(beta > 0.0 && beta < 1.0)) bad_config("beta", "must lie in (0, 1)");
    if (!(study_level > 0.0 && study_level < 1.0)) bad_config("study_level", "must lie in (0, 1)");
    if (n_rule.kind != SampleSizeRule::Kind::Fixed &&
        !(n_rule.lo <= n_rule.hi && n_rule.factor > 0.0)) {
        bad_config("n_rule", "needs lo <= hi and a positive factor");
    }
    if (n_rule.minimum(studies) < 2) bad_config("n_rule", "every study needs at least 2 observations");
}

SimulationConfig fixed_chisq_config(std::int64_t n, std::int64_t k, std::int64_t replicates,
                                    std::uint64_t seed) {
    SimulationConfig c;
    c.scenario = Scenario::FixedChiSq;
    c.theta = 4.0;
    c.sigma2 = 8.0;
    c.tau2 = 0.0;
    c.studies = k;
    c.n_rule = SampleSizeRule::fixed_size(n);
    c.replicates = replicates;
    c.seed = seed;
    return c;
}

double scaled_chi_square4(RandomStream& rng, double target_mean, double target_sd) {
    const double scale = target_sd / kChiSqSd;
    return scale * rng.chi_square4() + (target_mean - kChiSqMean * scale);
}

double scaled_lognormal11(RandomStream& rng, double target_mean, double target_sd) {
    const double scale = target_sd / kLogNormalSd;
    return scale * rng.lognormal11() + (target_mean - kLogNormalMean * scale);
}

MetaDataset gen_dataset(const SimulationConfig& config, RandomStream& rng) {
    config.validate();
    const double tau = std::sqrt(config.tau2);
    const double sigma = std::sqrt(config.sigma2);
    const double z = dist::normal_quantile(0.5 + 0.5 * config.study_level);
    std::array<double, 30> t_cache{};

    std::vector<StudyInterval> studies;
    studies.reserve(static_cast<std::size_t>(config.studies));
    for (std::int64_t i = 0; i < config.studies; ++i) {
        const std::int64_t n = config.n_rule.draw(config.studies, rng);

        double xi = 0.0;
        switch (config.scenario) {
            case Scenario::S1:
            case Scenario::S3: xi = tau * rng.normal(); break;
            case Scenario::S2: xi = scaled_lognormal11(rng, 0.0, tau); break;
            case Scenario::S4: xi = scaled_chi_square4(rng, 0.0, tau); break;
            case Scenario::FixedChiSq: break;
        }
        const double theta_i = config.theta + xi;

        Moments m;
        for (std::int64_t j = 0; j < n; ++j) {
            double y = 0.0;
            switch (config.scenario) {
                case Scenario::S1:
                case Scenario::S2: y = theta_i + sigma * rng.normal(); break;
                case Scenario::S3:
                case Scenario::FixedChiSq: y = scaled_chi_square4(rng, theta_i, sigma); break;
                case Scenario::S4: y = scaled_lognormal11(rng, theta_i, sigma); break;
            }
            m.add(y);
        }
        const double nd = static_cast<double>(n);
        const double se = std::sqrt(m.m2 / (nd * (nd - 1.0)));

        double crit = z;
        if (n < 30) {
            auto& cached = t_cache[static_cast<std::size_t>(n)];
            if (cached == 0.0) cached = interval_critical_value(config.study_level, n);
            crit = cached;
        }
        StudyInterval s;
        s.lower = m.mean - crit * se;
        s.upper = m.mean + crit * se;
        s.level = config.study_level;
        s.sample_size = n;
        studies.push_back(std::move(s));
    }
    return MetaDataset(std::move(studies), Scale::Linear);
}

MetaDataset gen_dataset(const SimulationConfig& config, std::uint64_t replicate) {
    RandomStream rng(config.seed, replicate);
    return gen_dataset(config, rng);
}

ExperimentResult run_coverage(const SimulationConfig& config, std::span<const Method> methods,
                              bool keep_records) {
    config.validate();
    if (methods.empty()) bad_config("methods", "no methods requested");
    const auto reps = config.replicates;
    const std::size_t nm = methods.size();
    std::vector<ReplicateRecord> grid(static_cast<std::size_t>(reps) * nm);

    parallel_for(reps, [&](std::int64_t r) {
        const MetaDataset data = gen_dataset(config, static_cast<std::uint64_t>(r));
        for (std::size_t j = 0; j < nm; ++j) {
            ReplicateRecord& rec = grid[static_cast<std::size_t>(r) * nm + j];
            try {
                const auto res = run_method(data, methods[j], config.beta);
                rec.estimate = res.estimate;
                rec.ci_lower = res.ci_lower;
                rec.ci_upper = res.ci_upper;
                rec.covered = res.ci_lower <= config.theta && config.theta <= res.ci_upper;
            } catch (const Error& e) {
                if (is_input_error(e.code())) throw;
                rec.failed = true;
            }
        }
    });

    ExperimentResult out;
    out.config = config;
    for (std::size_t j = 0; j < nm; ++j) {
        MethodCoverage mc;
        mc.method = methods[j];
        mc.replicates = reps;
        double width_sum = 0.0;
        for (std::int64_t r = 0; r < reps; ++r) {
            const auto& rec = grid[static_cast<std::size_t>(r) * nm + j];
            if (rec.failed) {
                ++mc.failures;
            } else {
                width_sum += rec.ci_upper - rec.ci_lower;
                mc.covered += rec.covered;
            }
            if (keep_records) mc.records.push_back(rec);
        }
        mc.coverage = static_cast<double>(mc.covered) / static_cast<double>(reps);
        const auto ok = reps - mc.failures;
        mc.mean_width = ok > 0 ? width_sum / static_cast<double>(ok)
                               : std::numeric_limits<double>::quiet_NaN();
        out.methods.push_back(std::move(mc));
    }
    return out;
}

double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw Error(ErrorCode::BadArgument, "ks_distance: no samples");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = std::isinf(x[i]) ? (x[i] > 0 ? 1.0 : 0.0) : cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

std::vector<QqResult> run_qq(const SimulationConfig& config, std::span<const ElVariant> variants) {
    config.validate();
    if (variants.empty()) bad_config("variants", "no variants requested");
    const auto reps = config.replicates;
    const std::size_t nv = variants.size();
    std::vector<double> grid(static_cast<std::size_t>(reps) * nv);
    std::vector<char> failed(grid.size(), 0);

    parallel_for(reps, [&](std::int64_t r) {
        const MetaDataset data = gen_dataset(config, static_cast<std::uint64_t>(r));
        for (std::size_t j = 0; j < nv; ++j) {
            const std::size_t at = static_cast<std::size_t>(r) * nv + j;
            try {
                const ElModel model(data, variants[j]);
                grid[at] = model.neg2logr(config.theta);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoFeasibleTheta) throw;
                grid[at] = std::numeric_limits<double>::infinity();
                failed[at] = 1;
            }
        }
    });

    std::vector<QqResult> out;
    for (std::size_t j = 0; j < nv; ++j) {
        QqResult q;
        q.variant = variants[j];
        const double df = dimension(variants[j]);
        for (std::int64_t r = 0; r < reps; ++r) {
            const std::size_t at = static_cast<std::size_t>(r) * nv + j;
            q.samples.push_back(grid[at]);
            q.failures += failed[at];
        }
        q.sample_quantiles = q.samples;
        std::sort(q.sample_quantiles.begin(), q.sample_quantiles.end());
        const double n = static_cast<double>(reps);
        for (std::int64_t i = 0; i < reps; ++i) {
            q.theoretical_quantiles.push_back(
                dist::chi_square_quantile((static_cast<double>(i) + 0.5) / n, df));
        }
        q.ks_distance = ks_distance(q.samples, [df](double x) { return dist::chi_square_cdf(x, df); });
        out.push_back(std::move(q));
    }
    return out;
}

QqResult run_qq(const SimulationConfig& config, ElVariant variant) {
    const ElVariant one[] = {variant};
    return std::move(run_qq(config, one).front());
}

std::vector<DivergenceRow> run_divergence(std::span<const std::int64_t> studies,
                                          std::span<const std::int64_t> sizes,
                                          std::int64_t replicates, std::uint64_t seed,
                                          DivergenceModel model) {
    if (studies.empty() || sizes.empty()) {
        throw Error(ErrorCode::BadArgument, "divergence grid lists must be non-empty");
    }
    if (replicates < 1) throw Error(ErrorCode::BadArgument, "replicates must be at least 1");
    for (auto k : studies) {
        if (k < 2) throw Error(ErrorCode::BadArgument, "every K must be at least 2");
    }
    for (auto n : sizes) {
        if (n < 2) throw Error(ErrorCode::BadArgument, "every n must be at least 2");
    }

    struct Cell {
        std::int64_t k;
        std::int64_t n;
    };
    std::vector<Cell> cells;
    for (auto k : studies) {
        for (auto n : sizes) cells.push_back({k, n});
    }
    const auto reps = replicates;
    // z values per (cell, replicate): random-effects and fixed-effect versions.
    std::vector<double> z(cells.size() * static_cast<std::size_t>(reps) * 2);

    parallel_for(static_cast<std::int64_t>(cells.size()) * reps, [&](std::int64_t task) {
        const auto c = static_cast<std::size_t>(task / reps);
        const auto r = static_cast<std::uint64_t>(task % reps);
        RandomStream rng(seed, r, c + 1);
        const auto k = cells[c].k;
        const auto n = cells[c].n;
        const double nd = static_cast<double>(n);
        std::vector<double> centers(static_cast<std::size_t>(k));
        std::vector<double> sds(static_cast<std::size_t>(k));
        for (std::int64_t i = 0; i < k; ++i) {
            const double theta_i = rng.normal();
            Moments m;
            for (std::int64_t j = 0; j < n; ++j) {
                const double e = model == DivergenceModel::ChiSquare
                                     ? rng.chi_square4() - kChiSqMean
                                     : kChiSqSd * rng.normal();
                m.add(theta_i + e);
            }
            centers[static_cast<std::size_t>(i)] = m.mean;
            sds[static_cast<std::size_t>(i)] = std::sqrt(m.m2 / (nd * (nd - 1.0)));
        }
        const WeightedSummaries base(centers, sds, 0.0);
        const double tau2 = dl_tau2(base);
        double sum_re = 0.0;
        double sum_fe = 0.0;
        for (std::int64_t i = 0; i < k; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            const double v = sds[ii] * sds[ii];
            sum_re += -centers[ii] / std::sqrt(v + tau2);
            sum_fe += -centers[ii] / sds[ii];
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(k));
        const std::size_t at = (c * static_cast<std::size_t>(reps) + r) * 2;
        z[at] = sum_re * scale;
        z[at + 1] = sum_fe * scale;
    });

    std::vector<DivergenceRow> out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        Moments re;
        Moments fe;
        for (std::int64_t r = 0; r < reps; ++r) {
            const std::size_t at = (c * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)) * 2;
            re.add(z[at]);
            fe.add(z[at + 1]);
        }
        const double rn = static_cast<double>(reps);
        DivergenceRow row;
        row.studies = cells[c].k;
        row.n = cells[c].n;
        row.mean_z = re.mean;
        row.mean_z_fixed = fe.mean;
        row.se_z = reps > 1 ? std::sqrt(re.m2 / (rn - 1.0) / rn) : 0.0;
        row.se_z_fixed = reps > 1 ? std::sqrt(fe.m2 / (rn - 1.0) / rn) : 0.0;
        out.push_back(row);
    }
    return out;
}

}  // namespace elmeta
