#pragma once

// Monte-Carlo bookkeeping: estimates with standard errors, order-independent
// reductions and a deterministic parallel map over trajectory indices.

#include <wavecouple/error.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace wavecouple {

// width of every Monte-Carlo comparison band, in standard errors
inline constexpr double kSigmaBand = 4.0;

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_excluded = 0;

    double ci_low() const noexcept { return mean - 1.96 * std_error; }
    double ci_high() const noexcept { return mean + 1.96 * std_error; }
    double exclusion_rate() const noexcept
    {
        const std::size_t total = n_samples + n_excluded;
        return total == 0 ? 0.0 : static_cast<double>(n_excluded) / static_cast<double>(total);
    }
    /// More than 0.1% of the trajectories were excluded.
    bool flagged() const noexcept { return exclusion_rate() > 1e-3; }
};

/// Pairwise summation: the result depends only on the input order.
inline double pairwise_sum(std::span<const double> v)
{
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

/// Mean and standard error of the kept samples (keep[i] == false means excluded).
inline McEstimate summarize(std::span<const double> values, std::span<const char> keep = {})
{
    std::vector<double> kept;
    kept.reserve(values.size());
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!keep.empty() && !keep[i]) {
            ++excluded;
            continue;
        }
        if (!std::isfinite(values[i])) {
            ++excluded;
            continue;
        }
        kept.push_back(values[i]);
    }
    if (kept.empty()) throw EstimationFailure("every trajectory was excluded");
    McEstimate e;
    e.n_samples = kept.size();
    e.n_excluded = excluded;
    const double n = static_cast<double>(kept.size());
    e.mean = pairwise_sum(kept) / n;
    if (kept.size() > 1) {
        std::vector<double> sq(kept.size());
        for (std::size_t i = 0; i < kept.size(); ++i) sq[i] = (kept[i] - e.mean) * (kept[i] - e.mean);
        e.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    }
    return e;
}

/// Sample mean vector and covariance of columns (for delta-method errors).
struct JointMoments {
    std::vector<double> mean;
    std::vector<std::vector<double>> cov; // covariance of the sample mean
    std::size_t n = 0;
};

inline JointMoments joint_moments(const std::vector<std::vector<double>>& columns)
{
    JointMoments m;
    const std::size_t k = columns.size();
    if (k == 0 || columns[0].empty()) throw EstimationFailure("joint_moments: no samples");
    m.n = columns[0].size();
    const double n = static_cast<double>(m.n);
    m.mean.resize(k);
    for (std::size_t a = 0; a < k; ++a) m.mean[a] = pairwise_sum(columns[a]) / n;
    m.cov.assign(k, std::vector<double>(k, 0.0));
    std::vector<double> tmp(m.n);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            for (std::size_t i = 0; i < m.n; ++i) tmp[i] = (columns[a][i] - m.mean[a]) * (columns[b][i] - m.mean[b]);
            const double c = m.n > 1 ? pairwise_sum(tmp) / (n - 1.0) / n : 0.0;
            m.cov[a][b] = m.cov[b][a] = c;
        }
    }
    return m;
}

/// Standard error of f(mean) given the gradient of f at the mean.
inline double delta_stderr(const JointMoments& m, std::span<const double> grad)
{
    double v = 0.0;
    for (std::size_t a = 0; a < grad.size(); ++a)
        for (std::size_t b = 0; b < grad.size(); ++b) v += grad[a] * grad[b] * m.cov[a][b];
    return std::sqrt(std::max(v, 0.0));
}

/// Thread count: explicit value if positive, else WAVECOUPLE_THREADS, else 1.
inline unsigned resolve_threads(int requested)
{
    if (requested > 0) return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("WAVECOUPLE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

/// out[i] = fn(i) for i in [0, n), computed on `threads` workers. Results
/// land at their index, so the output never depends on the thread count.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, unsigned threads, Fn&& fn)
{
    std::vector<T> out(n);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

} // namespace wavecouple
