#include "resorb/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "resorb/errors.hpp"

namespace resorb {

namespace {

GaussRule compute_rule(int n) {
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.x[i] = x;
        r.w[i] = 2.0 / ((1 - x * x) * pp * pp);
    }
    return r;
}

} // namespace

const GaussRule& gauss_rule(int n) {
    if (n < 1 || n > 256) throw ContractViolation("gauss rule order out of range");
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
    return it->second;
}

double pairwise_sum(std::vector<double>& chunks) {
    std::size_t n = chunks.size();
    while (n > 1) {
        std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i < n / 2; ++i) chunks[i] = chunks[2 * i] + chunks[2 * i + 1];
        if (n % 2) chunks[n / 2] = chunks[n - 1];
        n = half;
    }
    return n ? chunks[0] : 0.0;
}

void parallel_rows(int rows, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || rows <= 1) {
        for (int r = 0; r < rows; ++r) fn(r);
        return;
    }
    int nw = std::min(threads, rows);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (int w = 0; w < nw; ++w) {
        int lo = (int)((long long)rows * w / nw);
        int hi = (int)((long long)rows * (w + 1) / nw);
        pool.emplace_back([lo, hi, &fn] {
            for (int r = lo; r < hi; ++r) fn(r);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace resorb
