#ifndef RESORB_QUADRATURE_HPP
#define RESORB_QUADRATURE_HPP

#include <cmath>
#include <functional>
#include <vector>

namespace resorb {

// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
struct GaussRule {
    std::vector<double> x, w;
};
const GaussRule& gauss_rule(int n);

// Compensated accumulator for one reduction chunk.
struct KahanAcc {
    double s = 0, c = 0;
    void add(double v) {
        double t = s + v;
        if (std::abs(s) >= std::abs(v))
            c += (s - t) + v;
        else
            c += (v - t) + s;
        s = t;
    }
    double get() const { return s + c; }
};

// Fixed-shape pairwise fold; the result depends only on the chunk values,
// never on how many threads produced them.
double pairwise_sum(std::vector<double>& chunks);

// Run fn(row) for row in [0, rows); each worker takes a contiguous block.
// Results must be written to preallocated per-row slots by the callback.
void parallel_rows(int rows, int threads, const std::function<void(int)>& fn);

} // namespace resorb

#endif
