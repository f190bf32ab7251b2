#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace branchform {

struct QuadRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre nodes/weights by Newton iteration on the Legendre
// polynomial; deterministic to the last bit for a given order.
inline const QuadRule& gauss_legendre(int order) {
    if (order < 1 || order > 64) throw std::invalid_argument("quadrature order out of range");
    static std::vector<QuadRule> cache(65);
    QuadRule& rule = cache[static_cast<std::size_t>(order)];
    if (!rule.nodes.empty()) return rule;

    const int n = order;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            if (n == 1) { p1 = x; }
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

// Compensated (Kahan) accumulation in a caller-fixed order.
class KahanSum {
  public:
    void add(double v) {
        const double y = v - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// Halton sequence used for quasi-random sample batteries (ineffectivity
// detection, invariance checks). BRANCHFORM_SEED shifts the start index so
// sample sets are reproducible but adjustable.
inline double halton(std::size_t index, int base) {
    double f = 1.0, r = 0.0;
    std::size_t i = index;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % static_cast<std::size_t>(base));
        i /= static_cast<std::size_t>(base);
    }
    return r;
}

inline std::size_t sample_seed() {
    static const std::size_t seed = [] {
        const char* env = std::getenv("BRANCHFORM_SEED");
        return env ? static_cast<std::size_t>(std::strtoull(env, nullptr, 10)) : std::size_t{0};
    }();
    return seed;
}

// k-th quasi-random point in [0,1]^dim for the current seed.
inline std::vector<double> halton_point(std::size_t k, int dim) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (dim > 12) throw std::invalid_argument("halton_point supports dim <= 12");
    std::vector<double> p(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d)
        p[static_cast<std::size_t>(d)] = halton(k + 1 + sample_seed(), primes[d]);
    return p;
}

}  // namespace branchform
