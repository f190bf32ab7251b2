#pragma once

#include <cmath>
#include <stdexcept>

namespace branchform {

struct EvalDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Forward-mode dual number. Nesting Dual<Dual<double>> gives exact second
// derivatives (hyper-dual evaluation).
template <typename T>
struct Dual {
    T val{};
    T dot{};

    Dual() = default;
    Dual(T v) : val(v) {}  // NOLINT: implicit promotion from scalar
    Dual(T v, T d) : val(v), dot(d) {}

    Dual operator-() const { return {-val, -dot}; }

    friend Dual operator+(const Dual& a, const Dual& b) { return {a.val + b.val, a.dot + b.dot}; }
    friend Dual operator-(const Dual& a, const Dual& b) { return {a.val - b.val, a.dot - b.dot}; }
    friend Dual operator*(const Dual& a, const Dual& b) {
        return {a.val * b.val, a.dot * b.val + a.val * b.dot};
    }
    friend Dual operator/(const Dual& a, const Dual& b) {
        const T inv = T(1) / b.val;
        const T q = a.val * inv;
        return {q, (a.dot - q * b.dot) * inv};
    }
};

template <typename T>
T primal(const T& x) { return x; }
template <typename T>
auto primal(const Dual<T>& x) { return primal(x.val); }

inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double exp(double x) { return std::exp(x); }
inline double sqrt(double x) { return std::sqrt(x); }

template <typename T>
Dual<T> sin(const Dual<T>& x) { return {sin(x.val), cos(x.val) * x.dot}; }
template <typename T>
Dual<T> cos(const Dual<T>& x) { return {cos(x.val), T(-1) * sin(x.val) * x.dot}; }
template <typename T>
Dual<T> exp(const Dual<T>& x) {
    const T e = exp(x.val);
    return {e, e * x.dot};
}
template <typename T>
Dual<T> sqrt(const Dual<T>& x) {
    const T s = sqrt(x.val);
    return {s, x.dot / (T(2) * s)};
}

// Integer power by repeated squaring; negative exponents go through the
// division operator so the zero-denominator check applies.
template <typename T>
T powi(T base, int n) {
    if (n < 0) return T(1) / powi(base, -n);
    T result(1);
    while (n > 0) {
        if (n & 1) result = result * base;
        base = base * base;
        n >>= 1;
    }
    return result;
}

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

}  // namespace branchform
