#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace branchform {

// Exact rational arithmetic for weights, group orders, and measure
// prefactors. Values stay exact until the final multiplication with a
// floating-point integral.
using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Serialized form used in scenario files and reports: "p/q" or "p".
inline std::string rational_to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline Rational parse_rational(const std::string& s) {
    const auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rational(std::stoll(s));
        const std::int64_t p = std::stoll(s.substr(0, slash));
        const std::int64_t q = std::stoll(s.substr(slash + 1));
        if (q == 0) throw std::invalid_argument("zero denominator");
        return Rational(p, q);
    } catch (const std::exception&) {
        throw std::invalid_argument("invalid rational literal: '" + s + "'");
    }
}

}  // namespace branchform
