#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <complex>
#include <string>

namespace koop {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Parses "3", "-1/4", "0.125" (finite decimals are exact).
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& q);
double to_double(const Rational& q);

// Every finite double is a dyadic rational; conversion is exact.
Rational exact_rational(double x);

// Largest N with N^k <= x, x >= 0.
Integer iroot(const Integer& x, unsigned k);

Integer floor_int(const Rational& q);
Integer ceil_int(const Rational& q);

// floor(q * 2^bits) / 2^bits and the matching ceiling; bits may be negative.
Rational floor_dyadic(const Rational& q, int bits);
Rational ceil_dyadic(const Rational& q, int bits);

// floor(log2 q) for q > 0.
int floor_log2(const Rational& q);

// Lower / upper dyadic brackets of s^(num/den) for s >= 0 on the grid
// 2^-bits. Both brackets are exact integer-root computations.
Rational pow_floor(const Rational& s, unsigned num, unsigned den, int bits);
Rational pow_ceil(const Rational& s, unsigned num, unsigned den, int bits);

struct ComplexQ {
    Rational re;
    Rational im;
    ComplexQ operator+(const ComplexQ& o) const { return {re + o.re, im + o.im}; }
    ComplexQ operator-(const ComplexQ& o) const { return {re - o.re, im - o.im}; }
    ComplexQ operator*(const ComplexQ& o) const {
        return {re * o.re - im * o.im, re * o.im + im * o.re};
    }
    ComplexQ operator*(const Rational& s) const { return {re * s, im * s}; }
    Rational norm2() const { return re * re + im * im; }
    std::complex<double> to_complex() const { return {to_double(re), to_double(im)}; }
};

}  // namespace koop
