#include "koop/rational.hpp"

#include "koop/errors.hpp"

#include <cctype>
#include <cmath>

namespace koop {

namespace {

Integer pow10(std::size_t k) {
    Integer r = 1;
    for (std::size_t i = 0; i < k; ++i) r *= 10;
    return r;
}

Integer parse_integer(const std::string& s) {
    if (s.empty()) throw ConfigError("empty number");
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) throw ConfigError("malformed number '" + s + "'");
    for (std::size_t k = i; k < s.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(s[k])))
            throw ConfigError("malformed number '" + s + "'");
    Integer v(s.substr(i));
    return s[0] == '-' ? Integer(-v) : v;
}

}  // namespace

Rational parse_rational(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        Integer num = parse_integer(s.substr(0, slash));
        Integer den = parse_integer(s.substr(slash + 1));
        if (den == 0) throw ConfigError("zero denominator in '" + text + "'");
        return Rational(num, den);
    }
    auto dot = s.find('.');
    if (dot != std::string::npos) {
        std::string ip = s.substr(0, dot);
        std::string fp = s.substr(dot + 1);
        bool neg = !ip.empty() && ip[0] == '-';
        if (!ip.empty() && (ip[0] == '-' || ip[0] == '+')) ip = ip.substr(1);
        if (ip.empty()) ip = "0";
        if (fp.empty()) fp = "0";
        Integer a = parse_integer(ip);
        Integer b = parse_integer(fp);
        Rational q = Rational(a) + Rational(b, pow10(fp.size()));
        return neg ? Rational(-q) : q;
    }
    return Rational(parse_integer(s));
}

std::string to_string(const Rational& q) {
    if (denominator(q) == 1) return numerator(q).str();
    return numerator(q).str() + "/" + denominator(q).str();
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

Rational exact_rational(double x) {
    if (!std::isfinite(x)) throw NumericError("non-finite value has no rational form");
    if (x == 0.0) return Rational(0);
    int e = 0;
    double m = std::frexp(x, &e);
    // m in [0.5,1); scale mantissa to a 53-bit integer.
    auto mi = static_cast<long long>(std::ldexp(m, 53));
    e -= 53;
    Integer num = mi;
    if (e >= 0) return Rational(num << e);
    Integer den = Integer(1) << (-e);
    return Rational(num, den);
}

Integer iroot(const Integer& x, unsigned k) {
    if (x < 0) throw NumericError("iroot of negative value");
    if (x < 2 || k == 1) return x;
    // Initial upper bound from bit length.
    std::size_t bits = msb(x) + 1;
    Integer hi = Integer(1) << ((bits + k - 1) / k);
    Integer lo = 0;
    while (lo < hi) {
        Integer mid = (lo + hi + 1) >> 1;
        if (Integer(pow(mid, k)) <= x)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

Integer floor_int(const Rational& q) {
    Integer n = numerator(q), d = denominator(q);
    Integer r = n / d;
    if (n < 0 && r * d != n) r -= 1;
    return r;
}

Integer ceil_int(const Rational& q) { return -floor_int(Rational(-q)); }

namespace {
Rational scale2(const Rational& q, int bits) {
    if (bits >= 0) return q * Rational(Integer(1) << bits);
    return q / Rational(Integer(1) << (-bits));
}
Rational qpow(const Rational& s, unsigned k) {
    return Rational(Integer(pow(numerator(s), k)), Integer(pow(denominator(s), k)));
}
Rational unscale2(const Integer& n, int bits) {
    if (bits >= 0) return Rational(n, Integer(1) << bits);
    return Rational(n << (-bits));
}
}  // namespace

Rational floor_dyadic(const Rational& q, int bits) { return unscale2(floor_int(scale2(q, bits)), bits); }

Rational ceil_dyadic(const Rational& q, int bits) { return unscale2(ceil_int(scale2(q, bits)), bits); }

int floor_log2(const Rational& q) {
    if (q <= 0) throw NumericError("floor_log2 of nonpositive value");
    Integer n = numerator(q), d = denominator(q);
    int e = static_cast<int>(msb(n)) - static_cast<int>(msb(d));
    // Adjust so that 2^e <= q < 2^(e+1).
    while (scale2(Rational(1), e) > q) --e;
    while (scale2(Rational(1), e + 1) <= q) ++e;
    return e;
}

Rational pow_floor(const Rational& s, unsigned num, unsigned den, int bits) {
    if (s < 0) throw NumericError("pow_floor of negative base");
    if (s == 0) return Rational(0);
    // floor(s^(num/den) 2^bits) = iroot(floor(s^num 2^(den bits)), den)
    Rational x = qpow(s, num);
    Integer f = floor_int(scale2(x, static_cast<int>(den) * bits));
    return unscale2(iroot(f, den), bits);
}

Rational pow_ceil(const Rational& s, unsigned num, unsigned den, int bits) {
    if (s < 0) throw NumericError("pow_ceil of negative base");
    if (s == 0) return Rational(0);
    Rational x = qpow(s, num);
    Rational scaled = scale2(x, static_cast<int>(den) * bits);
    Integer c = ceil_int(scaled);
    Integer r = iroot(c, den);
    if (Integer(pow(r, den)) < c) r += 1;
    return unscale2(r, bits);
}

}  // namespace koop
