#include "koop/spectral_reference.hpp"

#include "koop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace koop {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ReferenceSpectrum ReferenceSpectrum::finite(PointSet pts) {
    ReferenceSpectrum r;
    r.kind = Kind::FiniteSet;
    r.points = std::move(pts);
    return r;
}

ReferenceSpectrum ReferenceSpectrum::disk(std::complex<double> c, double rad) {
    if (rad < 0) throw ConfigError("negative disk radius");
    ReferenceSpectrum r;
    r.kind = Kind::Disk;
    r.center = c;
    r.radius = rad;
    return r;
}

ReferenceSpectrum ReferenceSpectrum::annulus(double inner, double outer) {
    if (inner < 0 || outer < inner) throw ConfigError("malformed annulus");
    ReferenceSpectrum r;
    r.kind = Kind::Annulus;
    r.inner = inner;
    r.outer = outer;
    return r;
}

ReferenceSpectrum ReferenceSpectrum::unite(std::vector<ReferenceSpectrum> parts) {
    ReferenceSpectrum r;
    r.kind = Kind::Union;
    r.parts = std::move(parts);
    return r;
}

namespace {

void ring(PointSet& out, std::complex<double> c, double rad, double r) {
    if (rad == 0.0) {
        out.push_back(c);
        return;
    }
    auto m = static_cast<long>(std::ceil(2.0 * kPi * rad / r));
    m = std::max(m, 1L);
    for (long k = 0; k < m; ++k) out.push_back(c + std::polar(rad, 2.0 * kPi * static_cast<double>(k) / static_cast<double>(m)));
}

void rings(PointSet& out, std::complex<double> c, double a, double b, double r) {
    if (b == a) {
        ring(out, c, a, r);
        return;
    }
    auto j = static_cast<long>(std::ceil((b - a) / r));
    for (long k = 0; k <= j; ++k) ring(out, c, a + (b - a) * static_cast<double>(k) / static_cast<double>(j), r);
}

}  // namespace

PointSet ReferenceSpectrum::sample(double r) const {
    if (!(r > 0)) throw ConfigError("sampling radius must be positive");
    PointSet out;
    switch (kind) {
        case Kind::FiniteSet: out = points; break;
        case Kind::Disk: rings(out, center, 0.0, radius, r); break;
        case Kind::Annulus: rings(out, 0.0, inner, outer, r); break;
        case Kind::Union:
            for (const auto& p : parts) {
                auto s = p.sample(r);
                out.insert(out.end(), s.begin(), s.end());
            }
            break;
    }
    return out;
}

std::string ReferenceSpectrum::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::FiniteSet: os << "finite(" << points.size() << ")"; break;
        case Kind::Disk: os << "disk(" << center.real() << "," << center.imag() << ";" << radius << ")"; break;
        case Kind::Annulus: os << "annulus(" << inner << "," << outer << ")"; break;
        case Kind::Union:
            os << "union(";
            for (std::size_t i = 0; i < parts.size(); ++i) os << (i ? "," : "") << parts[i].describe();
            os << ")";
    }
    return os.str();
}

PointSet roots_of_unity(long q) {
    if (q < 1) throw ConfigError("root order must be positive");
    PointSet out;
    for (long k = 0; k < q; ++k) out.push_back(std::polar(1.0, 2.0 * kPi * static_cast<double>(k) / static_cast<double>(q)));
    return out;
}

ReferenceSpectrum rotation_reference(long p, long q, double eps, bool* reduced) {
    if (q <= 0) throw ConfigError("rotation denominator must be positive");
    if (eps < 0) throw ConfigError("negative epsilon");
    long g = std::gcd(p, q);
    if (reduced) *reduced = g != 1;
    q /= g;
    PointSet roots = roots_of_unity(q);
    if (eps == 0.0) return ReferenceSpectrum::finite(roots);
    std::vector<ReferenceSpectrum> parts;
    for (auto z : roots) parts.push_back(ReferenceSpectrum::disk(z, eps));
    return ReferenceSpectrum::unite(std::move(parts));
}

ReferenceSpectrum rotation_reference(const Rational& theta, double eps) {
    Integer q = denominator(theta);
    Integer p = numerator(theta) % q;
    return rotation_reference(static_cast<long>(p), static_cast<long>(q), eps);
}

ReferenceSpectrum irrational_rotation_reference(double eps) {
    if (eps < 0) throw ConfigError("negative epsilon");
    return ReferenceSpectrum::annulus(std::max(0.0, 1.0 - eps), 1.0 + eps);
}

double sigma_inf_rotation_exact(std::complex<double> z) { return std::abs(std::abs(z) - 1.0); }

namespace {

// Uniform bucket grid over a point set for nearest-neighbour queries.
class BucketGrid {
public:
    explicit BucketGrid(const PointSet& pts) : pts_(pts) {
        double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
        for (auto p : pts) {
            x0 = std::min(x0, p.real());
            x1 = std::max(x1, p.real());
            y0 = std::min(y0, p.imag());
            y1 = std::max(y1, p.imag());
        }
        ox_ = x0;
        oy_ = y0;
        double span = std::max({x1 - x0, y1 - y0, 1e-12});
        auto side = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(pts.size()))));
        side = std::clamp(side, 1L, 2048L);
        cell_ = span / static_cast<double>(side) * (1.0 + 1e-9);
        nx_ = static_cast<long>((x1 - x0) / cell_) + 1;
        ny_ = static_cast<long>((y1 - y0) / cell_) + 1;
        start_.assign(static_cast<std::size_t>(nx_ * ny_ + 1), 0);
        std::vector<long> key(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            key[i] = index(cx(pts[i].real()), cy(pts[i].imag()));
            ++start_[static_cast<std::size_t>(key[i] + 1)];
        }
        std::partial_sum(start_.begin(), start_.end(), start_.begin());
        items_.resize(pts.size());
        std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
        for (std::size_t i = 0; i < pts.size(); ++i) items_[fill[static_cast<std::size_t>(key[i])]++] = i;
    }

    double nearest(std::complex<double> q) const {
        long qx = cx(q.real()), qy = cy(q.imag());
        long dx = qx < 0 ? -qx : (qx >= nx_ ? qx - nx_ + 1 : 0);
        long dy = qy < 0 ? -qy : (qy >= ny_ ? qy - ny_ + 1 : 0);
        long r0 = std::max(dx, dy);
        double best = std::numeric_limits<double>::infinity();
        auto scan = [&](long ix, long iy) {
            if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return;
            long k = ix * ny_ + iy;
            for (std::size_t t = start_[static_cast<std::size_t>(k)]; t < start_[static_cast<std::size_t>(k + 1)]; ++t)
                best = std::min(best, std::abs(pts_[items_[t]] - q));
        };
        for (long r = r0; r <= r0 + nx_ + ny_ + 1; ++r) {
            for (long ix = std::max(qx - r, 0L); ix <= std::min(qx + r, nx_ - 1); ++ix) {
                if (ix == qx - r || ix == qx + r) {
                    for (long iy = std::max(qy - r, 0L); iy <= std::min(qy + r, ny_ - 1); ++iy) scan(ix, iy);
                } else {
                    scan(ix, qy - r);
                    if (r > 0) scan(ix, qy + r);
                }
            }
            // Cells beyond ring r are at least r*cell away from the query's cell.
            if (best <= static_cast<double>(r) * cell_) break;
        }
        return best;
    }

private:
    long cx(double x) const { return static_cast<long>(std::floor((x - ox_) / cell_)); }
    long cy(double y) const { return static_cast<long>(std::floor((y - oy_) / cell_)); }
    long index(long ix, long iy) const {
        ix = std::clamp(ix, 0L, nx_ - 1);
        iy = std::clamp(iy, 0L, ny_ - 1);
        return ix * ny_ + iy;
    }

    const PointSet& pts_;
    double ox_ = 0, oy_ = 0, cell_ = 1;
    long nx_ = 1, ny_ = 1;
    std::vector<std::size_t> start_, items_;
};

}  // namespace

double directed_hausdorff(const PointSet& a, const PointSet& b) {
    if (a.empty() || b.empty()) throw EmptyInput("Hausdorff distance needs nonempty sets");
    BucketGrid g(b);
    double d = 0.0;
    for (auto p : a) d = std::max(d, g.nearest(p));
    return d;
}

double hausdorff(const PointSet& a, const PointSet& b) {
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

double gap_formula(long q, double eps) {
    if (q < 2) throw ConfigError("gap formula needs q >= 2");
    if (eps < 0) throw ConfigError("negative epsilon");
    double rq = 2.0 * std::sin(kPi / (2.0 * static_cast<double>(q)));
    return std::max(eps, std::max(0.0, rq - eps));
}

bool is_prime(long n) {
    if (n < 2) return false;
    for (long d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

long nth_prime(int n) {
    if (n < 1) throw ConfigError("prime index starts at 1");
    long c = 1;
    for (int k = 0; k < n;) {
        ++c;
        if (is_prime(c)) ++k;
    }
    return c;
}

namespace {

// |e^{2 pi i m/p} - e^{2 pi i r/q}| = 2|sin(pi (mq - rp)/(pq))| with an exact numerator.
double root_gap(long m, long p, long r, long q) {
    long num = m * q - r * p;
    long den = p * q;
    num %= den;
    if (num < 0) num += den;
    return 2.0 * std::sin(kPi * static_cast<double>(num) / static_cast<double>(den));
}

double min_for_q(long p, long q) {
    double best = std::numeric_limits<double>::infinity();
    for (long m = 1; m < p; ++m)
        for (long r = 0; r < q; ++r) best = std::min(best, std::abs(root_gap(m, p, r, q)));
    return best;
}

}  // namespace

DiophantineCheck diophantine_margin(long p, long D) {
    if (!is_prime(p)) throw NotPrime(std::to_string(p) + " is not prime");
    if (D < 1 || D >= p) throw ConfigError("need 1 <= D < p");
    DiophantineCheck c;
    c.p = p;
    c.D = D;
    c.bound = 4.0 / static_cast<double>(p * D);
    c.true_min = std::numeric_limits<double>::infinity();
    for (long q = 1; q <= D; ++q) c.true_min = std::min(c.true_min, min_for_q(p, q));
    return c;
}

DiophantineSweep diophantine_sweep(long pmax) {
    DiophantineSweep s;
    s.worst_ratio = std::numeric_limits<double>::infinity();
    for (long p = 2; p <= pmax; ++p) {
        if (!is_prime(p)) continue;
        double running = std::numeric_limits<double>::infinity();
        for (long D = 1; D < p; ++D) {
            running = std::min(running, min_for_q(p, D));
            double bound = 4.0 / static_cast<double>(p * D);
            ++s.cases;
            if (running < bound) ++s.violations;
            s.worst_ratio = std::min(s.worst_ratio, running / bound);
        }
    }
    return s;
}

}  // namespace koop
