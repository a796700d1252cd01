#include "incpref/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace incpref {

namespace {

void require_same_dim(const Box& a, const Box& b, const char* op) {
    if (a.dim() != b.dim())
        throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                    std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()) + ")");
}

}  // namespace

Box::Box(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size())
        throw std::invalid_argument("Box: lo/hi size mismatch");
    if (lo_.empty())
        throw std::invalid_argument("Box: zero dimension");
    for (std::size_t k = 0; k < lo_.size(); ++k) {
        if (std::isnan(lo_[k]) || std::isnan(hi_[k]))
            throw std::invalid_argument("Box: NaN bound");
        if (lo_[k] > hi_[k])
            throw std::invalid_argument("Box: lo > hi in coordinate " + std::to_string(k));
    }
}

Box Box::point(std::vector<double> p) {
    std::vector<double> q = p;
    return Box(std::move(p), std::move(q));
}

Box Box::interval(double lo, double hi) { return Box({lo}, {hi}); }

bool Box::contains(std::span<const double> p, double tol) const {
    if (p.size() != dim()) throw std::invalid_argument("Box::contains: dimension mismatch");
    for (std::size_t k = 0; k < dim(); ++k)
        if (p[k] < lo_[k] - tol || p[k] > hi_[k] + tol) return false;
    return true;
}

bool Box::contains(const Box& other, double tol) const {
    require_same_dim(*this, other, "Box::contains");
    for (std::size_t k = 0; k < dim(); ++k)
        if (other.lo_[k] < lo_[k] - tol || other.hi_[k] > hi_[k] + tol) return false;
    return true;
}

bool Box::is_singleton(double tol) const {
    for (std::size_t k = 0; k < dim(); ++k)
        if (!(hi_[k] - lo_[k] < tol)) return false;
    return true;
}

std::vector<std::vector<double>> Box::vertices() const {
    const std::size_t d = dim();
    const std::size_t n = std::size_t{1} << d;
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < d; ++k) out[m][k] = (m >> k & 1u) ? hi_[k] : lo_[k];
    return out;
}

Box minkowski_sum(const Box& a, const Box& b) {
    require_same_dim(a, b, "minkowski_sum");
    std::vector<double> lo(a.dim()), hi(a.dim());
    for (std::size_t k = 0; k < a.dim(); ++k) {
        lo[k] = a.lo(k) + b.lo(k);
        hi[k] = a.hi(k) + b.hi(k);
    }
    return Box(std::move(lo), std::move(hi));
}

Box minkowski_sum(const MaybeBox& a, const MaybeBox& b) {
    if (!a || !b) throw std::invalid_argument("minkowski_sum: empty operand");
    return minkowski_sum(*a, *b);
}

MaybeBox intersect(const Box& a, const Box& b) {
    require_same_dim(a, b, "intersect");
    std::vector<double> lo(a.dim()), hi(a.dim());
    for (std::size_t k = 0; k < a.dim(); ++k) {
        lo[k] = std::max(a.lo(k), b.lo(k));
        hi[k] = std::min(a.hi(k), b.hi(k));
        if (lo[k] > hi[k]) return std::nullopt;
    }
    return Box(std::move(lo), std::move(hi));
}

MaybeBox intersect(const MaybeBox& a, const MaybeBox& b) {
    if (!a || !b) return std::nullopt;
    return intersect(*a, *b);
}

Box bounding_hull(std::span<const Box> boxes, bool strict) {
    if (boxes.empty()) throw std::invalid_argument("bounding_hull: empty list");
    std::vector<double> lo = boxes[0].lo(), hi = boxes[0].hi();
    for (const Box& b : boxes.subspan(1)) {
        require_same_dim(boxes[0], b, "bounding_hull");
        for (std::size_t k = 0; k < lo.size(); ++k) {
            lo[k] = std::min(lo[k], b.lo(k));
            hi[k] = std::max(hi[k], b.hi(k));
        }
    }
    Box hull(std::move(lo), std::move(hi));
    if (strict) {
        bool found = false;
        for (const Box& b : boxes)
            if (b == hull) found = true;
        // a nested family has its largest member equal to the hull
        if (!found) throw std::logic_error("bounding_hull: family is not nested");
    }
    return hull;
}

Box bounding_hull(const Box& a, const Box& b) {
    const Box pair[2] = {a, b};
    return bounding_hull(std::span<const Box>(pair, 2));
}

Box bounding_box(std::span<const std::vector<double>> points) {
    if (points.empty()) throw std::invalid_argument("bounding_box: no points");
    std::vector<double> lo = points[0], hi = points[0];
    for (const auto& p : points) {
        if (p.size() != lo.size()) throw std::invalid_argument("bounding_box: dimension mismatch");
        for (std::size_t k = 0; k < lo.size(); ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    return Box(std::move(lo), std::move(hi));
}

std::vector<double> project(std::span<const double> p, const Box& b) {
    if (p.size() != b.dim()) throw std::invalid_argument("project: dimension mismatch");
    std::vector<double> q(p.begin(), p.end());
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::clamp(q[k], b.lo(k), b.hi(k));
    return q;
}

double distance(std::span<const double> p, const Box& b) {
    if (p.size() != b.dim()) throw std::invalid_argument("distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double q = std::clamp(p[k], b.lo(k), b.hi(k));
        s += (p[k] - q) * (p[k] - q);
    }
    return std::sqrt(s);
}

double hausdorff(const Box& a, const Box& b) {
    require_same_dim(a, b, "hausdorff");
    if (a.dim() > 16) throw std::invalid_argument("hausdorff: dimension too large for vertex enumeration");
    // Shared infinite ends are cut at a common finite level beyond every finite bound,
    // which leaves the distance unchanged.
    std::vector<double> alo = a.lo(), ahi = a.hi(), blo = b.lo(), bhi = b.hi();
    for (std::size_t k = 0; k < a.dim(); ++k) {
        if (std::isinf(alo[k]) || std::isinf(blo[k])) {
            if (alo[k] != blo[k]) return std::numeric_limits<double>::infinity();
        }
        if (std::isinf(ahi[k]) || std::isinf(bhi[k])) {
            if (ahi[k] != bhi[k]) return std::numeric_limits<double>::infinity();
        }
        double fmin = 0.0, fmax = 0.0;
        for (double v : {alo[k], ahi[k], blo[k], bhi[k]})
            if (std::isfinite(v)) {
                fmin = std::min(fmin, v);
                fmax = std::max(fmax, v);
            }
        if (std::isinf(alo[k])) alo[k] = blo[k] = fmin - 1.0;
        if (std::isinf(ahi[k])) ahi[k] = bhi[k] = fmax + 1.0;
    }
    const Box fa(alo, ahi), fb(blo, bhi);
    double h = 0.0;
    for (const auto& v : fa.vertices()) h = std::max(h, distance(v, fb));
    for (const auto& v : fb.vertices()) h = std::max(h, distance(v, fa));
    return h;
}

}  // namespace incpref
