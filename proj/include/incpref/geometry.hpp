#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace incpref {

// Axis-aligned box [lo, hi] in R^d. Bounds may be infinite (e.g. R_+ = [0, inf)).
class Box {
public:
    Box() = default;
    Box(std::vector<double> lo, std::vector<double> hi);

    static Box point(std::vector<double> p);
    static Box interval(double lo, double hi);

    std::size_t dim() const { return lo_.size(); }
    double lo(std::size_t k) const { return lo_[k]; }
    double hi(std::size_t k) const { return hi_[k]; }
    const std::vector<double>& lo() const { return lo_; }
    const std::vector<double>& hi() const { return hi_; }
    double width(std::size_t k) const { return hi_[k] - lo_[k]; }

    bool contains(std::span<const double> p, double tol = 0.0) const;
    bool contains(const Box& other, double tol = 0.0) const;
    // every side shorter than tol
    bool is_singleton(double tol = 1e-12) const;

    // 2^d corner points (duplicates kept for degenerate sides)
    std::vector<std::vector<double>> vertices() const;

    friend bool operator==(const Box&, const Box&) = default;

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
};

// Empty is represented by std::nullopt.
using MaybeBox = std::optional<Box>;

Box minkowski_sum(const Box& a, const Box& b);
Box minkowski_sum(const MaybeBox& a, const MaybeBox& b);
MaybeBox intersect(const Box& a, const Box& b);
MaybeBox intersect(const MaybeBox& a, const MaybeBox& b);

// Componentwise hull. Exact convex hull of the union only for nested families;
// with strict = true a non-nested family throws.
Box bounding_hull(std::span<const Box> boxes, bool strict = false);
Box bounding_hull(const Box& a, const Box& b);

// Bounding box of a finite point cloud.
Box bounding_box(std::span<const std::vector<double>> points);

std::vector<double> project(std::span<const double> p, const Box& b);
double distance(std::span<const double> p, const Box& b);
double hausdorff(const Box& a, const Box& b);

}  // namespace incpref
