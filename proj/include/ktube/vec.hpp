#pragma once

#include <array>
#include <cassert>
#include <cmath>

namespace ktube {

inline constexpr int kMaxDim = 8;

// Small fixed-capacity vector for points/directions in R^d, d <= 8.
// Component 0 is the axial coordinate (along the tube axis e);
// components 1..d-1 are the transverse part.
class Vec {
public:
    Vec() = default;
    explicit Vec(int dim) : dim_(dim) { assert(dim >= 0 && dim <= kMaxDim); }

    static Vec zero(int dim) { return Vec(dim); }

    static Vec axis(int dim, int k, double v = 1.0) {
        Vec r(dim);
        r[k] = v;
        return r;
    }

    int dim() const { return dim_; }

    double& operator[](int i) { return c_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return c_[static_cast<size_t>(i)]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < dim_; ++i) c_[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }

    double dot(const Vec& o) const {
        double s = 0;
        for (int i = 0; i < dim_; ++i) s += c_[i] * o.c_[i];
        return s;
    }

    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }

    Vec normalized() const {
        Vec r = *this;
        double n = norm();
        if (n > 0) r *= 1.0 / n;
        return r;
    }

    // Squared norm of the transverse part (components 1..d-1).
    double transverse_norm2() const {
        double s = 0;
        for (int i = 1; i < dim_; ++i) s += c_[i] * c_[i];
        return s;
    }
    double transverse_norm() const { return std::sqrt(transverse_norm2()); }

    double axial() const { return c_[0]; }

private:
    std::array<double, kMaxDim> c_{};
    int dim_ = 0;
};

inline double distance(const Vec& a, const Vec& b) { return (a - b).norm(); }

}  // namespace ktube
