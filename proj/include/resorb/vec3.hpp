#ifndef RESORB_VEC3_HPP
#define RESORB_VEC3_HPP

#include <cmath>

namespace resorb {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

struct Vec2 {
    double u = 0, v = 0;

    Vec2 operator+(const Vec2& o) const { return {u + o.u, v + o.v}; }
    Vec2 operator-(const Vec2& o) const { return {u - o.u, v - o.v}; }
    Vec2 operator*(double s) const { return {u * s, v * s}; }
    Vec2 operator-() const { return {-u, -v}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.u * b.u + a.v * b.v; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }

// Symmetric 2x2 matrix [[a11, a12], [a12, a22]].
struct Sym2 {
    double a11 = 0, a12 = 0, a22 = 0;

    double det() const { return a11 * a22 - a12 * a12; }
    double trace() const { return a11 + a22; }
    Vec2 mul(const Vec2& w) const { return {a11 * w.u + a12 * w.v, a12 * w.u + a22 * w.v}; }
    double quad(const Vec2& w) const { return dot(w, mul(w)); }

    // Eigenvalues, ascending.
    void eigenvalues(double& lo, double& hi) const {
        double m = 0.5 * trace();
        double r = std::sqrt(std::fmax(m * m - det(), 0.0));
        lo = m - r;
        hi = m + r;
    }

    Sym2 operator*(double s) const { return {a11 * s, a12 * s, a22 * s}; }
    Sym2 operator+(const Sym2& o) const { return {a11 + o.a11, a12 + o.a12, a22 + o.a22}; }
    Sym2 operator-(const Sym2& o) const { return {a11 - o.a11, a12 - o.a12, a22 - o.a22}; }
};

// Principal square root of an SPD matrix: A^(1/2) = (A + sqrt(det A) I)/sqrt(tr A + 2 sqrt(det A)).
inline Sym2 spd_sqrt(const Sym2& a) {
    double s = std::sqrt(a.det());
    double t = std::sqrt(a.trace() + 2.0 * s);
    return {(a.a11 + s) / t, a.a12 / t, (a.a22 + s) / t};
}

inline Sym2 sym2_inverse(const Sym2& a) {
    double d = a.det();
    return {a.a22 / d, -a.a12 / d, a.a11 / d};
}

// General 2x2 matrix, row-major.
struct Mat2 {
    double m11 = 0, m12 = 0, m21 = 0, m22 = 0;

    double det() const { return m11 * m22 - m12 * m21; }
    Vec2 mul(const Vec2& w) const { return {m11 * w.u + m12 * w.v, m21 * w.u + m22 * w.v}; }
    Mat2 inverse() const {
        double d = det();
        return {m22 / d, -m12 / d, -m21 / d, m11 / d};
    }
    Mat2 transpose() const { return {m11, m21, m12, m22}; }
    Mat2 operator*(const Mat2& o) const {
        return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22,
                m21 * o.m11 + m22 * o.m21, m21 * o.m12 + m22 * o.m22};
    }
};

// B = M^T S M for symmetric S.
inline Sym2 congruence(const Mat2& m, const Sym2& s) {
    // columns of M
    Vec2 c1{m.m11, m.m21}, c2{m.m12, m.m22};
    return {s.quad(c1), dot(c1, s.mul(c2)), s.quad(c2)};
}

} // namespace resorb

#endif
