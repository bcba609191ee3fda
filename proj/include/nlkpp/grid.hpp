#pragma once

#include <Eigen/Core>

#include "nlkpp/errors.hpp"

namespace nlkpp {

struct Point {
    double x = 0.0;
    double y = 0.0;  // ignored when dimension == 1
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }

// Uniform grid sampling of a scalar function, dimension 1 or 2.
// Periodic fields wrap; truncated fields store an explicit halo ring so
// nonlocal stencils can read past the logical box without wrapping.
struct GridField {
    int dim = 1;
    double h = 1.0;
    int n1 = 0, n2 = 1;      // logical extents (n2 == 1 in 1-D)
    double x0 = 0.0, y0 = 0.0;  // coordinates of logical node (0,0)
    bool periodic = true;
    int halo = 0;            // stored ring beyond the logical box (truncated fields)
    Eigen::ArrayXd vals;     // row-major over stored extents

    int s1() const { return n1 + 2 * halo; }
    int s2() const { return dim == 2 ? n2 + 2 * halo : 1; }

    static int wrap(int i, int n) {
        int r = i % n;
        return r < 0 ? r + n : r;
    }

    // Storage index for logical (i,j); i in [-halo, n1+halo) unless periodic.
    Eigen::Index idx(int i, int j = 0) const {
        if (periodic) {
            i = wrap(i, n1);
            j = dim == 2 ? wrap(j, n2) : 0;
            return static_cast<Eigen::Index>(i) * s2() + j;
        }
        if (i < -halo || i >= n1 + halo || (dim == 2 && (j < -halo || j >= n2 + halo)))
            throw HaloMissing("grid access outside stored halo");
        return static_cast<Eigen::Index>(i + halo) * s2() + (dim == 2 ? j + halo : 0);
    }

    double at(int i, int j = 0) const { return vals[idx(i, j)]; }
    double& at(int i, int j = 0) { return vals[idx(i, j)]; }

    double x(int i) const { return x0 + i * h; }
    double y(int j) const { return y0 + j * h; }
    Point node(int i, int j = 0) const { return {x(i), dim == 2 ? y(j) : 0.0}; }
};

inline GridField make_periodic_field(int dim, double h, int n1, int n2 = 1,
                                     double x0 = 0.0, double y0 = 0.0) {
    if (dim != 1 && dim != 2) throw InvalidParam("dimension must be 1 or 2");
    if (h <= 0 || n1 <= 0 || (dim == 2 && n2 <= 0)) throw InvalidParam("bad grid extents");
    GridField f;
    f.dim = dim;
    f.h = h;
    f.n1 = n1;
    f.n2 = dim == 2 ? n2 : 1;
    f.x0 = x0;
    f.y0 = y0;
    f.periodic = true;
    f.halo = 0;
    f.vals = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(f.n1) * f.s2());
    return f;
}

inline GridField make_halo_field(int dim, double h, int n1, int n2, int halo,
                                 double x0 = 0.0, double y0 = 0.0) {
    if (dim != 1 && dim != 2) throw InvalidParam("dimension must be 1 or 2");
    if (h <= 0 || n1 <= 0 || (dim == 2 && n2 <= 0) || halo < 0)
        throw InvalidParam("bad grid extents");
    GridField f;
    f.dim = dim;
    f.h = h;
    f.n1 = n1;
    f.n2 = dim == 2 ? n2 : 1;
    f.x0 = x0;
    f.y0 = y0;
    f.periodic = false;
    f.halo = halo;
    f.vals = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(f.s1()) * f.s2());
    return f;
}

}  // namespace nlkpp
