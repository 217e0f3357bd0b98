# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled strip assembly kernels.

Semantics mirror ``_fallback.py`` exactly; see that module for the math.
"""

import numpy as np

from libc.math cimport sqrt

from ..errors import DegenerateGeometryError

DEGENERACY_REL_TOL = 1e-12


cdef inline double _dot2(double ax, double ay, double bx, double by) nogil:
    return ax * bx + ay * by


def energy_terms(q, double dl, double ks, double kb, masses, gravity):
    """Stretching, bending and gravity energies as a 3-tuple [J]."""
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(masses, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gravity, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0]
    cdef Py_ssize_t i
    cdef double ex, ey, fx, fy, le, lf, strain, chi, cross, kh
    cdef double e_s = 0.0, e_b = 0.0, e_g = 0.0
    cdef double tol = DEGENERACY_REL_TOL * dl

    for i in range(n - 1):
        ex = qv[i + 1, 0] - qv[i, 0]
        ey = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        if le < tol:
            raise DegenerateGeometryError(
                f"edge collapsed: length {le:.3e} at rest length {dl:.3e}")
        strain = 1.0 - le / dl
        e_s += strain * strain
    e_s *= 0.5 * ks * dl

    for i in range(1, n - 1):
        ex = qv[i, 0] - qv[i - 1, 0]
        ey = qv[i, 1] - qv[i - 1, 1]
        fx = qv[i + 1, 0] - qv[i, 0]
        fy = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        lf = sqrt(fx * fx + fy * fy)
        chi = 1.0 + _dot2(ex / le, ey / le, fx / lf, fy / lf)
        cross = (ex / le) * (fy / lf) - (ey / le) * (fx / lf)
        kh = 2.0 * cross / chi
        e_b += kh * kh
    e_b *= 0.5 * kb / dl

    for i in range(n):
        e_g -= mv[i] * (gv[0] * qv[i, 0] + gv[1] * qv[i, 1])

    return float(e_s), float(e_b), float(e_g)


def gradient(q, double dl, double ks, double kb, masses, gravity):
    """Gradient of the total energy w.r.t. all node coordinates, flat (2n,)."""
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(masses, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gravity, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0]
    out = np.zeros(2 * n)
    cdef double[::1] go = out
    cdef Py_ssize_t i
    cdef double ex, ey, fx, fy, le, lf, coeff, chi, cross, kh
    cdef double tax, tay, tbx, tby, tlx, tly, two_chi, c_over
    cdef double dosx, dosy  # d kh / d e (prev edge)
    cdef double dofx, dofy  # d kh / d f (next edge)
    cdef double tol = DEGENERACY_REL_TOL * dl

    for i in range(n - 1):
        ex = qv[i + 1, 0] - qv[i, 0]
        ey = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        if le < tol:
            raise DegenerateGeometryError(
                f"edge collapsed: length {le:.3e} at rest length {dl:.3e}")
        coeff = -ks * (1.0 - le / dl) / le
        go[2 * i + 2] += coeff * ex
        go[2 * i + 3] += coeff * ey
        go[2 * i] -= coeff * ex
        go[2 * i + 1] -= coeff * ey

    for i in range(1, n - 1):
        ex = qv[i, 0] - qv[i - 1, 0]
        ey = qv[i, 1] - qv[i - 1, 1]
        fx = qv[i + 1, 0] - qv[i, 0]
        fy = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        lf = sqrt(fx * fx + fy * fy)
        tax = ex / le; tay = ey / le
        tbx = fx / lf; tby = fy / lf
        chi = 1.0 + tax * tbx + tay * tby
        cross = tax * tby - tay * tbx
        kh = 2.0 * cross / chi
        tlx = (tax + tbx) / chi
        tly = (tay + tby) / chi
        two_chi = 2.0 / chi
        # perp(v) = (v_y, -v_x)
        dosx = (-kh * tlx + two_chi * tby) / le
        dosy = (-kh * tly - two_chi * tbx) / le
        dofx = (-kh * tlx - two_chi * tay) / lf
        dofy = (-kh * tly + two_chi * tax) / lf
        c_over = (kb / dl) * kh
        go[2 * i - 2] -= c_over * dosx
        go[2 * i - 1] -= c_over * dosy
        go[2 * i] += c_over * (dosx - dofx)
        go[2 * i + 1] += c_over * (dosy - dofy)
        go[2 * i + 2] += c_over * dofx
        go[2 * i + 3] += c_over * dofy

    for i in range(n):
        go[2 * i] -= mv[i] * gv[0]
        go[2 * i + 1] -= mv[i] * gv[1]
    return out


cdef void _angle_second_derivative(
    double tax, double tay, double tbx, double tby,
    double le, double lf, double chi, double kh,
    double* h,
) nogil:
    """6x6 second derivative of kh over the (a, b, c) node coordinates."""
    cdef double tlx = (tax + tbx) / chi
    cdef double tly = (tay + tby) / chi
    cdef double two_chi = 2.0 / chi
    cdef double pax = tay, pay = -tax
    cdef double pbx = tby, pby = -tbx
    cdef double dee[2][2]
    cdef double dff[2][2]
    cdef double def_[2][2]
    cdef double tl[2]
    cdef double pa[2]
    cdef double pb[2]
    cdef double ta[2]
    cdef double tb[2]
    cdef Py_ssize_t r, c
    cdef double kc = kh / chi

    tl[0] = tlx; tl[1] = tly
    pa[0] = pax; pa[1] = pay
    pb[0] = pbx; pb[1] = pby
    ta[0] = tax; ta[1] = tay
    tb[0] = tbx; tb[1] = tby

    for r in range(2):
        for c in range(2):
            dee[r][c] = (2.0 * kh * tl[r] * tl[c]
                         - two_chi * (pb[r] * tl[c] + tl[r] * pb[c])
                         - kc * ((1.0 if r == c else 0.0) - ta[r] * ta[c])) / (le * le)
            dff[r][c] = (2.0 * kh * tl[r] * tl[c]
                         + two_chi * (pa[r] * tl[c] + tl[r] * pa[c])
                         - kc * ((1.0 if r == c else 0.0) - tb[r] * tb[c])) / (lf * lf)
            def_[r][c] = (-kc * ((1.0 if r == c else 0.0) + ta[r] * tb[c])
                          + 2.0 * kh * tl[r] * tl[c]
                          - two_chi * pb[r] * tl[c]
                          + two_chi * tl[r] * pa[c]) / (le * lf)
    # -(2/chi) * ROT90 term of the mixed block (ROT90 = [[0,-1],[1,0]])
    def_[0][1] += two_chi / (le * lf)
    def_[1][0] -= two_chi / (le * lf)

    for r in range(2):
        for c in range(2):
            h[6 * r + c] = dee[r][c]
            h[6 * r + (2 + c)] = -dee[r][c] + def_[r][c]
            h[6 * r + (4 + c)] = -def_[r][c]
            h[6 * (2 + r) + c] = -dee[r][c] + def_[c][r]
            h[6 * (2 + r) + (2 + c)] = dee[r][c] - def_[r][c] - def_[c][r] + dff[r][c]
            h[6 * (2 + r) + (4 + c)] = def_[r][c] - dff[r][c]
            h[6 * (4 + r) + c] = -def_[c][r]
            h[6 * (4 + r) + (2 + c)] = def_[c][r] - dff[r][c]
            h[6 * (4 + r) + (4 + c)] = dff[r][c]


def hessian_band(q, double dl, double ks, double kb):
    """Banded Hessian of the elastic energy, LAPACK lower form (6, 2n)."""
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0]
    out = np.zeros((6, 2 * n))
    cdef double[:, ::1] ab = out
    cdef Py_ssize_t i, r, c, base
    cdef double ex, ey, fx, fy, le, lf, strain, chi, cross, kh
    cdef double tax, tay, tbx, tby, tlx, tly, two_chi
    cdef double k_edge[2][2]
    cdef double block4[4][4]
    cdef double h6[6][6]
    cdef double g6[6]
    cdef double dosx, dosy, dofx, dofy, scale
    cdef double diag_term, offd
    cdef double tol = DEGENERACY_REL_TOL * dl

    for i in range(n - 1):
        ex = qv[i + 1, 0] - qv[i, 0]
        ey = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        if le < tol:
            raise DegenerateGeometryError(
                f"edge collapsed: length {le:.3e} at rest length {dl:.3e}")
        tax = ex / le; tay = ey / le
        strain = 1.0 - le / dl
        # k_edge = ks/dl * t t^T - ks*strain/le * (I - t t^T)
        k_edge[0][0] = (ks / dl) * tax * tax - (ks * strain / le) * (1.0 - tax * tax)
        k_edge[0][1] = (ks / dl) * tax * tay - (ks * strain / le) * (-tax * tay)
        k_edge[1][0] = k_edge[0][1]
        k_edge[1][1] = (ks / dl) * tay * tay - (ks * strain / le) * (1.0 - tay * tay)
        for r in range(2):
            for c in range(2):
                block4[r][c] = k_edge[r][c]
                block4[r][2 + c] = -k_edge[r][c]
                block4[2 + r][c] = -k_edge[r][c]
                block4[2 + r][2 + c] = k_edge[r][c]
        base = 2 * i
        for r in range(4):
            for c in range(r + 1):
                ab[r - c, base + c] += 0.5 * (block4[r][c] + block4[c][r])

    for i in range(1, n - 1):
        ex = qv[i, 0] - qv[i - 1, 0]
        ey = qv[i, 1] - qv[i - 1, 1]
        fx = qv[i + 1, 0] - qv[i, 0]
        fy = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        lf = sqrt(fx * fx + fy * fy)
        tax = ex / le; tay = ey / le
        tbx = fx / lf; tby = fy / lf
        chi = 1.0 + tax * tbx + tay * tby
        cross = tax * tby - tay * tbx
        kh = 2.0 * cross / chi
        tlx = (tax + tbx) / chi
        tly = (tay + tby) / chi
        two_chi = 2.0 / chi
        dosx = (-kh * tlx + two_chi * tby) / le
        dosy = (-kh * tly - two_chi * tbx) / le
        dofx = (-kh * tlx - two_chi * tay) / lf
        dofy = (-kh * tly + two_chi * tax) / lf
        g6[0] = -dosx; g6[1] = -dosy
        g6[2] = dosx - dofx; g6[3] = dosy - dofy
        g6[4] = dofx; g6[5] = dofy
        _angle_second_derivative(tax, tay, tbx, tby, le, lf, chi, kh, &h6[0][0])
        scale = kb / dl
        base = 2 * (i - 1)
        for r in range(6):
            for c in range(r + 1):
                diag_term = g6[r] * g6[c] + kh * 0.5 * (h6[r][c] + h6[c][r])
                ab[r - c, base + c] += scale * diag_term
    return out


def curvature_measures(q, double dl):
    """Tan-half-angle measure kh_i at interior nodes 1..n-2, shape (n-2,)."""
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0]
    out = np.empty(n - 2)
    cdef double[::1] kv = out
    cdef Py_ssize_t i
    cdef double ex, ey, fx, fy, le, lf, chi, cross
    cdef double tol = DEGENERACY_REL_TOL * dl
    for i in range(1, n - 1):
        ex = qv[i, 0] - qv[i - 1, 0]
        ey = qv[i, 1] - qv[i - 1, 1]
        fx = qv[i + 1, 0] - qv[i, 0]
        fy = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        lf = sqrt(fx * fx + fy * fy)
        if le < tol or lf < tol:
            raise DegenerateGeometryError(
                f"edge collapsed at interior node {i}")
        chi = 1.0 + (ex * fx + ey * fy) / (le * lf)
        cross = (ex * fy - ey * fx) / (le * lf)
        kv[i - 1] = 2.0 * cross / chi
    return out


def curvature_measures_with_gradients(q, double dl):
    """Interior-node measure and its per-angle 6-gradient: (n-2,), (n-2, 6)."""
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0]
    kh_out = np.empty(n - 2)
    g_out = np.empty((n - 2, 6))
    cdef double[::1] kv = kh_out
    cdef double[:, ::1] gv = g_out
    cdef Py_ssize_t i
    cdef double ex, ey, fx, fy, le, lf, chi, cross, kh
    cdef double tax, tay, tbx, tby, tlx, tly, two_chi
    cdef double dosx, dosy, dofx, dofy
    cdef double tol = DEGENERACY_REL_TOL * dl
    for i in range(1, n - 1):
        ex = qv[i, 0] - qv[i - 1, 0]
        ey = qv[i, 1] - qv[i - 1, 1]
        fx = qv[i + 1, 0] - qv[i, 0]
        fy = qv[i + 1, 1] - qv[i, 1]
        le = sqrt(ex * ex + ey * ey)
        lf = sqrt(fx * fx + fy * fy)
        if le < tol or lf < tol:
            raise DegenerateGeometryError(
                f"edge collapsed at interior node {i}")
        tax = ex / le; tay = ey / le
        tbx = fx / lf; tby = fy / lf
        chi = 1.0 + tax * tbx + tay * tby
        cross = tax * tby - tay * tbx
        kh = 2.0 * cross / chi
        tlx = (tax + tbx) / chi
        tly = (tay + tby) / chi
        two_chi = 2.0 / chi
        dosx = (-kh * tlx + two_chi * tby) / le
        dosy = (-kh * tly - two_chi * tbx) / le
        dofx = (-kh * tlx - two_chi * tay) / lf
        dofy = (-kh * tly + two_chi * tax) / lf
        kv[i - 1] = kh
        gv[i - 1, 0] = -dosx
        gv[i - 1, 1] = -dosy
        gv[i - 1, 2] = dosx - dofx
        gv[i - 1, 3] = dosy - dofy
        gv[i - 1, 4] = dofx
        gv[i - 1, 5] = dofy
    return kh_out, g_out
