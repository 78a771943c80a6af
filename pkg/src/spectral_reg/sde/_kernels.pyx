# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler-Maruyama kernel. Mirrors ``_kernels_py`` operation by operation."""
from libc.math cimport sqrt
from libc.stdlib cimport malloc, free

DEF MAX_N = 64
DEF MAX_DEPTH = 128

COMPLEX = 0
REAL = 1
OK = 0
STEP_FLOOR = 1


cdef void _drift(const double* x, int variant, int n, double c_int, double* out) noexcept nogil:
    cdef double nd = <double>n
    cdef double base, si2, sj2, acc
    cdef int i, j
    if variant == 0:
        base = 1.0 - 1.0 / (2.0 * nd)
        for i in range(n):
            si2 = x[i] * x[i]
            acc = base
            for j in range(n):
                if j != i:
                    sj2 = x[j] * x[j]
                    acc = acc + (si2 + sj2) / (nd * (si2 - sj2))
            out[i] = acc / (2.0 * x[i])
    else:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                if j != i:
                    acc = acc + (x[i] + x[j]) / (x[i] - x[j])
            out[i] = 1.0 + c_int * acc


cdef void _euler(const double* x, double h, const double* dw, int variant, int n,
                 double c_int, double c_diff, double* a, double* y) noexcept nogil:
    cdef int i
    cdef double d
    _drift(x, variant, n, c_int, a)
    for i in range(n):
        if variant == 0:
            d = c_diff
        else:
            d = c_diff * sqrt(x[i])
        y[i] = x[i] + h * a[i] + d * dw[i]
    if y[n - 1] < 0.0:
        y[n - 1] = -y[n - 1]


cdef bint _admissible(const double* y, int n, int variant, double collision_tol,
                      double value_floor, bint soft) noexcept nogil:
    cdef int i
    for i in range(n - 1):
        if not (y[i] - y[i + 1] > 0.0):
            return False
        if soft and not (y[i] - y[i + 1] >= collision_tol):
            return False
    if variant == 0:
        if not (y[n - 1] > 0.0):
            return False
        return not soft or y[n - 1] >= value_floor
    return y[n - 1] >= 0.0


def drift(x, int variant, int n, double c_int):
    cdef double xb[MAX_N]
    cdef double ob[MAX_N]
    cdef int i
    if n > MAX_N:
        raise ValueError(f"n={n} exceeds compiled limit {MAX_N}")
    for i in range(n):
        xb[i] = x[i]
    _drift(xb, variant, n, c_int, ob)
    return [ob[i] for i in range(n)]


def evolve(double[:, ::1] x0, double h, double[:, ::1] dW, int variant, double c_int,
           double c_diff, double collision_tol, double value_floor, double refine_step,
           double step_floor, object bridge, double[:, :, ::1] out):
    cdef int m = x0.shape[0]
    cdef int n = x0.shape[1]
    cdef int steps = dW.shape[0]
    cdef int p, i, k, top, ok
    cdef bint soft
    cdef double hc, hh, sq
    cdef long halvings = 0
    cdef double min_step = h
    cdef double[:] z
    if n > MAX_N:
        raise ValueError(f"n={n} exceeds compiled limit {MAX_N}")

    cdef double* xs = <double*>malloc(m * n * sizeof(double))
    cdef double* ys = <double*>malloc(m * n * sizeof(double))
    cdef double* a = <double*>malloc(n * sizeof(double))
    cdef double* first = <double*>malloc(n * sizeof(double))
    cdef double* second = <double*>malloc(n * sizeof(double))
    cdef double* st_dw = <double*>malloc(MAX_DEPTH * n * sizeof(double))
    cdef double* st_h = <double*>malloc(MAX_DEPTH * sizeof(double))
    cdef double* dw
    if (xs == NULL or ys == NULL or a == NULL or first == NULL or second == NULL
            or st_dw == NULL or st_h == NULL):
        free(xs); free(ys); free(a); free(first); free(second); free(st_dw); free(st_h)
        raise MemoryError()
    try:
        for p in range(m):
            for i in range(n):
                xs[p * n + i] = x0[p, i]
                out[0, p, i] = xs[p * n + i]
        for k in range(steps):
            top = 0
            st_h[0] = h
            for i in range(n):
                st_dw[i] = dW[k, i]
            top = 1
            while top > 0:
                top -= 1
                hc = st_h[top]
                dw = st_dw + top * n
                ok = 1
                soft = hc > refine_step
                for p in range(m):
                    _euler(xs + p * n, hc, dw, variant, n, c_int, c_diff, a, ys + p * n)
                    if not _admissible(ys + p * n, n, variant, collision_tol, value_floor, soft):
                        ok = 0
                if ok:
                    for i in range(m * n):
                        xs[i] = ys[i]
                    continue
                hh = 0.5 * hc
                if hh < step_floor or top + 2 > MAX_DEPTH:
                    return STEP_FLOOR, k, halvings, min_step
                z = bridge(n)
                sq = sqrt(hc)
                for i in range(n):
                    first[i] = 0.5 * dw[i] + 0.5 * sq * z[i]
                    second[i] = dw[i] - first[i]
                # the first half goes on top so it is integrated next
                for i in range(n):
                    st_dw[top * n + i] = second[i]
                    st_dw[(top + 1) * n + i] = first[i]
                st_h[top] = hh
                st_h[top + 1] = hh
                top += 2
                halvings += 1
                if hh < min_step:
                    min_step = hh
            for p in range(m):
                for i in range(n):
                    out[k + 1, p, i] = xs[p * n + i]
        return OK, steps, halvings, min_step
    finally:
        free(xs); free(ys); free(a); free(first); free(second); free(st_dw); free(st_h)
