"""Pure-Python Euler-Maruyama kernel; reference for the compiled ``_kernels``.

Both implementations evaluate the same expressions in the same order on IEEE
doubles, so their outputs agree bit for bit.
"""
import math

COMPLEX = 0
REAL = 1

OK = 0
STEP_FLOOR = 1

MAX_DEPTH = 128


def drift(x, variant, n, c_int):
    nd = float(n)
    out = [0.0] * n
    if variant == COMPLEX:
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
    return out


def _euler(x, h, dw, variant, n, c_int, c_diff):
    a = drift(x, variant, n, c_int)
    y = [0.0] * n
    for i in range(n):
        if variant == COMPLEX:
            d = c_diff
        else:
            d = c_diff * math.sqrt(x[i])
        y[i] = x[i] + h * a[i] + d * dw[i]
    # the last coordinate reflects at zero
    if y[n - 1] < 0.0:
        y[n - 1] = -y[n - 1]
    return y


def _admissible(y, n, variant, collision_tol, value_floor, soft):
    """Hard check: strict ordering and positivity (nonnegativity for REAL).

    With ``soft`` set, gaps must also reach ``collision_tol`` and, in the
    COMPLEX variant, the last value ``value_floor``.
    """
    for i in range(n - 1):
        if not (y[i] - y[i + 1] > 0.0):
            return False
        if soft and not (y[i] - y[i + 1] >= collision_tol):
            return False
    if variant == COMPLEX:
        if not (y[n - 1] > 0.0):
            return False
        return not soft or y[n - 1] >= value_floor
    return y[n - 1] >= 0.0


def evolve(x0, h, dW, variant, c_int, c_diff, collision_tol, value_floor, refine_step, step_floor,
           bridge, out):
    """Integrate ``m`` processes driven by shared increments.

    ``x0`` has shape ``(m, n)``; ``dW`` has shape ``(steps, n)`` and holds the
    Brownian increments of the base grid with step ``h``. A step that leaves
    the admissible set in any process is split in two by a Brownian bridge
    using ``bridge(n)`` fresh standard normals, recursively. Steps longer
    than ``refine_step`` must keep every gap at least ``collision_tol`` and
    the last COMPLEX value at least ``value_floor``; shorter steps need only
    preserve strict ordering and positivity. A negative proposal for the last
    coordinate is reflected at zero.
    Halving stops with ``STEP_FLOOR`` when a sub-step would fall below
    ``step_floor``. ``out`` of shape
    ``(steps + 1, m, n)`` receives the state after every base step.

    Returns ``(status, completed_steps, halvings, min_step)``.
    """
    m = len(x0)
    n = len(x0[0])
    steps = len(dW)
    xs = [[float(v) for v in row] for row in x0]
    for p in range(m):
        for i in range(n):
            out[0, p, i] = xs[p][i]
    halvings = 0
    min_step = h
    for k in range(steps):
        stack = [(h, [float(v) for v in dW[k]])]
        while stack:
            hc, dw = stack.pop()
            ys = [_euler(xs[p], hc, dw, variant, n, c_int, c_diff) for p in range(m)]
            soft = hc > refine_step
            if all(_admissible(y, n, variant, collision_tol, value_floor, soft) for y in ys):
                xs = ys
                continue
            hh = 0.5 * hc
            if hh < step_floor or len(stack) + 2 > MAX_DEPTH:
                return STEP_FLOOR, k, halvings, min_step
            z = bridge(n)
            sq = math.sqrt(hc)
            first = [0.0] * n
            second = [0.0] * n
            for i in range(n):
                first[i] = 0.5 * dw[i] + 0.5 * sq * float(z[i])
                second[i] = dw[i] - first[i]
            stack.append((hh, second))
            stack.append((hh, first))
            halvings += 1
            if hh < min_step:
                min_step = hh
        for p in range(m):
            for i in range(n):
                out[k + 1, p, i] = xs[p][i]
    return OK, steps, halvings, min_step
