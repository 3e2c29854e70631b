"""Compiled inner loops: trigonometric jets, Newton solves, constrained tracing.

Everything here works on raw arrays so numba can compile it.  A dispersion
relation is passed as ``(K, A, B)``: frequencies ``K`` of shape ``(T, 3)``
(float64 holding integers) and cosine/sine coefficients ``A``/``B``.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

CLOSED = 0
CAPTURED = 1
MAXLEN = 2
PROJFAIL = 3
STUCK = 4

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True)
def value(K, A, B, x):
    s = 0.0
    for t in range(K.shape[0]):
        ph = K[t, 0] * x[0] + K[t, 1] * x[1] + K[t, 2] * x[2]
        s += A[t] * math.cos(ph) + B[t] * math.sin(ph)
    return s


@njit(cache=True)
def value_grad(K, A, B, x0, x1, x2):
    v = 0.0
    g0 = 0.0
    g1 = 0.0
    g2 = 0.0
    for t in range(K.shape[0]):
        k0 = K[t, 0]
        k1 = K[t, 1]
        k2 = K[t, 2]
        ph = k0 * x0 + k1 * x1 + k2 * x2
        c = math.cos(ph)
        s = math.sin(ph)
        v += A[t] * c + B[t] * s
        d = -A[t] * s + B[t] * c
        g0 += d * k0
        g1 += d * k1
        g2 += d * k2
    return v, g0, g1, g2


@njit(cache=True)
def jet(K, A, B, x):
    """Value, gradient and Hessian at ``x``."""
    g = np.zeros(3)
    H = np.zeros((3, 3))
    v = 0.0
    for t in range(K.shape[0]):
        ph = K[t, 0] * x[0] + K[t, 1] * x[1] + K[t, 2] * x[2]
        c = math.cos(ph)
        s = math.sin(ph)
        v += A[t] * c + B[t] * s
        d1 = -A[t] * s + B[t] * c
        d2 = -A[t] * c - B[t] * s
        for i in range(3):
            g[i] += d1 * K[t, i]
            for j in range(3):
                H[i, j] += d2 * K[t, i] * K[t, j]
    return v, g, H


@njit(cache=True)
def values_many(K, A, B, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = value(K, A, B, X[i])
    return out


# ---------------------------------------------------------------------------
# vector fields

@njit(cache=True)
def _field(mode, K, A, B, u0, u1, u2, sgn, x0, x1, x2):
    # mode 0: unit tangent of the section curve, (grad f x u)/|.|
    # mode 1: ascending height flow, reparametrised so d(u.x)/dt = 1
    _, g0, g1, g2 = value_grad(K, A, B, x0, x1, x2)
    if mode == 0:
        v0 = g1 * u2 - g2 * u1
        v1 = g2 * u0 - g0 * u2
        v2 = g0 * u1 - g1 * u0
        n = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
        if n < 1e-300:
            return 0.0, 0.0, 0.0
        return sgn * v0 / n, sgn * v1 / n, sgn * v2 / n
    gg = g0 * g0 + g1 * g1 + g2 * g2
    if gg < 1e-300:
        return 0.0, 0.0, 0.0
    hn = (u0 * g0 + u1 * g1 + u2 * g2) / gg
    t0 = u0 - hn * g0
    t1 = u1 - hn * g1
    t2 = u2 - hn * g2
    q = t0 * t0 + t1 * t1 + t2 * t2
    if q < 1e-300:
        return 0.0, 0.0, 0.0
    return t0 / q, t1 / q, t2 / q


@njit(cache=True)
def _dp_step(mode, K, A, B, u, sgn, x, ds, out):
    """One Dormand-Prince step; writes the 5th-order point to ``out``, returns error norm."""
    u0 = u[0]
    u1 = u[1]
    u2 = u[2]
    a0, a1, a2 = x[0], x[1], x[2]
    k10, k11, k12 = _field(mode, K, A, B, u0, u1, u2, sgn, a0, a1, a2)
    k20, k21, k22 = _field(mode, K, A, B, u0, u1, u2, sgn,
                           a0 + ds * _A21 * k10, a1 + ds * _A21 * k11, a2 + ds * _A21 * k12)
    k30, k31, k32 = _field(mode, K, A, B, u0, u1, u2, sgn,
                           a0 + ds * (_A31 * k10 + _A32 * k20),
                           a1 + ds * (_A31 * k11 + _A32 * k21),
                           a2 + ds * (_A31 * k12 + _A32 * k22))
    k40, k41, k42 = _field(mode, K, A, B, u0, u1, u2, sgn,
                           a0 + ds * (_A41 * k10 + _A42 * k20 + _A43 * k30),
                           a1 + ds * (_A41 * k11 + _A42 * k21 + _A43 * k31),
                           a2 + ds * (_A41 * k12 + _A42 * k22 + _A43 * k32))
    k50, k51, k52 = _field(mode, K, A, B, u0, u1, u2, sgn,
                           a0 + ds * (_A51 * k10 + _A52 * k20 + _A53 * k30 + _A54 * k40),
                           a1 + ds * (_A51 * k11 + _A52 * k21 + _A53 * k31 + _A54 * k41),
                           a2 + ds * (_A51 * k12 + _A52 * k22 + _A53 * k32 + _A54 * k42))
    k60, k61, k62 = _field(mode, K, A, B, u0, u1, u2, sgn,
                           a0 + ds * (_A61 * k10 + _A62 * k20 + _A63 * k30 + _A64 * k40 + _A65 * k50),
                           a1 + ds * (_A61 * k11 + _A62 * k21 + _A63 * k31 + _A64 * k41 + _A65 * k51),
                           a2 + ds * (_A61 * k12 + _A62 * k22 + _A63 * k32 + _A64 * k42 + _A65 * k52))
    y0 = a0 + ds * (_B1 * k10 + _B3 * k30 + _B4 * k40 + _B5 * k50 + _B6 * k60)
    y1 = a1 + ds * (_B1 * k11 + _B3 * k31 + _B4 * k41 + _B5 * k51 + _B6 * k61)
    y2 = a2 + ds * (_B1 * k12 + _B3 * k32 + _B4 * k42 + _B5 * k52 + _B6 * k62)
    k70, k71, k72 = _field(mode, K, A, B, u0, u1, u2, sgn, y0, y1, y2)
    e0 = ds * (_E1 * k10 + _E3 * k30 + _E4 * k40 + _E5 * k50 + _E6 * k60 + _E7 * k70)
    e1 = ds * (_E1 * k11 + _E3 * k31 + _E4 * k41 + _E5 * k51 + _E6 * k61 + _E7 * k71)
    e2 = ds * (_E1 * k12 + _E3 * k32 + _E4 * k42 + _E5 * k52 + _E6 * k62 + _E7 * k72)
    out[0] = y0
    out[1] = y1
    out[2] = y2
    return max(abs(e0), abs(e1), abs(e2))


# ---------------------------------------------------------------------------
# projections

@njit(cache=True)
def project_level(K, A, B, E, u, c0, x):
    """Newton onto {f = E, u.x = c0} in place. Returns final |f - E| or -1 on failure."""
    for _ in range(30):
        v, g0, g1, g2 = value_grad(K, A, B, x[0], x[1], x[2])
        r = v - E
        gu = g0 * u[0] + g1 * u[1] + g2 * u[2]
        p0 = g0 - gu * u[0]
        p1 = g1 - gu * u[1]
        p2 = g2 - gu * u[2]
        den = p0 * p0 + p1 * p1 + p2 * p2
        if den < 1e-28:
            return -1.0
        a = r / den
        x[0] -= a * p0
        x[1] -= a * p1
        x[2] -= a * p2
        off = x[0] * u[0] + x[1] * u[1] + x[2] * u[2] - c0
        x[0] -= off * u[0]
        x[1] -= off * u[1]
        x[2] -= off * u[2]
        if abs(r) < 1e-14 and abs(a) * math.sqrt(den) < 1e-13:
            break
        if abs(a) * math.sqrt(den) > 1.0:
            return -1.0
    return abs(value(K, A, B, x) - E)


@njit(cache=True)
def project_surface(K, A, B, E, x):
    """Newton along the gradient onto {f = E} in place. Returns |f - E| or -1."""
    for _ in range(30):
        v, g0, g1, g2 = value_grad(K, A, B, x[0], x[1], x[2])
        r = v - E
        den = g0 * g0 + g1 * g1 + g2 * g2
        if den < 1e-28:
            return -1.0
        a = r / den
        x[0] -= a * g0
        x[1] -= a * g1
        x[2] -= a * g2
        if abs(r) < 1e-14 and abs(a) * math.sqrt(den) < 1e-13:
            break
        if abs(a) * math.sqrt(den) > 1.0:
            return -1.0
    return abs(value(K, A, B, x) - E)


# ---------------------------------------------------------------------------
# section-curve tracing

@njit(cache=True)
def _nearest_capture(cap, x):
    best = 1e300
    bj = -1
    for j in range(cap.shape[0]):
        d2 = 0.0
        for i in range(3):
            d = x[i] - cap[j, i]
            d -= TWO_PI * math.floor(d / TWO_PI + 0.5)
            d2 += d * d
        if d2 < best:
            best = d2
            bj = j
    return math.sqrt(best), bj


@njit(cache=True)
def trace_level(K, A, B, E, u, x_start, sgn, ds_max, atol, max_len,
                cap, cap_r, tol_close, min_before_close):
    """Follow the curve {f = E, u.x = const} from ``x_start``.

    Stops on closure modulo 2*pi*Z^3 (status CLOSED, ``shift`` = winding), on
    entering the capture ball of a row of ``cap`` (status CAPTURED, ``idx`` the
    row and ``shift`` the lattice offset of the captured copy), or on failure.
    Samples are lifted positions (continuous in R^3).
    """
    x = x_start.copy()
    c0 = x[0] * u[0] + x[1] * u[1] + x[2] * u[2]
    r0 = project_level(K, A, B, E, u, c0, x)
    shift = np.zeros(3)
    cap_size = 1024
    samples = np.empty((cap_size, 3))
    samples[0] = x
    n = 1
    if r0 < 0:
        return PROJFAIL, samples[:n], -1, shift, 0.0, 0.0, 0.0
    x0 = x.copy()
    t00, t01, t02 = _field(0, K, A, B, u[0], u[1], u[2], sgn, x0[0], x0[1], x0[2])
    if t00 == 0.0 and t01 == 0.0 and t02 == 0.0:
        return STUCK, samples[:n], -1, shift, 0.0, 0.0, 0.0
    y = np.empty(3)
    prev = x.copy()
    length = 0.0
    max_f = r0
    max_p = 0.0
    ds = min(ds_max, 0.01)
    ncap = cap.shape[0]
    while length < max_len:
        lim = ds_max
        if ncap > 0:
            dmin, jmin = _nearest_capture(cap, x)
            if dmin < cap_r:
                d = x - cap[jmin]
                for i in range(3):
                    shift[i] = math.floor(d[i] / TWO_PI + 0.5)
                return CAPTURED, samples[:n], jmin, shift, length, max_f, max_p
            lim = min(lim, 0.5 * dmin)
        if ds > lim:
            ds = lim
        err = _dp_step(0, K, A, B, u, sgn, x, ds, y)
        if err > atol and ds > 1e-9:
            ds *= max(0.2, 0.9 * (atol / err) ** 0.2)
            continue
        rf = project_level(K, A, B, E, u, c0, y)
        if rf < 0:
            if ds > 1e-9:
                ds *= 0.25
                continue
            return PROJFAIL, samples[:n], -1, shift, length, max_f, max_p
        # step accepted
        prev[:] = x
        x[:] = y
        length += ds
        if rf > max_f:
            max_f = rf
        pr = abs(x[0] * u[0] + x[1] * u[1] + x[2] * u[2] - c0)
        if pr > max_p:
            max_p = pr
        if n == samples.shape[0]:
            grown = np.empty((2 * n, 3))
            grown[:n] = samples
            samples = grown
        samples[n] = x
        n += 1
        if err > 0:
            ds *= min(4.0, 0.9 * (atol / err) ** 0.2)
        else:
            ds *= 4.0
        # closure test against the start point
        if length > min_before_close:
            for i in range(3):
                shift[i] = math.floor((x[i] - x0[i]) / TWO_PI + 0.5)
            s_now = 0.0
            s_prev = 0.0
            dn = 0.0
            for i in range(3):
                dcur = x[i] - x0[i] - TWO_PI * shift[i]
                dprv = prev[i] - x0[i] - TWO_PI * shift[i]
                s_now += dcur * (t00 if i == 0 else (t01 if i == 1 else t02))
                s_prev += dprv * (t00 if i == 0 else (t01 if i == 1 else t02))
                dn += dcur * dcur
            if s_prev < 0.0 <= s_now and math.sqrt(dn) < 3.0 * ds + 1e-6:
                # slide back onto the start section
                z = x.copy()
                zz = np.empty(3)
                for _ in range(6):
                    sz = 0.0
                    for i in range(3):
                        dz = z[i] - x0[i] - TWO_PI * shift[i]
                        sz += dz * (t00 if i == 0 else (t01 if i == 1 else t02))
                    if abs(sz) < 1e-13:
                        break
                    _dp_step(0, K, A, B, u, sgn, z, -sz, zz)
                    if project_level(K, A, B, E, u, c0, zz) < 0:
                        break
                    z[:] = zz
                res = 0.0
                for i in range(3):
                    dz = z[i] - x0[i] - TWO_PI * shift[i]
                    res += dz * dz
                res = math.sqrt(res)
                if res < tol_close:
                    samples[n - 1] = z
                    return CLOSED, samples[:n], -1, shift, length, max_f, max_p
    return MAXLEN, samples[:n], -1, shift, length, max_f, max_p


# ---------------------------------------------------------------------------
# ascending height flow on the surface

@njit(cache=True)
def flow_to_height(K, A, B, E, hv, x_start, target, ds_max, atol, max_len):
    """Follow the ascending gradient of hv.x on {f = E} until hv.x == target.

    Returns (status, end point, spatial length).  ``hv`` need not be unit.
    """
    x = x_start.copy()
    y = np.empty(3)
    phi = hv[0] * x[0] + hv[1] * x[1] + hv[2] * x[2]
    length = 0.0
    dphi = 1e-3
    stalls = 0
    while phi < target:
        _, g0, g1, g2 = value_grad(K, A, B, x[0], x[1], x[2])
        gg = g0 * g0 + g1 * g1 + g2 * g2
        hn = (hv[0] * g0 + hv[1] * g1 + hv[2] * g2) / gg
        t0 = hv[0] - hn * g0
        t1 = hv[1] - hn * g1
        t2 = hv[2] - hn * g2
        tn = math.sqrt(t0 * t0 + t1 * t1 + t2 * t2)
        lim = ds_max * tn
        if dphi > lim:
            dphi = lim
        last = False
        if phi + dphi >= target:
            dphi = target - phi
            last = True
        if dphi < 1e-15:
            stalls += 1
            if stalls > 50:
                return STUCK, x, length
            dphi = 1e-12
            continue
        err = _dp_step(1, K, A, B, hv, 1.0, x, dphi, y)
        if err > atol and dphi > 1e-12:
            dphi *= max(0.2, 0.9 * (atol / err) ** 0.2)
            continue
        if project_surface(K, A, B, E, y) < 0:
            dphi *= 0.25
            if dphi < 1e-14:
                return PROJFAIL, x, length
            continue
        d0 = y[0] - x[0]
        d1 = y[1] - x[1]
        d2 = y[2] - x[2]
        length += math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        x[:] = y
        phi = hv[0] * x[0] + hv[1] * x[1] + hv[2] * x[2]
        if err > 0:
            dphi *= min(4.0, 0.9 * (atol / err) ** 0.2)
        else:
            dphi *= 4.0
        if length > max_len:
            return MAXLEN, x, length
        if last:
            break
    # land exactly on the target height
    for _ in range(8):
        _, g0, g1, g2 = value_grad(K, A, B, x[0], x[1], x[2])
        gg = g0 * g0 + g1 * g1 + g2 * g2
        hn = (hv[0] * g0 + hv[1] * g1 + hv[2] * g2) / gg
        t0 = hv[0] - hn * g0
        t1 = hv[1] - hn * g1
        t2 = hv[2] - hn * g2
        q = t0 * t0 + t1 * t1 + t2 * t2
        phi = hv[0] * x[0] + hv[1] * x[1] + hv[2] * x[2]
        a = (target - phi) / q
        x[0] += a * t0
        x[1] += a * t1
        x[2] += a * t2
        if project_surface(K, A, B, E, x) < 0:
            return PROJFAIL, x, length
        if abs(target - (hv[0] * x[0] + hv[1] * x[1] + hv[2] * x[2])) < 1e-12:
            break
    return CLOSED, x, length


# ---------------------------------------------------------------------------
# critical points and seeds

@njit(cache=True)
def newton_critical(K, A, B, E, P1, P2, seeds, maxit, tol):
    """Newton on {f = E, grad f . P1 = 0, grad f . P2 = 0} from each seed."""
    n = seeds.shape[0]
    out = np.empty((n, 3))
    res = np.full(n, np.inf)
    J = np.empty((3, 3))
    F = np.empty(3)
    for s in range(n):
        x = seeds[s].copy()
        ok = True
        for it in range(maxit):
            v, g, H = jet(K, A, B, x)
            F[0] = v - E
            F[1] = g[0] * P1[0] + g[1] * P1[1] + g[2] * P1[2]
            F[2] = g[0] * P2[0] + g[1] * P2[1] + g[2] * P2[2]
            for j in range(3):
                J[0, j] = g[j]
                J[1, j] = H[j, 0] * P1[0] + H[j, 1] * P1[1] + H[j, 2] * P1[2]
                J[2, j] = H[j, 0] * P2[0] + H[j, 1] * P2[1] + H[j, 2] * P2[2]
            det = (J[0, 0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
                   - J[0, 1] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
                   + J[0, 2] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0]))
            if abs(det) < 1e-300:
                ok = False
                break
            # Cramer's rule
            d0 = (F[0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
                  - J[0, 1] * (F[1] * J[2, 2] - J[1, 2] * F[2])
                  + J[0, 2] * (F[1] * J[2, 1] - J[1, 1] * F[2])) / det
            d1 = (J[0, 0] * (F[1] * J[2, 2] - J[1, 2] * F[2])
                  - F[0] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
                  + J[0, 2] * (J[1, 0] * F[2] - F[1] * J[2, 0])) / det
            d2 = (J[0, 0] * (J[1, 1] * F[2] - F[1] * J[2, 1])
                  - J[0, 1] * (J[1, 0] * F[2] - F[1] * J[2, 0])
                  + F[0] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0])) / det
            step = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            sc = 1.0 if step <= 1.0 else 1.0 / step
            x[0] -= sc * d0
            x[1] -= sc * d1
            x[2] -= sc * d2
            rn = max(abs(F[0]), max(abs(F[1]), abs(F[2])))
            if step < 1e-14 or (rn < 1e-15 and step < 1e-9):
                break
        if not ok:
            continue
        v, g, H = jet(K, A, B, x)
        r0 = abs(v - E)
        r1 = abs(g[0] * P1[0] + g[1] * P1[1] + g[2] * P1[2])
        r2 = abs(g[0] * P2[0] + g[1] * P2[1] + g[2] * P2[2])
        r = max(r0, max(r1, r2))
        if r < tol:
            for j in range(3):
                out[s, j] = x[j] - TWO_PI * math.floor(x[j] / TWO_PI)
                if out[s, j] >= TWO_PI:
                    out[s, j] -= TWO_PI
            res[s] = r
    return out, res


@njit(cache=True)
def line_roots(K, A, B, E, base, direction, nsamp):
    """Roots in [0, 1) of t -> f(base + t*direction) - E, by sampling and bisection."""
    roots = np.empty(nsamp)
    nr = 0
    p = np.empty(3)
    prev = 0.0
    for i in range(nsamp + 1):
        t = i / nsamp
        for j in range(3):
            p[j] = base[j] + t * direction[j]
        cur = value(K, A, B, p) - E
        if i > 0 and (prev < 0.0) != (cur < 0.0):
            lo = (i - 1) / nsamp
            hi = t
            flo = prev
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                for j in range(3):
                    p[j] = base[j] + mid * direction[j]
                fm = value(K, A, B, p) - E
                if (fm < 0.0) == (flo < 0.0):
                    lo = mid
                    flo = fm
                else:
                    hi = mid
            roots[nr] = 0.5 * (lo + hi)
            nr += 1
        prev = cur
    return roots[:nr]


@njit(cache=True)
def polyline_distance(samples, pt):
    """Distance from ``pt`` (any lift) to the polyline ``samples`` in the torus."""
    best = 1e300
    q = np.empty(3)
    for s in range(samples.shape[0] - 1):
        a = samples[s]
        b = samples[s + 1]
        for i in range(3):
            q[i] = pt[i] + TWO_PI * math.floor((a[i] - pt[i]) / TWO_PI + 0.5)
        ab2 = 0.0
        aq = 0.0
        for i in range(3):
            ab2 += (b[i] - a[i]) ** 2
            aq += (q[i] - a[i]) * (b[i] - a[i])
        t = 0.0 if ab2 == 0.0 else min(1.0, max(0.0, aq / ab2))
        d2 = 0.0
        for i in range(3):
            d2 += (a[i] + t * (b[i] - a[i]) - q[i]) ** 2
        if d2 < best:
            best = d2
    return math.sqrt(best)
