"""Compiled one-dimensional kernel-density integrals.

For the compact kernels the estimate is piecewise polynomial between the
kernel edges ``x_i - h`` and ``x_i + h``, so every integral over the real
line splits into pieces with a fixed active set of points.  On a piece with
``c`` active points, centre ``m`` and centred second moment ``M2``, the
Epanechnikov estimate is ``alpha * (rho^2 - w^2)`` with ``w = v - m``, and
its first two bandwidth derivatives are even quadratics in ``w`` as well.
The log integrals are done in closed form near a zero of the estimate and by
Gauss-Legendre rules elsewhere, which keeps the short pieces free of
cancellation.

The Gaussian kernel uses a trapezoid rule on a uniform grid.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

# Gauss-Legendre rules with 2, 3, 4 and 8 nodes, zero padded to a common width
GL_N = np.array([2, 3, 4, 8])
GL_X = np.zeros((4, 8))
GL_W = np.zeros((4, 8))
for _r, _n in enumerate(GL_N):
    GL_X[_r, :_n], GL_W[_r, :_n] = np.polynomial.legendre.leggauss(_n)

# output slots of the piecewise passes
ENTROPY, DERIV, DERIV_MASS, SECOND_LOG, SQUARE_OVER_F, SECOND_MASS, MASS = range(7)
N_OUT = 7


@nb.njit(cache=True, inline="always")
def _psi(y, j):
    # antiderivative of y^j ln y, zero at y = 0
    if y <= 0.0:
        return 0.0
    ly = math.log(y)
    if j == 0:
        return y * (ly - 1.0)
    if j == 1:
        return y * y * (0.5 * ly - 0.25)
    return y * y * y * (ly / 3.0 - 1.0 / 9.0)


@nb.njit(cache=True, inline="always")
def _phi(y, c0, c2, rho):
    # antiderivative in w of (c0 + c2 w^2) ln(rho + w), written in y = rho + w
    return (c0 + c2 * rho * rho) * _psi(y, 0) - 2.0 * c2 * rho * _psi(y, 1) + c2 * _psi(y, 2)


@nb.njit(cache=True, inline="always")
def _poly_int(c0, c2, wa, wb):
    ln = wb - wa
    return c0 * ln + c2 * ln * (wb * wb + wa * wb + wa * wa) / 3.0


@nb.njit(cache=True, inline="always")
def _gl_rule(t):
    # node count from the ratio of piece length to distance from a zero of F
    if t < 1e-3:
        return 0
    if t < 0.01:
        return 1
    if t < 0.05:
        return 2
    return 3


@nb.njit(cache=True)
def _log_integrals(coef, ncoef, rho, wa, wb, out):
    """out[k] = int_{wa}^{wb} (coef[k,0] + coef[k,1] w^2) ln(rho^2 - w^2) dw."""
    ln = wb - wa
    dp = rho + wa  # distance of the piece to the zero at w = -rho
    dm = rho - wb  # distance to the zero at w = +rho
    for k in range(ncoef):
        out[k] = 0.0
    far_p = dp >= 2.0 * ln
    far_m = dm >= 2.0 * ln
    half = 0.5 * ln
    if far_p and far_m:
        t = ln / min(dp, dm)
        if t < 1e-3:
            # midpoint rule with its second-order correction; the next term
            # is below 1e-14 relative at this length ratio
            yp = dp + half
            ym = dm + half
            w = wa + half
            lg = math.log(yp * ym)
            l1 = 1.0 / yp - 1.0 / ym
            l2 = -1.0 / (yp * yp) - 1.0 / (ym * ym)
            c3 = ln * ln * ln / 24.0
            for k in range(ncoef):
                g = coef[k, 0] + coef[k, 1] * w * w
                f2 = 2.0 * coef[k, 1] * lg + 4.0 * coef[k, 1] * w * l1 + g * l2
                out[k] = ln * g * lg + c3 * f2
            return
        r = _gl_rule(t)
        for q in range(GL_N[r]):
            w = wa + half * (1.0 + GL_X[r, q])
            lg = math.log((dp + half * (1.0 + GL_X[r, q])) * (dm + half * (1.0 - GL_X[r, q])))
            ww = GL_W[r, q] * half * lg
            for k in range(ncoef):
                out[k] += ww * (coef[k, 0] + coef[k, 1] * w * w)
        return
    # ln(rho + w)
    if far_p:
        r = _gl_rule(ln / dp)
        for q in range(GL_N[r]):
            w = wa + half * (1.0 + GL_X[r, q])
            ww = GL_W[r, q] * half * math.log(dp + half * (1.0 + GL_X[r, q]))
            for k in range(ncoef):
                out[k] += ww * (coef[k, 0] + coef[k, 1] * w * w)
    else:
        for k in range(ncoef):
            out[k] += _phi(dp + ln, coef[k, 0], coef[k, 1], rho) - _phi(dp, coef[k, 0], coef[k, 1], rho)
    # ln(rho - w): by evenness of the polynomial this is the same integral over (-wb, -wa)
    if far_m:
        r = _gl_rule(ln / dm)
        for q in range(GL_N[r]):
            w = wa + half * (1.0 + GL_X[r, q])
            ww = GL_W[r, q] * half * math.log(dm + half * (1.0 - GL_X[r, q]))
            for k in range(ncoef):
                out[k] += ww * (coef[k, 0] + coef[k, 1] * w * w)
    else:
        for k in range(ncoef):
            out[k] += _phi(dm + ln, coef[k, 0], coef[k, 1], rho) - _phi(dm, coef[k, 0], coef[k, 1], rho)


@nb.njit(cache=True)
def _group_size(xs, start, shift, pos):
    k = 0
    n = xs.size
    while start + k < n and xs[start + k] + shift == pos:
        k += 1
    return k


@nb.njit(cache=True)
def epanechnikov_pass(xs, h, derivs, log_count):
    """Exact integrals of the Epanechnikov estimate over sorted data ``xs``.

    ``log_count[c]`` must hold ``ln c`` for ``c <= len(xs)``.  Returns an
    array indexed by the slot constants of this module.  With ``derivs``
    false only ``ENTROPY`` and ``MASS`` are filled.
    """
    n = xs.size
    out = np.zeros(N_OUT)
    coef = np.zeros((3, 2))
    logs = np.zeros(3)
    kappa = 1.5 / (n * h * h)
    log_unit = math.log(0.75 / (n * h * h * h))
    il = 0  # next point whose left edge is pending
    ir = 0  # next point whose right edge is pending
    anchor = xs[0]
    s1 = 0.0
    s2 = 0.0
    prev = 0.0
    zero_left = True
    while ir < n:
        pl = xs[il] - h if il < n else np.inf
        pr = xs[ir] + h
        pos = pl if pl < pr else pr
        add = _group_size(xs, il, -h, pos) if pl == pos else 0
        rem = _group_size(xs, ir, h, pos) if pr == pos else 0
        c = il - ir
        if c > 0:
            cf = float(c)
            if c <= 32:
                # small active sets: exact moments from scratch
                anchor = xs[ir]
                s1 = 0.0
                s2 = 0.0
                for j in range(ir, il):
                    d = xs[j] - anchor
                    s1 += d
                    s2 += d * d
            mean = anchor + s1 / cf
            m2 = s2 - s1 * s1 / cf
            if m2 < 0.0:
                m2 = 0.0
            rho2 = h * h - m2 / cf
            rho = math.sqrt(rho2)
            alpha = 0.75 * cf / (n * h * h * h)
            zero_right = rem == c
            wa = -rho if zero_left else prev - mean
            wb = rho if zero_right else pos - mean
            if wa < -rho:
                wa = -rho
            if wb > rho:
                wb = rho
            if wb > wa:
                coef[0, 0] = alpha * rho2
                coef[0, 1] = -alpha
                ncoef = 1
                if derivs:
                    p = 0.75 / n * (-cf / (h * h) + 3.0 * m2 / h ** 4)
                    s = 2.25 * cf / (n * h ** 4)
                    e0 = 0.75 / n * (2.0 * cf / h ** 3 - 12.0 * m2 / h ** 5)
                    e2 = -9.0 * cf / (n * h ** 5)
                    coef[1, 0] = p
                    coef[1, 1] = s
                    coef[2, 0] = e0
                    coef[2, 1] = e2
                    ncoef = 3
                _log_integrals(coef, ncoef, rho, wa, wb, logs)
                la = log_unit + log_count[c]
                out[MASS] += _poly_int(coef[0, 0], coef[0, 1], wa, wb)
                out[ENTROPY] -= la * _poly_int(coef[0, 0], coef[0, 1], wa, wb) + logs[0]
                if derivs:
                    ln = wb - wa
                    pi_d = _poly_int(p, s, wa, wb)
                    out[DERIV_MASS] += pi_d
                    out[DERIV] -= la * pi_d + logs[1]
                    pi_2 = _poly_int(e0, e2, wa, wb)
                    out[SECOND_MASS] += pi_2
                    out[SECOND_LOG] += la * pi_2 + logs[2]
                    # (dF)^2 / F = [Q^2 / (rho^2 - w^2) - 2 s Q + s^2 (rho^2 - w^2)] / alpha
                    q = p + s * rho2
                    kk = q * q / (2.0 * alpha * rho)
                    acc = (-2.0 * s * q * ln + s * s * (rho2 * ln - (wb ** 3 - wa ** 3) / 3.0)) / alpha
                    l2r = math.log(2.0 * rho)
                    # the divergent log at a zero of F cancels against that
                    # edge's contribution kappa * ln F(edge)
                    if zero_left and zero_right:
                        acc += kk * (4.0 * l2r + 2.0 * la)
                    elif zero_left:
                        acc += kk * (math.log(rho + wb) - math.log(rho - wb) + 2.0 * l2r + la)
                    elif zero_right:
                        acc += kk * (-math.log(rho + wa) + math.log(rho - wa) + 2.0 * l2r + la)
                    else:
                        acc += kk * (math.log1p(ln / (rho + wa)) + math.log1p(ln / (rho - wb)))
                    if not zero_right:
                        # moving edges with F > 0 on both sides
                        fe = alpha * (rho - wb) * (rho + wb)
                        acc += (add + rem) * kappa * math.log(fe)
                    out[SQUARE_OVER_F] += acc
            zero_left = False
        # advance the active set
        for j in range(ir, ir + rem):
            d = xs[j] - anchor
            s1 -= d
            s2 -= d * d
        if ir + rem == il and add > 0:
            # empty set: re-anchor so a far earlier point cannot spoil the moments
            s1 = 0.0
            s2 = 0.0
            anchor = xs[il]
        for j in range(il, il + add):
            d = xs[j] - anchor
            s1 += d
            s2 += d * d
        ir += rem
        il += add
        cnew = il - ir
        if cnew == 0:
            s1 = 0.0
            s2 = 0.0
            zero_left = True
        else:
            zero_left = add == cnew
            if cnew > 32 and abs(pos - anchor) > h:
                delta = pos - anchor
                s2 = s2 - 2.0 * delta * s1 + cnew * delta * delta
                s1 = s1 - cnew * delta
                anchor = pos
        prev = pos
    return out


@nb.njit(cache=True)
def uniform_pass(xs, h):
    """Entropy and its first two bandwidth derivatives for the box kernel.

    Returns ``(S, dS/dh, d2S/dh2, mass, derivative mass)``.
    """
    n = xs.size
    unit = 1.0 / (2.0 * n * h)
    il = 0
    ir = 0
    prev = 0.0
    ent = 0.0
    mass = 0.0
    jump_phi = 0.0
    jump_psi = 0.0
    nevents = 0
    while ir < n:
        pl = xs[il] - h if il < n else np.inf
        pr = xs[ir] + h
        pos = pl if pl < pr else pr
        add = _group_size(xs, il, -h, pos) if pl == pos else 0
        rem = _group_size(xs, ir, h, pos) if pr == pos else 0
        c = il - ir
        fl = c * unit
        if c > 0:
            ln = pos - prev
            ent -= ln * fl * math.log(fl)
            mass += ln * fl
        cnew = c - rem + add
        fr = cnew * unit
        pl_ = fl * math.log(fl) if fl > 0 else 0.0
        pr_ = fr * math.log(fr) if fr > 0 else 0.0
        ql = fl * (math.log(fl) + 1.0) if fl > 0 else 0.0
        qr = fr * (math.log(fr) + 1.0) if fr > 0 else 0.0
        # a left edge has the kernel inside on its right, a right edge on its left
        jump_phi += add * (pr_ - pl_) + rem * (pl_ - pr_)
        jump_psi += add * (qr - ql) + rem * (ql - qr)
        nevents += add + rem
        ir += rem
        il += add
        prev = pos
    d1 = (1.0 - ent) / h - jump_phi
    d2 = -d1 / h - (1.0 - ent) / (h * h) + jump_psi / h
    dmass = -mass / h + nevents * unit
    return ent, d1, d2, mass, dmass


@nb.njit(cache=True)
def gaussian_grid(xs, h, lo, step, m, reach):
    """Estimate and its bandwidth derivatives at ``lo + k*step``, k < m.

    Points farther than ``reach * h`` from a node are skipped.
    """
    n = xs.size
    f = np.zeros(m)
    d1 = np.zeros(m)
    d2 = np.zeros(m)
    inv = 1.0 / math.sqrt(2.0 * math.pi)
    a = 0
    b = 0
    for k in range(m):
        v = lo + k * step
        while a < n and xs[a] < v - reach * h:
            a += 1
        while b < n and xs[b] <= v + reach * h:
            b += 1
        sf = 0.0
        s1 = 0.0
        s2 = 0.0
        for j in range(a, b):
            u = (v - xs[j]) / h
            u2 = u * u
            g = inv * math.exp(-0.5 * u2)
            sf += g
            s1 += g * (1.0 - u2)
            s2 += g * (u2 * u2 - 5.0 * u2 + 2.0)
        f[k] = sf / (n * h)
        d1[k] = -s1 / (n * h * h)
        d2[k] = s2 / (n * h * h * h)
    return f, d1, d2


@nb.njit(cache=True)
def window_density(xs, h, queries, kernel, reach, exclude_self):
    """Density at each query from the points of sorted ``xs`` within ``reach*h``.

    ``kernel``: 0 Epanechnikov, 1 uniform, 2 Gaussian.  With ``exclude_self``
    the queries are the data points themselves and one copy of ``K(0)`` is
    dropped per query (leave-one-out, renormalised by ``N - 1``).
    """
    n = xs.size
    out = np.empty(queries.size)
    inv = 1.0 / math.sqrt(2.0 * math.pi)
    for q in range(queries.size):
        x = queries[q]
        a = np.searchsorted(xs, x - reach * h, side="left")
        b = np.searchsorted(xs, x + reach * h, side="right")
        acc = 0.0
        for j in range(a, b):
            u = (x - xs[j]) / h
            if kernel == 0:
                if abs(u) < 1.0:
                    acc += 0.75 * (1.0 - u * u)
            elif kernel == 1:
                if abs(u) < 1.0:
                    acc += 0.5
            else:
                acc += inv * math.exp(-0.5 * u * u)
        if exclude_self:
            k0 = 0.75 if kernel == 0 else (0.5 if kernel == 1 else inv)
            out[q] = (acc - k0) / ((n - 1) * h)
        else:
            out[q] = acc / (n * h)
    return out
