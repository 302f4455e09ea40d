"""Float64 kernels that push small offsets along a stored reference orbit.

A point near the orbit point b_k is written b_k + t with t a float.  One
step of the map sends the offset t to F(b_k + t) - F(b_k), computed as the
integral of DF over [b_k, b_k + t] with Gauss-Legendre panels.  DF is
evaluated in product form from the precomputed distances of b_k to the
critical points, so no cancellation happens near critical points.  The
first three derivatives are carried by the chain rule, and the Schwarzian
of the composition is accumulated by the cocycle rule.

Numba-compiled kernels are used when numba is importable and the
environment variable ``BICRITICAL_DISABLE_NUMBA`` is unset (or ``0``);
otherwise the vectorised numpy versions run.  Both give the same numbers
up to rounding.
"""

from __future__ import annotations

import math
import os

import numpy as np

_NUMBA_DISABLED = os.environ.get("BICRITICAL_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _NUMBA_DISABLED:
        raise ImportError("disabled by BICRITICAL_DISABLE_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda func: func

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
PANEL_WIDTH = 0.1

# Columns of the output arrays.
OFFSET, D1, D2, D3, SCHWARZIAN = range(5)


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


@njit(cache=True)
def _trig_dfs(s0, s1, K, tau, alpha, b):
    a0 = math.sin(math.pi * (s0 + tau))
    a1 = math.sin(math.pi * (s1 + tau))
    g = a0 * a1
    arg = math.pi * (s0 + s1 + 2.0 * tau)
    sn = math.sin(arg)
    cs = math.cos(arg)
    f1 = 4.0 * K * g * g
    f2 = 8.0 * K * math.pi * g * sn
    f3 = 8.0 * K * math.pi * math.pi * (sn * sn + 2.0 * g * cs)
    if b != 0.0:
        # harmonic factor m(y) = 1 + b cos 4 pi y with y = x - shift
        y4 = 4.0 * math.pi * (s0 + alpha + tau)
        m0 = 1.0 + b * math.cos(y4)
        m1 = -4.0 * math.pi * b * math.sin(y4)
        m2 = -16.0 * math.pi * math.pi * b * math.cos(y4)
        f1, f2, f3 = f1 * m0, f2 * m0 + f1 * m1, f3 * m0 + 2.0 * f2 * m1 + f1 * m2
    return f1, f2, f3


@njit(cache=True)
def _trig_df(s0, s1, K, tau, alpha, b):
    a0 = math.sin(math.pi * (s0 + tau))
    a1 = math.sin(math.pi * (s1 + tau))
    out = 4.0 * K * a0 * a0 * a1 * a1
    if b != 0.0:
        out *= 1.0 + b * math.cos(4.0 * math.pi * (s0 + alpha + tau))
    return out


@njit(cache=True)
def _trig_increment(s0, s1, K, t, alpha, b, nodes, weights, width):
    panels = max(1, int(math.ceil(abs(t) / width)))
    h = t / panels
    total = 0.0
    for p in range(panels):
        lo = p * h
        for j in range(nodes.shape[0]):
            tau = lo + 0.5 * h * (nodes[j] + 1.0)
            total += weights[j] * _trig_df(s0, s1, K, tau, alpha, b)
    return 0.5 * h * total


@njit(cache=True)
def trig_push_numba(s0, s1, K, t0, order, alpha, b, nodes, weights, width):
    n = t0.shape[0]
    out = np.zeros((n, 5))
    for i in range(n):
        t = t0[i]
        y1 = 1.0
        y2 = 0.0
        y3 = 0.0
        schw = 0.0
        for k in range(s0.shape[0]):
            if order > 0:
                f1, f2, f3 = _trig_dfs(s0[k], s1[k], K, t, alpha, b)
                if order > 2:
                    if f1 != 0.0:
                        schw += (f3 / f1 - 1.5 * (f2 / f1) ** 2) * y1 * y1
                    else:
                        schw = -np.inf
                n3 = f3 * y1 ** 3 + 3.0 * f2 * y1 * y2 + f1 * y3
                n2 = f2 * y1 * y1 + f1 * y2
                y1 = f1 * y1
                y2 = n2
                y3 = n3
            t = _trig_increment(s0[k], s1[k], K, t, alpha, b, nodes, weights, width)
        out[i, 0] = t
        out[i, 1] = y1
        out[i, 2] = y2
        out[i, 3] = y3
        out[i, 4] = schw
    return out


def _harmonic_np(s0, alpha, b, tau):
    y4 = 4.0 * np.pi * (s0 + alpha + tau)
    return 1.0 + b * np.cos(y4), -4.0 * np.pi * b * np.sin(y4), -16.0 * np.pi ** 2 * b * np.cos(y4)


def _trig_dfs_np(s0, s1, K, tau, alpha=0.0, b=0.0):
    a0 = np.sin(np.pi * (s0 + tau))
    a1 = np.sin(np.pi * (s1 + tau))
    g = a0 * a1
    arg = np.pi * (s0 + s1 + 2.0 * tau)
    sn = np.sin(arg)
    f1 = 4.0 * K * g * g
    f2 = 8.0 * K * np.pi * g * sn
    f3 = 8.0 * K * np.pi ** 2 * (sn * sn + 2.0 * g * np.cos(arg))
    if b != 0.0:
        m0, m1, m2 = _harmonic_np(s0, alpha, b, tau)
        f1, f2, f3 = f1 * m0, f2 * m0 + f1 * m1, f3 * m0 + 2.0 * f2 * m1 + f1 * m2
    return f1, f2, f3


def _increment_np(df, t, nodes, weights, width):
    panels = max(1, int(math.ceil(float(np.max(np.abs(t), initial=0.0)) / width)))
    h = t / panels
    total = np.zeros_like(t)
    for p in range(panels):
        lo = p * h
        for node, weight in zip(nodes, weights):
            total += weight * df(lo + 0.5 * h * (node + 1.0))
    return 0.5 * h * total


def push_generic_np(steps, t0, order, jets, increment):
    """Offset propagation for any map, vectorised over the points.

    ``jets(k, t)`` returns (DF, D2F, D3F) at b_k + t and ``increment(k, t)``
    returns F(b_k + t) - F(b_k).
    """
    t = np.array(t0, dtype=float)
    y1 = np.ones_like(t)
    y2 = np.zeros_like(t)
    y3 = np.zeros_like(t)
    schw = np.zeros_like(t)
    for k in range(steps):
        if order > 0:
            f1, f2, f3 = jets(k, t)
            if order > 2:
                with np.errstate(divide="ignore", invalid="ignore"):
                    sf = np.where(f1 != 0.0, f3 / f1 - 1.5 * (f2 / f1) ** 2, -np.inf)
                schw = schw + sf * y1 * y1
            y1, y2, y3 = f1 * y1, f2 * y1 * y1 + f1 * y2, f3 * y1 ** 3 + 3.0 * f2 * y1 * y2 + f1 * y3
        t = increment(k, t)
    return np.stack([t, y1, y2, y3, schw], axis=1)


def trig_push_np(s0, s1, K, t0, order, alpha=0.0, b=0.0, nodes=GL_NODES, weights=GL_WEIGHTS,
                 width=PANEL_WIDTH):
    def jets(k, t):
        return _trig_dfs_np(s0[k], s1[k], K, t, alpha, b)

    def increment(k, t):
        def df(tau):
            base = 4.0 * K * (np.sin(np.pi * (s0[k] + tau)) * np.sin(np.pi * (s1[k] + tau))) ** 2
            if b != 0.0:
                base = base * _harmonic_np(s0[k], alpha, b, tau)[0]
            return base
        return _increment_np(df, t, nodes, weights, width)

    return push_generic_np(len(s0), t0, order, jets, increment)


@njit(cache=True)
def _arnold_df(s, N, tau):
    a = math.sin(N * math.pi * (s + tau))
    return 2.0 * a * a


@njit(cache=True)
def arnold_push_numba(s, N, t0, order, nodes, weights, width):
    n = t0.shape[0]
    out = np.zeros((n, 5))
    for i in range(n):
        t = t0[i]
        y1 = 1.0
        y2 = 0.0
        y3 = 0.0
        schw = 0.0
        for k in range(s.shape[0]):
            if order > 0:
                x = s[k] + t
                f1 = _arnold_df(s[k], N, t)
                f2 = 2.0 * N * math.pi * math.sin(2.0 * N * math.pi * x)
                f3 = 4.0 * N * N * math.pi * math.pi * math.cos(2.0 * N * math.pi * x)
                if order > 2:
                    if f1 != 0.0:
                        schw += (f3 / f1 - 1.5 * (f2 / f1) ** 2) * y1 * y1
                    else:
                        schw = -np.inf
                n3 = f3 * y1 ** 3 + 3.0 * f2 * y1 * y2 + f1 * y3
                n2 = f2 * y1 * y1 + f1 * y2
                y1 = f1 * y1
                y2 = n2
                y3 = n3
            panels = max(1, int(math.ceil(abs(t) / width)))
            h = t / panels
            total = 0.0
            for p in range(panels):
                lo = p * h
                for j in range(nodes.shape[0]):
                    total += weights[j] * _arnold_df(s[k], N, lo + 0.5 * h * (nodes[j] + 1.0))
            t = 0.5 * h * total
        out[i, 0] = t
        out[i, 1] = y1
        out[i, 2] = y2
        out[i, 3] = y3
        out[i, 4] = schw
    return out


def arnold_push_np(s, N, t0, order, nodes=GL_NODES, weights=GL_WEIGHTS, width=PANEL_WIDTH):
    def jets(k, t):
        x = s[k] + t
        f1 = 2.0 * np.sin(N * np.pi * x) ** 2
        f2 = 2.0 * N * np.pi * np.sin(2.0 * N * np.pi * x)
        f3 = 4.0 * N * N * np.pi ** 2 * np.cos(2.0 * N * np.pi * x)
        return f1, f2, f3

    def increment(k, t):
        return _increment_np(lambda tau: 2.0 * np.sin(N * np.pi * (s[k] + tau)) ** 2, t, nodes, weights, width)

    return push_generic_np(len(s), t0, order, jets, increment)


def trig_push(s0, s1, K, t0, order=0, use_numba=None, alpha=0.0, b=0.0):
    """Push offsets ``t0`` through len(s0) steps of the trigonometric family.

    ``b`` is the harmonic coefficient and ``alpha`` the position of c_0
    relative to the shift of the map; both only matter when b != 0.
    """
    t0 = np.ascontiguousarray(t0, dtype=float)
    s0 = np.ascontiguousarray(s0, dtype=float)
    s1 = np.ascontiguousarray(s1, dtype=float)
    if HAVE_NUMBA if use_numba is None else use_numba:
        return trig_push_numba(s0, s1, float(K), t0, int(order), float(alpha), float(b),
                               GL_NODES, GL_WEIGHTS, PANEL_WIDTH)
    return trig_push_np(s0, s1, float(K), t0, int(order), float(alpha), float(b))


def arnold_push(s, N, t0, order=0, use_numba=None):
    """Push offsets ``t0`` through len(s) steps of the Arnold-type family."""
    t0 = np.ascontiguousarray(t0, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    if HAVE_NUMBA if use_numba is None else use_numba:
        return arnold_push_numba(s, float(N), t0, int(order), GL_NODES, GL_WEIGHTS, PANEL_WIDTH)
    return arnold_push_np(s, float(N), t0, int(order))


def gl_increment(df, t, width=PANEL_WIDTH):
    """Integral of ``df`` over [0, t] (vectorised), for maps without a kernel."""
    return _increment_np(df, np.asarray(t, dtype=float), GL_NODES, GL_WEIGHTS, width)
