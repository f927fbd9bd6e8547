"""Clustered coordinate step: stationarity polynomial and its real roots.

Over a cluster of ``T`` APs with quadratic forms ``a_m > 0`` and ``b_m >= 0``
the coordinate cost is

    f(d) = sum_m log(1 + d a_m) - d b_m / (1 + d a_m)

whose derivative is ``sum_m (a_m^2 d + a_m - b_m) / (1 + d a_m)^2``. Clearing
denominators gives a degree ``2T - 1`` polynomial. With ``T = 1`` its single
root is ``(b - a) / a^2``, the dominant-AP step.

The step is solved once per device visit, so the small-degree paths work on
plain Python floats; numpy is only used for the companion eigenproblem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cfactivity.covkit import dominant_step

IM_TOL = 1e-8
NEWTON_STEPS = 5
_SQRT3_2 = math.sqrt(3.0) / 2.0


def _polymul(p, q):
    out = [0.0] * (len(p) + len(q) - 1)
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            out[i + j] += pi * qj
    return out


def _polyval(c, x):
    acc = 0.0
    for ci in reversed(c):
        acc = acc * x + ci
    return acc


def _polyval_der(c, x):
    """Value and first derivative by Horner's scheme."""
    p = dp = 0.0
    for ci in reversed(c):
        dp = dp * x + p
        p = p * x + ci
    return p, dp


@dataclass(frozen=True)
class StepPolynomial:
    """Stationarity polynomial in the scaled variable ``u = scale * d``.

    ``coeffs`` are ascending and normalised to unit max magnitude; ``scale``
    is ``max(a)``, which keeps every coefficient of order one.
    """

    coeffs: tuple
    T: int
    scale: float = 1.0

    @property
    def degree(self) -> int:
        c = list(self.coeffs)
        while c and c[-1] == 0.0:
            c.pop()
        return len(c) - 1

    def __call__(self, d):
        return np.polynomial.polynomial.polyval(np.asarray(d) * self.scale, self.coeffs)


def build_step_poly(a, b) -> StepPolynomial:
    a = [float(x) for x in np.ravel(a)]
    b = [float(x) for x in np.ravel(b)]
    if len(a) != len(b) or not a:
        raise ValueError("a and b must be non-empty and of equal length")
    scale = max(a)
    a_s = [x / scale for x in a]
    b_s = [x / scale for x in b]
    T = len(a)
    coeffs = [0.0] * (2 * T)
    for m in range(T):
        term = [a_s[m] - b_s[m], a_s[m] * a_s[m]]
        for j in range(T):
            if j != m:
                term = _polymul(term, [1.0, 2.0 * a_s[j], a_s[j] * a_s[j]])
        for i, t in enumerate(term):
            coeffs[i] += t
    peak = max(abs(c) for c in coeffs)
    if peak > 0:
        coeffs = [c / peak for c in coeffs]
    return StepPolynomial(coeffs=tuple(coeffs), T=T, scale=scale)


# ------------------------------------------------------------- root finding


def _cubic_roots(c):
    """All three roots of ``c0 + c1 x + c2 x^2 + c3 x^3`` in closed form.

    Returns ``(re, im)`` pairs.
    """
    A, B, C = c[2] / c[3], c[1] / c[3], c[0] / c[3]
    shift = A / 3.0
    p = B - A * A / 3.0
    q = 2.0 * A ** 3 / 27.0 - A * B / 3.0 + C
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0:
        # one real root; pick the cube root that avoids cancellation
        sq = math.sqrt(disc)
        w = -q / 2.0 - sq if q > 0 else -q / 2.0 + sq
        u = math.copysign(abs(w) ** (1.0 / 3.0), w)
        v = -p / (3.0 * u) if u != 0.0 else 0.0
        re = -(u + v) / 2.0 - shift
        im = _SQRT3_2 * (u - v)
        return [(u + v - shift, 0.0), (re, im), (re, -im)]
    if p == 0.0:
        return [(-shift, 0.0)] * 3
    r = 2.0 * math.sqrt(-p / 3.0)
    arg = min(1.0, max(-1.0, 3.0 * q / (p * r)))
    phi = math.acos(arg) / 3.0
    return [(r * math.cos(phi - 2.0 * math.pi * j / 3.0) - shift, 0.0) for j in range(3)]


def _companion_roots(c):
    """Eigenvalues of the companion matrix of an ascending-coefficient polynomial."""
    n = len(c) - 1
    comp = np.zeros((n, n))
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -np.asarray(c[:-1]) / c[-1]
    return [(z.real, z.imag) for z in np.linalg.eigvals(comp)]


def _polish(c, x):
    fx, slope = _polyval_der(c, x)
    for _ in range(NEWTON_STEPS):
        if slope == 0.0 or fx == 0.0:
            break
        x_new = x - fx / slope
        f_new, s_new = _polyval_der(c, x_new)
        if abs(f_new) >= abs(fx):
            break
        x, fx, slope = x_new, f_new, s_new
    return x


def real_roots_of(coeffs, im_tol: float = IM_TOL) -> list:
    """Real roots of an ascending-coefficient real polynomial, sorted."""
    c = [float(x) for x in coeffs]
    while c and c[-1] == 0.0:
        c.pop()
    deg = len(c) - 1
    if deg < 1:
        return []
    if deg == 1:
        return [-c[0] / c[1]]
    if deg == 3:
        z = _cubic_roots(c)
    else:
        z = _companion_roots(c)
    return sorted(_polish(c, re) for re, im in z if abs(im) <= im_tol * (1.0 + abs(re)))


def real_roots(p: StepPolynomial, im_tol: float = IM_TOL) -> np.ndarray:
    """Real stationary points ``d`` of the clustered cost."""
    return np.array(real_roots_of(p.coeffs, im_tol)) / p.scale


# ---------------------------------------------------------------- the step


def _cost_at(d, a, b):
    total = 0.0
    for am, bm in zip(a, b):
        x = 1.0 + d * am
        if x <= 0.0:
            return math.inf
        total += math.log(x) - d * bm / x
    return total


def cluster_cost(d, a, b) -> np.ndarray:
    """``sum_m log(1 + d a_m) - d b_m / (1 + d a_m)``; ``inf`` outside the domain."""
    a = [float(x) for x in np.ravel(a)]
    b = [float(x) for x in np.ravel(b)]
    return np.array([_cost_at(float(x), a, b) for x in np.atleast_1d(d)])


def cluster_step(a, b, gamma_k: float, im_tol: float = IM_TOL) -> float:
    """Best admissible coordinate step over the cluster.

    Candidates are the real stationary points with ``d >= -gamma_k`` plus the
    boundary ``-gamma_k``; the one with the lowest clustered cost wins.
    """
    a = [float(x) for x in np.ravel(a)]
    b = [float(x) for x in np.ravel(b)]
    lo = -float(gamma_k)
    if len(a) == 1:
        return dominant_step(a[0], b[0], gamma_k)
    poly = build_step_poly(a, b)
    best, best_cost = lo, _cost_at(lo, a, b)
    for u in real_roots_of(poly.coeffs, im_tol):
        d = u / poly.scale
        if d >= lo:
            cost = _cost_at(d, a, b)
            if cost < best_cost:
                best, best_cost = d, cost
    return best
