"""Upper spectral edge location and edge-scale analysis.

For the additive convolution of mu1, mu2 and a semicircle of variance t,
a square-root upper edge E_+ is the largest real point where the stability
function

    S(z) = (F1'(w1(z)) - 1) (F2'(w2(z)) - 1) - 1

vanishes.  On the real axis beyond the edge S(E) ~ -c sqrt(E - E_+), so a
bisection in E cannot push |S| near machine precision.  The search here runs
in the w2 coordinate instead: for real w2 beyond the support of mu2 the
partner point w1 is recovered by inverting F1 = F2(w2), S has a simple zero
at the critical w2, and the edge abscissa E(w2) = w1 + w2 - F2(w2) satisfies
dE/dw2 = -S/F1', so it is stationary at the root and inherits twice the
accuracy of the located w2.

The edge scale gamma is normalised through the density profile

    rho(E_+ - kappa) ~ (gamma^{3/2} / pi) sqrt(kappa),

which makes gamma = 1 for a standard semicircle on [-2, 2].  For t > 0 the
same gamma has the closed form (-t^3 m''_{mu0}(xi) / 2)^{-1/3}, with xi the
rightmost solution of m'_{mu0}(xi) = 1/t and mu0 the t = 0 base measure.
"""

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import measure as ms
from .subordination import (
    SubordinationQuery,
    density_sweep,
    f_transform,
    f_transform_derivative,
    solve,
)

_FIT_KAPPAS = (1e-2, 5e-3, 2.5e-3)
_FIT_ETAS = (2e-4, 1e-4)


class BracketNotFound(RuntimeError):
    """No zero of the stability function was located above the support."""


class FitUnstable(RuntimeError):
    """Square-root density fit ratios vary too much to be trusted."""


@dataclass(frozen=True)
class EdgeReport:
    e_plus: float
    xi: Optional[float]
    gamma: float
    omega1_edge: float
    omega2_edge: float
    scaled_edge: float
    method: str
    residual: float

    def as_record(self):
        """Flat dict with JSON-friendly values."""
        return asdict(self)


@dataclass(frozen=True)
class StabilityDiagnostics:
    s_value: complex
    t_alpha: complex
    t_beta: complex
    kappa: float


def _real_f(mu, t, x, k=0):
    """F_{mu,t} (k=0) or its k-th derivative at a real point beyond support."""
    z = complex(x, 0.0)
    if k == 0:
        return f_transform(mu, t, z).real
    return f_transform_derivative(mu, t, z, k).real


def _point_mass_location(mu):
    if mu.family == "point_mass":
        return mu.params[0]
    if mu.family == "atoms":
        locs = mu.locations
        if len(locs) == 1:
            return float(locs[0])
    return None


def _shifted(mu, c):
    """The pushforward of mu under x -> x + c."""
    if c == 0.0:
        return mu
    fam = mu.family
    if fam == "semicircle":
        var, center = mu.params
        return ms.semicircle(var, center + c)
    if fam == "uniform":
        a, b = mu.params
        return ms.uniform(a + c, b + c)
    if fam == "arcsine":
        a, b = mu.params
        return ms.arcsine(a + c, b + c)
    if fam == "point_mass":
        return ms.point_mass(mu.params[0] + c)
    if fam == "atoms":
        return ms.atoms(np.asarray(mu.locations) + c, mu.weights)
    return ms.grid_density(np.asarray(mu.nodes) + c, mu.values)


def _invert_f(mu, t, u, eps):
    """Real w beyond the support of mu with F_{mu,t}(w) = u.

    F_{mu,t} is strictly increasing on (sup supp, inf), so the inverse is
    found by a bracketed Newton iteration.  Returns None when u lies below
    the range, which signals that the queried point sits inside the band.
    """
    lo = mu.support().upper + eps
    flo = _real_f(mu, t, lo)
    if not flo < u:
        return None
    step = max(1.0, u - flo)
    hi = lo + step
    for _ in range(80):
        if _real_f(mu, t, hi) >= u:
            break
        step *= 2.0
        hi = lo + step
    else:
        return None
    w = 0.5 * (lo + hi)
    for _ in range(200):
        fw = _real_f(mu, t, w) - u
        if fw > 0.0:
            hi = w
        else:
            lo = w
        d = _real_f(mu, t, w, 1)
        wn = w - fw / d if d > 0.0 else 0.5 * (lo + hi)
        if not lo < wn < hi:
            wn = 0.5 * (lo + hi)
        if abs(wn - w) <= 1e-15 * max(1.0, abs(w)):
            return wn
        w = wn
    return w


def _stability_at(mu1, mu2, t, w2, eps1):
    """(S, w1) at a real w2 beyond the support of mu2, or None inside the band."""
    u = _real_f(mu2, t, w2)
    w1 = _invert_f(mu1, t, u, eps1)
    if w1 is None:
        return None
    a = _real_f(mu1, t, w1, 1) - 1.0
    d = _real_f(mu2, t, w2, 1) - 1.0
    return a * d - 1.0, w1


def _edge_core(mu1, mu2, t, tol):
    """(e_plus, omega1, omega2, residual) for the upper edge.

    The shift case (t = 0 with a point-mass factor) is exact: the edge is the
    translated support endpoint and the stability function never vanishes, so
    it is resolved directly rather than through the root search.
    """
    s1, s2 = mu1.support(), mu2.support()
    if t == 0.0:
        c = _point_mass_location(mu2)
        if c is not None:
            other, o_sup = mu1, s1
        else:
            c = _point_mass_location(mu1)
            other, o_sup = mu2, s2
        if c is not None:
            e_plus = o_sup.upper + c
            w_o = o_sup.upper
            # F of the continuous factor one ulp-scale beyond its endpoint
            # stands in for the boundary limit.
            f_o = _real_f(other, 0.0, w_o + 1e-9 * max(1.0, abs(w_o)))
            if other is mu1:
                return e_plus, w_o, f_o + c, 0.0
            return e_plus, f_o + c, w_o, 0.0

    eps1 = 1e-9 * max(1.0, abs(s1.upper))
    e_hi = s1.upper + s2.upper + 2.0 * math.sqrt(t) + 1.0
    start = solve(SubordinationQuery(mu1, mu2, t, e_hi), tol=1e-13)
    hi = start.omega2.real
    floor = s2.upper
    ev = _stability_at(mu1, mu2, t, hi, eps1)
    for _ in range(60):
        if ev is not None and ev[0] < 0.0:
            break
        hi = floor + 2.0 * (hi - floor)
        ev = _stability_at(mu1, mu2, t, hi, eps1)
    else:
        raise BracketNotFound("no starting point with S < 0 beyond the support")

    # march the gap to the support down geometrically until the sign flips
    # or the partner inversion fails (both mean the band has been entered)
    lo = None
    gap = hi - floor
    for _ in range(400):
        gap *= 0.85
        cand = floor + gap
        ev = _stability_at(mu1, mu2, t, cand, eps1)
        if ev is None or ev[0] >= 0.0:
            lo = cand
            break
        hi = cand
        if gap <= 1e-13 * max(1.0, abs(floor)):
            break
    if lo is None:
        raise BracketNotFound("stability function stays negative above the support")

    for _ in range(200):
        if hi - lo <= 1e-6 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        ev = _stability_at(mu1, mu2, t, mid, eps1)
        if ev is None or ev[0] >= 0.0:
            lo = mid
        else:
            hi = mid

    w2 = hi
    ev = _stability_at(mu1, mu2, t, w2, eps1)
    s_val, w1 = ev
    for _ in range(80):
        if abs(s_val) <= 1e-13:
            break
        f1p = _real_f(mu1, t, w1, 1)
        f2p = _real_f(mu2, t, w2, 1)
        f1pp = _real_f(mu1, t, w1, 2)
        f2pp = _real_f(mu2, t, w2, 2)
        # dS/dw2 with dw1/dw2 = F2'/F1' along the matched curve
        sp = f1pp * (f2p / f1p) * (f2p - 1.0) + (f1p - 1.0) * f2pp
        cand = w2 - s_val / sp if sp != 0.0 else 0.5 * (lo + hi)
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        ev = _stability_at(mu1, mu2, t, cand, eps1)
        if ev is None or ev[0] >= 0.0:
            lo = cand
            if hi - lo <= 1e-15 * max(1.0, abs(hi)):
                break
            continue
        if abs(cand - w2) <= 1e-15 * max(1.0, abs(w2)) and abs(ev[0]) >= abs(s_val):
            w2, (s_val, w1) = cand, ev
            break
        w2, (s_val, w1) = cand, ev
        hi = min(hi, cand)
    if abs(s_val) > 1e-3:
        raise BracketNotFound(
            "stability function does not vanish above the support "
            "(residual %.3g); the edge is not of square-root type" % abs(s_val)
        )
    e_plus = w1 + w2 - _real_f(mu2, t, w2)
    return e_plus, w1, w2, abs(s_val)


def find_edge_stability(mu1, mu2, t, tol=1e-10):
    """Largest real zero of the stability function, packaged with the scale.

    gamma comes from the square-root density fit at t = 0 and from the xi
    closed form at t > 0 whenever one factor is a point mass (the base
    measure is then an exact translate); otherwise the density fit is used
    at t > 0 as well.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    e_plus, w1, w2, resid = _edge_core(mu1, mu2, t, tol)

    xi = None
    if t > 0.0:
        m_edge = ms.stieltjes(mu1, complex(w1, 0.0)).real
        xi = e_plus + t * m_edge

    if t == 0.0:
        gamma = gamma_from_density_fit(mu1, mu2, t, e_plus)
    else:
        c = _point_mass_location(mu2)
        mu0 = _shifted(mu1, c) if c is not None else None
        if mu0 is None:
            c = _point_mass_location(mu1)
            mu0 = _shifted(mu2, c) if c is not None else None
        if mu0 is not None:
            _, gamma = edge_from_xi(mu0, t)
        else:
            gamma = gamma_from_density_fit(mu1, mu2, t, e_plus)

    return EdgeReport(
        e_plus=float(e_plus),
        xi=xi,
        gamma=float(gamma),
        omega1_edge=float(w1),
        omega2_edge=float(w2),
        scaled_edge=float(gamma * e_plus),
        method="stability_root",
        residual=float(resid),
    )


def solve_xi(mu0, t, tol=1e-12):
    """Rightmost xi above the support of mu0 with m'_{mu0}(xi) = 1/t.

    m' is positive and strictly decreasing beyond the support, so a bracket
    always pins the root; the search window grows geometrically and is capped
    at 1e6.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    up = mu0.support().upper
    target = 1.0 / t

    def mprime(x):
        return ms.stieltjes_derivative(mu0, complex(x, 0.0), 1).real

    gap = 1.0
    lo = None
    for _ in range(2000):
        if mprime(up + gap) > target:
            lo = up + gap
            break
        gap *= 0.5
        if gap < 1e-300:
            break
    if lo is None:
        raise BracketNotFound("m' stays below 1/t arbitrarily close to the support")
    width = max(1.0, gap)
    hi = None
    for _ in range(80):
        if mprime(up + width) < target:
            hi = up + width
            break
        width *= 2.0
        if up + width > 1e6:
            raise BracketNotFound("no xi root within the search window (cap 1e6)")
    if hi is None:
        raise BracketNotFound("no xi root within the search window (cap 1e6)")

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mprime(mid) > target:
            lo = mid
        else:
            hi = mid
    xi = 0.5 * (lo + hi)
    for _ in range(5):
        g = mprime(xi) - target
        gp = ms.stieltjes_derivative(mu0, complex(xi, 0.0), 2).real
        if gp == 0.0:
            break
        step = g / gp
        cand = xi - step
        if not lo <= cand <= hi:
            break
        xi = cand
        if abs(step) <= 1e-16 * max(1.0, abs(xi)):
            break
    return float(xi)


def edge_from_xi(mu0, t, tol=1e-12):
    """(e_plus, gamma) of mu0 convolved with a semicircle of variance t."""
    xi = solve_xi(mu0, t, tol)
    m = ms.stieltjes(mu0, complex(xi, 0.0)).real
    mpp = ms.stieltjes_derivative(mu0, complex(xi, 0.0), 2).real
    e_plus = xi - t * m
    gamma = (-(t ** 3) * 0.5 * mpp) ** (-1.0 / 3.0)
    return float(e_plus), float(gamma)


def gamma_from_density_fit(mu1, mu2, t, e_plus):
    """Edge scale from the square-root density profile just inside the edge.

    Fits rho(e_plus - kappa) = c sqrt(kappa) through the origin at three
    kappa values and returns (pi c)^{2/3}.
    """
    kappas = np.array(_FIT_KAPPAS)
    rho, _, _ = density_sweep(mu1, mu2, t, e_plus - kappas, eta_seq=_FIT_ETAS)
    if not np.all(np.isfinite(rho)) or np.any(rho <= 0.0):
        raise FitUnstable("density evaluations near the edge failed or vanished")
    ratios = rho / np.sqrt(kappas)
    spread = (ratios.max() - ratios.min()) / ratios.min()
    if spread > 0.20:
        raise FitUnstable(
            "rho/sqrt(kappa) varies by %.0f%% across the fit points" % (100 * spread)
        )
    c = float(np.sum(rho * np.sqrt(kappas)) / np.sum(kappas))
    return (math.pi * c) ** (2.0 / 3.0)


def classical_locations(mu1, mu2, t, n, top_k, window=1.0, grid_points=None):
    """Deterministic eigenvalue locations gamma_1 >= ... >= gamma_top_k.

    gamma_j leaves tail mass (j - 1/2)/n above it under the convolved
    measure; the tail CDF is built by quadrature of the computed density on
    a grid refined quadratically toward the edge, widening the window until
    the deepest target is covered.
    """
    if n <= 0 or top_k <= 0 or top_k > n:
        raise ValueError("need 0 < top_k <= n")
    e_plus, _, _, _ = _edge_core(mu1, mu2, t, 1e-10)
    targets = (np.arange(1, top_k + 1) - 0.5) / n

    s1, s2 = mu1.support(), mu2.support()
    span_cap = e_plus - (s1.lower + s2.lower - 2.0 * math.sqrt(t)) + 0.5
    w = min(float(window), span_cap)
    if grid_points is None:
        grid_points = int(max(800, min(6000, 12 * top_k)))
    for _ in range(9):
        kap = w * np.linspace(0.0, 1.0, grid_points) ** 2
        rho, _, _ = density_sweep(mu1, mu2, t, (e_plus - kap)[::-1], eta_seq=_FIT_ETAS)
        rho = np.where(np.isfinite(rho), rho, 0.0)[::-1]
        tail = np.concatenate(
            ([0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(kap)))
        )
        if tail[-1] >= targets[-1] + 0.2 / n or w >= span_cap:
            break
        w = min(1.7 * w, span_cap)
    if tail[-1] <=  0.0:
        raise FitUnstable("no absolutely continuous mass below the edge")

    keep = np.diff(tail, prepend=-1.0) > 0.0
    locs = e_plus - np.interp(np.minimum(targets, tail[keep][-1]), tail[keep], kap[keep])
    return locs


def stability_diagnostics(mu1, mu2, t, z, edge):
    """S, T_alpha, T_beta and the edge distance at a point z.

    At the edge abscissa itself the polished subordination pair from the
    edge report is used directly; the generic solver loses half its digits
    there because the linearised system is singular at the edge.
    """
    zc = complex(z)
    if zc.imag == 0.0 and abs(zc.real - edge.e_plus) <= 1e-11 * max(1.0, abs(edge.e_plus)):
        w1 = complex(edge.omega1_edge, 0.0)
        w2 = complex(edge.omega2_edge, 0.0)
    else:
        sol = solve(SubordinationQuery(mu1, mu2, t, zc), tol=1e-13)
        w1, w2 = sol.omega1, sol.omega2
    f1p = f_transform_derivative(mu1, t, w1, 1)
    f2p = f_transform_derivative(mu2, t, w2, 1)
    f1pp = f_transform_derivative(mu1, t, w1, 2)
    f2pp = f_transform_derivative(mu2, t, w2, 2)
    a = f1p - 1.0
    d = f2p - 1.0
    return StabilityDiagnostics(
        s_value=a * d - 1.0,
        t_alpha=0.5 * (f1pp * d * d + f2pp * a),
        t_beta=0.5 * (f2pp * a * a + f1pp * d),
        kappa=abs(zc.real - edge.e_plus),
    )
