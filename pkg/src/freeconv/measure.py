"""Probability measures on the real line and their Stieltjes transforms.

A measure is either a finite set of weighted atoms, a density sampled on a
grid with quadrature weights, or one of the analytic families semicircle,
uniform, arcsine, point_mass.  The Stieltjes transform convention is

    m_mu(z) = int (x - z)^{-1} dmu(x),

so im m(z) > 0 whenever im z > 0 and m(z) ~ -1/z at infinity.  Analytic
families use closed forms where available; the arcsine family integrates in
the angle variable x = c + r cos(theta) to absorb the endpoint singularity.

Measures are immutable after construction and safe to share across workers.
"""

import math
import numbers

from dataclasses import dataclass

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class SupportInfo:
    """Smallest closed interval [lower, upper] containing the support."""

    lower: float
    upper: float


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Measure:
    """Immutable probability measure on the real line.

    Construct through the module-level factories (`semicircle`, `uniform`,
    `arcsine`, `point_mass`, `atoms`, `grid_density`) rather than directly.
    """

    def __init__(self, family, params=(), locations=None, weights=None,
                 nodes=None, values=None, qweights=None):
        self.family = family
        self.params = tuple(float(p) for p in params)
        self._locations = locations
        self._weights = weights
        self._nodes = nodes
        self._values = values
        self._qweights = qweights
        self._support = self._compute_support()
        if family == "grid":
            cell = 0.5 * (nodes[1:] - nodes[:-1]) * (values[1:] + values[:-1])
            cum = np.concatenate([[0.0], np.cumsum(cell)])
            self._grid_cdf = _readonly(cum / cum[-1])
            # drop zero-mass nodes so a pole sitting on one cannot produce nan
            eff = qweights * values
            keep = eff > 0.0
            self._eff_locs = _readonly(nodes[keep])
            self._eff_mass = _readonly(eff[keep] / np.sum(eff[keep]))

    def _compute_support(self):
        if self.family == "semicircle":
            var, center = self.params
            r = 2.0 * np.sqrt(var)
            return SupportInfo(center - r, center + r)
        if self.family in ("uniform", "arcsine"):
            a, b = self.params
            return SupportInfo(a, b)
        if self.family == "point_mass":
            return SupportInfo(self.params[0], self.params[0])
        if self.family == "atoms":
            return SupportInfo(float(self._locations[0]), float(self._locations[-1]))
        # grid: trim nodes whose density is negligible relative to the peak
        vals = self._values
        cut = 1e-9 * np.max(vals)
        idx = np.nonzero(vals > cut)[0]
        if len(idx) == 0:
            raise ValueError("grid density is identically zero")
        lo = self._nodes[max(idx[0] - 1, 0)]
        hi = self._nodes[min(idx[-1] + 1, len(vals) - 1)]
        return SupportInfo(float(lo), float(hi))

    def support(self):
        return self._support

    @property
    def locations(self):
        return self._locations

    @property
    def weights(self):
        return self._weights

    @property
    def nodes(self):
        return self._nodes

    @property
    def values(self):
        return self._values

    def __repr__(self):
        if self.family in ("atoms", "grid"):
            n = len(self._locations if self.family == "atoms" else self._nodes)
            return "Measure(%s, n=%d)" % (self.family, n)
        return "Measure(%s%r)" % (self.family, self.params)


def semicircle(variance, center=0.0):
    """Semicircle law with the given variance, supported on center +- 2 sqrt(variance)."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    return Measure("semicircle", (variance, center))


def uniform(a, b):
    """Uniform law on [a, b]."""
    if not b > a:
        raise ValueError("need a < b")
    return Measure("uniform", (a, b))


def arcsine(a, b):
    """Arcsine law on [a, b], density 1/(pi sqrt((x-a)(b-x)))."""
    if not b > a:
        raise ValueError("need a < b")
    return Measure("arcsine", (a, b))


def point_mass(c):
    """Unit mass at the point c."""
    return Measure("point_mass", (c,))


def atoms(locations, weights):
    """Finitely many atoms; weights must be nonnegative and sum to 1 within 1e-12."""
    locs = np.asarray(locations, dtype=float)
    wts = np.asarray(weights, dtype=float)
    if locs.ndim != 1 or locs.shape != wts.shape or len(locs) == 0:
        raise ValueError("locations and weights must be equal-length 1d sequences")
    if np.any(wts < 0):
        raise ValueError("weights must be nonnegative")
    total = np.sum(wts)
    if abs(total - 1.0) > 1e-12:
        raise ValueError("weights sum to %.17g, not 1 within 1e-12" % total)
    order = np.argsort(locs, kind="stable")
    return Measure("atoms", (), locations=_readonly(locs[order]),
                   weights=_readonly(wts[order] / total))


def grid_density(nodes, values):
    """Density sampled on an increasing grid with trapezoid quadrature weights.

    The quadrature mass must land within 10% of 1; it is then normalized so
    the stored measure has mass exactly 1.
    """
    x = np.asarray(nodes, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != v.shape or len(x) < 2:
        raise ValueError("nodes and values must be equal-length 1d sequences, len >= 2")
    if np.any(np.diff(x) <= 0):
        raise ValueError("nodes must be strictly increasing")
    if np.any(v < 0):
        raise ValueError("density values must be nonnegative")
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    mass = np.sum(w * v)
    if not 0.9 <= mass <= 1.1:
        raise ValueError("quadrature mass %.6g is not within 10%% of 1" % mass)
    return Measure("grid", (), nodes=_readonly(x), values=_readonly(v / mass),
                   qweights=_readonly(w))


def from_config(tag, params):
    """Build a measure from a string tag and parameter list (config files)."""
    builders = {
        "semicircle": lambda p: semicircle(*p),
        "uniform": lambda p: uniform(*p),
        "arcsine": lambda p: arcsine(*p),
        "point_mass": lambda p: point_mass(*p),
        "atoms": lambda p: atoms(p[0], p[1]),
        "grid": lambda p: grid_density(p[0], p[1]),
    }
    if tag not in builders:
        raise ValueError("unknown measure tag %r (known: %s)" % (tag, sorted(builders)))
    return builders[tag](params)


def _check_point(mu, z):
    z = complex(z)
    if z.imag < 0:
        raise ValueError("stieltjes requires im z >= 0, got %r" % (z,))
    if z.imag == 0:
        s = mu.support()
        if s.lower <= z.real <= s.upper:
            raise ValueError("real z=%g lies inside the support interval [%g, %g]"
                             % (z.real, s.lower, s.upper))
    return z


def _arcsine_panels(mu, z):
    """Gauss-Legendre nodes/weights in theta for the arcsine integral.

    Splits [0, pi] at the angle facing re z and refines dyadically toward it
    when z sits close to the support, so the pole never degrades the panels.
    """
    a, b = mu.params
    c, r = 0.5 * (a + b), 0.5 * (b - a)
    breaks = {0.0, np.pi}
    dist = abs(z.imag) + max(0.0, a - z.real, z.real - b)
    if dist < 0.5 * r:
        u = min(1.0, max(-1.0, (z.real - c) / r))
        theta0 = float(np.arccos(u))
        breaks.add(theta0)
        # theta-distance at which |x(theta) - z| ~ dist: linear in the interior,
        # quadratic when the pole faces an endpoint
        d = max(dist, 1e-12)
        scale = max(d / (r * abs(np.sin(theta0)) + np.sqrt(0.5 * r * d)), 1e-9)
        step = np.pi
        while step > scale:
            step *= 0.5
            for tb in (theta0 - step, theta0 + step):
                if 0.0 < tb < np.pi:
                    breaks.add(tb)
    pts = np.array(sorted(breaks))
    lo, hi = pts[:-1], pts[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    th = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    wt = (half[:, None] * _GL_WEIGHTS[None, :]).ravel() / np.pi
    return c + r * np.cos(th), wt


def stieltjes(mu, z):
    """Stieltjes transform m_mu(z) = int (x - z)^{-1} dmu(x).

    Accepts im z > 0 or real z outside the support interval.
    """
    z = _check_point(mu, z)
    fam = mu.family
    if fam == "point_mass":
        return 1.0 / (mu.params[0] - z)
    if fam == "semicircle":
        var, center = mu.params
        w = z - center
        r = 2.0 * np.sqrt(var)
        s = np.sqrt(complex(w - r)) * np.sqrt(complex(w + r))
        return complex((-w + s) / (2.0 * var))
    if fam == "uniform":
        a, b = mu.params
        if z.imag == 0.0:
            x = z.real
            return complex((np.log(abs(b - x)) - np.log(abs(a - x))) / (b - a))
        return complex((np.log(b - z) - np.log(a - z)) / (b - a))
    if fam == "arcsine":
        xs, wt = _arcsine_panels(mu, z)
        return complex(np.sum(wt / (xs - z)))
    if fam == "atoms":
        return complex(np.sum(mu.weights / (mu.locations - z)))
    return complex(np.sum(mu._eff_mass / (mu._eff_locs - z)))


def stieltjes_derivative(mu, z, k):
    """k-th derivative of the Stieltjes transform, k in {1, 2, 3}.

    Equals k! * int (x - z)^{-(k+1)} dmu(x).
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be in {1, 2, 3}")
    z = _check_point(mu, z)
    fam = mu.family
    fact = float(math.factorial(k))
    if fam == "point_mass":
        return fact * (mu.params[0] - z) ** (-(k + 1))
    if fam == "semicircle":
        var, center = mu.params
        w = z - center
        r = 2.0 * np.sqrt(var)
        s = np.sqrt(complex(w - r)) * np.sqrt(complex(w + r))
        if k == 1:
            return complex((-1.0 + w / s) / (2.0 * var))
        if k == 2:
            return complex(-2.0 / s ** 3)
        return complex(6.0 * w / s ** 5)
    if fam == "uniform":
        a, b = mu.params
        za, zb = a - z, b - z
        if k == 1:
            return complex((1.0 / za - 1.0 / zb) / (b - a))
        if k == 2:
            return complex((1.0 / za ** 2 - 1.0 / zb ** 2) / (b - a))
        return complex(2.0 * (1.0 / za ** 3 - 1.0 / zb ** 3) / (b - a))
    if fam == "arcsine":
        xs, wt = _arcsine_panels(mu, z)
        return complex(fact * np.sum(wt * (xs - z) ** (-(k + 1))))
    if fam == "atoms":
        return complex(fact * np.sum(mu.weights * (mu.locations - z) ** (-(k + 1))))
    return complex(fact * np.sum(mu._eff_mass * (mu._eff_locs - z) ** (-(k + 1))))


def cdf(mu, x):
    """Distribution function mu((-inf, x]), vectorized over x."""
    x = np.asarray(x, dtype=float)
    fam = mu.family
    if fam == "point_mass":
        return (x >= mu.params[0]).astype(float)
    if fam == "semicircle":
        var, center = mu.params
        r = 2.0 * np.sqrt(var)
        u = np.clip((x - center) / r, -1.0, 1.0)
        return 0.5 + (u * np.sqrt(1.0 - u ** 2) + np.arcsin(u)) / np.pi
    if fam == "uniform":
        a, b = mu.params
        return np.clip((x - a) / (b - a), 0.0, 1.0)
    if fam == "arcsine":
        a, b = mu.params
        u = np.clip((2.0 * x - a - b) / (b - a), -1.0, 1.0)
        return 0.5 + np.arcsin(u) / np.pi
    if fam == "atoms":
        idx = np.searchsorted(mu.locations, x, side="right")
        cum = np.concatenate([[0.0], np.cumsum(mu.weights)])
        return cum[idx]
    return np.interp(x, mu.nodes, mu._grid_cdf, left=0.0, right=1.0)


def quantiles(mu, n):
    """Quantiles x_i with CDF(x_i) = (i - 1/2)/n, by bisection to 1e-12 in x."""
    if not (isinstance(n, numbers.Integral) and n >= 1):
        raise ValueError("n must be a positive integer")
    q = (np.arange(1, n + 1) - 0.5) / n
    s = mu.support()
    span = max(s.upper - s.lower, 1.0)
    lo = np.full(n, s.lower - 1e-9 * span)
    hi = np.full(n, s.upper + 1e-9 * span)
    while np.max(hi - lo) > 1e-12:
        mid = 0.5 * (lo + hi)
        below = cdf(mu, mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def levy_distance(mu1, mu2, grid_points=100000):
    """Levy distance between two measures.

    Bisects over epsilon in the sandwich definition, scanning CDFs on a
    uniform grid spanning the joint support padded by 1; accurate to the
    grid resolution (about (span + 2)/grid_points, default ~1e-4).
    """
    s1, s2 = mu1.support(), mu2.support()
    lo = min(s1.lower, s2.lower) - 1.0
    hi = max(s1.upper, s2.upper) + 1.0
    grid = np.linspace(lo, hi, grid_points)
    f2 = cdf(mu2, grid)
    slack = 1e-12

    def ok(eps):
        upper = cdf(mu1, grid + eps) + eps
        lower = cdf(mu1, grid - eps) - eps
        return bool(np.all(f2 <= upper + slack) and np.all(f2 >= lower - slack))

    e_lo, e_hi = 0.0, hi - lo
    if ok(0.0):
        return 0.0
    for _ in range(60):
        mid = 0.5 * (e_lo + e_hi)
        if ok(mid):
            e_hi = mid
        else:
            e_lo = mid
        if e_hi - e_lo < 1e-7:
            break
    return e_hi
