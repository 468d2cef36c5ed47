"""Random-matrix sampling for H_t = A + U diag(b) U* + sqrt(t) W.

A and B are diagonal, U is Haar unitary, W is GUE normalized so that
sqrt(t) W has limiting spectrum [-2 sqrt(t), 2 sqrt(t)].  The module also
probes resolvents G = (H - z)^{-1} for the trace functionals driving the
approximate subordination function, and realizes the one-column partial
randomness decomposition U = -exp(i theta_i) R_i U^<i>.
"""

import math
from dataclasses import dataclass

import numpy as np


class EigensolverError(RuntimeError):
    """Raised when the dense eigensolver fails; carries the sample seed."""

    def __init__(self, seed, cause):
        super().__init__("eigensolver failure for seed %r: %s" % (seed, cause))
        self.seed = seed


class DegenerateError(RuntimeError):
    """Raised when the decomposition reflection vector cannot be normalized."""


def sample_stream(master_seed, sample_index):
    """Counter-based generator for one sample, splittable by index."""
    return np.random.Generator(np.random.Philox(key=[master_seed, sample_index]))


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    a_diag: np.ndarray
    b_diag: np.ndarray
    t: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.t < 0:
            raise ValueError("t must be >= 0")
        for name in ("a_diag", "b_diag"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.n,):
                raise ValueError("%s must have length n" % name)
            if not np.all(np.isfinite(arr)):
                raise ValueError("%s must be finite" % name)
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class SpectrumSample:
    eigenvalues: np.ndarray
    seed: int
    t: float

    def __post_init__(self):
        arr = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(arr) > 0):
            raise ValueError("eigenvalues must be descending")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "eigenvalues", arr)


@dataclass(frozen=True)
class ResolventProbe:
    z: complex
    g_diag: np.ndarray
    trace_g: complex
    trace_bg: complex
    trace_bgb: complex
    upsilon: complex
    omega_a_c: complex

    def __post_init__(self):
        if self.z.imag > 0 and not self.trace_g.imag > 0:
            raise ValueError("tr G must have positive imaginary part")


@dataclass(frozen=True)
class DecompositionParts:
    index: int
    theta: float
    h_vec: np.ndarray
    r_vec: np.ndarray
    ell: float
    u_reduced: np.ndarray

    def __post_init__(self):
        if abs(np.linalg.norm(self.h_vec) - 1.0) > 1e-12:
            raise ValueError("h_vec must be a unit vector")


def sample_haar_unitary(n, rng):
    """Haar unitary via QR of a complex Ginibre matrix with phase fix.

    The raw QR factor is not Haar; multiplying each column by the
    conjugate sign of the matching R diagonal entry restores the unique
    positive-diagonal factorization whose Q factor is.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    phase = np.where(np.abs(d) > 0, d, 1.0)
    return q * np.conj(phase / np.abs(phase))


def sample_gue(n, rng):
    """GUE with E|W_ij|^2 = 1/n; limiting spectrum [-2, 2]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (x + x.conj().T) / (2.0 * math.sqrt(n))


def build_matrix(a_diag, b_diag, u, t=0.0, w=None):
    """Dense H = diag(a) + U diag(b) U* + sqrt(t) W."""
    h = (u * np.asarray(b_diag)) @ u.conj().T
    h[np.diag_indices_from(h)] += np.asarray(a_diag)
    if w is not None and t > 0:
        h = h + math.sqrt(t) * w
    return h


def assemble(spec, rng=None, return_matrix=False):
    """Draw fresh U (and W for t > 0), build H_t, return its spectrum.

    Draw order is U first, then W, so a fixed stream reproduces the
    sample bit for bit.
    """
    if rng is None:
        rng = sample_stream(spec.seed, 0)
    u = sample_haar_unitary(spec.n, rng)
    w = sample_gue(spec.n, rng) if spec.t > 0 else None
    h = build_matrix(spec.a_diag, spec.b_diag, u, spec.t, w)
    try:
        lam = np.linalg.eigvalsh(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(spec.seed, exc) from exc
    sample = SpectrumSample(lam[::-1], spec.seed, spec.t)
    if return_matrix:
        return sample, h
    return sample


def resolvent_probe(h, b_tilde, t, z):
    """Trace functionals of G = (H - z)^{-1} at one spectral parameter.

    upsilon = tr BG - (tr BG)^2 + tr G tr BGB and the approximate
    subordination point omega_a_c = z - tr BG / tr G + t tr G, with all
    traces normalized by 1/n.
    """
    z = complex(z)
    if z.imag < 1e-10:
        raise ValueError("resolvent probe requires im z >= 1e-10")
    n = h.shape[0]
    g = np.linalg.inv(h - z * np.eye(n))
    trace_g = np.trace(g) / n
    bg = b_tilde @ g
    trace_bg = np.trace(bg) / n
    # tr(BGB) = tr(B BG) by cyclicity; elementwise against the transpose.
    trace_bgb = np.sum(b_tilde * bg.T) / n
    upsilon = trace_bg - trace_bg ** 2 + trace_g * trace_bgb
    omega_a_c = z - trace_bg / trace_g + t * trace_g
    return ResolventProbe(z, np.diagonal(g).copy(), complex(trace_g),
                          complex(trace_bg), complex(trace_bgb),
                          complex(upsilon), complex(omega_a_c))


def partial_decomposition(u, i):
    """Split off the randomness of column i of a Haar unitary.

    With v = U e_i, theta = arg v_i, h = exp(-i theta) v, the Householder
    reflection R = I - r r* built from r = ell (e_i + h) swaps -e_i and h,
    and U^<i> = -exp(-i theta) R U has e_i as its i-th row and column.
    """
    n = u.shape[0]
    if not 0 <= i < n:
        raise ValueError("index out of range")
    if np.max(np.abs(u @ u.conj().T - np.eye(n))) > 1e-10:
        raise ValueError("matrix is not unitary to 1e-10")
    v = u[:, i]
    theta = float(np.angle(v[i])) if v[i] != 0 else 0.0
    h_vec = np.exp(-1j * theta) * v
    s = h_vec.copy()
    s[i] += 1.0
    norm_s = np.linalg.norm(s)
    if norm_s < 1e-8:
        raise DegenerateError("e_i + h has norm below 1e-8 at index %d" % i)
    # ||e_i + h||^2 = 2 (1 + h_i) with h_i = |U_ii| >= 0, so ell is finite.
    ell = math.sqrt(2.0) / norm_s
    r = ell * s
    reflect = np.eye(n) - np.outer(r, r.conj())
    u_reduced = -np.exp(-1j * theta) * (reflect @ u)
    return DecompositionParts(i, theta, h_vec, r, float(ell), u_reduced)
