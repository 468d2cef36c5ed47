"""Ensemble sampling, resolvent probes, partial randomness decomposition."""

import math
import os

import numpy as np
import pytest
import scipy.stats

from freeconv import edge as eg
from freeconv import measure as ms
from freeconv import rmt
from freeconv import subordination as sub

heavy = pytest.mark.skipif(os.environ.get("FREECONV_HEAVY") != "1",
                           reason="about a minute of dense eigensolves; set FREECONV_HEAVY=1")


def uniform_quantiles(n):
    return -1.0 + (2.0 * np.arange(1, n + 1) - 1.0) / n


def test_haar_scalar_modulus():
    u = rmt.sample_haar_unitary(1, rmt.sample_stream(3, 0))
    assert abs(abs(u[0, 0]) - 1.0) < 1e-14


def test_haar_unitarity():
    u = rmt.sample_haar_unitary(64, rmt.sample_stream(3, 1))
    assert np.max(np.abs(u @ u.conj().T - np.eye(64))) < 1e-12


def test_haar_trace_moment():
    # E tr U = 0 with E|tr U|^2 = 1; 4 sigma over 1000 samples.
    traces = [np.trace(rmt.sample_haar_unitary(64, rmt.sample_stream(11, k)))
              for k in range(1000)]
    assert abs(np.mean(traces)) <= 4.0 / math.sqrt(1000)


def test_haar_left_invariance():
    # A + (PU) B (PU)* must match A + U B U* in distribution; the top
    # eigenvalue gives i.i.d. per-sample functionals for the KS test.
    n = 24
    a = uniform_quantiles(n)
    perm = np.eye(n)[::-1]
    plain, permuted = [], []
    for k in range(500):
        u = rmt.sample_haar_unitary(n, rmt.sample_stream(21, k))
        plain.append(np.linalg.eigvalsh(np.diag(a) + (u * a) @ u.conj().T)[-1])
        pu = perm @ rmt.sample_haar_unitary(n, rmt.sample_stream(22, k))
        permuted.append(np.linalg.eigvalsh(np.diag(a) + (pu * a) @ pu.conj().T)[-1])
    assert scipy.stats.ks_2samp(plain, permuted).pvalue >= 0.01


def test_gue_hermitian_exact():
    w = rmt.sample_gue(50, rmt.sample_stream(4, 0))
    assert np.array_equal(w, w.conj().T)


def test_gue_entry_variance():
    w = rmt.sample_gue(1000, rmt.sample_stream(4, 1))
    off = w[~np.eye(1000, dtype=bool)]
    second = np.mean(np.abs(off) ** 2)
    # |W_ij|^2 is exponential with mean and std 1/n.
    se = 1e-3 / math.sqrt(off.size)
    assert abs(second - 1e-3) <= 3.0 * se


@heavy
def test_gue_largest_eigenvalue_mean():
    lam = [np.linalg.eigvalsh(rmt.sample_gue(400, rmt.sample_stream(5, k)))[-1]
           for k in range(2000)]
    assert abs(np.mean(lam) - (2.0 - 1.771086807411601 * 400.0 ** (-2.0 / 3.0))) <= 0.004


def test_assemble_b_zero_exact():
    a = np.array([3.0, 1.0, 2.0, -1.0, 0.0])
    s = rmt.assemble(rmt.EnsembleSpec(5, a, np.zeros(5), 0.0, 42))
    assert np.array_equal(s.eigenvalues, np.sort(a)[::-1])


def test_assemble_a_zero_similarity():
    b = np.linspace(-1.0, 1.0, 60)
    s = rmt.assemble(rmt.EnsembleSpec(60, np.zeros(60), b, 0.0, 43))
    assert np.max(np.abs(s.eigenvalues - np.sort(b)[::-1])) < 1e-10


def test_assemble_bernoulli_arcsine():
    # Bernoulli(+-1) plus Bernoulli(+-1) free convolution is the arcsine
    # law on [-2, 2]; one sample at N=2000 against its closed-form CDF.
    n = 2000
    half = np.concatenate([-np.ones(n // 2), np.ones(n // 2)])
    s = rmt.assemble(rmt.EnsembleSpec(n, half, half, 0.0, 7))
    lam = np.sort(s.eigenvalues)
    theory = 0.5 + np.arcsin(np.clip(lam / 2.0, -1.0, 1.0)) / math.pi
    ranks = np.arange(1, n + 1) / n
    sup = np.max(np.maximum(np.abs(theory - ranks), np.abs(theory - (ranks - 1.0 / n))))
    assert sup <= 0.03


def test_assemble_reproducible():
    spec = rmt.EnsembleSpec(40, np.zeros(40), np.ones(40), 0.5, 99)
    assert np.array_equal(rmt.assemble(spec).eigenvalues, rmt.assemble(spec).eigenvalues)


def test_assemble_spectrum_bound():
    a = uniform_quantiles(120)
    for t in (0.0, 0.3):
        for seed in range(5):
            s = rmt.assemble(rmt.EnsembleSpec(120, a, a, t, seed))
            assert s.eigenvalues[0] <= 1.0 + 1.0 + 2.0 * math.sqrt(t) + 0.5


def test_spec_validation():
    with pytest.raises(ValueError):
        rmt.EnsembleSpec(3, np.zeros(2), np.zeros(3), 0.0, 1)
    with pytest.raises(ValueError):
        rmt.EnsembleSpec(3, np.zeros(3), np.zeros(3), -0.1, 1)
    with pytest.raises(ValueError):
        rmt.EnsembleSpec(3, np.array([np.inf, 0, 0]), np.zeros(3), 0.0, 1)
    with pytest.raises(ValueError):
        rmt.SpectrumSample(np.array([0.0, 1.0]), 1, 0.0)


def test_resolvent_diagonal_exact():
    a = np.linspace(-1.0, 1.0, 30)
    z = 0.3 + 0.05j
    p = rmt.resolvent_probe(np.diag(a).astype(complex), np.zeros((30, 30)), 0.0, z)
    assert np.max(np.abs(p.g_diag - 1.0 / (a - z))) < 1e-13
    assert p.trace_bg == 0 and p.trace_bgb == 0 and p.upsilon == 0


def test_resolvent_herglotz_and_identity():
    n = 80
    a = uniform_quantiles(n)
    rng = rmt.sample_stream(5, 0)
    u = rmt.sample_haar_unitary(n, rng)
    w = rmt.sample_gue(n, rng)
    bt = (u * a) @ u.conj().T
    h = rmt.build_matrix(a, a, u, 0.3, w)
    lam = np.linalg.eigvalsh(h)
    for z in (0.2 + 0.1j, -1.0 + 0.02j, 2.0 + 1.0j):
        p = rmt.resolvent_probe(h, bt, 0.3, z)
        assert p.trace_g.imag > 0
        assert abs(p.trace_g - np.mean(1.0 / (lam - z))) < 1e-9


def test_resolvent_rejects_real_axis():
    h = np.diag(np.ones(4)).astype(complex)
    with pytest.raises(ValueError):
        rmt.resolvent_probe(h, np.zeros((4, 4)), 0.0, 1.0 + 1e-12j)


def test_resolvent_approximate_subordination():
    # One N=1000 draw probed at the upper edge with eta = N^{-0.6}; the
    # trace combination must land near the subordination point.
    n = 1000
    a = uniform_quantiles(n)
    z = eg.find_edge_stability(ms.uniform(-1, 1), ms.uniform(-1, 1), 0.0).e_plus \
        + 1j * n ** (-0.6)
    sol = sub.solve(sub.SubordinationQuery(ms.uniform(-1, 1), ms.uniform(-1, 1), 0.0, z))
    rng = rmt.sample_stream(1, 0)
    u = rmt.sample_haar_unitary(n, rng)
    bt = (u * a) @ u.conj().T
    p = rmt.resolvent_probe(bt + np.diag(a), bt, 0.0, z)
    assert abs(p.omega_a_c - sol.omega1) <= 0.05


def test_decomposition_identities():
    n = 64
    u = rmt.sample_haar_unitary(n, rmt.sample_stream(3, 1))
    e = np.eye(n)
    for i in (0, 17, 63):
        dp = rmt.partial_decomposition(u, i)
        reflect = np.eye(n) - np.outer(dp.r_vec, dp.r_vec.conj())
        assert np.max(np.abs(reflect @ reflect - np.eye(n))) < 1e-12
        assert np.max(np.abs(-np.exp(1j * dp.theta) * (reflect @ dp.u_reduced) - u)) < 1e-10
        assert np.max(np.abs(dp.u_reduced[i] - e[i])) < 1e-12
        assert np.max(np.abs(dp.u_reduced[:, i] - e[i])) < 1e-12
        assert np.max(np.abs(reflect @ e[i] + dp.h_vec)) < 1e-12
        assert np.max(np.abs(reflect @ dp.h_vec + e[i])) < 1e-12
        assert abs(np.linalg.norm(dp.h_vec) - 1.0) < 1e-12


def test_decomposition_validation():
    u = rmt.sample_haar_unitary(8, rmt.sample_stream(3, 2))
    with pytest.raises(ValueError):
        rmt.partial_decomposition(u, 8)
    with pytest.raises(ValueError):
        rmt.partial_decomposition(2.0 * u, 0)
