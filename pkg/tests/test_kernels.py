"""Bulirsch cel kernel and backend equivalence."""
import numpy as np
import pytest

from qdmsim import kernels
from qdmsim.kernels import pure


def agm_k(m):
    """Complete elliptic integral K(m) by the arithmetic-geometric mean."""
    a, g = 1.0, np.sqrt(1.0 - m)
    for _ in range(60):
        a, g = 0.5 * (a + g), np.sqrt(a * g)
        if abs(a - g) < 1e-16 * a:
            break
    return np.pi / (2.0 * a)


def agm_e(m):
    """E(m) via the AGM with the c_n sum."""
    a, g = 1.0, np.sqrt(1.0 - m)
    c = np.sqrt(m)
    total = 0.5 * c * c
    pow2 = 1.0
    for _ in range(60):
        c = 0.5 * (a - g)
        a, g = 0.5 * (a + g), np.sqrt(a * g)
        pow2 *= 2.0
        total += pow2 * c * c * 0.5
        if c < 1e-17:
            break
    return agm_k(m) * (1.0 - total)


def test_cel_k0_is_pi_over_2():
    assert kernels.cel(1.0, 1.0, 1.0, 1.0) == pytest.approx(np.pi / 2, abs=1e-14)


def test_cel_matches_agm_oracle():
    # K(k=0.8) and E(k=0.8): kc = 0.6, m = 0.64
    k_val = kernels.cel(0.6, 1.0, 1.0, 1.0)
    e_val = kernels.cel(0.6, 1.0, 1.0, 0.36)
    assert k_val == pytest.approx(agm_k(0.64), rel=1e-12)
    assert e_val == pytest.approx(agm_e(0.64), rel=1e-12)
    assert k_val == pytest.approx(1.99530, abs=5e-6)
    assert e_val == pytest.approx(1.27635, abs=5e-6)


def test_cel_random_against_quadrature():
    from scipy.integrate import quad
    rng = np.random.default_rng(5)
    for _ in range(12):
        kc = rng.uniform(0.05, 0.999)
        p = rng.uniform(0.05, 2.0) * rng.choice([1.0])
        a = rng.uniform(-2, 2)
        b = rng.uniform(-2, 2)

        def f(phi):
            c2, s2 = np.cos(phi) ** 2, np.sin(phi) ** 2
            return (a * c2 + b * s2) / (
                (c2 + p * s2) * np.sqrt(c2 + kc * kc * s2))
        want, _ = quad(f, 0.0, np.pi / 2, limit=200)
        assert kernels.cel(kc, p, a, b) == pytest.approx(want, rel=1e-9,
                                                         abs=1e-12)


def test_cel_negative_p_branch_finite():
    # p < 0 takes the Cauchy principal value branch; check it is finite
    # and consistent between backends (covered numerically in
    # test_backends_agree when the extension is present)
    val = kernels.cel(0.7, -0.5, 1.2, 0.4)
    assert np.isfinite(val)
    assert val == pytest.approx(float(pure.cel(0.7, -0.5, 1.2, 0.4)),
                                rel=1e-12)


def test_cel_rejects_kc_zero_and_p_zero():
    with pytest.raises(ValueError):
        kernels.cel(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        kernels.cel(0.5, 0.0, 1.0, 1.0)


def test_cel_vectorized_matches_scalar():
    rng = np.random.default_rng(2)
    kc = rng.uniform(0.01, 1.0, 64)
    p = rng.uniform(0.05, 3.0, 64)
    a = rng.uniform(-1, 1, 64)
    b = rng.uniform(-1, 1, 64)
    vec = kernels.cel(kc, p, a, b)
    for i in range(0, 64, 7):
        assert vec[i] == pytest.approx(
            float(kernels.cel(kc[i], p[i], a[i], b[i])), rel=1e-13)


@pytest.mark.skipif(kernels.BACKEND == "pure",
                    reason="compiled backend not available")
def test_backends_agree():
    from qdmsim.kernels import _fast
    rng = np.random.default_rng(3)
    kc = rng.uniform(0.01, 1.0, 200)
    p = np.concatenate([rng.uniform(0.05, 3.0, 100),
                        rng.uniform(-3.0, -0.05, 100)])
    a = rng.uniform(-1, 1, 200)
    b = rng.uniform(-1, 1, 200)
    np.testing.assert_allclose(_fast.cel(kc, p, a, b),
                               pure.cel(kc, p, a, b), rtol=1e-10)


@pytest.mark.skipif(kernels.BACKEND == "pure",
                    reason="compiled backend not available")
def test_backend_propagators_agree():
    from qdmsim.constants import GAMMA_E, TWO_PI
    from qdmsim.kernels import _fast
    from qdmsim.spin import XYSequence, _compile_sequence

    seq = XYSequence.matched(300e3, 8, 8, rabi_omega=TWO_PI * 2.7e6)
    rng = np.random.default_rng(4)
    m = 64
    b_ac = rng.uniform(0, 5e-6, m)
    delta = rng.uniform(-np.pi, np.pi, m)
    det = rng.uniform(-2e6, 2e6, m) * TWO_PI
    omega = np.full(m, TWO_PI * 2.7e6)
    for model in ("rate", "tilted", "full"):
        (kind, f0, f1, phs), final_op = _compile_sequence(seq, model)
        args = dict(w_ac=TWO_PI * 300e3, gamma_pref=TWO_PI * GAMMA_E,
                    include_static=model == "full", ac_in_pulse=True,
                    n_slices=8)
        a_c = _fast.xyn_propagate(kind, f0, f1, phs, b_ac, delta, det,
                                  omega, **args)
        a_p = pure.xyn_propagate(kind, f0, f1, phs, b_ac, delta, det,
                                 omega, **args)
        np.testing.assert_allclose(a_c[0], a_p[0], atol=1e-12)
        np.testing.assert_allclose(a_c[1], a_p[1], atol=1e-12)
