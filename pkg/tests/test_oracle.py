import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle_cs.model import Basis, Rng, SensingSetup, dct_basis, gen_sparse_signal, make_setup, measure
from oracle_cs.noise import White, sample_noise
from oracle_cs.oracle import SingularSupportError, oracle_reconstruct, restrict_columns


def test_restrict_all_columns_is_identity():
    a = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(restrict_columns(a, [0, 1, 2]), a)


def test_restrict_keeps_support_order():
    a = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(restrict_columns(a, [2, 0]), a[:, [2, 0]])


def test_restrict_elementwise():
    gen = Rng(1).generator()
    u = gen.standard_normal((128, 512))
    support = gen.choice(512, 16, replace=False)
    out = restrict_columns(u, support)
    assert out.shape == (128, 16)
    for i in range(128):
        for j, c in enumerate(support):
            assert out[i, j] == u[i, c]


@pytest.mark.parametrize("support,exc", [([0, 3], IndexError), ([-1], IndexError), ([1, 1], ValueError)])
def test_restrict_rejects(support, exc):
    with pytest.raises(exc):
        restrict_columns(np.zeros((2, 3)), support)


def _hand_setup():
    # identity basis, U restricted to column 0 is [1, 1]^T
    phi = np.array([[1.0, 0.0, 2.0], [1.0, 5.0, 0.0]])
    return SensingSetup(phi, Basis(np.eye(3)), 1.0)


def test_least_squares_hand_example():
    rec = oracle_reconstruct(_hand_setup(), [0], np.array([1.0, 3.0]))
    np.testing.assert_allclose(rec.theta_hat, [2.0, 0.0, 0.0], atol=1e-15)
    assert rec.squared_error is None


def test_noiseless_exact_recovery():
    basis = dct_basis(512)
    gen = Rng(2).generator()
    sig = gen_sparse_signal(512, 16, 1.0, basis, gen)
    setup = make_setup(128, 512, 1 / 128, basis, gen)
    rec = oracle_reconstruct(setup, sig.support, measure(setup, sig.x, np.zeros(128)), x_true=sig.x)
    np.testing.assert_allclose(rec.x_hat, sig.x, atol=1e-10 * np.linalg.norm(sig.x))
    assert rec.squared_error < 1e-18 * (sig.x @ sig.x)


def test_off_support_exactly_zero():
    basis = dct_basis(64)
    gen = Rng(3).generator()
    sig = gen_sparse_signal(64, 5, 1.0, basis, gen)
    setup = make_setup(20, 64, 1 / 20, basis, gen)
    y = measure(setup, sig.x, sample_noise(White(20, 0.1), gen))
    rec = oracle_reconstruct(setup, sig.support, y, x_true=sig.x)
    off = np.setdiff1d(np.arange(64), sig.support)
    assert np.all(rec.theta_hat[off] == 0.0)
    assert rec.squared_error >= 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(6, 30), st.integers(1, 4))
def test_matches_normal_equations(seed, m, k):
    gen = np.random.default_rng(seed)
    n = m + 5
    basis = dct_basis(n)
    setup = SensingSetup(gen.standard_normal((m, n)) / np.sqrt(m), basis, 1 / m)
    support = np.sort(gen.choice(n, k, replace=False))
    y = gen.standard_normal(m)
    u = setup.u[:, support]
    normal = np.linalg.solve(u.T @ u, u.T @ y)
    rec = oracle_reconstruct(setup, support, y)
    np.testing.assert_allclose(rec.theta_hat[support], normal, atol=1e-8 * max(1, np.linalg.norm(normal)))
    # residual orthogonal to the selected columns
    assert np.max(np.abs(u.T @ (y - u @ rec.theta_hat[support]))) <= 1e-8 * np.linalg.norm(y)


def test_error_depends_only_on_noise():
    basis = dct_basis(128)
    gen = Rng(4).generator()
    setup = make_setup(40, 128, 1 / 40, basis, gen)
    support = np.array([3, 17, 50, 99])
    z = sample_noise(White(40, 0.05), gen)
    diffs = []
    for _ in range(2):
        theta = np.zeros(128)
        theta[support] = gen.standard_normal(4)
        rec = oracle_reconstruct(setup, support, measure(setup, basis.matrix @ theta, z))
        diffs.append(rec.theta_hat - theta)
    assert np.max(np.abs(diffs[0] - diffs[1])) <= 1e-12


def test_rank_deficient_support_raises():
    phi = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0], [0.0, 0.0, 3.0]])
    setup = SensingSetup(phi, Basis(np.eye(3)), 1.0)
    with pytest.raises(SingularSupportError):
        oracle_reconstruct(setup, [0, 1], np.ones(3))


def test_support_size_must_be_below_m():
    with pytest.raises(ValueError):
        oracle_reconstruct(_hand_setup(), [0, 1], np.ones(2))


def test_shape_errors():
    with pytest.raises(ValueError):
        oracle_reconstruct(_hand_setup(), [0], np.ones(3))
    with pytest.raises(ValueError):
        oracle_reconstruct(_hand_setup(), [0], np.ones(2), x_true=np.ones(2))
