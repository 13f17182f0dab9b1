import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from qwalk.closed_form import free_hyperlattice_prob, free_msd
from qwalk.errors import QuadratureError
from qwalk.spin_bath import (
    QuadratureSpec, SpinBathModel, SpinBathSpec, spinbath_distribution, spinbath_msd,
    spinbath_msd_lattice, spinbath_prob, spinbath_return_asymptote, spinbath_return_curve,
)

# Frozen from tests/oracles/return_constant.py (density-of-states route, independent of the
# Bessel-power quadrature used by the library).
A2_ORACLE = 0.287347431021
A3_ORACLE = 0.224862693020


def _box(d, L):
    axes = np.meshgrid(*[np.arange(-L, L + 1)] * d, indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


def test_oracle_script_reproduces_frozen_values():
    script = Path(__file__).parent / "oracles" / "return_constant.py"
    out = subprocess.run([sys.executable, str(script)], capture_output=True, text=True, check=True).stdout
    assert f"{A2_ORACLE:.12f}" in out and f"{A3_ORACLE:.12f}" in out


def test_initial_time():
    spec = SpinBathSpec(2)
    assert spinbath_prob((0, 0), 0.0, spec) == pytest.approx(1.0)
    assert spinbath_prob((1, 0), 0.0, spec) == pytest.approx(0.0)
    assert spinbath_msd(2, 1.0, 0.0) == 0.0


def test_reference_quadrature_z5():
    phi = 2 * np.pi * np.arange(10 ** 6) / 10 ** 6
    ref = np.mean(special.j0(5.0 * np.cos(phi)) ** 2)
    for rule in ("trapezoid", "gauss-legendre"):
        spec = SpinBathSpec(1, quadrature=QuadratureSpec(rule=rule))
        assert spinbath_prob((0,), 5.0, spec) == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("d,z", [(1, 7.0), (2, 5.0), (3, 2.5)])
def test_normalisation(d, z):
    vecs = _box(d, int(math.ceil(4 * z)))
    p = spinbath_distribution(vecs, z, SpinBathSpec(d))
    assert abs(p.sum() - 1) < 1e-8
    assert np.all(p >= 0)


def test_symmetry():
    spec = SpinBathSpec(3)
    base = spinbath_prob((1, -2, 3), 4.0, spec)
    for n in [(-1, 2, -3), (3, 1, -2), (2, 3, 1)]:
        assert spinbath_prob(n, 4.0, spec) == pytest.approx(base, rel=1e-12)


@pytest.mark.parametrize("d,delta0,t", [(1, 1.0, 3.0), (2, 0.5, 4.0), (3, 2.0, 0.7)])
def test_msd_half_of_free(d, delta0, t):
    assert spinbath_msd(d, delta0, t) / free_msd(d, delta0, t) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("d", [1, 2])
def test_msd_lattice_sum(d):
    msd, norm = spinbath_msd_lattice(6.0, SpinBathSpec(d))
    assert abs(norm - 1) < 1e-8
    assert msd == pytest.approx(spinbath_msd(d, 1.0, 3.0), abs=1e-6)


def test_convergence_under_doubling():
    z = 40.0
    a = spinbath_prob((0, 0), z, SpinBathSpec(2, quadrature=QuadratureSpec(num_points=256)))
    b = spinbath_prob((0, 0), z, SpinBathSpec(2, quadrature=QuadratureSpec(num_points=512)))
    assert abs(a - b) < 1e-8 * abs(a)


def test_quadrature_budget():
    spec = SpinBathSpec(1, quadrature=QuadratureSpec(max_points=128))
    with pytest.raises(QuadratureError):
        spinbath_prob((0,), 200.0, spec)


def test_validation():
    with pytest.raises(ValueError):
        SpinBathSpec(1, lam=5.0)
    SpinBathSpec(1, lam=10.0)
    with pytest.raises(ValueError):
        QuadratureSpec(num_points=32)
    with pytest.raises(ValueError):
        spinbath_distribution([[0, 0]], 1.0, SpinBathSpec(1))


class TestAsymptote:
    def test_one_dimension_diverges(self):
        r = spinbath_return_asymptote(1)
        assert r.diverges and math.isinf(r.value)

    def test_two_and_three(self):
        a2 = spinbath_return_asymptote(2)
        a3 = spinbath_return_asymptote(3)
        assert a2.value == pytest.approx(A2_ORACLE, abs=1e-6)
        assert a3.value == pytest.approx(A3_ORACLE, abs=1e-6)
        assert not a2.diverges
        assert abs(a2.tail_estimate) < 1e-2

    def test_monotone_in_d(self):
        vals = [spinbath_return_asymptote(d).value for d in (2, 3, 4, 5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestReturnCurve:
    def test_two_dimensions_flat(self):
        curve = spinbath_return_curve(2, np.linspace(50, 200, 7))
        assert curve.flatness() < 0.05
        # z P00 levels off at 2 A_2
        assert np.mean(curve.scaled) == pytest.approx(2 * A2_ORACLE, rel=0.01)

    def test_one_dimension_log_flat(self):
        curve = spinbath_return_curve(1, np.geomspace(100, 1000, 9))
        assert curve.flatness() < 0.10

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_enhanced_over_free(self, d):
        origin = np.zeros((d, 1), dtype=int)
        for z in (10.0, 20.0, 50.0):
            zz = np.linspace(z - np.pi, z + np.pi, 801)
            free_max = free_hyperlattice_prob(origin, zz).max()
            assert spinbath_prob((0,) * d, z, SpinBathSpec(d)) > free_max

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            spinbath_return_curve(2, [10, 5])


def test_model_uses_lattice_time():
    vecs = _box(1, 20)
    m = SpinBathModel(vecs, SpinBathSpec(1, delta0=0.5))
    np.testing.assert_allclose(m.distribution(4.0), spinbath_distribution(vecs, 4.0, m.spec))
