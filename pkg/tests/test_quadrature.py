import math
import sys

import numpy as np
import pytest
from gibbsx import quadrature
from gibbsx.quadrature import MassLeakageError, QuadratureSpec


def quadratic(c: float) -> quadrature.Energy:
    def energy(x: np.ndarray) -> np.ndarray:
        return np.asarray(c * np.sum(x**2, axis=-1))

    return energy


class TestSpec:
    def test_default_nodes(self) -> None:
        vectors = [(1, 401), (2, 401), (3, 99)]
        for dim, expected in vectors:
            assert quadrature.default_nodes(dim) == expected

    def test_invalid(self) -> None:
        vectors = [
            dict(dim=4, box=((0.0, 1.0),) * 4, nodes_per_axis=3),
            dict(dim=1, box=((0.0, 1.0),) * 2, nodes_per_axis=3),
            dict(dim=1, box=((1.0, 0.0),), nodes_per_axis=3),
            dict(dim=1, box=((0.0, math.inf),), nodes_per_axis=3),
            dict(dim=1, box=((0.0, 1.0),), nodes_per_axis=4),
            dict(dim=3, box=((0.0, 1.0),) * 3, nodes_per_axis=401),
        ]
        for kwargs in vectors:
            with pytest.raises(ValueError):
                QuadratureSpec(**kwargs)  # type: ignore[arg-type]
        with pytest.raises(ValueError):
            QuadratureSpec(1, ((0.0, 1.0),), 5, scheme="simpson")

    def test_centred(self) -> None:
        spec = QuadratureSpec.centred((1.0, -1.0), (2.0, 0.5), 5)
        assert spec.box == ((-1.0, 3.0), (-1.5, -0.5))
        assert spec.total_nodes == 25
        assert spec.points().shape == (5, 5, 2)
        # centre is a node
        assert spec.axes()[0][2] == 1.0

    def test_coarsened(self) -> None:
        vectors = [(401, 201), (5, 3), (7, 5), (3, 3)]
        for n, expected in vectors:
            spec = QuadratureSpec(1, ((0.0, 1.0),), n)
            assert spec.coarsened().nodes_per_axis == expected


class TestIntegrate:
    def test_polynomials(self) -> None:
        spec = QuadratureSpec(1, ((-1.0, 1.0),), 2001)
        x = spec.axes()[0]
        ones = quadrature.integrate(np.ones_like(x), spec)
        assert ones == pytest.approx(2.0)
        assert quadrature.integrate(x**2, spec) == pytest.approx(
            2 / 3, rel=1e-6
        )

    def test_product(self) -> None:
        spec = QuadratureSpec(2, ((0.0, 1.0), (0.0, 2.0)), 101)
        pts = spec.points()
        values = pts[..., 0] * pts[..., 1]
        assert quadrature.integrate(values, spec) == pytest.approx(1.0)

    def test_node_weights(self) -> None:
        spec = QuadratureSpec(2, ((0.0, 1.0), (0.0, 2.0)), 11)
        w = quadrature.node_weights(spec)
        assert w.shape == (11, 11)
        assert float(np.sum(w)) == pytest.approx(2.0)


class TestFitBox:
    def test_gaussian(self) -> None:
        spec = quadrature.fit_box(quadratic(1.0), 1)
        lo, hi = spec.box[0]
        assert lo == -hi
        # faces must carry energy above -log(BOUNDARY_RATIO) ~ 27.6
        assert hi**2 > -math.log(1e-12)
        assert hi < 8.0

    def test_centre(self) -> None:
        def energy(x: np.ndarray) -> np.ndarray:
            return np.asarray(np.sum((x - 3.0) ** 2, axis=-1))

        spec = quadrature.fit_box(energy, 2, center=(3.0, 3.0))
        for lo, hi in spec.box:
            assert (lo + hi) / 2 == pytest.approx(3.0)

    def test_leakage(self) -> None:
        def flat(x: np.ndarray) -> np.ndarray:
            return np.zeros(x.shape[:-1])

        with pytest.raises(MassLeakageError):
            quadrature.fit_box(flat, 1)

    def test_density_on_small_box(self) -> None:
        spec = QuadratureSpec(1, ((-1.0, 1.0),), 11)
        with pytest.raises(MassLeakageError):
            quadrature.density(quadratic(1.0), spec)


class TestGibbsIntegral:
    def test_vectors(self) -> None:
        def quartic(x: np.ndarray) -> np.ndarray:
            return np.asarray(x[..., 0] ** 4)

        vectors = [
            (quadratic(100.0), 1, math.sqrt(0.01 * math.pi)),
            (quartic, 1, 2 * math.gamma(1.25)),
            (quadratic(10.0), 2, math.pi / 10),
            (quadratic(1.0), 3, math.pi**1.5),
        ]
        for energy, dim, expected in vectors:
            spec = quadrature.fit_box(energy, dim)
            got = quadrature.gibbs_integral(energy, spec)
            assert got == pytest.approx(expected, rel=1e-6)

    def test_shifted_energy(self) -> None:
        def energy(x: np.ndarray) -> np.ndarray:
            return np.asarray(50.0 + x[..., 0] ** 2)

        spec = quadrature.fit_box(energy, 1)
        got = quadrature.gibbs_integral(energy, spec)
        assert got == pytest.approx(math.sqrt(math.pi) * math.exp(-50))

    def test_resolution(self) -> None:
        spec = quadrature.fit_box(quadratic(1.0), 1)
        change = quadrature.resolution_change(quadratic(1.0), spec)
        assert change < 1e-6


class TestDistances:
    def test_marginals(self) -> None:
        spec = quadrature.fit_box(quadratic(1.0), 2)
        values, _ = quadrature.density(quadratic(1.0), spec)
        cdfs = quadrature.marginal_cdfs(values, spec)
        assert len(cdfs) == 2
        for cdf, ax in zip(cdfs, spec.axes()):
            assert cdf[0] == 0.0 and cdf[-1] == 1.0
            assert np.all(np.diff(cdf) >= 0)
            mid = len(ax) // 2
            assert cdf[mid] == pytest.approx(0.5)

    def test_ks(self) -> None:
        a = np.array([0.0, 0.5, 1.0])
        b = np.array([0.0, 0.25, 1.0])
        assert quadrature.ks_distance(a, b) == 0.25
        assert quadrature.ks_distance(a, a) == 0.0

    def test_weighted_ks(self) -> None:
        n = 1000
        v = (np.arange(n) + 0.5) / n

        def uniform(x: np.ndarray) -> np.ndarray:
            return np.clip(x, 0.0, 1.0)

        d = quadrature.weighted_ks(v, np.ones(n), uniform)
        assert d == pytest.approx(0.5 / n)
        shuffled = np.random.default_rng(0).permutation(v)
        assert quadrature.weighted_ks(shuffled, np.ones(n), uniform) == d

    def test_boundary_ratio(self) -> None:
        E = np.array([10.0, 0.0, 5.0])
        assert quadrature.boundary_ratio(E) == pytest.approx(math.exp(-5))


if __name__ == "__main__":
    sys.exit(pytest.main(args=[__file__]))
