import logging

import numpy as np
import pytest
from scipy.integrate import trapezoid

from src.config.exception_handler import ConfigError, DomainError
from src.entities.binding.cascade import build_zeta_cascade, dump_cascade, parse_cascade_dump
from src.entities.binding.forces import (
    build_binding,
    chain_binding,
    coupled_linear_spectrum,
    gl_binding,
    rd_binding,
    toy_binding,
    toy_binding_spec,
)
from src.entities.polynomial.calculus import evaluate, lie_derivative
from src.entities.polynomial.models import IndexedPolynomial
from src.entities.system import catalog
from src.entities.system.operations import apply_noise, chain_vector_field
from src.entities.trajectory.engine import integrate_coupled, sample_noise

TOL = 1e-12


def max_coefficient(p: IndexedPolynomial) -> float:
    return max((abs(c) for _, c in p), default=0.0)


def rho_velocity(model, binding, x, rho):
    """rho' including the binding force."""
    return model.linear_spectrum * rho + model.difference(x, rho) + apply_noise(model, binding.force_rho(x, rho))


class TestToyBinding:
    def test_diagonal(self, rng):
        x = rng.normal(size=(4, 2))
        np.testing.assert_allclose(toy_binding(x, x), 0.0)

    def test_unit_rho2(self):
        assert toy_binding(np.zeros(2), np.array([0.0, 1.0]))[0] == pytest.approx(-10.0)

    def test_cubic_in_rho2(self):
        for r2 in (0.5, -2.0):
            expected = -13.0 * r2 + 3.0 * r2**3
            assert toy_binding(np.zeros(2), np.array([0.0, r2]))[0] == pytest.approx(expected)

    def test_zeta_decays_at_rate_two(self, toy, rng):
        binding = build_binding(toy)
        x = rng.normal(size=(6, 2))
        rho = rng.normal(size=(6, 2))
        velocity = rho_velocity(toy, binding, x, rho)
        zeta_dot = velocity[:, 0] + 3.0 * velocity[:, 1]
        np.testing.assert_allclose(zeta_dot, -2.0 * binding.zeta_rho(x, rho)[:, 0], atol=1e-10)

    def test_wrong_model(self, chain5):
        with pytest.raises(DomainError, match="binding for toy2d"):
            toy_binding_spec(chain5)


class TestGinzburgLandauBinding:
    def test_diagonal(self, small_gl):
        x = np.zeros(small_gl.dim)
        assert not gl_binding(x, x, small_gl).any()

    def test_mode_zero(self, small_gl):
        x = np.zeros(small_gl.dim)
        y = x.copy()
        y[0] = 0.5
        assert gl_binding(x, y, small_gl)[0] == pytest.approx(-1.0)

    def test_forced_modes_contract_at_unit_rate(self, small_gl):
        spectrum = coupled_linear_spectrum(small_gl)
        np.testing.assert_allclose(spectrum[:5], -1.0)
        assert np.all(spectrum[5:] <= -small_gl.params["gap"])

    def test_zero_noise_coefficient(self):
        model = catalog.ginzburg_landau(n_modes=16, forced=5, q=[1.0, 1.0, 0.0, 1.0, 1.0])
        with pytest.raises(ConfigError, match="q_k != 0"):
            build_binding(model)


class TestReactionDiffusionBinding:
    def test_diagonal(self, small_rd, rng):
        x = rng.normal(size=small_rd.dim)
        np.testing.assert_allclose(rd_binding(x, x, small_rd), 0.0)

    def test_zeta_follows_heat_flow(self, small_rd, rng):
        binding = build_binding(small_rd)
        n = small_rd.basis.n_modes
        x = rng.normal(scale=0.3, size=(3, small_rd.dim))
        rho = rng.normal(scale=0.3, size=(3, small_rd.dim))
        velocity = rho_velocity(small_rd, binding, x, rho)
        zeta_dot = velocity[:, :n] + 3.0 * velocity[:, n:]
        expected = (small_rd.basis.eigenvalues - 1.0) * binding.zeta_rho(x, rho)
        np.testing.assert_allclose(zeta_dot, expected, atol=1e-10)

    def test_constant_mode_reduces_to_scalar_formula(self, small_rd, toy, rng):
        n = small_rd.basis.n_modes
        root = np.sqrt(2.0 * small_rd.basis.half_length)
        u, r = rng.normal(size=2), rng.normal(size=2)
        x, y = np.zeros(small_rd.dim), np.zeros(small_rd.dim)
        x[[0, n]] = root * u
        y[[0, n]] = root * (u + r)
        # Constant fields evolve like toy2d on their grid values, with zeta rate 1 - lambda_0.
        drift = toy.linear_spectrum * r + toy.difference(u, r)
        zeta = r[0] + 3.0 * r[1]
        expected = -(1.0 - small_rd.basis.eigenvalues[0]) * zeta - (drift[0] + 3.0 * drift[1])
        g = rd_binding(x, y, small_rd)
        assert g[0] == pytest.approx(root * expected, rel=1e-10, abs=1e-10)
        np.testing.assert_allclose(g[1:], 0.0, atol=1e-10)


class TestZetaCascade:
    @pytest.mark.parametrize("a_squared, k_star", [(0.0, 2), (2.0, 3), (5.0, 3)])
    def test_first_variable(self, a_squared, k_star):
        cascade = build_zeta_cascade(catalog.chain(a_squared))
        assert cascade.k_star == k_star
        assert len(cascade.zetas) == k_star
        assert cascade.zetas[0] == IndexedPolynomial.var("rho", k_star - 1)

    @pytest.mark.parametrize("a_squared", [0.0, 2.0, 5.0])
    def test_remainder_shape(self, a_squared):
        cascade = build_zeta_cascade(catalog.chain(a_squared))
        for level, remainder in enumerate(cascade.remainders, start=1):
            for mono, _ in remainder:
                assert any(var.family == "rho" for var, _ in mono)
                assert all(var.index >= cascade.k_star - level + 1 for var, _ in mono)

    @pytest.mark.parametrize("a_squared", [0.0, 2.0, 5.0])
    def test_symbolic_ladder(self, a_squared):
        model = catalog.chain(a_squared)
        cascade = build_zeta_cascade(model)
        field = chain_vector_field(model)
        for lower, upper in zip(cascade.zetas, cascade.zetas[1:]):
            assert max_coefficient(lie_derivative(lower, field) + lower - upper) < TOL
        last = cascade.zetas[-1]
        assert max_coefficient(lie_derivative(last, field) + cascade.g_poly + last) < TOL

    def test_second_variable(self, chain5):
        cascade = build_zeta_cascade(chain5)
        var = IndexedPolynomial.var
        x2, r2 = var("x", 2), var("rho", 2)
        expected = (cascade.c1 + 1.0) * r2 + var("rho", 3) + var("rho", 1) - r2 * (
            3.0 * x2**2 + 3.0 * x2 * r2 + r2**2
        )
        assert cascade.c1 == pytest.approx(1.0)
        assert max_coefficient(cascade.zetas[1] - expected) < TOL

    def test_truncation_overflow(self):
        with pytest.raises(DomainError, match="truncation overflow"):
            build_zeta_cascade(catalog.chain(0.0, truncation=3))

    def test_requires_chain(self, toy):
        with pytest.raises(DomainError):
            build_zeta_cascade(toy)

    def test_dump_reparses(self, chain5):
        cascade = build_zeta_cascade(chain5)
        text = dump_cascade(cascade)
        assert "# k* = 3" in text
        sections = parse_cascade_dump(text)
        assert sections["G"] == cascade.g_poly
        for level in range(1, cascade.k_star + 1):
            assert sections[f"zeta_{level}"] == cascade.zetas[level - 1]
            assert sections[f"Q_{level}"] == cascade.remainders[level - 1]

    @pytest.mark.parametrize("a_squared", [0.0, 5.0])
    def test_wider_truncation_gives_same_cascade(self, a_squared):
        base = build_zeta_cascade(catalog.chain(a_squared))
        wider = build_zeta_cascade(catalog.chain(a_squared, truncation=base.truncation + 6))
        assert wider.zetas == base.zetas
        assert wider.g_poly == base.g_poly

    def test_non_dyadic_coefficients_are_flagged(self, caplog):
        with caplog.at_level(logging.WARNING, logger="src.entities.binding.cascade"):
            build_zeta_cascade(catalog.chain(2.5))
        assert "non-dyadic" not in caplog.text
        with caplog.at_level(logging.WARNING, logger="src.entities.binding.cascade"):
            build_zeta_cascade(catalog.chain(0.1))
        assert "non-dyadic" in caplog.text


class TestChainBinding:
    def test_diagonal(self, chain5, rng):
        cascade = build_zeta_cascade(chain5)
        x = rng.normal(size=(3, chain5.dim))
        np.testing.assert_allclose(chain_binding(cascade, x, x), 0.0)

    def test_last_zeta_decays_at_unit_rate(self, chain5, rng):
        binding = build_binding(chain5)
        cascade = binding.cascade
        x = rng.normal(scale=0.5, size=chain5.dim)
        rho = rng.normal(scale=0.5, size=chain5.dim)
        g = float(binding.force_rho(x, rho)[0])
        # zeta_k* carries rho_0 with unit slope, so G enters its derivative once.
        field = chain_vector_field(chain5)
        values = {v: (x[v.index] if v.family == "x" else rho[v.index]) for v in field.rows}
        last = cascade.zetas[-1]
        dz = evaluate(lie_derivative(last, field), values) + g
        assert dz == pytest.approx(-evaluate(last, values), rel=1e-9, abs=1e-9)

    def test_simulated_zetas_follow_cascade(self, chain5):
        x0 = np.zeros(chain5.dim)
        x0[:2] = 0.5
        y0 = x0.copy()
        y0[:3] -= 0.5
        noise = sample_noise(chain5, 1000, 1e-3, seed=4, members=3)
        traj = integrate_coupled(chain5, build_binding(chain5), x0, y0, noise)
        zeta = traj.zeta_path
        for level in range(zeta.shape[-1] - 1):
            # d zeta_l = (zeta_{l+1} - zeta_l) dt pathwise
            change = zeta[-1, :, level] - zeta[0, :, level]
            integral = trapezoid(zeta[:, :, level + 1] - zeta[:, :, level], traj.times, axis=0)
            scale = 1.0 + np.abs(zeta[:, :, level]).max()
            np.testing.assert_allclose(change, integral, atol=0.05 * scale)

    def test_short_state(self, chain5):
        cascade = build_zeta_cascade(chain5)
        with pytest.raises(DomainError, match="unbound variable"):
            chain_binding(cascade, np.zeros(3), np.ones(3))


class TestBuildBinding:
    def test_linear_model_gets_null_binding(self):
        binding = build_binding(catalog.linear([-1.0], noise_dims=[0]))
        assert binding.name == "null"
        assert not binding.force(np.ones(1), np.zeros(1)).any()

    def test_disabled(self, toy):
        binding = build_binding(toy, enabled=False)
        assert binding.name == "null"
        assert binding.zeta_dim == 0

    @pytest.mark.parametrize("fixture", ["toy", "small_gl", "small_rd", "chain5"])
    def test_formula_is_documented(self, fixture, request):
        assert build_binding(request.getfixturevalue(fixture)).formula
