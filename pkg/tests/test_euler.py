import numpy as np
import pytest

from multimp import euler
from multimp.errors import ArityError, ConfigError
from multimp.problems import CandidateField, Lagrangian, catalog_get


class TestEulerResidual:
    def test_cubic_extremal(self):
        res = euler.euler_residual(catalog_get("cubic"), 64)
        assert res.max_abs <= 1e-8
        assert res.max_abs_all <= 1e-8

    def test_cubic_manufactured(self):
        inst = catalog_get("cubic")
        field = CandidateField(lambda t: np.array([t[0] ** 2, t[1]]), inst.domain, 2,
                               lambda t: np.array([[2 * t[0], 0.0], [0.0, 1.0]]))
        res = euler.euler_residual(inst.with_candidate(field), 32, include_boundary=True)
        nodes = res.residual_field.nodes()
        m = res.residual_field.mask
        assert np.allclose(res.residual_field.values[m][:, 0], 24 * nodes[m][:, 0], atol=1e-6)
        assert np.allclose(res.residual_field.values[m][:, 1], 0.0, atol=1e-6)

    def test_constant_candidate(self):
        inst = catalog_get("elasticity", {"a": 2, "b": 1, "c": 1.5})
        field = CandidateField(lambda t: np.array([0.3, -1.0]), inst.domain, 2, lambda t: np.zeros((2, 2)))
        assert euler.euler_residual(inst.with_candidate(field), 16).max_abs == 0.0

    def test_second_order_refinement(self):
        inst = catalog_get("dirichlet")
        field = CandidateField(lambda t: np.array([np.sin(t[0]), 0.0]), inst.domain, 2,
                               lambda t: np.array([[np.cos(t[0]), 0.0], [0.0, 0.0]]))
        inst = inst.with_candidate(field)
        errs = []
        for res in (17, 33):
            out = euler.euler_residual(inst, res)
            nodes = out.residual_field.nodes()
            sel = out.interior
            errs.append(np.max(np.abs(out.residual_field.values[sel][:, 0] + np.sin(nodes[sel][:, 0]))))
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_resolution_guard(self):
        with pytest.raises(ConfigError):
            euler.euler_residual(catalog_get("cubic"), 4)

    def test_csv(self):
        out = euler.euler_residual(catalog_get("dirichlet"), 8)
        text = out.residual_field.to_csv("residual")
        lines = text.splitlines()
        assert lines[0] == "t1,t2,residual_1,residual_2"
        assert len(lines) == 65
        assert "\r" not in text


class TestConjugate:
    def test_trivial(self):
        L = Lagrangian(2, 1, lambda t, x, z: float(np.sum(z)), grad_x=lambda t, x, z: np.zeros(1))
        phi = euler.SlopeField(lambda t, x: np.array([[1.0, 2.0]]), 1, 2)
        ax = (np.linspace(0, 1, 9), np.linspace(0, 2, 11))
        q = euler.GridField(ax, np.full((9, 11, 1, 2), 0.7))
        dx = euler.GridField(ax, np.full((9, 11, 1), -1.3))
        out = euler.conjugate_identity_residual(L, phi, q, dx)
        assert out.identity_max <= 1e-12
        assert out.r_q_max <= 1e-12 and out.r_v_max <= 1e-12

    def test_divergence_of_conserved_product(self):
        L = Lagrangian(1, 1, lambda t, x, z: 0.0, grad_x=lambda t, x, z: np.zeros(1))
        phi = euler.SlopeField(lambda t, x: np.array([[x[0]]]), 1, 1)
        ax = (np.linspace(0, 1, 64),)
        q = euler.GridField(ax, np.exp(-ax[0]).reshape(64, 1, 1))
        dx = euler.GridField(ax, np.exp(ax[0]).reshape(64, 1))
        out = euler.conjugate_identity_residual(L, phi, q, dx)
        assert out.divergence_max <= 1e-10
        assert out.corrected_max <= 1e-12

    def test_fd_derivative_matches(self):
        phi = euler.SlopeField(lambda t, x: np.array([[x[0] ** 2, x[1]], [np.sin(x[0]), 0.0]]), 2, 2)
        D = phi.derivative(np.zeros(2), np.array([0.5, 1.0]))
        assert D[0, 0, 0] == pytest.approx(1.0, abs=1e-8)
        assert D[1, 0, 0] == pytest.approx(np.cos(0.5), abs=1e-8)
        assert D[0, 1, 1] == pytest.approx(1.0, abs=1e-8)

    def test_grid_mismatch(self):
        L = Lagrangian(1, 1, lambda t, x, z: 0.0)
        phi = euler.SlopeField(lambda t, x: np.zeros((1, 1)), 1, 1)
        q = euler.GridField((np.linspace(0, 1, 8),), np.zeros((8, 1, 1)))
        dx = euler.GridField((np.linspace(0, 1, 9),), np.zeros((9, 1)))
        with pytest.raises(ConfigError):
            euler.conjugate_identity_residual(L, phi, q, dx)
        with pytest.raises(ArityError):
            euler.conjugate_identity_residual(L, phi, q, euler.GridField(q.axes, np.zeros((8, 2))))
