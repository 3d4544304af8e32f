# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
import math

import numpy as np
import pytest


def _rot90(x):
    x = np.asarray(x, dtype=float)
    return np.stack((-x[..., 1], x[..., 0]), axis=-1)


class TestDisk:
    """Euler unit disk: u = x^perp / 2 inside, x^perp / (2 |x|^2) outside"""

    def setup_method(self):
        from patchflow.contour import SimulationState, circle
        from patchflow.kernel import build_table
        from patchflow.multiplier import symbol

        self.table = build_table(symbol("euler"), (1e-6, 1e2))
        self.state = SimulationState((circle(1.0, n=128),), 0.0, self.table)

    def test_nodes_rotate_rigidly(self):
        from patchflow.biot_savart import velocity_nodes

        (u,) = velocity_nodes(self.state)
        nodes = self.state.curves[0].nodes
        normal = np.sum(u * nodes, axis=1)
        assert np.max(np.abs(normal)) < 1e-9
        assert np.allclose(u, 0.5 * _rot90(nodes), atol=1e-4)

    def test_points(self):
        from patchflow.biot_savart import velocity_points

        u = velocity_points(self.state, [[0.0, 0.0], [2.0, 0.0], [0.0, -3.0], [0.3, 0.0]])
        assert np.allclose(u[0], 0.0, atol=1e-12)
        assert np.allclose(u[1], [0.0, 0.25], atol=1e-9)
        assert np.allclose(u[2], [1.0 / 6.0, 0.0], atol=1e-9)
        assert np.allclose(u[3], [0.0, 0.15], atol=1e-4)
        assert velocity_points(self.state, np.zeros((0, 2))).shape == (0, 2)

    def test_point_on_node_takes_node_velocity(self):
        from patchflow.biot_savart import velocity_nodes, velocity_points

        (u,) = velocity_nodes(self.state)
        nodes = self.state.curves[0].nodes
        v = velocity_points(self.state, nodes[[0, 17]])
        assert np.allclose(v, u[[0, 17]], atol=1e-14)

    def test_single_query(self):
        from patchflow.biot_savart import VelocityQuery, velocity, velocity_nodes

        (u,) = velocity_nodes(self.state)
        node = self.state.curves[0].nodes[5]
        assert np.allclose(velocity(self.state, VelocityQuery(node, on_boundary=(0, 5))), u[5], atol=1e-14)
        assert np.allclose(velocity(self.state, (2.0, 0.0)), [0.0, 0.25], atol=1e-9)

    def test_single_query_on_node_is_contact(self):
        from patchflow.biot_savart import VelocityQuery, velocity
        from patchflow.utils import ContactError

        node = self.state.curves[0].nodes[5]
        with pytest.raises(ContactError):
            velocity(self.state, node)
        with pytest.raises(ContactError):
            velocity(self.state, VelocityQuery(node, on_boundary=(1, 5)))

    def test_against_oracle(self):
        from patchflow.biot_savart import velocity, velocity_oracle

        x = (1.5, 0.5)
        u = velocity(self.state, x)
        oracle = velocity_oracle(self.state, x, 400)
        assert np.linalg.norm(u - oracle) <= 1e-2 * np.linalg.norm(u)

    def test_against_oracle_at_many_points(self):
        from patchflow.biot_savart import velocity, velocity_oracle
        from patchflow.contour import SimulationState, circle

        # fine polygon, so the oracle's inscribed area matches the smooth disk
        state = SimulationState((circle(1.0, n=512),), 0.0, self.table)
        rng = np.random.default_rng(7)
        radius = rng.uniform(1.3, 3.0, 20)
        theta = rng.uniform(0.0, 2.0 * math.pi, 20)
        for x in np.column_stack((radius * np.cos(theta), radius * np.sin(theta))):
            u = velocity(state, x)
            oracle = velocity_oracle(state, x, 2048)
            assert np.linalg.norm(u - oracle) <= 1e-4 * np.linalg.norm(u)

    def test_oracle_resolution(self):
        from patchflow.biot_savart import velocity_oracle
        from patchflow.utils import ConfigError

        with pytest.raises(ConfigError):
            velocity_oracle(self.state, (2.0, 0.0), 1)

    def test_strain(self):
        from patchflow.biot_savart import grad_u_sym, grad_u_sym_points
        from patchflow.kernel import sigma

        assert np.allclose(grad_u_sym(self.state, (0.0, 0.0)), 0.0, atol=1e-10)
        assert np.allclose(grad_u_sym(self.state, (2.0, 0.0)), [[0.0, -0.125], [-0.125, 0.0]], atol=1e-8)
        S = grad_u_sym_points(self.state, [[0.3, 0.0], [1.2, -0.4]])
        assert S.shape == (2, 2, 2)
        assert np.allclose(S[0], 0.0, atol=1e-6)
        x = np.array([1.2, -0.4])
        # irrotational outside: sigma(x) / (2 |x|^2)
        assert np.allclose(S[1], sigma(x) / (2.0 * x @ x), atol=1e-6)
        assert np.allclose(np.trace(S, axis1=1, axis2=2), 0.0, atol=1e-14)
        assert np.allclose(S, np.swapaxes(S, 1, 2))

    def test_strain_on_node_is_contact(self):
        from patchflow.biot_savart import grad_u_sym
        from patchflow.utils import ContactError

        with pytest.raises(ContactError):
            grad_u_sym(self.state, self.state.curves[0].nodes[3])

    def test_threads_do_not_change_values(self, monkeypatch):
        from patchflow.biot_savart import velocity_nodes

        monkeypatch.setenv("PATCHFLOW_THREADS", "1")
        (serial,) = velocity_nodes(self.state)
        monkeypatch.setenv("PATCHFLOW_THREADS", "4")
        (parallel,) = velocity_nodes(self.state)
        assert np.array_equal(serial, parallel)

    def test_strength_scales(self):
        from patchflow.biot_savart import velocity_points
        from patchflow.contour import SimulationState, circle

        state = SimulationState((circle(1.0, n=128, strength=-2.0),), 0.0, self.table)
        assert np.allclose(velocity_points(state, [[2.0, 0.0]]), [[0.0, -0.5]], atol=1e-9)


class TestTwoPatches:
    def setup_method(self):
        from patchflow.contour import SimulationState, circle
        from patchflow.kernel import build_table
        from patchflow.multiplier import symbol

        self.table = build_table(symbol("euler"), (1e-6, 1e2))
        self.state = SimulationState((circle(0.5, (-1.0, 0.0), n=96, id=0), circle(0.5, (1.0, 0.0), n=96, id=1)), 0.0, self.table)

    def test_superposition(self):
        from patchflow.biot_savart import velocity_nodes, velocity_points
        from patchflow.contour import SimulationState

        u0, u1 = velocity_nodes(self.state)
        alone = SimulationState(self.state.curves[:1], 0.0, self.table)
        other = velocity_points(SimulationState(self.state.curves[1:], 0.0, self.table), self.state.curves[0].nodes)
        assert np.allclose(u0, velocity_nodes(alone)[0] + other, atol=1e-12)
        # the pair is symmetric under x -> -x, y -> -y
        assert np.allclose(u1, -np.roll(u0, 48, axis=0), atol=1e-9)

    def test_far_field_bound(self):
        from patchflow.biot_savart import far_field_bound, velocity_points
        from patchflow.contour import SimulationState

        other = velocity_points(SimulationState(self.state.curves[1:], 0.0, self.table), self.state.curves[0].nodes)
        bound = far_field_bound(self.state, 0)
        assert np.max(np.linalg.norm(other, axis=1)) <= bound

    def test_velocity_modulus(self):
        from patchflow.biot_savart import velocity_modulus

        value = velocity_modulus(self.state, samples=16)
        assert 0.0 < value < math.inf


class TestQuery:
    def test_validation(self):
        from patchflow.biot_savart import VelocityQuery
        from patchflow.utils import ConfigError

        q = VelocityQuery(np.array([1.0, 2.0]))
        assert q.target == (1.0, 2.0)
        with pytest.raises(ConfigError):
            VelocityQuery((1.0, 2.0, 3.0))
        with pytest.raises(ConfigError):
            VelocityQuery((math.nan, 0.0))
        with pytest.raises(ConfigError):
            VelocityQuery((0.0, 0.0), quad_window=1.0)
        with pytest.raises(ConfigError):
            VelocityQuery((0.0, 0.0), quad_window=0.0)

    def test_default_window(self):
        from patchflow.biot_savart import default_window

        assert math.isclose(default_window(256), 16.0 * math.pi / 256)
        assert default_window(16) == math.pi / 4


class TestEllipse:
    """Euler ellipse with semi-axes 2 and 1: inside, u = (-2 y, x) / 3"""

    def setup_method(self):
        from patchflow.contour import SimulationState, ellipse
        from patchflow.kernel import build_table
        from patchflow.multiplier import symbol

        self.table = build_table(symbol("euler"), (1e-6, 1e2))
        self.state = SimulationState((ellipse(2.0, 1.0, n=256),), 0.0, self.table)

    def test_strain_against_difference(self):
        from patchflow.biot_savart import grad_u_sym, velocity_points

        x = np.array([0.5, 0.3])
        h = 1e-3
        fd = np.column_stack([(velocity_points(self.state, [x + h * e])[0] - velocity_points(self.state, [x - h * e])[0]) / (2 * h) for e in np.eye(2)])
        fd_sym = 0.5 * (fd + fd.T)
        fd_sym -= 0.5 * np.trace(fd_sym) * np.eye(2)
        S = grad_u_sym(self.state, x)
        assert np.allclose(S, fd_sym, rtol=1e-5, atol=1e-7)
        assert np.allclose(S, [[0.0, -1.0 / 6.0], [-1.0 / 6.0, 0.0]], atol=1e-6)

    def test_no_net_flux(self):
        from patchflow.biot_savart import velocity_nodes
        from patchflow.spectral import spectral_derivative

        (u,) = velocity_nodes(self.state)
        dz = spectral_derivative(self.state.curves[0].nodes)
        outward = np.column_stack((dz[:, 1], -dz[:, 0]))
        flux = np.sum(u * outward) * 2.0 * math.pi / len(u)
        assert abs(flux) <= 1e-8

    def test_far_field(self):
        from patchflow.biot_savart import velocity

        area = 2.0 * math.pi
        errors = []
        for r in (10.0, 20.0):
            ratio = np.linalg.norm(velocity(self.state, (r, 0.0))) / (area / (2.0 * math.pi * r))
            errors.append(abs(ratio - 1.0))
        # quadrupole correction (a^2 - b^2) / (4 r^2)
        assert errors[0] < 1e-2
        assert errors[1] < 3e-3
        assert errors[1] < errors[0]
