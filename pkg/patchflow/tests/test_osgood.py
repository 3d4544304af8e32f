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


class TestProfile:
    def setup_method(self):
        from patchflow.multiplier import symbol
        from patchflow.osgood import OsgoodProfile

        self.euler = OsgoodProfile(symbol("euler"))
        self.loglog = OsgoodProfile(symbol("loglog_euler", beta=0.5))

    def test_euler_closed_forms(self):
        from patchflow.osgood import h_eval, h_tilde_eval, script_h, script_m

        assert self.euler.osgood == "Holds"
        assert self.euler.r0 == 2.0
        assert math.isclose(h_eval(self.euler, math.e**2), math.log(2.0) - math.log(math.log(2.0)), rel_tol=1e-8)
        assert math.isclose(h_eval(self.euler, 1e8), math.log(math.log(1e8)) - math.log(math.log(2.0)), rel_tol=1e-8)
        assert h_eval(self.euler, 2.0) == 0.0
        assert math.isclose(h_tilde_eval(self.euler, math.exp(4.0)), 2.0, rel_tol=1e-10)
        assert math.isclose(h_tilde_eval(self.euler, 0.5), 0.5 * math.log(0.5), rel_tol=1e-10)
        assert math.isclose(script_h(self.euler, 20.0), 0.5 * math.log(10.0), rel_tol=1e-10)
        assert math.isclose(script_h(self.euler, 1.0), 0.5 * math.log(0.5), rel_tol=1e-12)
        assert script_m(self.euler, 3.0) == 6.0

    def test_nu(self):
        from patchflow.multiplier import symbol
        from patchflow.osgood import nu_eval, nu_tilde_eval

        euler = symbol("euler")
        assert math.isclose(nu_eval(euler, math.exp(-1.0)), math.exp(-1.0), rel_tol=1e-14)
        assert math.isclose(nu_eval(euler, 1.0), math.log(2.0), rel_tol=1e-14)
        assert math.isclose(nu_tilde_eval(euler, 0.25), 0.5, rel_tol=1e-14)

    def test_roundtrips(self):
        from patchflow.osgood import h_eval, h_inv, h_tilde_eval, h_tilde_inv, script_h, script_h_inv

        for profile in (self.euler, self.loglog):
            for r in (1.5, 3.0, 100.0, 1e10, 1e200):
                assert math.isclose(h_inv(profile, h_eval(profile, r)), r, rel_tol=1e-8)
            for r in (0.01, 0.7, 5.0, 1e6):
                assert math.isclose(h_tilde_inv(profile, h_tilde_eval(profile, r)), r, rel_tol=1e-8)
            for r in (1.0, profile.r0 * 3.0, 1e5):
                assert math.isclose(script_h_inv(profile, script_h(profile, r)), r, rel_tol=1e-8)

    def test_h_monotone(self):
        from patchflow.osgood import h_eval

        values = [h_eval(self.loglog, r) for r in np.geomspace(0.5, 1e50, 40)]
        assert np.all(np.diff(values) > 0)

    def test_errors(self):
        from patchflow.multiplier import symbol
        from patchflow.osgood import OsgoodProfile, h_eval, nu_eval
        from patchflow.utils import PatchFlowError

        with pytest.raises(PatchFlowError):
            h_eval(self.euler, 0.0)
        with pytest.raises(PatchFlowError):
            nu_eval(symbol("euler"), -1.0)
        with pytest.raises(PatchFlowError):
            OsgoodProfile(symbol("euler"), r0=1.0)


class TestBoundedProfile:
    def setup_method(self):
        from patchflow.multiplier import symbol
        from patchflow.osgood import OsgoodProfile

        self.profile = OsgoodProfile(symbol("alpha_sqg", alpha=0.5))

    def test_range_error(self):
        from patchflow.osgood import h_eval, h_inv
        from patchflow.utils import OsgoodRangeError

        assert self.profile.bounded
        limit = self.profile.h_limit
        assert math.isfinite(limit)
        assert math.isclose(h_inv(self.profile, h_eval(self.profile, 50.0)), 50.0, rel_tol=1e-8)
        with pytest.raises(OsgoodRangeError) as e:
            h_inv(self.profile, limit + 0.1)
        assert math.isclose(e.value.limit, limit)

    def test_envelope_past_horizon(self):
        from patchflow.osgood import blow_up_horizon, envelope_flow_bound, h_eval

        sep0 = 0.01
        horizon = blow_up_horizon(self.profile, h_eval(self.profile, 1.0 / sep0), 1.0)
        assert 0.0 < horizon < math.inf
        env = envelope_flow_bound(self.profile, sep0, 2.0 * horizon, 1.0)
        assert env.lower == 0.0
        assert env.horizon == horizon
        assert sep0 < env.upper


class TestEnvelopes:
    def setup_method(self):
        from patchflow.multiplier import symbol
        from patchflow.osgood import OsgoodProfile

        self.profile = OsgoodProfile(symbol("euler"))

    def test_flow_bound(self):
        from patchflow.osgood import envelope_flow_bound

        start = envelope_flow_bound(self.profile, 0.01, 0.0, 1.0)
        assert start.lower == start.upper == 0.01
        assert start.horizon == math.inf
        env = envelope_flow_bound(self.profile, 0.01, 0.5, 1.0)
        # Euler: 1 / H^-1(H(1/v) + C t) = v^exp(C t)
        assert math.isclose(env.lower, 0.01 ** math.exp(0.5), rel_tol=1e-8)
        assert math.isclose(env.upper, 0.01 ** math.exp(-0.5), rel_tol=1e-8)

    def test_separation(self):
        from patchflow.osgood import envelope_separation

        assert envelope_separation(self.profile, 0.1, 0.0, 3.0) == 0.05
        assert math.isclose(envelope_separation(self.profile, 0.1, 0.2, 3.0), 0.05 ** math.exp(0.6), rel_tol=1e-8)

    def test_invalid(self):
        from patchflow.osgood import envelope_flow_bound, envelope_separation
        from patchflow.utils import PatchFlowError

        with pytest.raises(PatchFlowError):
            envelope_flow_bound(self.profile, 0.0, 1.0, 1.0)
        with pytest.raises(PatchFlowError):
            envelope_separation(self.profile, 0.1, 1.0, -1.0)


class TestHugeInverse:
    def setup_method(self):
        from patchflow.multiplier import symbol
        from patchflow.osgood import OsgoodProfile

        self.profile = OsgoodProfile(symbol("loglog_euler", beta=1.0))

    def test_log_inverse_saturates(self):
        from patchflow.osgood import h_inv, h_inv_log

        assert not self.profile.bounded
        assert 1e50 < h_inv_log(self.profile, 6.0) < math.inf
        assert h_inv_log(self.profile, 8.0) == math.inf
        assert h_inv(self.profile, 8.0) == math.inf

    def test_envelopes_reach_zero(self):
        from patchflow.osgood import envelope_flow_bound, envelope_separation

        env = envelope_flow_bound(self.profile, 0.01, 1.0, 10.0)
        assert env.lower == 0.0
        assert 0.01 < env.upper < math.inf
        assert envelope_separation(self.profile, 0.1, 1.0, 10.0) == 0.0


class TestConcurrentReaders:
    def test_threads_match_sequential(self):
        from concurrent.futures import ThreadPoolExecutor

        from patchflow.multiplier import symbol
        from patchflow.osgood import OsgoodProfile, h_inv_log, script_h_inv

        sym = symbol("loglog_euler", beta=0.5)
        ys = [0.5 + 0.75 * i for i in range(24)]
        reference = OsgoodProfile(sym)
        expected = [(h_inv_log(reference, y), script_h_inv(reference, y)) for y in ys]

        shared = OsgoodProfile(sym)
        with ThreadPoolExecutor(max_workers=8) as pool:
            got = list(pool.map(lambda y: (h_inv_log(shared, y), script_h_inv(shared, y)), reversed(ys * 4)))
        got = got[::-1][: len(ys)]
        for (a, b), (c, d) in zip(got, expected):
            assert math.isclose(a, c, rel_tol=1e-12)
            assert math.isclose(b, d, rel_tol=1e-12)


class TestDichotomy:
    @pytest.mark.parametrize(
        "family,params",
        [("euler", {}), ("loglog_euler", {"beta": 0.5}), ("triple_log", {})],
    )
    def test_partial_sums_grow_when_osgood_holds(self, family, params):
        from patchflow.multiplier import classify, osgood_partial_integral, symbol

        sym = symbol(family, **params)
        assert classify(sym).osgood == "Holds"
        assert osgood_partial_integral(sym, 1e300) - osgood_partial_integral(sym, 1e12) > 1.0

    @pytest.mark.parametrize(
        "family,params,start,tol",
        [("alpha_sqg", {"alpha": 0.5}, 1e12, 1e-5), ("log_euler", {"beta1": 1.0}, 1e100, 1e-2)],
    )
    def test_partial_sums_settle_when_osgood_fails(self, family, params, start, tol):
        from patchflow.multiplier import classify, osgood_partial_integral, symbol

        sym = symbol(family, **params)
        assert classify(sym).osgood == "Fails"
        assert 0.0 <= osgood_partial_integral(sym, 1e300) - osgood_partial_integral(sym, start) < tol
