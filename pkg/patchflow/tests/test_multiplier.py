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


class TestSymbol:
    def test_evaluate(self):
        from patchflow.multiplier import evaluate, symbol

        assert evaluate(symbol("euler"), 2.0) == 1.0
        assert evaluate(symbol("loglog_euler", beta=1.0), 0.0) == 0.0
        assert math.isclose(evaluate(symbol("alpha_sqg", alpha=0.5), 4.0, 1), 0.25)

    def test_evaluate_errors(self):
        from patchflow.multiplier import evaluate, symbol
        from patchflow.utils import OrderError, SymbolError

        sym = symbol("alpha_sqg", alpha=0.5)
        with pytest.raises(OrderError):
            evaluate(sym, 1.0, sym.max_order + 1)
        with pytest.raises(SymbolError):
            evaluate(sym, 0.0, 1)
        with pytest.raises(SymbolError):
            evaluate(sym, -1.0)

    def test_derivatives_match_closed_form(self):
        from patchflow.multiplier import symbol

        r = np.array([0.5, 3.0, 40.0])
        d = symbol("loglog_euler", beta=1.0).derivatives(r, 1)
        inner = np.log1p(r * r)
        assert np.allclose(d[0], np.log1p(inner))
        assert np.allclose(d[1], 2.0 * r / ((1.0 + r * r) * (1.0 + inner)))
        d = symbol("qg_shallow_water", lam=2.0).derivatives(r, 1)
        assert np.allclose(d[0], r**2 / (r**2 + 4.0))
        assert np.allclose(d[1], 8.0 * r / (r**2 + 4.0) ** 2)

    def test_m_tilde_stable(self):
        from patchflow.multiplier import symbol

        sym = symbol("loglog_euler", beta=1.0)
        u = np.array([1.0, 10.0, 690.0])
        mt = sym.m_tilde(u, 1)
        assert np.all(np.isfinite(mt))
        assert np.allclose(mt[0][:2], sym(np.exp(u[:2])))
        assert math.isclose(float(mt[0][2]), math.log1p(1380.0), rel_tol=1e-12)

    def test_descriptor(self):
        from patchflow.multiplier import MultiplierSymbol

        sym = MultiplierSymbol.from_descriptor({"family": "euler_lambda", "lambda": 2})
        assert sym.params["lam"] == 2.0
        assert sym.descriptor() == {"family": "euler_lambda", "lambda": 2.0}
        assert MultiplierSymbol.from_descriptor(sym.descriptor()) == sym
        assert hash(sym) == hash(MultiplierSymbol.from_descriptor({"family": "euler_lambda", "lam": 2.0}))
        assert sym.m_zero == 1.0
        assert not sym.monotone

    def test_descriptor_errors(self):
        from patchflow.multiplier import MultiplierSymbol
        from patchflow.utils import SymbolError

        for bad in ({"beta": 1.0}, {"family": "navier"}, {"family": "alpha_sqg"}, {"family": "alpha_sqg", "alpha": 2.5}, {"family": "euler", "beta": 1.0}):
            with pytest.raises(SymbolError):
                MultiplierSymbol.from_descriptor(bad)
        with pytest.raises(SymbolError):
            MultiplierSymbol.from_descriptor({"family": "custom", "expression": "__import__('os')"})
        with pytest.raises(SymbolError):
            MultiplierSymbol.from_descriptor({"family": "custom", "expression": "log(r"})

    def test_custom_expression(self):
        from patchflow.multiplier import symbol

        sym = symbol("custom", expression="log(1 + log(1 + r**2))")
        ref = symbol("loglog_euler", beta=1.0)
        r = np.geomspace(1e-2, 1e4, 7)
        assert np.allclose(sym.derivatives(r, 3), ref.derivatives(r, 3))
        assert sym.m_zero == 0.0


class TestHypotheses:
    def test_classify_table(self):
        from patchflow.multiplier import classify, symbol

        euler = classify(symbol("euler"))
        assert euler.h2_class == "H2c"
        assert euler.osgood == "Holds"
        for alpha in (0.3, 0.5, 1.0, 1.5):
            report = classify(symbol("alpha_sqg", alpha=alpha))
            assert report.h2_class == "H2b"
            assert report.osgood == "Fails"
            assert abs(report.alpha_hat - alpha) < 1e-3
        half = classify(symbol("loglog_euler", beta=0.5))
        assert half.h2_class == "H2a"
        assert abs(half.beta_hat - 0.5) < 0.05
        assert half.osgood == "Holds"
        assert classify(symbol("loglog_euler", beta=1.5)).osgood == "Fails"
        log_euler = classify(symbol("log_euler", beta1=1.0))
        assert log_euler.beta_hat == math.inf
        assert log_euler.osgood == "Fails"
        assert classify(symbol("triple_log")).osgood == "Holds"
        assert classify(symbol("loglog_euler", beta=1.0)).osgood in ("Holds", "Undetermined")

    def test_classify_probe_too_small(self):
        from patchflow.multiplier import classify, symbol
        from patchflow.utils import SymbolError

        with pytest.raises(SymbolError):
            classify(symbol("euler"), probe=np.geomspace(1e4, 1e8, 40))

    def test_report_to_dict(self):
        from patchflow.multiplier import classify, symbol

        d = classify(symbol("log_euler", beta1=1.0)).to_dict()
        assert d["beta_hat"] == "+inf"
        assert d["h2_class"] == "H2a"

    def test_mikhlin(self):
        from patchflow.multiplier import check_mikhlin, symbol

        euler = check_mikhlin(symbol("euler"))
        assert euler.passed
        assert euler.vacuous
        loglog = check_mikhlin(symbol("loglog_euler", beta=1.0))
        assert len(loglog.sups) == 3
        assert all(math.isfinite(s) for s in loglog.sups)
        skipped = check_mikhlin(symbol("euler_lambda", lam=1.0))
        assert skipped.skipped
        assert not skipped.passed

    def test_mikhlin_flags_oscillation(self):
        from patchflow.multiplier import check_mikhlin, classify, symbol

        sym = symbol("custom", expression="log(log(e**2 + 2*r + sin(r)))")
        assert not check_mikhlin(sym).passed
        assert classify(sym).h1_positive

    def test_osgood_partial_integral(self):
        from patchflow.multiplier import osgood_partial_integral, symbol

        assert osgood_partial_integral(symbol("euler"), 1.5) == 0.0
        r = math.exp(math.e)
        assert math.isclose(osgood_partial_integral(symbol("euler"), r), 1.0 - math.log(math.log(2.0)), rel_tol=1e-10)

    def test_property_constants(self):
        from patchflow.multiplier import property_constants, symbol

        c = property_constants(symbol("alpha_sqg", alpha=0.5))
        assert math.isclose(c["doubling"], math.sqrt(2.0), rel_tol=1e-9)
        assert math.isclose(c["derivative"], 0.5, rel_tol=1e-9)
        loglog = property_constants(symbol("loglog_euler", beta=1.0))
        for key in ("doubling", "derivative", "power", "quasi_monotone_0.5"):
            assert math.isfinite(loglog[key])
