import numpy as np
import pytest

import virsdd as v
from virsdd.history import PiecewiseLinearHistory


def test_equilibrium_is_fixed_point(P0, eq0):
    u = eq0.as_array()
    for delay in (v.Constant(1.0), v.Reciprocal(0.2, 1.0, 1.0)):
        tr = v.integrate(P0, delay, u, v.SimConfig(t_end=20.0))
        assert np.max(np.abs(tr.y - u)) < 1e-9


def test_k_zero_closed_form(P0):
    P = P0.replace(k=0.0)
    tr = v.integrate(P, v.Constant(1.0), np.array([50.0, 0, 0, 0, 0]), v.SimConfig(t_end=10.0))
    exact = P.lam / P.d + (50.0 - P.lam / P.d) * np.exp(-P.d * 10.0)
    assert tr.y[-1, 0] == pytest.approx(exact, rel=1e-6)


def test_deterministic(P0, eq0, rec_delay):
    cfg = v.SimConfig(t_end=5.0)
    a = v.integrate(P0, rec_delay, eq0.as_array() * 1.1, cfg)
    b = v.integrate(P0, rec_delay, eq0.as_array() * 1.1, cfg)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.t, b.t)


def test_custom_matches_catalog(P0, eq0):
    cfg = v.SimConfig(t_end=3.0)
    phi = eq0.as_array() * 1.2
    ref = v.integrate(P0, v.Reciprocal(0.2, 1.0, 1.0), phi, cfg)
    cus = v.integrate(P0, v.Custom(lambda seg: 0.2 + 0.8 / (1.0 + max(seg(0.0)[2], 0.0))), phi, cfg)
    np.testing.assert_allclose(cus.y, ref.y, rtol=1e-12, atol=1e-12)


def test_overlap_resolved(P0, eq0):
    # delays shorter than the step force lookups inside the current step
    phi = eq0.as_array() * 1.5
    delay = v.Reciprocal(0.05, 0.08, 1.0)
    fine = v.integrate(P0, delay, phi, v.SimConfig(dt=0.005, t_end=5.0))
    errs = []
    for dt in (0.1, 0.05):
        coarse = v.integrate(P0, delay, phi, v.SimConfig(dt=dt, t_end=5.0, stiff_cap=0.0))
        errs.append(np.max(np.abs(coarse.y[-1] - fine.y[-1]) / np.abs(fine.y[-1])))
    assert errs[0] < 5e-2 and errs[1] < errs[0]


def test_fp_tolerance_effect(P0, eq0):
    phi = eq0.as_array() * 1.5
    delay = v.Reciprocal(0.05, 0.08, 1.0)
    loose = v.integrate(P0, delay, phi, v.SimConfig(dt=0.01, t_end=2.0, fp_tol=1e-4))
    tight = v.integrate(P0, delay, phi, v.SimConfig(dt=0.01, t_end=2.0, fp_tol=1e-13))
    tighter = v.integrate(P0, delay, phi, v.SimConfig(dt=0.01, t_end=2.0, fp_tol=5e-14))
    assert np.max(np.abs(tight.y - tighter.y)) < np.max(np.abs(loose.y - tighter.y)) + 1e-15


def test_large_step_warns(P0, eq0):
    with pytest.warns(UserWarning, match="exceeds h/4"):
        v.integrate(P0, v.Constant(1.0), eq0.as_array(), v.SimConfig(dt=0.5, t_end=1.0))


def test_step_failure_reported(P0, eq0):
    with pytest.warns(UserWarning):
        with pytest.raises(v.StepFailureError) as exc:
            v.integrate(P0, v.Reciprocal(0.05, 0.08, 1.0), eq0.as_array() * 1.5,
                        v.SimConfig(dt=0.5, t_end=5.0, fp_maxiter=1, fp_tol=1e-15, stiff_cap=0.0))
    assert exc.value.t > 0.0


def test_blowup_or_failure_never_silent(P0):
    # huge state with uniform steps: RK4 goes unstable
    phi = np.array([1e6, 1e6, 1e6, 1e6, 1e6])
    with pytest.raises((v.BlowupError, v.StepFailureError)):
        v.integrate(P0, v.Constant(1.0), phi, v.SimConfig(dt=0.2, t_end=50.0, stiff_cap=0.0))


def test_stiff_cap_keeps_run_stable(P0):
    phi = np.array([1e2, 1e3, 1e3, 1e4, 1e4])
    tr = v.integrate(P0, v.Constant(1.0), phi, v.SimConfig(dt=0.01, t_end=5.0))
    assert np.all(np.isfinite(tr.y)) and tr.y.min() >= 0.0
    assert np.allclose(np.round(tr.t[-1], 12), 5.0)


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(t_end=-1.0), dict(fp_tol=0.0), dict(fp_maxiter=0),
                                dict(output_stride=0), dict(stiff_cap=-1.0)])
def test_simconfig_validation(kw):
    with pytest.raises(v.DomainError):
        v.SimConfig(**kw)


def test_compatibility(P0, eq0):
    u = eq0.as_array()
    assert v.check_compatibility(u, P0, v.Constant(1.0)) < 1e-9
    c = np.ones(5)
    F = v.rhs(c, 1.0, 1.0, P0)
    assert v.check_compatibility(c, P0, v.Constant(1.0)) == pytest.approx(np.max(np.abs(F)))
    ramp = PiecewiseLinearHistory([-1.0, 0.0], np.array([u - 1e-3, u]))
    assert v.check_compatibility(ramp, P0, v.Constant(1.0)) > 0.0


def test_jit_and_python_agree(tmp_path):
    import os
    import subprocess
    import sys
    code = ("import numpy as np, virsdd as v;"
            "tr=v.integrate(v.P0, v.Reciprocal(0.2,1,1), v.equilibrium(v.P0).as_array()*1.3, v.SimConfig(t_end=2.0));"
            "print(repr(tr.y[-1].tolist()))")
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, VIRSDD_DISABLE_JIT=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    a, b = (np.array(eval(o)) for o in outs)
    np.testing.assert_allclose(a, b, rtol=1e-13)
