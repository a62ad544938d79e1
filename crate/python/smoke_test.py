"""Smoke test for the pynormsol extension module."""
import math

import pynormsol

CUBIC = '{"G": {"power": 2}, "K": {"power": 2}, "F": {"terms": [{"c": 0.25, "r": 4}]}}'
SIGN_CHANGING = '{"builtin": "sign-changing"}'


def main():
    m, rho = pynormsol.rho_lambda(CUBIC, 1.0)
    assert abs(m - math.sqrt(2)) < 1e-10, m
    assert abs(rho - 4.0) < 1e-8, rho

    (lam,) = pynormsol.solve_mass(CUBIC, 4.0)
    assert abs(lam - 1.0) < 1e-6, lam

    x, u, du = pynormsol.profile(CUBIC, 1.0, nodes=2001, x_max=30.0)
    err = max(abs(ui - math.sqrt(2) / math.cosh(xi)) for xi, ui in zip(x, u))
    assert err < 1e-6, err
    report = pynormsol.verify_profile(CUBIC, 1.0, x, u, du)
    assert report["nehari_rel"] < 1e-7 and report["pohozaev_rel"] < 1e-7, report

    ((case, lo, hi),) = pynormsol.window(SIGN_CHANGING)
    assert abs(lo - 4 * math.sqrt(2) * math.pi / 3) < 1e-6 and math.isinf(hi), (case, lo, hi)

    c6 = pynormsol.gn_constant(6.0)
    assert abs(c6 / (4 / math.pi**2) - 1) < 1e-2, c6

    res = pynormsol.minimize(CUBIC, 4.0)
    assert res["converged"] and abs(res["lambda"] - 1) < 1e-3 and abs(res["energy"] + 2 / 3) < 1e-3, res

    try:
        pynormsol.m_lambda('{"builtin": "cosine-gap", "p": 3}', 1.0)
    except RuntimeError as e:
        assert "degenerate" in str(e)
    else:
        raise AssertionError("expected a degenerate zero")

    try:
        pynormsol.rho_lambda('{"builtin": "nope"}', 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError for an unknown model")

    print("pynormsol smoke test passed")


if __name__ == "__main__":
    main()
