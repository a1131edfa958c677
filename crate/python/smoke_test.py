"""Smoke test for the compiled extension.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import json
import math

import landau_levels_py as ll


def main() -> None:
    assert ll.landau_level(1.0, 2) == 4.0
    assert abs(ll.overlap(0, 0, 1.0, 0.0, 1.0) - (1.0 - math.exp(-0.5))) < 1e-15

    disk = ll.StepPotential([(0.0, 0.5, 1.0)])
    assert disk.sup_norm() == 1.0
    again = ll.StepPotential.from_json(disk.to_json())
    assert again.annuli == disk.annuli

    small = ll.StepPotential([(0.0, 1.0, 0.3)])
    energy = ll.eigenvalue_near_level(1.0, 0, 0, small)
    slope = ll.first_order(0, 0, 1.0, small) / 0.3
    assert 0.0 < energy < 0.3 * slope + 1e-12

    count, table = ll.multiplicity_count(1.0, 0, small, 0, 4, 1e-8)
    assert count == 0 and table.startswith("m,E,displacement,Q_used,residual")

    lambdas = dict(ll.toeplitz_eigs(1.0, 0, 1.0, 0, 60))
    assert abs(sum(lambdas.values()) - 0.5) < 1e-12

    jac = json.loads(ll.jacobian_at_zero(6, 4, 0, 1.0))
    assert all(k > 0 for k in jac["kappa"])

    problem = {"b": 1.0, "q": 0, "sectors": [3], "construction_n": 4, "fixed_odd": [0.1], "tol": 1e-10}
    cert = json.loads(ll.solve_pinning(json.dumps(problem)))
    assert max(cert["residuals"]) <= 1e-10 and cert["sign_indefinite"]

    csv = ll.splitting_scan(1.0, 0, "+", 0.5, 1.0, [0.1, 0.5, 1.0], 0, 5)
    assert csv.splitlines()[0] == "t,m,E,displacement,first_order,resolved"

    try:
        ll.StepPotential([(1.0, 0.5, 0.1)])
    except ValueError:
        pass
    else:
        raise AssertionError("inverted annulus accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
