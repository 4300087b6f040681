"""The semi-analytic unit-sphere reference solution, on its own.

Solves the scalar constant-mode density equation for each of the four
boundary conditions at their benchmark parameters and tabulates the
scattered field at P = (2, 0, 0) over time.  No boundary element
assembly happens here; this is the oracle the full solver is measured
against.

Run:  python3 demos/reference_solution.py
"""

import numpy as np

from cqbem import TransferKind, TransferSpec
from cqbem.sphere_reference import reference_field_at, solve_reference_density

CONDITIONS = [
    ("A  (thin coating, eps=0.1)", TransferSpec(TransferKind.THIN_COATING, eps=0.1)),
    ("B1 (absorbing, eps=0.1)", TransferSpec(TransferKind.ABSORBING_1, eps=0.1)),
    ("B2 (absorbing+curvature, eps=0.01)",
     TransferSpec(TransferKind.ABSORBING_2, eps=0.01)),
    ("C  (acoustic, m=alpha=k=1)", TransferSpec(TransferKind.ACOUSTIC)),
]

fields = {}
for label, spec in CONDITIONS:
    result = solve_reference_density(spec)
    fields[label] = reference_field_at(result, 2.0)
    print(f"{label:<38} peak |u(P)| = {np.max(np.abs(fields[label])):.5f}")

times = result.scheme.times()
print(f"\n{'t':>6}", *(f"{label.split()[0]:>12}" for label, _ in CONDITIONS))
for t_print in np.arange(2.0, 4.01, 0.25):
    idx = int(round(t_print / result.scheme.tau))
    row = [f"{fields[label][idx]:12.6f}" for label, _ in CONDITIONS]
    print(f"{times[idx]:6.2f}", *row)
