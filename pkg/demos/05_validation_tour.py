"""A tour of the built-in correctness machinery.

Every run can be audited: the transformed field satisfies an exact discrete
elliptic identity (machine zero), the classical identity with the continuum
rate converges at second order, the discrete energy is conserved without
damping, the comparison field is sandwiched cellwise between
constant-coefficient solves, and the quadratic integral identities balance.
The command line exposes the same suite as `wallprobe validate`.
"""

import pathlib

from wallprobe import load_scenario
from wallprobe.validate import run_checks

scenario = load_scenario(pathlib.Path(__file__).parent.parent
                         / "scenarios" / "validate_fast.toml")
for name, ok, detail in run_checks(scenario, level="full"):
    print(f"{'PASS' if ok else 'FAIL'}  {name:32s} {detail}")
