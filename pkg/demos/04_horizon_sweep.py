"""The observation horizon decides what can be seen.

The round trip to the obstacle behind the wall takes 2*phi = 5.8 time
units.  If recording stops earlier, the reflected signal never makes it
back into the data and the scene is indistinguishable from an empty one;
once T clears the round trip, the verdict flips and the rate locks onto
-2.9.  This sweep reproduces that threshold.
"""

import copy
import pathlib

try:
    import tomllib as toml
except ModuleNotFoundError:
    import tomli as toml

from wallprobe import run_elliptic_pipeline, scenario_from_dict

path = pathlib.Path(__file__).parent.parent / "scenarios" / "layered_wall.toml"
with open(path, "rb") as fh:
    base = toml.load(fh)

print("  T     class                          fitted rate   (round trip = 5.8)")
for T in (4.0, 5.0, 5.8, 6.5, 7.0, 9.0):
    doc = copy.deepcopy(base)
    doc["run"]["T"] = T
    sc = scenario_from_dict(doc, name=f"T={T}")
    v = run_elliptic_pipeline(sc).verdict
    rate = "" if v.rate_estimate is None else f"{v.rate_estimate:+.4f}"
    print(f"{T:5.1f}  {v.classification:30s} {rate}")
