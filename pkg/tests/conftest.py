import pathlib

import numpy as np
import pytest

from wallprobe.medium import (ConstantField, EmptyRegion, Grid, Interval,
                              Layered1D, MediumSpec, Scenario, SourceSpec)

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def scenario_path(name: str) -> str:
    return str(SCENARIO_DIR / f"{name}.toml")


def make_scenario_1d(
    spacing=0.01,
    alpha0=None,
    obstacle=None,
    h=1.0,
    contrast_sign="positive",
    mode="refractive",
    q0=None,
    m0=1.0,
    M0=1.0,
    p=0.0,
    eta=0.1,
    T=2.5,
    taus=(3.0, 9.0, 9),
    margin=0.5,
    name="test",
) -> Scenario:
    """Small 1-d scenario with the grid sized from the truncation radius."""
    alpha0 = alpha0 if alpha0 is not None else ConstantField(1.0)
    q0 = q0 if q0 is not None else ConstantField(0.0)
    obstacle = obstacle if obstacle is not None else EmptyRegion()
    med = MediumSpec(alpha0=alpha0, m0=m0, M0=M0, obstacle=obstacle, h=h,
                     contrast_sign=contrast_sign, mode=mode, q0=q0)
    src = SourceSpec(p=(p,), eta=eta)
    ext = max(abs(p) + eta, 0.0)
    if not obstacle.is_empty:
        lo, hi = obstacle.bounds()
        ext = max(ext, abs(float(lo[0])), abs(float(hi[0])))
    lo_a, _ = alpha0.value_range()
    a_min = lo_a + min(h, 0.0) if (not obstacle.is_empty and mode == "refractive") else lo_a
    c_max = 1.0 if mode == "dissipative" else 1.0 / np.sqrt(a_min)
    L = ext + c_max * T + margin
    n_half = int(np.ceil(L / spacing))
    grid = Grid(dimension=1, origin=(-n_half * spacing,), spacing=spacing,
                extent=(2 * n_half,))
    tau = np.linspace(taus[0], taus[1], taus[2])
    return Scenario(grid=grid, medium=med, source=src, T=T, tau_sweep=tau,
                    margin=margin, name=name)


@pytest.fixture(scope="session")
def wall_medium_kwargs():
    """The canonical behind-the-wall geometry used across test modules."""
    return dict(
        alpha0=Layered1D((1.0, 1.5), (1.0, 4.0, 1.0)),
        obstacle=Interval(2.5, 3.0),
        h=1.0, m0=1.0, M0=2.0,
    )
