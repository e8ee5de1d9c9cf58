"""Static problem setup: grids, regions, media, sources, scenarios.

A scenario bundles everything the solvers need: a background coefficient
field (known), an obstacle region carrying a contrast of definite sign
(unknown to the detection method, known to the simulator), a source ball B
disjoint from the obstacle, a time horizon T and the sweep of decay rates
tau.  The unbounded domain is truncated to a box sized so that no signal
can reach the boundary and return to B within [0, T]; with that guarantee
a homogeneous Dirichlet box is exact for the hyperbolic solve.

Cell values of region-based fields are analytic volume fractions (no
randomization anywhere): interval and box overlaps are exact, ball-cell
overlaps in 3D are computed by slicing into z-slabs and integrating the
exact circle-rectangle intersection area with Gauss-Legendre panels split
at the integrand's kink locations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

try:
    import tomllib as _toml  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as _toml


class ScenarioError(Exception):
    """Base class for scenario construction failures."""


class ParseError(ScenarioError):
    """Malformed scenario file."""


class ValidationError(ScenarioError):
    """A scenario invariant is violated; ``invariant`` names it."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"[{invariant}] {message}")
        self.invariant = invariant


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on a box, dimension 1 or 3."""

    dimension: int
    origin: tuple[float, ...]
    spacing: float
    extent: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 3):
            raise ValidationError("grid.dimension", f"dimension must be 1 or 3, got {self.dimension}")
        if not self.spacing > 0:
            raise ValidationError("grid.spacing", f"spacing must be positive, got {self.spacing}")
        if len(self.origin) != self.dimension or len(self.extent) != self.dimension:
            raise ValidationError("grid.shape", "origin/extent length must equal dimension")
        if any(n < 8 for n in self.extent):
            raise ValidationError("grid.extent", f"need at least 8 cells per axis, got {self.extent}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extent

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.extent[axis]) + 0.5) * self.spacing

    def centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, broadcastable to ``shape``."""
        out = []
        for ax in range(self.dimension):
            c = self.axis_centers(ax)
            sl = [None] * self.dimension
            sl[ax] = slice(None)
            out.append(c[tuple(sl)])
        return tuple(out)

    def upper(self) -> tuple[float, ...]:
        return tuple(self.origin[a] + self.extent[a] * self.spacing for a in range(self.dimension))


@dataclass(frozen=True)
class ScalarField:
    """A real-valued function sampled on the cells of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValidationError("field.shape", f"{self.values.shape} != grid {self.grid.shape}")

    @property
    def ess_inf(self) -> float:
        return float(self.values.min())

    @property
    def ess_sup(self) -> float:
        return float(self.values.max())

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.cell_volume))


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

class Region:
    """Bounded region with analytic cell-coverage fractions."""

    @property
    def is_empty(self) -> bool:
        return False

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def coverage(self, grid: Grid) -> np.ndarray:
        """Fraction of each grid cell covered by the region, in [0, 1]."""
        raise NotImplementedError

    def distance_to_point(self, p: Sequence[float]) -> float:
        """Euclidean distance from p to the region's closure (0 inside)."""
        raise NotImplementedError


class EmptyRegion(Region):
    @property
    def is_empty(self) -> bool:
        return True

    def bounds(self):
        return np.zeros(0), np.zeros(0)

    def coverage(self, grid: Grid) -> np.ndarray:
        return np.zeros(grid.shape)

    def distance_to_point(self, p) -> float:
        return math.inf


def _axis_overlap_fraction(centers: np.ndarray, h: float, lo: float, hi: float) -> np.ndarray:
    left = np.maximum(centers - h / 2, lo)
    right = np.minimum(centers + h / 2, hi)
    return np.clip(right - left, 0.0, None) / h


@dataclass(frozen=True)
class Interval(Region):
    """Open interval ]lo, hi[ — the 1-d region kind."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError("region.interval", f"need lo < hi, got [{self.lo}, {self.hi}]")

    def bounds(self):
        return np.array([self.lo]), np.array([self.hi])

    def coverage(self, grid: Grid) -> np.ndarray:
        if grid.dimension != 1:
            raise ValidationError("region.dimension", "interval region requires a 1-d grid")
        return _axis_overlap_fraction(grid.axis_centers(0), grid.spacing, self.lo, self.hi)

    def distance_to_point(self, p) -> float:
        x = float(np.asarray(p).reshape(-1)[0])
        return max(self.lo - x, x - self.hi, 0.0)


@dataclass(frozen=True)
class Box(Region):
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValidationError("region.box", f"need lo < hi per axis, got {self.lo}, {self.hi}")

    def bounds(self):
        return np.asarray(self.lo, float), np.asarray(self.hi, float)

    def coverage(self, grid: Grid) -> np.ndarray:
        if grid.dimension != len(self.lo):
            raise ValidationError("region.dimension", "box dimensionality must match the grid")
        fr = [
            _axis_overlap_fraction(grid.axis_centers(a), grid.spacing, self.lo[a], self.hi[a])
            for a in range(grid.dimension)
        ]
        if grid.dimension == 1:
            return fr[0]
        return fr[0][:, None, None] * fr[1][None, :, None] * fr[2][None, None, :]

    def distance_to_point(self, p) -> float:
        p = np.asarray(p, float)
        d = np.maximum(np.asarray(self.lo) - p, p - np.asarray(self.hi))
        return float(np.linalg.norm(np.maximum(d, 0.0)))


@dataclass(frozen=True)
class Ball(Region):
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("region.ball", f"radius must be positive, got {self.radius}")

    def bounds(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    def coverage(self, grid: Grid) -> np.ndarray:
        if grid.dimension != len(self.center):
            raise ValidationError("region.dimension", "ball dimensionality must match the grid")
        if grid.dimension == 1:
            return _axis_overlap_fraction(
                grid.axis_centers(0), grid.spacing,
                self.center[0] - self.radius, self.center[0] + self.radius,
            )
        return _ball_coverage_3d(grid, np.asarray(self.center, float), self.radius)

    def distance_to_point(self, p) -> float:
        p = np.asarray(p, float)
        return max(float(np.linalg.norm(p - np.asarray(self.center))) - self.radius, 0.0)


@dataclass(frozen=True)
class UnionRegion(Region):
    """Union of pairwise-disjoint member regions (coverages simply add)."""

    members: tuple[Region, ...]

    def __post_init__(self):
        if not self.members:
            raise ValidationError("region.union", "union needs at least one member")
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                lo1, hi1 = self.members[i].bounds()
                lo2, hi2 = self.members[j].bounds()
                if np.all(hi1 > lo2) and np.all(hi2 > lo1):
                    raise ValidationError(
                        "region.union.disjoint",
                        f"union members {i} and {j} have overlapping bounding boxes",
                    )

    def bounds(self):
        los, his = zip(*(m.bounds() for m in self.members))
        return np.min(los, axis=0), np.max(his, axis=0)

    def coverage(self, grid: Grid) -> np.ndarray:
        cov = np.zeros(grid.shape)
        for m in self.members:
            cov += m.coverage(grid)
        return np.clip(cov, 0.0, 1.0)

    def distance_to_point(self, p) -> float:
        return min(m.distance_to_point(p) for m in self.members)


# --- exact circle/rectangle machinery for 3-d ball coverage -----------------

def _circle_halfplane_pair_area(X: float, Y: float, R: float) -> float:
    """Area of {x > X, y > Y} intersected with the origin-centered disk."""
    if R <= 0.0:
        return 0.0

    def iw(y1: float, y2: float) -> float:
        # integral of sqrt(R^2 - y^2) over [y1, y2] clipped to [-R, R]
        y1 = min(max(y1, -R), R)
        y2 = min(max(y2, -R), R)
        if y2 <= y1:
            return 0.0

        def W(y):
            return 0.5 * (y * math.sqrt(max(R * R - y * y, 0.0)) + R * R * math.asin(max(-1.0, min(1.0, y / R))))

        return W(y2) - W(y1)

    lo = max(Y, -R)
    if lo >= R or X >= R:
        return 0.0
    if X <= -R:
        return 2.0 * iw(lo, R)
    yx = math.sqrt(max(R * R - X * X, 0.0))
    area = 0.0
    a, b = max(lo, -yx), min(R, yx)
    if b > a:
        area += iw(a, b) - X * (b - a)
    if X < 0.0:
        area += 2.0 * iw(lo, min(R, -yx))
        area += 2.0 * iw(max(lo, yx), R)
    return area


def circle_rect_area(cx: float, cy: float, R: float,
                     x0: float, x1: float, y0: float, y1: float) -> float:
    """Exact area of a disk intersected with an axis-aligned rectangle."""
    f = _circle_halfplane_pair_area
    return (f(x0 - cx, y0 - cy, R) - f(x1 - cx, y0 - cy, R)
            - f(x0 - cx, y1 - cy, R) + f(x1 - cx, y1 - cy, R))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _ball_cell_volume(c: np.ndarray, R: float, lo: np.ndarray, hi: np.ndarray) -> float:
    """Volume of ball(c, R) ∩ [lo, hi] by z-slab integration.

    The slab integrand area(z) is piecewise smooth; its kinks occur where the
    slice radius crosses a face or corner distance of the xy-rectangle, so the
    z-range is split at those analytically known locations and each smooth
    piece is handled by a fixed Gauss-Legendre rule.
    """
    z0 = max(lo[2], c[2] - R)
    z1 = min(hi[2], c[2] + R)
    if z1 <= z0:
        return 0.0
    dxs = [lo[0] - c[0], hi[0] - c[0]]
    dys = [lo[1] - c[1], hi[1] - c[1]]
    crit_d2 = [dx * dx for dx in dxs] + [dy * dy for dy in dys] + \
              [dx * dx + dy * dy for dx in dxs for dy in dys]
    cuts = {z0, z1}
    for d2 in crit_d2:
        rem = R * R - d2
        if rem > 0.0:
            zr = math.sqrt(rem)
            for z in (c[2] - zr, c[2] + zr):
                if z0 < z < z1:
                    cuts.add(z)
    zs = sorted(cuts)
    total = 0.0
    for za, zb in zip(zs[:-1], zs[1:]):
        mid, half = 0.5 * (za + zb), 0.5 * (zb - za)
        for node, wgt in zip(_GL_NODES, _GL_WEIGHTS):
            z = mid + half * node
            r2 = R * R - (z - c[2]) ** 2
            if r2 <= 0.0:
                continue
            area = circle_rect_area(c[0], c[1], math.sqrt(r2), lo[0], hi[0], lo[1], hi[1])
            total += wgt * half * area
    return total


def _ball_coverage_3d(grid: Grid, center: np.ndarray, R: float) -> np.ndarray:
    h = grid.spacing
    cov = np.zeros(grid.shape)
    xs, ys, zs = (grid.axis_centers(a) for a in range(3))
    # classify cells by center distance: full inside / full outside / boundary
    dx = xs[:, None, None] - center[0]
    dy = ys[None, :, None] - center[1]
    dz = zs[None, None, :] - center[2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    half_diag = h * math.sqrt(3.0) / 2.0
    cov[dist + half_diag <= R] = 1.0
    boundary = (dist - half_diag < R) & (dist + half_diag > R)
    for i, j, k in zip(*np.nonzero(boundary)):
        lo = np.array([xs[i] - h / 2, ys[j] - h / 2, zs[k] - h / 2])
        cov[i, j, k] = _ball_cell_volume(center, R, lo, lo + h) / h ** 3
    return np.clip(cov, 0.0, 1.0)


# ---------------------------------------------------------------------------
# field samplers
# ---------------------------------------------------------------------------

class FieldSampler:
    """Deterministic cell-averaged sampler for coefficient fields."""

    def sample(self, grid: Grid) -> np.ndarray:
        raise NotImplementedError

    def value_range(self) -> tuple[float, float]:
        """(min, max) over the plane, used for validation before sampling."""
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantField(FieldSampler):
    value: float

    def sample(self, grid: Grid) -> np.ndarray:
        return np.full(grid.shape, float(self.value))

    def value_range(self):
        return float(self.value), float(self.value)


@dataclass(frozen=True)
class Layered1D(FieldSampler):
    """Piecewise-constant profile along x with given interface locations.

    ``values`` has one more entry than ``interfaces``; cells straddling an
    interface get the exact cell average.
    """

    interfaces: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.interfaces) + 1:
            raise ValidationError("field.layered", "need len(values) == len(interfaces) + 1")
        if any(a >= b for a, b in zip(self.interfaces, self.interfaces[1:])):
            raise ValidationError("field.layered", "interfaces must be strictly increasing")

    def sample(self, grid: Grid) -> np.ndarray:
        if grid.dimension != 1:
            raise ValidationError("field.layered", "layered profile requires a 1-d grid")
        x = grid.axis_centers(0)
        h = grid.spacing
        edges = (-math.inf,) + self.interfaces + (math.inf,)
        out = np.zeros_like(x)
        for k, val in enumerate(self.values):
            left = np.maximum(x - h / 2, edges[k])
            right = np.minimum(x + h / 2, edges[k + 1])
            out += val * np.clip(right - left, 0.0, None)
        return out / h

    def value_range(self):
        return min(self.values), max(self.values)


@dataclass(frozen=True)
class PatchField(FieldSampler):
    """Constant background with region patches replacing it."""

    background: float
    patches: tuple[tuple[Region, float], ...] = ()

    def sample(self, grid: Grid) -> np.ndarray:
        out = np.full(grid.shape, float(self.background))
        for region, value in self.patches:
            out += (value - self.background) * region.coverage(grid)
        return out

    def value_range(self):
        vals = [self.background] + [v for _, v in self.patches]
        return min(vals), max(vals)


# ---------------------------------------------------------------------------
# medium, source, scenario
# ---------------------------------------------------------------------------

REFRACTIVE = "refractive"
DISSIPATIVE = "dissipative"

CONTRAST_POSITIVE = "positive"   # inclusion coefficient above background
CONTRAST_NEGATIVE = "negative"   # inclusion coefficient below background


@dataclass(frozen=True)
class MediumSpec:
    """Background medium plus an obstacle contrast of definite sign.

    In refractive mode the wave coefficient is alpha = alpha0 + h·1_D and
    the damping is zero; in dissipative mode the damping is q = q0 + h·1_D
    and the wave coefficient is 1.   m0, M0 bound sqrt(alpha0) from below
    and above over the whole space.
    """

    alpha0: FieldSampler
    m0: float
    M0: float
    obstacle: Region
    h: float
    contrast_sign: str
    mode: str = REFRACTIVE
    q0: FieldSampler = ConstantField(0.0)

    def __post_init__(self):
        if self.mode not in (REFRACTIVE, DISSIPATIVE):
            raise ValidationError("medium.mode", f"unknown mode {self.mode!r}")
        if not (0 < self.m0 <= self.M0):
            raise ValidationError("medium.m0_M0", f"need 0 < m0 <= M0, got {self.m0}, {self.M0}")
        lo, hi = self.alpha0.value_range()
        if self.mode == REFRACTIVE:
            if lo < self.m0 ** 2 - 1e-12 or hi > self.M0 ** 2 + 1e-12:
                raise ValidationError(
                    "medium.alpha0_bounds",
                    f"alpha0 range [{lo}, {hi}] outside [m0^2, M0^2] = [{self.m0**2}, {self.M0**2}]",
                )
        qlo, _ = self.q0.value_range()
        if qlo < 0:
            raise ValidationError("medium.q0_nonneg", f"q0 must be nonnegative, min {qlo}")
        if not self.obstacle.is_empty:
            if self.contrast_sign not in (CONTRAST_POSITIVE, CONTRAST_NEGATIVE):
                raise ValidationError("medium.contrast_sign", f"unknown contrast sign {self.contrast_sign!r}")
            if self.contrast_sign == CONTRAST_POSITIVE and not self.h > 0:
                raise ValidationError("medium.contrast", f"positive contrast requires h > 0, got {self.h}")
            if self.contrast_sign == CONTRAST_NEGATIVE and not self.h < 0:
                raise ValidationError("medium.contrast", f"negative contrast requires h < 0, got {self.h}")
            if self.mode == REFRACTIVE and lo + min(self.h, 0.0) <= 0:
                raise ValidationError(
                    "medium.alpha_positive",
                    f"alpha0 + h must stay positive on the obstacle; min alpha0 {lo}, h {self.h}",
                )
            if self.mode == DISSIPATIVE and qlo + min(self.h, 0.0) < 0:
                raise ValidationError(
                    "medium.q_nonneg",
                    f"q0 + h must stay nonnegative on the obstacle; min q0 {qlo}, h {self.h}",
                )


@dataclass(frozen=True)
class SourceSpec:
    """Initial velocity supported on the ball B = ball(p, eta).

    The default profile is the plain indicator of B; a 'parabolic' profile
    amp*(1 + bulge*(1 - (r/eta)^2)) keeps the essential infimum at amp while
    exercising nonconstant data.
    """

    p: tuple[float, ...]
    eta: float
    amplitude: float = 1.0
    profile: str = "indicator"
    bulge: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValidationError("source.eta", f"radius must be positive, got {self.eta}")
        if not self.amplitude > 0:
            raise ValidationError("source.ess_inf", f"amplitude must be positive, got {self.amplitude}")
        if self.profile not in ("indicator", "parabolic"):
            raise ValidationError("source.profile", f"unknown profile {self.profile!r}")
        if self.bulge < 0:
            raise ValidationError("source.profile", "bulge must be nonnegative")

    @property
    def ball(self) -> Ball:
        return Ball(self.p, self.eta)

    def sample(self, grid: Grid) -> np.ndarray:
        cov = self.ball.coverage(grid)
        if self.profile == "indicator" or self.bulge == 0.0:
            return self.amplitude * cov
        cc = grid.centers()
        r2 = sum((cc[a] - self.p[a]) ** 2 for a in range(grid.dimension))
        shape = 1.0 + self.bulge * np.clip(1.0 - r2 / self.eta ** 2, 0.0, None)
        return self.amplitude * cov * shape


DEFAULT_CFL = 0.9
DEFAULT_MARGIN = 0.5


@dataclass
class Scenario:
    """A fully validated experiment: geometry, fields, horizon, tau sweep."""

    grid: Grid
    medium: MediumSpec
    source: SourceSpec
    T: float
    tau_sweep: np.ndarray
    cfl_factor: float = DEFAULT_CFL
    margin: float = DEFAULT_MARGIN
    name: str = "scenario"

    # derived, filled by finalize()
    dist_DB: Optional[float] = None
    trunc_radius: float = 0.0
    dt: float = 0.0
    n_steps: int = 0
    alpha0: np.ndarray = field(default=None, repr=False)
    alpha: np.ndarray = field(default=None, repr=False)
    q0: np.ndarray = field(default=None, repr=False)
    q: np.ndarray = field(default=None, repr=False)
    f: np.ndarray = field(default=None, repr=False)
    coverage_D: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.tau_sweep = np.asarray(self.tau_sweep, float)
        if not self.T > 0:
            raise ValidationError("run.T", f"time horizon must be positive, got {self.T}")
        if self.tau_sweep.size and (np.any(self.tau_sweep <= 0) or np.any(np.diff(self.tau_sweep) <= 0)):
            raise ValidationError("run.tau_sweep", "tau values must be positive and strictly increasing")
        if not (0 < self.cfl_factor <= 1):
            raise ValidationError("run.cfl", f"cfl factor must lie in (0, 1], got {self.cfl_factor}")
        self._finalize()

    def _finalize(self):
        med, src, grid = self.medium, self.source, self.grid
        if not med.obstacle.is_empty:
            gap = med.obstacle.distance_to_point(src.p)
            if gap <= src.eta:
                raise ValidationError(
                    "scenario.B_disjoint_D",
                    f"source ball (radius {src.eta}) intersects the obstacle (gap {gap})",
                )
            self.dist_DB = gap - src.eta
        self.alpha0 = med.alpha0.sample(grid)
        self.q0 = med.q0.sample(grid)
        self.coverage_D = med.obstacle.coverage(grid)
        if med.mode == REFRACTIVE:
            self.alpha = self.alpha0 + med.h * self.coverage_D
            self.q = np.zeros(grid.shape)
        else:
            self.alpha = np.ones(grid.shape)
            self.q = self.q0 + med.h * self.coverage_D
        if self.alpha.min() <= 0:
            raise ValidationError("scenario.ess_inf_alpha", f"sampled alpha has min {self.alpha.min()} <= 0")
        if self.q.min() < 0:
            raise ValidationError("scenario.q_nonneg", f"sampled q has min {self.q.min()} < 0")
        self.f = src.sample(grid)
        if not np.any(self.f > 0):
            raise ValidationError("scenario.source_on_grid", "source ball does not overlap the grid")
        # CFL step common to the obstacle and background runs
        a_min = min(float(self.alpha.min()), float(self.alpha0.min())) if med.mode == REFRACTIVE else 1.0
        dt_max = self.cfl_factor * grid.spacing * math.sqrt(a_min) / math.sqrt(grid.dimension)
        self.n_steps = max(int(math.ceil(self.T / dt_max)), 2)
        self.dt = self.T / self.n_steps
        self.trunc_radius = truncation_radius(self)
        half = min((self.grid.upper()[a] - self.grid.origin[a]) / 2 for a in range(grid.dimension))
        lo_ok = all(self.grid.origin[a] <= -self.trunc_radius + 1e-9 for a in range(grid.dimension))
        hi_ok = all(self.grid.upper()[a] >= self.trunc_radius - 1e-9 for a in range(grid.dimension))
        if not (lo_ok and hi_ok):
            raise ValidationError(
                "scenario.truncation",
                f"grid half-width {half} too small; boundary reflections could reach B "
                f"within T (need {self.trunc_radius})",
            )

    @property
    def mode(self) -> str:
        return self.medium.mode

    @property
    def weight_B(self) -> np.ndarray:
        """Quadrature weight of the indicator: alpha0*f (refractive) or f."""
        if self.mode == REFRACTIVE:
            return self.alpha0 * self.f
        return self.f

    def support_extent(self) -> float:
        """Largest |coordinate| touched by supp f or the obstacle."""
        src = self.source.ball
        lo, hi = src.bounds()
        ext = max(np.abs(lo).max(), np.abs(hi).max())
        if not self.medium.obstacle.is_empty:
            lo, hi = self.medium.obstacle.bounds()
            ext = max(ext, np.abs(lo).max(), np.abs(hi).max())
        return float(ext)

    def c_max(self) -> float:
        if self.mode == DISSIPATIVE:
            return 1.0
        a_min = min(float(self.alpha.min()), float(self.alpha0.min()))
        return 1.0 / math.sqrt(a_min)


def truncation_radius(scenario: Scenario) -> float:
    """Half-width L with supports + c_max*T + margin <= L.

    Signals cannot reach the box boundary within [0, T], so the Dirichlet
    truncation is exact for the time-domain runs.
    """
    return scenario.support_extent() + scenario.c_max() * scenario.T + scenario.margin


def sample_field(spec: Union[MediumSpec, SourceSpec, FieldSampler, Region], grid: Grid) -> ScalarField:
    """Cell-averaged sampling onto a grid.

    MediumSpec samples its primary coefficient (alpha with the obstacle in
    refractive mode, q with the obstacle in dissipative mode); SourceSpec
    samples the initial-velocity profile; a Region samples its indicator.
    """
    if isinstance(spec, MediumSpec):
        base = spec.alpha0.sample(grid) if spec.mode == REFRACTIVE else spec.q0.sample(grid)
        vals = base + spec.h * spec.obstacle.coverage(grid)
        return ScalarField(grid, vals)
    if isinstance(spec, SourceSpec):
        return ScalarField(grid, spec.sample(grid))
    if isinstance(spec, FieldSampler):
        return ScalarField(grid, spec.sample(grid))
    if isinstance(spec, Region):
        return ScalarField(grid, spec.coverage(grid))
    raise TypeError(f"cannot sample {type(spec).__name__}")


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

def _build_region(node, dimension: int) -> Region:
    if node is None or node == {} or node == "empty":
        return EmptyRegion()
    if not isinstance(node, dict) or "kind" not in node:
        raise ParseError(f"region must be a table with a 'kind', got {node!r}")
    kind = node["kind"]
    try:
        if kind == "empty":
            return EmptyRegion()
        if kind == "interval":
            return Interval(float(node["lo"]), float(node["hi"]))
        if kind == "ball":
            center = tuple(float(v) for v in np.atleast_1d(node["center"]))
            return Ball(center, float(node["radius"]))
        if kind == "box":
            return Box(tuple(float(v) for v in np.atleast_1d(node["lo"])),
                       tuple(float(v) for v in np.atleast_1d(node["hi"])))
        if kind == "union":
            return UnionRegion(tuple(_build_region(m, dimension) for m in node["members"]))
    except KeyError as e:
        raise ParseError(f"region kind {kind!r} missing field {e}") from None
    raise ParseError(f"unknown region kind {kind!r}")


def _build_sampler(node, dimension: int) -> FieldSampler:
    if isinstance(node, (int, float)):
        return ConstantField(float(node))
    if not isinstance(node, dict):
        raise ParseError(f"field must be a number or a table, got {node!r}")
    kind = node.get("kind", "constant")
    try:
        if kind == "constant":
            return ConstantField(float(node["value"]))
        if kind == "layered":
            return Layered1D(tuple(float(v) for v in node["interfaces"]),
                             tuple(float(v) for v in node["values"]))
        if kind == "patches":
            patches = tuple(
                (_build_region(p["region"], dimension), float(p["value"]))
                for p in node.get("patches", [])
            )
            return PatchField(float(node["background"]), patches)
    except KeyError as e:
        raise ParseError(f"field kind {kind!r} missing entry {e}") from None
    raise ParseError(f"unknown field kind {kind!r}")


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    try:
        gtab = doc["grid"]
        mtab = doc["medium"]
        stab = doc["source"]
        rtab = doc["run"]
        dimension = int(gtab["dimension"])
        spacing = float(gtab["spacing"])
        mode = mtab.get("mode", REFRACTIVE)
        obstacle = _build_region(mtab.get("obstacle"), dimension)
        medium = MediumSpec(
            alpha0=_build_sampler(mtab.get("alpha0", 1.0), dimension),
            m0=float(mtab["m0"]),
            M0=float(mtab["M0"]),
            obstacle=obstacle,
            h=float(mtab.get("h", 0.0)),
            contrast_sign=mtab.get("h_sign", CONTRAST_POSITIVE),
            mode=mode,
            q0=_build_sampler(mtab.get("q0", 0.0), dimension),
        )
        source = SourceSpec(
            p=tuple(float(v) for v in np.atleast_1d(stab["p"])),
            eta=float(stab["eta"]),
            amplitude=float(stab.get("amplitude", 1.0)),
            profile=stab.get("profile", "indicator"),
            bulge=float(stab.get("bulge", 0.0)),
        )
        T = float(rtab["T"])
        if "tau_values" in rtab:
            taus = np.asarray([float(v) for v in rtab["tau_values"]])
        else:
            taus = np.linspace(float(rtab["tau_min"]), float(rtab["tau_max"]), int(rtab["tau_count"]))
        cfl = float(rtab.get("cfl", DEFAULT_CFL))
        margin = float(rtab.get("margin", DEFAULT_MARGIN))
    except KeyError as e:
        raise ParseError(f"scenario file missing required entry {e}") from None
    except (TypeError, ValueError) as e:
        raise ParseError(f"scenario file has a malformed entry: {e}") from None

    # size the box from the truncation radius unless the file pins it
    probe = _TruncationProbe(medium, source, T, margin)
    half_needed = probe.radius()
    if "extent" in gtab:
        extent = tuple(int(v) for v in np.atleast_1d(gtab["extent"]))
        if len(extent) == 1 and dimension == 3:
            extent = extent * 3
        origin = tuple(float(v) for v in np.atleast_1d(gtab.get("origin", [-extent[a] * spacing / 2 for a in range(dimension)])))
    else:
        n_half = int(math.ceil(half_needed / spacing))
        extent = (2 * n_half,) * dimension
        origin = (-n_half * spacing,) * dimension
    grid = Grid(dimension=dimension, origin=origin, spacing=spacing, extent=extent)
    return Scenario(grid=grid, medium=medium, source=source, T=T, tau_sweep=taus,
                    cfl_factor=cfl, margin=margin, name=name)


class _TruncationProbe:
    """Just enough of a scenario to evaluate the truncation radius pre-grid."""

    def __init__(self, medium, source, T, margin):
        self.medium, self.source, self.T, self.margin = medium, source, T, margin

    def radius(self) -> float:
        lo, hi = self.source.ball.bounds()
        ext = max(np.abs(lo).max(), np.abs(hi).max())
        if not self.medium.obstacle.is_empty:
            lo, hi = self.medium.obstacle.bounds()
            ext = max(ext, np.abs(lo).max(), np.abs(hi).max())
        if self.medium.mode == DISSIPATIVE:
            c_max = 1.0
        else:
            lo_a, _ = self.medium.alpha0.value_range()
            a_min = min(lo_a, lo_a + min(self.medium.h, 0.0)) if not self.medium.obstacle.is_empty else lo_a
            c_max = 1.0 / math.sqrt(a_min)
        return float(ext + c_max * self.T + self.margin)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file (TOML).

    Raises ParseError for malformed files and ValidationError (naming the
    violated invariant) for well-formed but inconsistent ones.
    """
    try:
        with open(path, "rb") as fh:
            doc = _toml.load(fh)
    except FileNotFoundError:
        raise ParseError(f"scenario file not found: {path}") from None
    except _toml.TOMLDecodeError as e:
        raise ParseError(f"scenario file does not parse: {e}") from None
    import os
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_dict(doc, name=name)
