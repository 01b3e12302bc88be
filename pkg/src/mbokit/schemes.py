"""Thresholding schemes: diffuse, threshold, repeat.

One step smooths the current phase configuration with the heat kernel of
bandwidth sqrt(h) and rebuilds sharp phases from the smoothed values:

* ``step_mbo``: threshold at 1/2; interfaces move by mean curvature.
* ``step_volume_preserving``: keep exactly the current cell count by
  selecting the top cells of the smoothed field; the reported threshold
  plays the role of a volume multiplier.
* ``step_forced``: threshold at 1/2 - f sqrt(h) / (2 sqrt(pi)) with a
  space-time forcing f sampled at the step's target time; adds a normal
  velocity f on top of curvature.
* ``step_grain_growth``: multiphase vapor/grain version with a surface
  tension matrix; each cell goes to its best grain, and the total solid
  cell count is preserved exactly through a bottom selection of the
  grain-versus-vapor score.

``run`` iterates a step map, recording energies, dissipations, thresholds,
and support radii per step, and stops early when the state freezes or a
phase disappears.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .grid import (
    DegeneratePhaseError,
    Grid,
    MultiPhaseState,
    PhaseField,
    RealField,
    bounding_radius,
    centroid,
)
from .kernel import HeatKernelPlan, convolve
from .threshold import select_bottom_cells, select_top_cells
from .diagnostics import GOOD_ITERATION_BAND, StepRecord

SCHEMES = ("mbo", "volume_preserving", "forced", "grain_growth")

ForceFunction = Callable[[Grid, float], RealField]

# A solid reaching beyond this fraction of the side starts feeling its own
# periodic images; runs past it are flagged, not stopped.
WRAP_RADIUS_FRACTION = 0.4


@dataclass(frozen=True)
class SurfaceTensionMatrix:
    """Validated grain-to-grain surface tensions, vapor normalized to 1.

    Requirements checked at construction: symmetry, zero diagonal, strictly
    positive off-diagonal entries below 2 (the vapor route between any two
    grains costs 2, so larger entries would be relaxed instantly), a strict
    triangle inequality, and negative definiteness as a bilinear form on
    mean-zero vectors.  The extended matrix bordered by a vapor row and
    column of ones is built here once and reused everywhere.
    """

    sigma: np.ndarray
    extended: np.ndarray = field(init=False, repr=False)
    neg_bound: float = field(init=False)
    extended_neg_bound: float = field(init=False)

    def __post_init__(self) -> None:
        s = np.ascontiguousarray(np.asarray(self.sigma, dtype=np.float64))
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
            raise ValueError(f"tension matrix must be square, got shape {s.shape}")
        p = s.shape[0]
        if not np.array_equal(s, s.T):
            raise ValueError("tension matrix must be symmetric")
        if np.diagonal(s).any():
            raise ValueError("tension matrix diagonal must be zero")
        off = ~np.eye(p, dtype=bool)
        if p > 1 and not (s[off] > 0).all():
            raise ValueError("off-diagonal tensions must be positive")
        if p > 1 and not (s[off] < 2).all():
            raise ValueError(
                "off-diagonal tensions must stay below 2, the cost of the "
                "vapor route between two grains"
            )
        for k in range(p):
            others = [i for i in range(p) if i != k]
            for i in others:
                for j in others:
                    if i != j and not s[i, j] < s[i, k] + s[k, j]:
                        raise ValueError(
                            f"triangle inequality fails: sigma[{i},{j}] >= "
                            f"sigma[{i},{k}] + sigma[{k},{j}]"
                        )
        ext = np.ones((p + 1, p + 1))
        ext[0, 0] = 0.0
        ext[1:, 1:] = s
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "extended", ext)
        object.__setattr__(self, "neg_bound", _mean_zero_neg_bound(s))
        object.__setattr__(self, "extended_neg_bound", _mean_zero_neg_bound(ext))
        if not self.extended_neg_bound > 0:
            raise ValueError(
                "tension matrix is not negative definite on mean-zero vectors"
            )

    @property
    def num_grains(self) -> int:
        return self.sigma.shape[0]


def _mean_zero_neg_bound(matrix: np.ndarray) -> float:
    """Largest admissible bound b with  x.M.x <= -b |x|^2  on mean-zero x."""
    n = matrix.shape[0]
    if n < 2:
        return math.inf
    basis = scipy.linalg.null_space(np.ones((1, n)))
    eigs = np.linalg.eigvalsh(basis.T @ matrix @ basis)
    return float(-eigs.max())


def equal_tensions(num_grains: int) -> SurfaceTensionMatrix:
    """All grain pairs at tension 1 (same as the vapor boundary)."""
    s = np.ones((num_grains, num_grains)) - np.eye(num_grains)
    return SurfaceTensionMatrix(s)


@dataclass(frozen=True)
class SchemeConfig:
    """Which scheme to run, on which grid, at which bandwidth, how long."""

    scheme: str
    grid: Grid
    h: float
    steps: int
    force: ForceFunction | None = None
    tensions: SurfaceTensionMatrix | None = None

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, pick one of {SCHEMES}")
        if not self.h > 0:
            raise ValueError(f"bandwidth h must be positive, got {self.h}")
        if self.steps < 0:
            raise ValueError(f"steps must be nonnegative, got {self.steps}")
        if self.scheme == "forced" and self.force is None:
            raise ValueError("forced scheme needs a force function")
        if self.scheme != "forced" and self.force is not None:
            raise ValueError(f"scheme {self.scheme!r} does not take a force")
        if self.scheme == "grain_growth" and self.tensions is None:
            raise ValueError("grain growth needs a surface tension matrix")
        if self.scheme != "grain_growth" and self.tensions is not None:
            raise ValueError(f"scheme {self.scheme!r} does not take tensions")


@dataclass
class Trajectory:
    """States and per-step records of one run.

    ``states`` holds the initial state plus one state per executed step;
    ``status`` is "completed", "pinned" (state repeated exactly), or
    "extinct" (the phase emptied).
    """

    config: SchemeConfig
    states: list
    records: list[StepRecord]
    status: str
    radius_center: tuple[float, ...]
    initial_radius: float

    @property
    def lambdas(self) -> list[float]:
        return [r.lam for r in self.records if r.lam is not None]

    def final(self):
        return self.states[-1]


# ---------------------------------------------------------------------------
# single steps


def step_mbo(
    chi: PhaseField,
    h: float,
    *,
    plan: HeatKernelPlan | None = None,
    smoothed: RealField | None = None,
) -> PhaseField:
    """One plain thresholding step: smooth, then keep cells above 1/2."""
    if plan is None:
        plan = HeatKernelPlan(chi.grid, h)
    if smoothed is None:
        smoothed = convolve(plan, chi)
    return PhaseField(chi.grid, smoothed.values > 0.5)


def step_forced(
    chi: PhaseField,
    force_now: RealField,
    h: float,
    *,
    plan: HeatKernelPlan | None = None,
    smoothed: RealField | None = None,
) -> PhaseField:
    """One forced step: threshold at 1/2 - f sqrt(h) / (2 sqrt(pi)).

    ``force_now`` is the forcing sampled at the step's target time.  A zero
    force reproduces :func:`step_mbo` bit for bit, because the threshold
    field then equals 1/2 exactly in every cell.
    """
    if force_now.grid != chi.grid:
        raise ValueError("force field lives on a different grid")
    if plan is None:
        plan = HeatKernelPlan(chi.grid, h)
    if smoothed is None:
        smoothed = convolve(plan, chi)
    tau = 0.5 - force_now.values * (math.sqrt(h) / (2.0 * math.sqrt(math.pi)))
    return PhaseField(chi.grid, smoothed.values > tau)


def step_volume_preserving(
    chi: PhaseField,
    h: float,
    *,
    plan: HeatKernelPlan | None = None,
    smoothed: RealField | None = None,
) -> tuple[PhaseField, float]:
    """One exactly volume-preserving step.

    Smooths the phase and selects precisely the current number of cells,
    largest smoothed values first.  Returns the new phase and the selection
    threshold (the volume multiplier of the step).
    """
    count = chi.cell_count
    if count == 0 or count == chi.grid.total_cells:
        raise DegeneratePhaseError(
            "volume-preserving step needs a phase that is neither empty nor full"
        )
    if plan is None:
        plan = HeatKernelPlan(chi.grid, h)
    if smoothed is None:
        smoothed = convolve(plan, chi)
    sel = select_top_cells(smoothed, count)
    return sel.mask, float(sel.threshold)


def step_grain_growth(
    state: MultiPhaseState,
    tensions: SurfaceTensionMatrix,
    h: float,
    *,
    plan: HeatKernelPlan | None = None,
    smoothed: Sequence[np.ndarray] | None = None,
) -> tuple[MultiPhaseState, float]:
    """One multiphase step preserving the total solid cell count.

    Builds the comparison fields phi_i as tension-weighted sums of the
    smoothed indicators (vapor enters each grain's field with weight one).
    Each cell's candidate grain minimizes phi over grains, lowest label on
    ties; the solid set keeps exactly its cell count by a bottom selection
    of phi_best - phi_vapor.  Returns the new state and the score cut.
    """
    p = tensions.num_grains
    if state.num_grains != p:
        raise ValueError("state and tension matrix disagree on grain count")
    grid = state.grid
    solid_count = state.solid_cell_count
    if solid_count == 0:
        raise DegeneratePhaseError("grain growth needs at least one solid cell")
    if plan is None:
        plan = HeatKernelPlan(grid, h)
    if smoothed is None:
        smoothed = [
            convolve(plan, state.indicator(j)).values for j in range(p + 1)
        ]
    ext = tensions.extended
    phi = np.zeros((p + 1,) + grid.shape)
    for i in range(p + 1):
        for j in range(p + 1):
            if ext[i, j] != 0.0:
                phi[i] += ext[i, j] * smoothed[j]
    best = np.argmin(phi[1:], axis=0)  # first minimum, so lowest grain wins ties
    phi_best = np.take_along_axis(phi[1:], best[None], axis=0)[0]
    sel = select_bottom_cells(RealField(grid, phi_best - phi[0]), solid_count)
    labels = np.where(sel.mask.mask, best.astype(np.int32) + 1, 0)
    return MultiPhaseState(grid, labels, p), float(sel.threshold)


# ---------------------------------------------------------------------------
# multi-step driver


def _solid_of(state) -> PhaseField:
    if isinstance(state, MultiPhaseState):
        return state.solid()
    return state


def _states_equal(a, b) -> bool:
    if isinstance(a, MultiPhaseState):
        return np.array_equal(a.labels, b.labels)
    return np.array_equal(a.mask, b.mask)


def run(config: SchemeConfig, initial) -> Trajectory:
    """Iterate the configured scheme, recording a ledger row per step.

    Stops early with status "pinned" when a step reproduces its input
    exactly and with status "extinct" when the evolving phase empties.
    The support radius is measured from the initial solid's centroid; a
    warning fires if it ever exceeds 40 percent of the side, where the
    periodic images start to interact.
    """
    # imported here: diagnostics needs our types only for annotations,
    # while we need its energies at runtime
    from . import diagnostics as dg

    grid = config.grid
    multiphase = config.scheme == "grain_growth"
    if multiphase != isinstance(initial, MultiPhaseState):
        raise TypeError("initial state type does not match the scheme")
    if initial.grid != grid:
        raise ValueError("initial state lives on a different grid")

    plan = HeatKernelPlan(grid, config.h)
    sqrt_h = math.sqrt(config.h)
    solid0 = _solid_of(initial)
    if solid0.cell_count == 0:
        raise DegeneratePhaseError("initial state has no occupied cells")
    center = centroid(solid0)
    initial_radius = bounding_radius(solid0, center)
    wrap_warned = False
    if initial_radius > WRAP_RADIUS_FRACTION * grid.side:
        warnings.warn(
            f"initial support radius {initial_radius:.3g} exceeds "
            f"{WRAP_RADIUS_FRACTION:.0%} of the side; periodic images interact",
            stacklevel=2,
        )
        wrap_warned = True

    states = [initial]
    records: list[StepRecord] = []
    status = "completed"

    if multiphase:
        smoothed = dg._grain_smoothed(initial, plan)
        energy = dg.energy_multiphase(
            initial, config.tensions, config.h, plan=plan, smoothed=smoothed
        )
    else:
        smoothed = convolve(plan, initial)
        energy = dg.energy_two_phase(initial, config.h, plan=plan, smoothed=smoothed)

    state = initial
    for n in range(1, config.steps + 1):
        t = n * config.h
        lam: float | None = None
        transfer: float | None = None
        proxy: float | None = None

        if multiphase:
            new_state, lam = step_grain_growth(
                state, config.tensions, config.h, plan=plan, smoothed=smoothed
            )
            new_smoothed = dg._grain_smoothed(new_state, plan)
            omega = dg.state_difference(new_state, state).astype(np.float64)
            ext = config.tensions.extended
            quad = 0.0
            for i in range(config.tensions.num_grains + 1):
                acc = np.zeros(grid.shape)
                for j in range(config.tensions.num_grains + 1):
                    if ext[i, j] != 0.0:
                        acc += ext[i, j] * (new_smoothed[j] - smoothed[j])
                quad += float((omega[i] * acc).sum())
            dissipation = -quad * grid.cell_volume / sqrt_h
            new_energy = dg.energy_multiphase(
                new_state, config.tensions, config.h, plan=plan, smoothed=new_smoothed
            )
            good = abs(lam) < GOOD_ITERATION_BAND
        else:
            if config.scheme == "mbo":
                new_state = step_mbo(state, config.h, plan=plan, smoothed=smoothed)
            elif config.scheme == "forced":
                force_now = config.force(grid, t)
                new_state = step_forced(
                    state, force_now, config.h, plan=plan, smoothed=smoothed
                )
            else:
                new_state, lam = step_volume_preserving(
                    state, config.h, plan=plan, smoothed=smoothed
                )
            new_smoothed = convolve(plan, new_state)
            omega = new_state.as_float() - state.as_float()
            dissipation = (
                float((omega * (new_smoothed.values - smoothed.values)).sum())
                * grid.cell_volume
                / sqrt_h
            )
            new_energy = dg.energy_two_phase(
                new_state, config.h, plan=plan, smoothed=new_smoothed
            )
            good = None
            if lam is not None:
                good = abs(lam - 0.5) < GOOD_ITERATION_BAND
                proxy = -math.sqrt(math.pi) * (2.0 * lam - 1.0) / sqrt_h
            if config.scheme == "forced":
                transfer = (
                    float((force_now.values * omega).sum())
                    * grid.cell_volume
                    / math.sqrt(math.pi)
                )

        slack = energy - new_energy - dissipation + (transfer or 0.0)
        new_solid = _solid_of(new_state)
        radius = None
        if new_solid.cell_count:
            radius = bounding_radius(new_solid, center)
            if radius > WRAP_RADIUS_FRACTION * grid.side and not wrap_warned:
                warnings.warn(
                    f"support radius {radius:.3g} at step {n} exceeds "
                    f"{WRAP_RADIUS_FRACTION:.0%} of the side",
                    stacklevel=2,
                )
                wrap_warned = True

        records.append(
            StepRecord(
                step=n,
                time=t,
                lam=lam,
                energy_before=energy,
                energy_after=new_energy,
                dissipation=dissipation,
                ed_slack=slack,
                bounding_radius=radius,
                good_iteration=good,
                force_transfer=transfer,
                curvature_proxy=proxy,
            )
        )
        states.append(new_state)

        if new_solid.cell_count == 0:
            status = "extinct"
            break
        if _states_equal(new_state, state):
            status = "pinned"
            break
        state, smoothed, energy = new_state, new_smoothed, new_energy

    return Trajectory(config, states, records, status, center, initial_radius)
