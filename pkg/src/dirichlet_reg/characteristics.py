"""Truncation functions, characteristics triplets and the path decomposition

    X = X^c + k(x) * (mu - nu) + drift-characteristic + (x - k(x)) * mu,

together with numerical checks of the bracket identities relating the drift
characteristic to the continuous brackets of X and X^c.

The drift characteristic is assembled from three additive pieces: a linear
slope (Levy-type models), a deterministic time profile, and a path-dependent
rough part (fractional components, read from the simulator's component logs).
Fixed-time atoms of the compensator are supported through synthetic schedules
attached to a ``CharacteristicsModel``; all stochastic model families here are
quasi-left-continuous and carry none.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .paths import CadlagPath, TimeGrid
from .regularize import (
    EpsilonSchedule,
    IdentityReport,
    covariation_limit,
    qv_decompose,
)
from .simulate import (
    BrownianMotion,
    Composite,
    CompoundPoisson,
    DeterministicDrift,
    FractionalBrownianMotion,
    JumpLaw,
    LevyJumpDiffusion,
    ModelSpec,
    _component_name,
    law_expectation,
)


__all__ = [
    "TruncationFunction",
    "standard_truncation",
    "smooth_clip_truncation",
    "CharacteristicsModel",
    "ComponentLogError",
    "known_characteristics",
    "convert_truncation",
    "Decomposition",
    "decompose",
    "drift_jump",
    "drift_bracket_rhs",
    "drift_bracket_check",
    "continuous_bracket_check",
]


class ComponentLogError(ValueError):
    """The decomposition needs per-component trajectories the path lacks."""


def _centered(f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    """f(t) - f(0) as a vectorized profile with value 0 at t = 0."""
    f0 = float(np.asarray(f(np.zeros(1)), dtype=np.float64).flat[0])

    def profile(t):
        return np.asarray(f(np.asarray(t, np.float64)), np.float64) - f0

    return profile


@dataclass(frozen=True)
class TruncationFunction:
    """Bounded k with k(x) = x on [-radius, radius], |k| <= bound."""

    fn: Callable[[np.ndarray], np.ndarray]
    bound: float
    radius: float
    name: str

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=np.float64))


def standard_truncation(cutoff: float = 1.0) -> TruncationFunction:
    """k(x) = x on |x| <= cutoff, zero beyond (discontinuous at the cutoff)."""

    def fn(x):
        return np.where(np.abs(x) <= cutoff, x, 0.0)

    return TruncationFunction(fn=fn, bound=cutoff, radius=cutoff, name="standard")


def smooth_clip_truncation() -> TruncationFunction:
    """Odd C^2 clip: identity on |x| <= 0.5, constant +-1 beyond |x| >= 1.5.

    The blend on [0.5, 1.5] is the unique quintic matching value, slope and
    curvature at both junctions; it is monotone on the blend interval.
    """

    def fn(x):
        a = np.abs(x)
        u = np.clip(a - 0.5, 0.0, 1.0)
        blend = 0.5 + u - u**3 + 0.5 * u**4
        out = np.where(a <= 0.5, a, np.where(a >= 1.5, 1.0, blend))
        return np.sign(x) * out

    return TruncationFunction(fn=fn, bound=1.0, radius=0.5, name="smooth_clip")


FixedAtomSchedule = tuple[tuple[float, tuple[tuple[float, float], ...]], ...]


@dataclass(frozen=True)
class CharacteristicsModel:
    """Evaluators for the triplet (drift characteristic, C, compensator).

    ``drift_slope`` is the linear coefficient; ``drift_profile`` an optional
    deterministic extra (finite variation); ``drift_path_fn`` an optional
    path-dependent rough extra, evaluated on a path's component logs.
    ``compensators`` lists (rate, law) pairs with nu(dt, dx) = rate dt law(dx);
    ``fixed_atoms`` lists (time, ((x, weight), ...)) entries of nu({s} x dx).
    """

    truncation: TruncationFunction
    drift_slope: float = 0.0
    drift_profile: Callable[[np.ndarray], np.ndarray] | None = None
    drift_path_fn: Callable[[CadlagPath], np.ndarray] | None = None
    c_eval: Callable[[np.ndarray], np.ndarray] | None = None
    compensators: tuple[tuple[float, JumpLaw], ...] = ()
    fixed_atoms: FixedAtomSchedule = ()

    @property
    def bk_is_linear(self) -> bool:
        return (
            self.drift_profile is None
            and self.drift_path_fn is None
            and not self.fixed_atoms
        )

    @property
    def bk_finite_variation(self) -> bool:
        return self.drift_path_fn is None

    def c_values(self, grid: TimeGrid) -> np.ndarray:
        if self.c_eval is None:
            return np.zeros(grid.n_nodes)
        return np.asarray(self.c_eval(grid.times()), dtype=np.float64)

    def compensator_k_rate(self) -> float:
        """Total rate of k-truncated jump compensation, sum of rate*E[k(J)]."""
        return sum(
            rate * law_expectation(law, self.truncation.fn)
            for rate, law in self.compensators
        )

    def atom_k_integrals(self, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
        """(node indices, integral of k d nu({s} x dx)) for the fixed atoms."""
        idx, vals = [], []
        for s, atoms in self.fixed_atoms:
            i = grid.index_of(s)
            total = float(
                sum(w * float(self.truncation(np.float64(x))) for x, w in atoms)
            )
            idx.append(i)
            vals.append(total)
        return np.array(idx, dtype=np.int64), np.array(vals)

    def bk_values(self, path: CadlagPath) -> np.ndarray:
        """Drift characteristic sampled along the path's grid."""
        grid = path.grid
        times = grid.times()
        out = self.drift_slope * times
        if self.drift_profile is not None:
            out = out + np.asarray(self.drift_profile(times), dtype=np.float64)
        if self.drift_path_fn is not None:
            out = out + np.asarray(self.drift_path_fn(path), dtype=np.float64)
        if self.fixed_atoms:
            idx, vals = self.atom_k_integrals(grid)
            steps = np.zeros(grid.n_nodes)
            np.add.at(steps, idx, vals)
            out = out + np.cumsum(steps)
        return out

    def bk_path(self, path: CadlagPath) -> CadlagPath:
        values = self.bk_values(path)
        if not self.fixed_atoms:
            return CadlagPath(path.grid, values)
        idx, vals = self.atom_k_integrals(path.grid)
        keep = vals != 0.0
        return CadlagPath.from_jumps(
            path.grid, values, list(zip(idx[keep].tolist(), vals[keep].tolist()))
        )


def _fbm_sum_fn(names: Sequence[str]) -> Callable[[CadlagPath], np.ndarray]:
    def path_fn(path: CadlagPath) -> np.ndarray:
        if path.components is None:
            raise ComponentLogError(
                "path-dependent drift characteristic needs component logs; "
                "simulate_path attaches them"
            )
        missing = [n for n in names if n not in path.components]
        if missing:
            raise ComponentLogError(f"missing component logs: {missing}")
        total = np.zeros(path.grid.n_nodes)
        for n in names:
            total = total + path.components[n].values
        return total

    return path_fn


def known_characteristics(model: ModelSpec, k: TruncationFunction) -> CharacteristicsModel:
    """Closed-form triplet of a simulatable model under truncation k.

    For Levy-type models the drift characteristic is (trend + rate*E[k(J)])*t;
    fractional components enter as a path-dependent drift part; the compensator
    is rate dt law(dx) and there are no fixed-time atoms (all these families
    are quasi-left-continuous).
    """
    if isinstance(model, BrownianMotion):
        s2 = model.sigma**2
        return CharacteristicsModel(truncation=k, c_eval=lambda t: s2 * t)
    if isinstance(model, FractionalBrownianMotion):
        return CharacteristicsModel(truncation=k, drift_path_fn=_fbm_sum_fn(["fbm"]))
    if isinstance(model, CompoundPoisson):
        slope = model.rate * law_expectation(model.law, k.fn)
        return CharacteristicsModel(
            truncation=k, drift_slope=slope, compensators=((model.rate, model.law),)
        )
    if isinstance(model, LevyJumpDiffusion):
        slope = model.drift + model.rate * law_expectation(model.law, k.fn)
        s2 = model.sigma**2
        return CharacteristicsModel(
            truncation=k,
            drift_slope=slope,
            c_eval=lambda t: s2 * t,
            compensators=((model.rate, model.law),),
        )
    if isinstance(model, DeterministicDrift):
        return CharacteristicsModel(truncation=k, drift_profile=_centered(model.f))
    if isinstance(model, Composite):
        slope = 0.0
        profiles = []
        fbm_names: list[str] = []
        comp_list: list[tuple[float, JumpLaw]] = []
        c_rate = 0.0
        taken: set[str] = set()
        for comp in model.components:
            name = _component_name(comp, taken)
            if isinstance(comp, BrownianMotion):
                c_rate += comp.sigma**2
            elif isinstance(comp, FractionalBrownianMotion):
                fbm_names.append(name)
            elif isinstance(comp, CompoundPoisson):
                slope += comp.rate * law_expectation(comp.law, k.fn)
                comp_list.append((comp.rate, comp.law))
            elif isinstance(comp, DeterministicDrift):
                profiles.append(_centered(comp.f))
        profile = None
        if profiles:
            def profile(t, fns=tuple(profiles)):
                total = np.zeros_like(np.asarray(t, np.float64))
                for f in fns:
                    total = total + f(t)
                return total
        return CharacteristicsModel(
            truncation=k,
            drift_slope=slope,
            drift_profile=profile,
            drift_path_fn=_fbm_sum_fn(fbm_names) if fbm_names else None,
            c_eval=(lambda t, r=c_rate: r * t) if c_rate > 0 else None,
            compensators=tuple(comp_list),
        )
    raise TypeError(f"no known characteristics for {type(model).__name__}")


def convert_truncation(
    model: ModelSpec | CharacteristicsModel,
    k: TruncationFunction,
    k_new: TruncationFunction,
) -> CharacteristicsModel:
    """Re-express the triplet under another truncation.

    Only the drift characteristic moves: slope shifts by rate*E[k'(J) - k(J)]
    per compensator entry; C and the compensator are unchanged.
    """
    chars = model if isinstance(model, CharacteristicsModel) else known_characteristics(model, k)
    shift = sum(
        rate * (law_expectation(law, k_new.fn) - law_expectation(law, k.fn))
        for rate, law in chars.compensators
    )
    return replace(chars, truncation=k_new, drift_slope=chars.drift_slope + shift)


def _as_chars(model, k: TruncationFunction) -> CharacteristicsModel:
    if isinstance(model, CharacteristicsModel):
        return model
    return known_characteristics(model, k)


@dataclass(frozen=True)
class Decomposition:
    """The four additive parts of a path under a chosen truncation."""

    continuous: CadlagPath          # X^c, continuous martingale part sample
    compensated_jumps: CadlagPath   # k(x) * (mu - nu)
    drift: CadlagPath               # drift characteristic sample
    large_jumps: CadlagPath         # (x - k(x)) * mu
    reconstruction_error: float

    @property
    def parts(self) -> dict[str, CadlagPath]:
        return {
            "continuous": self.continuous,
            "compensated_jumps": self.compensated_jumps,
            "drift": self.drift,
            "large_jumps": self.large_jumps,
        }


def decompose(
    X: CadlagPath, model: ModelSpec | CharacteristicsModel, k: TruncationFunction
) -> Decomposition:
    """Split X into continuous, compensated-jump, drift and large-jump parts.

    The jump parts come from the registry, the drift part from the model's
    characteristics (including fractional component logs where the drift is
    path dependent); the continuous part is the remainder, so the four parts
    reproduce X at every node by construction.
    """
    chars = _as_chars(model, k)
    grid = X.grid
    times = grid.times()

    kj = np.zeros(grid.n_nodes)
    lj = np.zeros(grid.n_nodes)
    k_sizes = np.asarray(chars.truncation(X.jump_sizes), dtype=np.float64)
    large_sizes = X.jump_sizes - k_sizes
    if X.jump_indices.size:
        np.add.at(kj, X.jump_indices, k_sizes)
        np.add.at(lj, X.jump_indices, large_sizes)
    kj_cum = np.cumsum(kj)
    lj_cum = np.cumsum(lj)

    lam_k = chars.compensator_k_rate()
    mdk = CadlagPath.from_jumps(
        grid,
        kj_cum - lam_k * times,
        list(zip(X.jump_indices.tolist(), k_sizes.tolist())),
    )
    large = CadlagPath.from_jumps(
        grid, lj_cum, list(zip(X.jump_indices.tolist(), large_sizes.tolist()))
    )
    bk = chars.bk_path(X)
    xc_values = X.values - (mdk.values + bk.values + large.values)
    xc = CadlagPath(grid, xc_values)
    recon = np.max(
        np.abs(xc.values + mdk.values + bk.values + large.values - X.values)
    )
    return Decomposition(
        continuous=xc,
        compensated_jumps=mdk,
        drift=bk,
        large_jumps=large,
        reconstruction_error=float(recon),
    )


def drift_jump(
    model: ModelSpec | CharacteristicsModel, k: TruncationFunction, t: float
) -> float:
    """Jump of the drift characteristic at t: integral of k d nu({t} x dx).

    Zero for quasi-left-continuous models; nonzero only on synthetic
    fixed-atom schedules.
    """
    chars = _as_chars(model, k)
    total = 0.0
    for s, atoms in chars.fixed_atoms:
        if abs(s - t) <= 1e-12 * max(1.0, abs(t)):
            total += sum(w * float(chars.truncation(np.float64(x))) for x, w in atoms)
    return total


def _atom_square_trajectory(chars: CharacteristicsModel, grid: TimeGrid) -> np.ndarray:
    out = np.zeros(grid.n_nodes)
    if chars.fixed_atoms:
        idx, vals = chars.atom_k_integrals(grid)
        np.add.at(out, idx, vals**2)
        np.cumsum(out, out=out)
    return out


def drift_bracket_rhs(
    X: CadlagPath,
    decomposition: Decomposition,
    model: ModelSpec | CharacteristicsModel,
    k: TruncationFunction,
    schedule: EpsilonSchedule,
) -> np.ndarray:
    """Right side of the drift-bracket identity:

        [X, X]^c - [X^c, X^c] + sum over s <= t of (integral of k d nu({s}))^2.
    """
    chars = _as_chars(model, k)
    qv_x = qv_decompose(X, schedule)
    qv_xc = covariation_limit(decomposition.continuous, decomposition.continuous, schedule)
    return qv_x.continuous - qv_xc.limit + _atom_square_trajectory(chars, X.grid)


def drift_bracket_check(
    X: CadlagPath,
    decomposition: Decomposition,
    model: ModelSpec | CharacteristicsModel,
    k: TruncationFunction,
    schedule: EpsilonSchedule,
) -> IdentityReport:
    """Compares [drift, drift] against the right side above, in sup norm."""
    chars = _as_chars(model, k)
    qv_x = qv_decompose(X, schedule)
    qv_xc = covariation_limit(decomposition.continuous, decomposition.continuous, schedule)
    rhs = qv_x.continuous - qv_xc.limit + _atom_square_trajectory(chars, X.grid)
    lhs = covariation_limit(decomposition.drift, decomposition.drift, schedule)
    sup = float(np.max(np.abs(lhs.limit - rhs)))
    return IdentityReport(
        name="drift bracket identity",
        sup_distance=sup,
        error_estimate=lhs.error_estimate + qv_x.estimate.error_estimate + qv_xc.error_estimate,
        converged=lhs.converged and qv_x.converged and qv_xc.converged,
        lhs=lhs.limit,
        rhs=rhs,
    )


def continuous_bracket_check(
    X: CadlagPath, decomposition: Decomposition, schedule: EpsilonSchedule
) -> IdentityReport:
    """Checks [X, X]^c = [X^c, X^c] + [drift, drift]^c in sup norm."""
    qv_x = qv_decompose(X, schedule)
    qv_xc = covariation_limit(decomposition.continuous, decomposition.continuous, schedule)
    qv_bk = qv_decompose(decomposition.drift, schedule)
    rhs = qv_xc.limit + qv_bk.continuous
    sup = float(np.max(np.abs(qv_x.continuous - rhs)))
    return IdentityReport(
        name="continuous bracket split",
        sup_distance=sup,
        error_estimate=qv_x.estimate.error_estimate
        + qv_xc.error_estimate
        + qv_bk.estimate.error_estimate,
        converged=qv_x.converged and qv_xc.converged and qv_bk.converged,
        lhs=qv_x.continuous,
        rhs=rhs,
    )
