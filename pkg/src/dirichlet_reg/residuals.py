"""Martingale-problem residuals and their Monte Carlo hypothesis tests.

For a bounded C^{1,2} test function F and a path X with characteristics
(drift, C, compensator), the residual subtracts from F(t, X_t) the time
derivative, the second-order term driven by dC + d[drift, drift]^c, the
drift-integral term, and the compensated-jump correction.  When the model is
correct the residual is a local martingale; at desk scale this is tested as
(a) zero mean at fixed times and (b) increment orthogonality against
bounded functionals of the earlier path, both at a configurable SE level.

All ds-integrals use the left-endpoint Riemann rule; the inner jump-law
expectation uses each law's fixed quadrature (exact for discrete atoms,
40-node Gauss rules otherwise); left limits at grid nodes feed the
compensated-jump integrand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .characteristics import (
    CharacteristicsModel,
    TruncationFunction,
    _as_chars,
)
from .paths import CadlagPath, TimeGrid
from .regularize import (
    EpsilonSchedule,
    IdentityReport,
    covariation_limit,
    default_schedule,
    forward_integral_limit,
    _fwd_eps,
    _qv_eps,
)
from .simulate import ModelSpec, SeedSpec, simulate_path, BrownianMotion

__all__ = [
    "TestFunction",
    "exp_tanh",
    "damped_sine",
    "bump",
    "time_homogeneous",
    "combine_test_functions",
    "ResidualPath",
    "weak_dirichlet_residual",
    "semimartingale_residual",
    "ResidualEnsemble",
    "residual_ensemble",
    "MartingaleTestReport",
    "martingale_mean_test",
    "drift_orthogonality_probe",
]


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Bounded C^{1,2} function with evaluators for F, dF/dt, dF/dx, d2F/dx2."""

    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ft: Callable[[np.ndarray, np.ndarray], np.ndarray]
    fx: Callable[[np.ndarray, np.ndarray], np.ndarray]
    fxx: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound: float
    name: str


def exp_tanh() -> TestFunction:
    """F(t, x) = exp(-t) * tanh(x)."""

    def f(t, x):
        return np.exp(-t) * np.tanh(x)

    def ft(t, x):
        return -np.exp(-t) * np.tanh(x)

    def fx(t, x):
        return np.exp(-t) * (1.0 - np.tanh(x) ** 2)

    def fxx(t, x):
        th = np.tanh(x)
        return -2.0 * np.exp(-t) * th * (1.0 - th**2)

    return TestFunction(f, ft, fx, fxx, bound=1.0, name="exptanh")


def damped_sine() -> TestFunction:
    """F(t, x) = exp(-t) * sin(x)."""

    def f(t, x):
        return np.exp(-t) * np.sin(x)

    def ft(t, x):
        return -np.exp(-t) * np.sin(x)

    def fx(t, x):
        return np.exp(-t) * np.cos(x)

    def fxx(t, x):
        return -np.exp(-t) * np.sin(x)

    return TestFunction(f, ft, fx, fxx, bound=1.0, name="dampedsine")


def bump(halfwidth: float = 2.0) -> TestFunction:
    """Compactly supported C^2 bump in x, constant in t: (1 - (x/a)^2)^3."""
    a = float(halfwidth)

    def f(t, x):
        u = (np.asarray(x) / a) ** 2
        return np.where(u < 1.0, (1.0 - u) ** 3, 0.0) + 0.0 * np.asarray(t)

    def ft(t, x):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)

    def fx(t, x):
        x = np.asarray(x)
        u = (x / a) ** 2
        return np.where(u < 1.0, -(6.0 * x / a**2) * (1.0 - u) ** 2, 0.0)

    def fxx(t, x):
        x = np.asarray(x)
        u = (x / a) ** 2
        val = (6.0 / a**2) * (1.0 - u) * (5.0 * u - 1.0)
        return np.where(u < 1.0, val, 0.0)

    return TestFunction(f, ft, fx, fxx, bound=1.0, name="bump")


def time_homogeneous(
    f: Callable, fx: Callable, fxx: Callable, bound: float, name: str
) -> TestFunction:
    """Wraps x-only evaluators into a TestFunction with dF/dt = 0."""

    def F(t, x):
        return np.asarray(f(x), np.float64) + 0.0 * np.asarray(t)

    def Ft(t, x):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)

    def Fx(t, x):
        return np.asarray(fx(x), np.float64) + 0.0 * np.asarray(t)

    def Fxx(t, x):
        return np.asarray(fxx(x), np.float64) + 0.0 * np.asarray(t)

    return TestFunction(F, Ft, Fx, Fxx, bound=bound, name=name)


def combine_test_functions(a: float, F: TestFunction, b: float, G: TestFunction) -> TestFunction:
    return TestFunction(
        f=lambda t, x: a * F.f(t, x) + b * G.f(t, x),
        ft=lambda t, x: a * F.ft(t, x) + b * G.ft(t, x),
        fx=lambda t, x: a * F.fx(t, x) + b * G.fx(t, x),
        fxx=lambda t, x: a * F.fxx(t, x) + b * G.fxx(t, x),
        bound=abs(a) * F.bound + abs(b) * G.bound,
        name=f"{a}*{F.name}+{b}*{G.name}",
    )


# ---------------------------------------------------------------------------
# Residual construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualPath:
    """Residual trajectory with its additive term breakdown (sums to values)."""

    grid: TimeGrid
    values: np.ndarray
    terms: dict[str, np.ndarray]
    forward_converged: bool = True

    def at(self, t: float) -> float:
        return float(self.values[self.grid.index_of(t)])


def _cumsum0(x: np.ndarray) -> np.ndarray:
    """Cumulative sum with a leading zero along the last axis."""
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,))
    np.cumsum(x, axis=-1, out=out[..., 1:])
    return out


def _compensator_term(
    chars: CharacteristicsModel,
    times: np.ndarray,
    left: np.ndarray,
    F: TestFunction,
    dt: float,
) -> np.ndarray:
    """Cumulative compensated-jump correction, batched over leading axes.

    Continuous part: left Riemann sum of
        rate * E[F(s, X_{s-} + J) - F(s, X_{s-}) - k(J) dF/dx(s, X_{s-})],
    plus fixed-atom contributions at their nodes.
    """
    k = chars.truncation
    integrand = np.zeros_like(left)
    base_f = None
    base_fx = None
    for rate, law in chars.compensators:
        if rate == 0.0:
            continue
        if base_f is None:
            base_f = F.f(times, left)
            base_fx = F.fx(times, left)
        xq, wq = law.quadrature()
        kq = np.asarray(k(xq), np.float64)
        kbar = float(np.dot(wq, kq))
        acc = np.zeros_like(left)
        for x_i, w_i in zip(xq, wq):
            acc += w_i * F.f(times, left + x_i)
        integrand += rate * (acc - base_f - kbar * base_fx)
    out = _cumsum0(integrand[..., :-1] * dt)
    for s, atoms in chars.fixed_atoms:
        i = int(round(s / dt))
        xl = left[..., i]
        ts = times[..., i] if times.ndim else s
        contrib = np.zeros_like(xl)
        for x_a, w_a in atoms:
            ka = float(k(np.float64(x_a)))
            contrib = contrib + w_a * (
                F.f(ts, xl + x_a) - F.f(ts, xl) - ka * F.fx(ts, xl)
            )
        out[..., i:] += contrib[..., None] if np.ndim(contrib) else contrib
    return out


def _drift_arrays(
    chars: CharacteristicsModel, path: CadlagPath
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(continuous drift values, atom step indices, atom step sizes)."""
    bk = chars.bk_values(path)
    if not chars.fixed_atoms:
        return bk, np.empty(0, np.int64), np.empty(0)
    idx, vals = chars.atom_k_integrals(path.grid)
    steps = np.zeros(path.grid.n_nodes)
    np.add.at(steps, idx, vals)
    return bk - np.cumsum(steps), idx, vals


def _residual_terms(
    chars: CharacteristicsModel,
    grid: TimeGrid,
    values: np.ndarray,
    left: np.ndarray,
    bk_cont: np.ndarray,
    atom_idx: np.ndarray,
    atom_sizes: np.ndarray,
    F: TestFunction,
    drift_integrand: np.ndarray,
    bk_qv_cont_increments: np.ndarray | None,
    eps_multiple: int | None,
) -> dict[str, np.ndarray]:
    """Shared assembly of the five residual terms; batched over leading axes.

    ``drift_integrand`` is dF/dx evaluated where the chosen formulation wants
    it (right values for the forward-integral form, left limits for the
    classical Stieltjes form).
    """
    times = grid.times()
    dt = grid.dt

    fv = F.f(times, values)
    term_value = fv - fv[..., :1]
    term_time = -_cumsum0(F.ft(times, values)[..., :-1] * dt)

    c_inc = np.diff(chars.c_values(grid))
    fxx = F.fxx(times, values)
    if bk_qv_cont_increments is not None:
        inc = c_inc + bk_qv_cont_increments
    else:
        inc = c_inc
    term_second = -0.5 * _cumsum0(fxx[..., :-1] * inc)

    if eps_multiple is not None:
        # rough drift part integrated by the eps-regularized forward rule
        term_drift = -_fwd_eps(drift_integrand, bk_cont, eps_multiple)
    else:
        term_drift = -_cumsum0(drift_integrand[..., :-1] * np.diff(bk_cont, axis=-1))
    if atom_idx.size:
        fx_left = F.fx(times, left)
        for i, s in zip(atom_idx, atom_sizes):
            term_drift[..., i:] -= (fx_left[..., i] * s)[..., None] if values.ndim > 1 else fx_left[..., i] * s

    term_comp = -_compensator_term(chars, times, left, F, dt)

    return {
        "value": term_value,
        "time": term_time,
        "second_order": term_second,
        "drift": term_drift,
        "compensator": term_comp,
    }


def weak_dirichlet_residual(
    X: CadlagPath,
    model: ModelSpec | CharacteristicsModel,
    k: TruncationFunction,
    F: TestFunction,
    schedule: EpsilonSchedule | None = None,
) -> ResidualPath:
    """Residual of the expansion for weak Dirichlet characteristics.

    Terms, in order: F(t, X_t) - F(0, X_0); minus the time-derivative
    integral; minus half the second-derivative integral against
    dC + d[drift, drift]^c; minus the forward drift integral (exact Riemann
    when the drift characteristic is linear in t, eps-regularized when it is
    path dependent); minus the compensated-jump correction.
    """
    chars = _as_chars(model, k)
    grid = X.grid
    if schedule is None:
        schedule = default_schedule(grid)
    bk_cont, atom_idx, atom_sizes = _drift_arrays(chars, X)
    left = X.left_values()
    fx_right = F.fx(grid.times(), X.values)

    forward_converged = True
    if chars.drift_path_fn is not None:
        m = schedule.multiples[-1]
        bk_path = chars.bk_path(X)
        fwd = forward_integral_limit(
            CadlagPath(grid, fx_right), bk_path, schedule
        )
        forward_converged = fwd.converged
        # continuous drift bracket at the same eps as the forward integral:
        # the two discretization biases cancel inside the residual
        bk_qv_inc = np.diff(_qv_eps(bk_cont, m))
        eps_multiple = m
    else:
        bk_qv_inc = None
        eps_multiple = None

    terms = _residual_terms(
        chars,
        grid,
        X.values,
        left,
        bk_cont,
        atom_idx,
        atom_sizes,
        F,
        fx_right,
        bk_qv_inc,
        eps_multiple,
    )
    values = sum(terms.values())
    return ResidualPath(grid, values, terms, forward_converged)


def semimartingale_residual(
    X: CadlagPath,
    model: ModelSpec | CharacteristicsModel,
    k: TruncationFunction,
    F: TestFunction,
) -> ResidualPath:
    """Classical expansion residual: finite-variation drift characteristic,
    Stieltjes drift integral with left-limit integrand, no drift-bracket term.
    """
    chars = _as_chars(model, k)
    if not chars.bk_finite_variation:
        raise ValueError(
            "classical residual needs a finite-variation drift characteristic; "
            "use weak_dirichlet_residual for path-dependent drift"
        )
    grid = X.grid
    bk_cont, atom_idx, atom_sizes = _drift_arrays(chars, X)
    left = X.left_values()
    fx_left = F.fx(grid.times(), left)
    terms = _residual_terms(
        chars, grid, X.values, left, bk_cont, atom_idx, atom_sizes,
        F, fx_left, None, None,
    )
    values = sum(terms.values())
    return ResidualPath(grid, values, terms, True)


# ---------------------------------------------------------------------------
# Ensemble residuals and martingale statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualEnsemble:
    """Residual and path samples at the declared test and probe times."""

    times: tuple[float, ...]              # test times t
    probe_times: tuple[float, ...]        # earlier times carrying path values
    residual_at: dict[float, np.ndarray]  # time -> (N,) residual samples
    path_at: dict[float, np.ndarray]      # probe time -> (N,) path values
    n_paths: int
    meta: dict = field(default_factory=dict)


def _probe_plan(times: Sequence[float]) -> tuple[tuple[float, ...], dict[float, tuple[float, float]]]:
    """For each test time t, declare earlier times (t/4, t/2) for functionals."""
    plan: dict[float, tuple[float, float]] = {}
    probes: list[float] = []
    for t in times:
        s1, s2 = t / 4.0, t / 2.0
        plan[t] = (s1, s2)
        probes.extend([s1, s2])
    return tuple(sorted(set(probes))), plan


def residual_ensemble(
    model: ModelSpec,
    grid: TimeGrid,
    k: TruncationFunction,
    F: TestFunction,
    master_seed: int,
    n_paths: int,
    times: Sequence[float] = (0.25, 0.5, 1.0),
    mode: str = "weak_dirichlet",
    schedule: EpsilonSchedule | None = None,
    batch_size: int = 1024,
    inject_drift: float = 0.0,
) -> ResidualEnsemble:
    """Residual samples over an ensemble, batched; bit-identical across
    batch sizes (per-path substreams, single final reduction).

    ``inject_drift`` adds a deliberate linear drift to every residual and is
    the negative control for the martingale tests.
    """
    chars = _as_chars(model, k)
    if mode == "semimartingale" and not chars.bk_finite_variation:
        raise ValueError("semimartingale mode needs finite-variation drift")
    if schedule is None:
        schedule = default_schedule(grid)
    probe_times, _ = _probe_plan(times)
    t_idx = {t: grid.index_of(t) for t in times}
    s_idx = {s: grid.index_of(s) for s in probe_times}
    # residual increments need M at probe times too
    m_times = sorted(set(times) | set(probe_times))
    m_idx = {t: grid.index_of(t) for t in m_times}

    res_at = {t: np.empty(n_paths) for t in m_times}
    path_at = {s: np.empty(n_paths) for s in probe_times}
    time_nodes = grid.times()

    start = 0
    while start < n_paths:
        stop = min(start + batch_size, n_paths)
        vals = np.empty((stop - start, grid.n_nodes))
        lefts = np.empty_like(vals)
        bks = np.empty_like(vals)
        for j, i in enumerate(range(start, stop)):
            p = simulate_path(model, grid, SeedSpec(master_seed, i))
            vals[j] = p.values
            lv = p.values.copy()
            if p.jump_indices.size:
                lv[p.jump_indices] -= p.jump_sizes
            lefts[j] = lv
            bks[j] = chars.bk_values(p)
        if mode == "weak_dirichlet":
            integrand = F.fx(time_nodes, vals)
            if chars.drift_path_fn is not None:
                m = schedule.multiples[-1]
                qv = _qv_eps(bks, m)
                bk_qv_inc = np.diff(qv, axis=-1)
                eps_multiple = m
            else:
                bk_qv_inc, eps_multiple = None, None
        else:
            integrand = F.fx(time_nodes, lefts)
            bk_qv_inc, eps_multiple = None, None
        terms = _residual_terms(
            chars, grid, vals, lefts, bks,
            np.empty(0, np.int64), np.empty(0),
            F, integrand, bk_qv_inc, eps_multiple,
        )
        values = sum(terms.values())
        if inject_drift:
            values = values + inject_drift * time_nodes
        for t, i in m_idx.items():
            res_at[t][start:stop] = values[:, i]
        for s, i in s_idx.items():
            path_at[s][start:stop] = vals[:, i]
        start = stop

    return ResidualEnsemble(
        times=tuple(times),
        probe_times=probe_times,
        residual_at=res_at,
        path_at=path_at,
        n_paths=n_paths,
        meta={
            "model": repr(model),
            "truncation": k.name,
            "function": F.name,
            "mode": mode,
            "master_seed": master_seed,
            "quadrature_nodes": 40,
            "grid": {"T": grid.T, "n_steps": grid.n_steps},
        },
    )


def ensemble_from_residual_paths(
    residuals: Sequence[ResidualPath],
    paths: Sequence[CadlagPath],
    times: Sequence[float],
) -> ResidualEnsemble:
    """Builds the compact ensemble view from per-path residual objects."""
    probe_times, _ = _probe_plan(times)
    m_times = sorted(set(times) | set(probe_times))
    res_at = {
        t: np.array([r.at(t) for r in residuals]) for t in m_times
    }
    path_at = {
        s: np.array([p.eval(s) for p in paths]) for s in probe_times
    }
    return ResidualEnsemble(
        times=tuple(times),
        probe_times=probe_times,
        residual_at=res_at,
        path_at=path_at,
        n_paths=len(residuals),
    )


@dataclass(frozen=True)
class OrthogonalityStat:
    g: str
    s: float
    t: float
    value: float
    se: float
    z: float
    passed: bool


@dataclass(frozen=True)
class MartingaleTestReport:
    """Zero-mean and increment-orthogonality verdicts for a residual ensemble."""

    times: tuple[float, ...]
    means: tuple[float, ...]
    ses: tuple[float, ...]
    zscores: tuple[float, ...]
    orthogonality: tuple[OrthogonalityStat, ...]
    alpha_se: float
    n_paths: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "times": list(self.times),
            "means": list(self.means),
            "ses": list(self.ses),
            "zscores": list(self.zscores),
            "orthogonality": [
                {
                    "g": o.g, "s": o.s, "t": o.t,
                    "value": o.value, "se": o.se, "z": o.z, "pass": o.passed,
                }
                for o in self.orthogonality
            ],
            "alpha_se": self.alpha_se,
            "n_paths": self.n_paths,
            "pass": self.passed,
        }


def _zstat(samples: np.ndarray) -> tuple[float, float, float]:
    """(mean, se, z) with the exact-zero fast path for degenerate ensembles."""
    n = samples.size
    mean = float(np.mean(samples))
    sd = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    if sd == 0.0:
        return mean, 0.0, 0.0 if mean == 0.0 else float("inf")
    se = float(sd / np.sqrt(n))
    return mean, se, mean / se


def martingale_mean_test(
    residuals: ResidualEnsemble | Sequence[ResidualPath],
    times: Sequence[float] | None = None,
    alpha_se: float = 3.0,
    paths: Sequence[CadlagPath] | None = None,
) -> MartingaleTestReport:
    """Per-time z-scores of ensemble residual means, plus orthogonality
    statistics E[(M_t - M_s) g(path values at earlier times)] for
    g in {1, tanh(X_s), sin(X_{s1}) sin(X_{s2})}; a statistic passes when
    |z| <= alpha_se.
    """
    if isinstance(residuals, ResidualEnsemble):
        ens = residuals
        if times is None:
            times = ens.times
    else:
        if times is None:
            raise ValueError("times are required with raw residual paths")
        if paths is None:
            raise ValueError("orthogonality functionals need the path samples")
        ens = ensemble_from_residual_paths(residuals, paths, times)
    if ens.n_paths < 1:
        raise ValueError("empty ensemble")

    _, plan = _probe_plan(times)
    means, ses, zs = [], [], []
    all_pass = True
    for t in times:
        mean, se, z = _zstat(ens.residual_at[t])
        means.append(mean)
        ses.append(se)
        zs.append(z)
        all_pass &= abs(z) <= alpha_se

    orth: list[OrthogonalityStat] = []
    for t in times:
        s1, s2 = plan[t]
        inc = ens.residual_at[t] - ens.residual_at[s2]
        fams = (
            ("1", np.ones(ens.n_paths)),
            ("tanh(X_s)", np.tanh(ens.path_at[s2])),
            ("sin(X_s1)sin(X_s2)", np.sin(ens.path_at[s1]) * np.sin(ens.path_at[s2])),
        )
        for gname, gvals in fams:
            mean, se, z = _zstat(inc * gvals)
            ok = abs(z) <= alpha_se
            all_pass &= ok
            orth.append(OrthogonalityStat(gname, s2, t, mean, se, z, ok))

    return MartingaleTestReport(
        times=tuple(times),
        means=tuple(means),
        ses=tuple(ses),
        zscores=tuple(zs),
        orthogonality=tuple(orth),
        alpha_se=alpha_se,
        n_paths=ens.n_paths,
        passed=bool(all_pass),
    )


def drift_orthogonality_probe(
    X: CadlagPath,
    model: ModelSpec | CharacteristicsModel,
    k: TruncationFunction,
    F: TestFunction,
    schedule: EpsilonSchedule,
    probes: Sequence[CadlagPath] | None = None,
    probe_seed: int = 977,
) -> list[IdentityReport]:
    """Covariation of the drift-integral process against continuous martingale
    probes; the limit should vanish.  Default probes: the path's continuous
    martingale component sample (when logged) and an independent Brownian path.
    """
    chars = _as_chars(model, k)
    grid = X.grid
    fx = F.fx(grid.times(), X.values)
    bk = chars.bk_path(X)
    fwd = forward_integral_limit(CadlagPath(grid, fx), bk, schedule)
    integral_path = CadlagPath(grid, fwd.limit)

    if probes is None:
        probes = []
        if X.components and "bm" in X.components:
            probes.append(("continuous component", X.components["bm"]))
        indep = simulate_path(BrownianMotion(1.0), grid, SeedSpec(probe_seed, 0))
        probes.append(("independent brownian", indep))
    else:
        probes = [(f"probe {i}", p) for i, p in enumerate(probes)]

    reports = []
    for name, probe in probes:
        est = covariation_limit(integral_path, probe, schedule)
        sup = float(np.max(np.abs(est.limit)))
        reports.append(
            IdentityReport(
                name=f"drift-integral orthogonality vs {name}",
                sup_distance=sup,
                error_estimate=est.error_estimate + fwd.error_estimate,
                converged=est.converged and fwd.converged,
                lhs=est.limit,
                rhs=np.zeros_like(est.limit),
            )
        )
    return reports
