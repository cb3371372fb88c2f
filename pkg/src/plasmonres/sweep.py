"""
Loss sweeps: drive the dipole transmission solve over a decreasing
grid of loss parameters and classify the energy trend.

Each sweep fixes a boundary, a contrast eps_c, and a dipole, then
walks delta down a geometric grid with the inclusion scale s tied to
delta by the small-inclusion coupling rule

    s = c delta              (3D),
    s^2 |ln s| = c delta     (2D),

so the frequency detuning stays inside the loss-broadened resonance
at every point. One row is recorded per (delta, solver): the interior
field norm ||grad u||_{L^2}, the equilibrium-mode coefficient of the
solution, the resonant coupling strength, and solve diagnostics. When
the contrast sits on a plasmon eigenvalue the field norm grows like
1/delta, so the fitted slope of log ||grad u|| against log delta is
-1; off resonance the norm stays bounded and the slope is flat. The
verdict encodes which regime the data shows.

Rows are assembled in grid order regardless of worker scheduling, and
every numeric cell is written with shortest round-trip formatting, so
a sweep writes byte-identical CSV on repeated runs apart from the
wall_time_ms column.
"""

import csv
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .geometry import NodeSet
from .layer_ops import assemble_S, assemble_Kstar, assemble_S_omega, \
    assemble_Kstar_omega, sphere_operators
from .np_spectrum import build_gram, np_eigendecomposition, sphere_spectrum, \
    coeffs_hat, coeffs_check
from .transmission import TransmissionProblem, plasmon_lambda, dipole_traces, \
    solve_direct, solve_spectral_2d, solve_spectral_3d, gradient_energy, \
    coupling_an

__all__ = [
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "CSV_COLUMNS",
    "run_sweep",
    "fit_blowup_rate",
    "scale_for_delta",
    "clear_operator_cache",
]

# exact CSV schema; column order is part of the output contract
CSV_COLUMNS = (
    "delta",
    "s",
    "omega",
    "energy_norm",
    "phi0_hat_abs",
    "a_n_abs",
    "solver",
    "residual",
    "wall_time_ms",
)

_SOLVERS = ("direct", "spectral", "both")

# rows enter the slope fit only below this relative residual
_FIT_RESIDUAL_TOL = 1e-8
# eigenvalues within this distance of the closest one form the resonant cluster
_CLUSTER_TOL = 1e-6
# degenerate clusters are truncated to this many modes for the a_n column
_CLUSTER_CAP = 12
_RESONANT_WINDOW = (-1.15, -0.85)
_BOUNDED_RATIO = 2.0
_MAX_INVALID_FRACTION = 0.3
_MIN_FIT_ROWS = 5
_MIN_FIT_DECADES = 2.0

# shared operator cache: key -> BoundaryOperator (or sphere operator
# tuple), entries immutable, inserts first-wins under the lock
_OPERATOR_CACHE = OrderedDict()
_CACHE_LOCK = threading.Lock()
_CACHE_MAX = 64


def scale_for_delta(delta, coupling_c, dim):
    """
    Inclusion scale for a given loss under the coupling rule.

    3D is explicit, s = c delta. 2D solves s^2 |ln s| = c delta by
    fixed-point iteration, which contracts for s < 1/e; the root is
    unique there and reached to 1e-12 relative.
    """
    if delta <= 0 or coupling_c <= 0:
        raise ValueError("delta and coupling_c must be positive")
    if dim == 3:
        return coupling_c * delta
    target = coupling_c * delta
    if target >= 0.1:
        raise ValueError(f"coupling target {target:.3g} too large for the 2D rule")
    s = np.sqrt(target)
    for _ in range(200):
        s_next = np.sqrt(target / abs(np.log(s)))
        if abs(s_next - s) <= 1e-14 * s:
            s = s_next
            break
        s = s_next
    if abs(s * s * abs(np.log(s)) - target) > 1e-10 * target:
        raise RuntimeError("2D coupling rule iteration failed to converge")
    return float(s)


@dataclass(frozen=True)
class SweepConfig:
    """
    Immutable sweep description: the transmission problem minus
    (delta, s), the delta grid, the coupling strength, and the run
    controls.

    geometry is a NodeSet (dim 2) or an (L, radius) pair (dim 3),
    exactly as TransmissionProblem takes it. The grid runs from
    delta_max down to delta_min geometrically with points_per_decade
    points per factor of 10. coupling_c must keep the scale in the
    s << delta regime, so it is capped at 0.1. plot_path is carried
    for front ends that render the CSV; run_sweep itself only writes
    the CSV.
    """

    dim: int
    geometry: object
    eps_c: float
    omega0: float
    a: np.ndarray
    z: np.ndarray
    csv_path: str
    eps_m: float = 1.0
    delta_max: float = 1e-2
    delta_min: float = 1e-5
    points_per_decade: int = 4
    coupling_c: float = 0.01
    solver: str = "both"
    workers: int = 1
    plot_path: str = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.solver not in _SOLVERS:
            raise ValueError(f"solver must be one of {_SOLVERS}")
        if not 0 < self.coupling_c <= 0.1:
            raise ValueError("coupling_c must lie in (0, 0.1]")
        if not 0 < self.delta_min < self.delta_max:
            raise ValueError("need 0 < delta_min < delta_max")
        if int(self.points_per_decade) < 1:
            raise ValueError("points_per_decade must be at least 1")
        if int(self.workers) < 1:
            raise ValueError("workers must be at least 1")
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        # building the extreme problems validates geometry, dipole
        # placement, and the omega <= cap constraint over the whole grid
        grid = self.delta_grid()
        self.problem_at(float(grid[0]))
        self.problem_at(float(grid[-1]))

    def delta_grid(self):
        """Geometric grid from delta_max down to delta_min, strictly decreasing."""
        decades = np.log10(self.delta_max / self.delta_min)
        n = int(round(decades * self.points_per_decade)) + 1
        n = max(n, 2)
        return np.geomspace(self.delta_max, self.delta_min, n)

    def scale_for(self, delta):
        """Inclusion scale s(delta) under the coupling rule."""
        return scale_for_delta(delta, self.coupling_c, self.dim)

    def problem_at(self, delta):
        """TransmissionProblem at one grid point."""
        return TransmissionProblem(
            dim=self.dim,
            geometry=self.geometry,
            s=self.scale_for(delta),
            delta=delta,
            eps_c=self.eps_c,
            omega0=self.omega0,
            a=self.a,
            z=self.z,
            eps_m=self.eps_m,
        )


@dataclass(frozen=True)
class SweepRow:
    """One (delta, solver) record; NaN energy marks a failed point."""

    delta: float
    s: float
    omega: float
    energy_norm: float
    phi0_hat_abs: float
    a_n_abs: float
    solver: str
    residual: float
    wall_time_ms: float


@dataclass(frozen=True)
class SweepResult:
    """
    Sweep outcome: all rows in grid order (delta descending, direct
    before spectral at each point), the fitted slope of
    log(energy_norm) against log(delta) with its 95% interval (None
    when too few valid rows), the invalid-row fraction, and the
    verdict: 'resonant' when the slope sits in [-1.15, -0.85],
    'bounded' when max/min energy < 2 over the valid rows, otherwise
    'inconclusive'.
    """

    config: SweepConfig
    rows: tuple
    slope: float
    slope_interval: tuple
    invalid_fraction: float
    verdict: str
    csv_path: str


# ------------------------------------------------------- operator cache


def _geometry_key(geometry):
    if isinstance(geometry, NodeSet):
        c = geometry.curve
        return (c.kind, tuple(sorted(c.params.items())), geometry.n)
    L, radius = geometry
    return ("sphere", float(radius), int(L))


def _cached(key, builder):
    with _CACHE_LOCK:
        if key in _OPERATOR_CACHE:
            return _OPERATOR_CACHE[key]
    value = builder()
    with _CACHE_LOCK:
        if key not in _OPERATOR_CACHE:
            _OPERATOR_CACHE[key] = value
            while len(_OPERATOR_CACHE) > _CACHE_MAX:
                _OPERATOR_CACHE.popitem(last=False)
        return _OPERATOR_CACHE[key]


def _helmholtz_pair(nodes, k):
    gk = _geometry_key(nodes)
    s_op = _cached((gk, "S_omega", complex(k)),
                   lambda: assemble_S_omega(nodes, k))
    k_op = _cached((gk, "Kstar_omega", complex(k)),
                   lambda: assemble_Kstar_omega(nodes, k))
    return s_op, k_op


def _sphere_ops(L, radius, k):
    key = (("sphere", float(radius), int(L)), "ops", complex(k))
    return _cached(key, lambda: sphere_operators(int(L), float(radius), k))


def clear_operator_cache():
    """Drop all cached operators (mainly for memory-sensitive callers)."""
    with _CACHE_LOCK:
        _OPERATOR_CACHE.clear()


# -------------------------------------------------------- sweep driver


@dataclass(frozen=True)
class _SweepContext:
    """Static per-sweep data shared read-only across workers."""

    spectrum: object
    cluster: tuple


def _build_context(config):
    if config.dim == 2:
        nodes = config.geometry
        s0 = assemble_S(nodes)
        k0 = assemble_Kstar(nodes)
        gram, _, _ = build_gram(s0, nodes)
        spectrum = np_eigendecomposition(k0, gram)
    else:
        L, radius = config.geometry
        spectrum = sphere_spectrum(int(L), float(radius))
    cluster = _resonant_cluster(spectrum, config.eps_c / config.eps_m)
    return _SweepContext(spectrum=spectrum, cluster=cluster)


def _resonant_cluster(spectrum, eps_eff):
    """
    Mode slots whose eigenvalue is closest to the plasmon value
    lambda(eps_eff), together with everything degenerate with it. The
    equilibrium slot never resonates and is excluded. Clusters larger
    than _CLUSTER_CAP (fully degenerate boundaries) are truncated.
    """
    lam = spectrum.lambdas
    if lam.size < 2:
        return ()
    target = plasmon_lambda(eps_eff)
    gaps = np.abs(lam[1:] - target)
    lam_star = lam[1 + int(np.argmin(gaps))]
    slots = [i for i in range(1, lam.size) if abs(lam[i] - lam_star) <= _CLUSTER_TOL]
    return tuple(slots[:_CLUSTER_CAP])


def _failed_row(delta, s, om, solver_name, a_n_abs=np.nan):
    return SweepRow(delta, s, om, np.nan, np.nan, a_n_abs,
                    solver_name, np.nan, 0.0)


def _sweep_point(config, ctx, delta):
    """All rows for one grid point, direct before spectral."""
    s = config.scale_for(delta)
    selected = ("direct", "spectral") if config.solver == "both" else (config.solver,)
    problem = config.problem_at(delta)
    om = problem.omega
    kc = problem.kc
    spectrum = ctx.spectrum
    try:
        f, g = dipole_traces(problem)
        a_n_abs = 0.0
        for slot in ctx.cluster:
            an, _ = coupling_an(config.z, config.a, slot, spectrum, om)
            a_n_abs = max(a_n_abs, abs(an))
        if config.dim == 2:
            s_in, k_in = _helmholtz_pair(config.geometry, kc)
            energy_ops = (s_in, k_in)
        else:
            energy_ops = spectrum
    except (ValueError, RuntimeError, np.linalg.LinAlgError):
        return [_failed_row(delta, s, om, name) for name in selected]

    rows = []
    for name in selected:
        t0 = time.perf_counter()
        try:
            if name == "direct":
                if config.dim == 2:
                    s_out, k_out = _helmholtz_pair(config.geometry, om)
                    ops = (s_in, k_in, s_out, k_out)
                else:
                    L, radius = config.geometry
                    _, _, si, ki = _sphere_ops(L, radius, kc)
                    _, _, so, ko = _sphere_ops(L, radius, om)
                    ops = (si, ki, so, ko)
                sol = solve_direct(problem, operators=ops)
            else:
                fcheck = coeffs_check(f, spectrum)
                ghat = coeffs_hat(g, spectrum)
                if config.dim == 2:
                    sol = solve_spectral_2d(fcheck, ghat, problem.eps_eff,
                                            problem.delta_eff, om, spectrum)
                else:
                    sol = solve_spectral_3d(fcheck, ghat, problem.eps_eff,
                                            problem.delta_eff, spectrum)
            energy = gradient_energy(sol.phi, kc, energy_ops)
            if not np.isfinite(energy) or energy <= 0:
                raise RuntimeError(f"non-physical energy {energy!r}")
            phi0 = abs(coeffs_hat(sol.phi, spectrum)[0])
            wall = (time.perf_counter() - t0) * 1000.0
            rows.append(SweepRow(delta, s, om, float(np.sqrt(energy)),
                                 float(phi0), float(a_n_abs), name,
                                 float(sol.residual), wall))
        except (ValueError, RuntimeError, np.linalg.LinAlgError):
            rows.append(_failed_row(delta, s, om, name, a_n_abs=a_n_abs))
    return rows


def _row_valid(row):
    return (np.isfinite(row.energy_norm) and row.energy_norm > 0
            and np.isfinite(row.residual) and row.residual <= _FIT_RESIDUAL_TOL)


def _format_cell(x):
    return repr(float(x))


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                _format_cell(r.delta),
                _format_cell(r.s),
                _format_cell(r.omega),
                _format_cell(r.energy_norm),
                _format_cell(r.phi0_hat_abs),
                _format_cell(r.a_n_abs),
                r.solver,
                _format_cell(r.residual),
                f"{r.wall_time_ms:.3f}",
            ])


def run_sweep(config):
    """
    Execute the sweep, write the CSV, fit the blow-up rate, classify.

    Points run on a worker pool of config.workers threads; results are
    assembled in grid order so the output does not depend on
    scheduling. The slope is fitted over the valid rows of one solver
    (direct when available, else spectral) so mixed direct/spectral
    sweeps do not double-count grid points. More than 30% invalid rows
    forces the 'inconclusive' verdict.
    """
    ctx = _build_context(config)
    grid = config.delta_grid()
    if int(config.workers) == 1:
        per_point = [_sweep_point(config, ctx, float(d)) for d in grid]
    else:
        with ThreadPoolExecutor(max_workers=int(config.workers)) as pool:
            per_point = list(pool.map(
                lambda d: _sweep_point(config, ctx, float(d)), grid))
    rows = tuple(r for point in per_point for r in point)
    _write_csv(config.csv_path, rows)

    fit_solver = "direct" if config.solver in ("direct", "both") else "spectral"
    fit_rows = [r for r in rows if r.solver == fit_solver and _row_valid(r)]
    n_valid = sum(_row_valid(r) for r in rows)
    invalid_fraction = 1.0 - n_valid / len(rows)

    slope = None
    interval = None
    try:
        slope, interval = fit_blowup_rate(fit_rows)
    except ValueError:
        pass

    if invalid_fraction > _MAX_INVALID_FRACTION:
        verdict = "inconclusive"
    elif slope is not None and _RESONANT_WINDOW[0] <= slope <= _RESONANT_WINDOW[1]:
        verdict = "resonant"
    else:
        energies = [r.energy_norm for r in fit_rows]
        if energies and max(energies) / min(energies) < _BOUNDED_RATIO:
            verdict = "bounded"
        else:
            verdict = "inconclusive"
    return SweepResult(config=config, rows=rows, slope=slope,
                       slope_interval=interval,
                       invalid_fraction=float(invalid_fraction),
                       verdict=verdict, csv_path=config.csv_path)


def fit_blowup_rate(rows):
    """
    OLS fit of log(energy_norm) against log(delta).

    rows are SweepRow records or bare (delta, energy_norm) pairs; rows
    with non-finite entries or residual above 1e-8 are dropped. Needs
    at least 5 usable points spanning at least two decades of delta,
    else ValueError. Returns (slope, (lo, hi)) where the interval is
    the 95% Student-t band from the residual variance; an exact power
    law therefore returns a zero-width interval.
    """
    pts = []
    for r in rows:
        if hasattr(r, "delta"):
            d, e, resid = r.delta, r.energy_norm, r.residual
        else:
            d, e = r
            resid = 0.0
        if (np.isfinite(d) and d > 0 and np.isfinite(e) and e > 0
                and np.isfinite(resid) and resid <= _FIT_RESIDUAL_TOL):
            pts.append((float(d), float(e)))
    if len(pts) < _MIN_FIT_ROWS:
        raise ValueError(f"need at least {_MIN_FIT_ROWS} valid rows, got {len(pts)}")
    d = np.array([p[0] for p in pts])
    e = np.array([p[1] for p in pts])
    span = np.log10(d.max() / d.min())
    if span < _MIN_FIT_DECADES * (1.0 - 1e-12):
        raise ValueError(f"delta grid spans {span:.2f} decades, need {_MIN_FIT_DECADES}")
    x = np.log(d)
    y = np.log(e)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    rss = float(np.sum((y - (intercept + slope * x)) ** 2))
    dof = len(pts) - 2
    se = np.sqrt(max(rss, 0.0) / dof / sxx)
    half = float(stats.t.ppf(0.975, dof) * se)
    return slope, (slope - half, slope + half)
