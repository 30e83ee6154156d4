"""Hybrid dynamics on the simplex: permutations interleaved with thermal flow.

A control step ``(perm, tau)`` first applies ``x -> x[perm]`` instantaneously and
then lets the state relax for ``tau`` time units under ``exp(-tau B0)``.

The ``check_*`` functions turn the inclusion theorems for this model into
sampled experiments; each returns a :class:`Report` whose JSON form is
deterministic for a fixed seed, whatever the worker count.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SizeError
from .generator import (
    GeneratorMatrix,
    build_tensor_B0,
    clamp_flow_result,
    prob_vector,
    semigroup_step,
    thermal_generator,
)
from .linalg import expm
from .majorisation import (
    build_polytope,
    classical_margin,
    d_majorises,
    dominating_candidates,
    dominating_vertex,
    in_convex_hull,
    permutohedron_vertices,
)

log = logging.getLogger(__name__)

CONTAINMENT_TOL = 1e-10
MAX_VIOLATIONS_LISTED = 20
MAX_EXHAUSTIVE_PERMS = 6


@dataclass(frozen=True)
class ControlSequence:
    steps: tuple = ()

    def __post_init__(self):
        steps = []
        for perm, tau in self.steps:
            perm = tuple(int(p) for p in perm)
            tau = float(tau)
            if not math.isfinite(tau) or tau < 0:
                raise InvalidInputError(f"dwell time must be finite and >= 0, got {tau}")
            if sorted(perm) != list(range(len(perm))):
                raise InvalidInputError(f"{perm} is not a permutation")
            steps.append((perm, tau))
        object.__setattr__(self, "steps", tuple(steps))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def total_time(self) -> float:
        return sum(tau for _, tau in self.steps)

    @classmethod
    def random(cls, n: int, count: int, rng: np.random.Generator,
               rate_scale: float = 1.0) -> "ControlSequence":
        """Uniform permutations, dwell times log-uniform in ``[1e-2, 1e2] / rate_scale``."""
        taus = 10.0 ** rng.uniform(-2, 2, size=count) / rate_scale
        return cls(tuple((tuple(rng.permutation(n)), tau) for tau in taus))

    def to_json(self) -> list:
        return [{"perm": list(p), "tau": t} for p, t in self.steps]


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: ControlSequence = field(default_factory=ControlSequence)

    @property
    def samples(self) -> list:
        return list(zip(self.times.tolist(), self.states))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def simulate(x0, G: GeneratorMatrix, c: ControlSequence,
             samples_per_dwell: int = 1) -> Trajectory:
    """Run the control sequence from ``x0``.

    Records the initial state, the state right after each permutation, and
    ``samples_per_dwell`` evenly spaced states inside each dwell interval (the
    last one at its end).
    """
    if samples_per_dwell < 1:
        raise InvalidInputError("samples_per_dwell must be >= 1")
    x = prob_vector(x0)
    if x.size != G.n:
        raise InvalidInputError("state and generator dimensions differ")
    t = 0.0
    times, states = [0.0], [x]
    for perm, tau in c.steps:
        if len(perm) != G.n:
            raise InvalidInputError("permutation length differs from the state dimension")
        x = x[list(perm)]
        times.append(t)
        states.append(x)
        h = tau / samples_per_dwell
        step = G.propagator(h) if h > 0 else None
        for _ in range(samples_per_dwell):
            if step is not None:
                x = clamp_flow_result(step @ x)
            t += h
            times.append(t)
            states.append(x)
    return Trajectory(np.array(times), np.array(states), c)


def vector_field(G: GeneratorMatrix, x) -> np.ndarray:
    return -(G.B0 @ np.asarray(x, dtype=float))


def run_rng(seed: int, index: int) -> np.random.Generator:
    """Per-run generator that depends only on ``(seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _ordered_map(fn, items, workers: int):
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _clean(value):
    """Make report payloads JSON-safe (numpy scalars, non-finite floats)."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass
class Report:
    name: str
    instance: dict
    samples: int
    violations: list
    max_margin: float | None
    runtime_ms: float | None = None
    details: dict = field(default_factory=dict)
    violation_count: int | None = None

    def __post_init__(self):
        if self.violation_count is None:
            self.violation_count = len(self.violations)

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def to_json_dict(self, include_timing: bool = False) -> dict:
        out = {
            "name": self.name,
            "instance": self.instance,
            "samples": self.samples,
            "violation_count": self.violation_count,
            "violations": self.violations[:MAX_VIOLATIONS_LISTED],
            "max_margin": self.max_margin,
            "runtime_ms": self.runtime_ms if include_timing else None,
            "passed": self.passed,
            "details": self.details,
        }
        return _clean(out)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = 1e3 * (time.perf_counter() - self.start)


def _merge(name, instance, parts, details=None, runtime_ms=None) -> Report:
    violations, margins, samples, count = [], [], 0, 0
    for part in parts:
        samples += part["samples"]
        count += len(part["violations"])
        violations.extend(part["violations"])
        margins.append(part["max_margin"])
    return Report(
        name=name,
        instance=instance,
        samples=samples,
        violations=violations[:MAX_VIOLATIONS_LISTED],
        violation_count=count,
        max_margin=max(margins) if margins else None,
        runtime_ms=runtime_ms,
        details=details or {},
    )


def is_geometric(d, tol: float = 1e-12) -> bool:
    """Equidistant energies make the Gibbs vector geometric."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        return False
    log_ratio = np.diff(np.log(d))
    return bool(np.all(np.abs(log_ratio - log_ratio[0]) <= tol * max(1.0, abs(log_ratio[0])) + tol))


def align_to_chamber(x, d) -> np.ndarray:
    """Rearrange ``x`` so its entries are ordered like those of ``d``."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(-np.asarray(d), kind="stable")
    out = np.empty_like(x)
    out[order] = np.sort(x)[::-1]
    return out


# --- dissipation-only property ------------------------------------------------

def check_dissipative_monotonicity(d, x0, times, tol: float = CONTAINMENT_TOL) -> Report:
    """``exp(-t B0) x0`` stays d-majorised by ``x0`` along a time grid."""
    G = thermal_generator(d)
    x0 = prob_vector(x0)
    violations = []
    worst = -np.inf
    for t in times:
        x = semigroup_step(G, float(t), x0)
        if not d_majorises(G.fixed_point, x0, x, tol):
            violations.append({"t": float(t), "x": x.tolist()})
        dist = np.abs(x - G.fixed_point).sum()
        worst = max(worst, dist - np.abs(x0 - G.fixed_point).sum())
    return Report("property1", {"d": list(d), "x0": x0.tolist()},
                  len(times), violations, worst)


# --- states majorised by d stay majorised by d ----------------------------------

def _random_mix_of_permutations(d, rng) -> np.ndarray:
    n = d.size
    k = int(rng.integers(1, min(math.factorial(n), 6) + 1))
    weights = rng.dirichlet(np.ones(k))
    return sum(w * d[rng.permutation(n)] for w in weights)


def _thm4_run(args):
    d, B0, seed, index, budget, spd, tol = args
    G = GeneratorMatrix(B0, d)
    rng = run_rng(seed, index)
    x0 = prob_vector(_random_mix_of_permutations(d, rng))
    c = ControlSequence.random(d.size, budget, rng, G.rate_scale)
    traj = simulate(x0, G, c, spd)
    margins = np.array([classical_margin(d, x) for x in traj.states])
    bad = np.flatnonzero(margins > tol)
    return {
        "samples": len(margins),
        "max_margin": float(margins.max()),
        "violations": [
            {"run": index, "sample": int(i), "x": traj.states[i].tolist(),
             "margin": float(margins[i])}
            for i in bad
        ],
    }


def check_thm4(d, samples: int = 1000, budget: int = 30, seed: int = 0, *,
               samples_per_dwell: int = 2, workers: int = 1,
               tol: float = CONTAINMENT_TOL) -> Report:
    """States majorised by ``d`` stay majorised by ``d`` under the hybrid dynamics."""
    with _Timer() as timer:
        G = thermal_generator(d)
        d = np.array(G.fixed_point)
        B0 = np.array(G.B0)
        jobs = [(d, B0, seed, i, budget, samples_per_dwell, tol) for i in range(samples)]
        parts = _ordered_map(_thm4_run, jobs, workers)
    instance = {"d": d.tolist(), "runs": samples, "budget": budget, "seed": seed,
                "assumption_a": is_geometric(d)}
    return _merge("thm4", instance, parts, runtime_ms=timer.ms)


# --- containment in the permutohedron of the dominating vertex ----------------

def _thm56_run(args):
    d, B0, x0, z, hull_pts, use_partial, seed, index, budget, spd, tol = args
    G = GeneratorMatrix(B0, d)
    rng = run_rng(seed, index)
    start = x0[rng.permutation(d.size)]
    c = ControlSequence.random(d.size, budget, rng, G.rate_scale)
    traj = simulate(start, G, c, spd)
    margins = np.array([classical_margin(z, x) for x in traj.states])
    violations = []
    if use_partial:
        violations = [
            {"run": index, "sample": int(i), "x": traj.states[i].tolist(),
             "margin": float(margins[i]), "test": "partial-sums"}
            for i in np.flatnonzero(margins > tol)
        ]
    if hull_pts is not None:
        for i, x in enumerate(traj.states):
            if not in_convex_hull(hull_pts, x, tol=max(tol, 1e-9)):
                violations.append({"run": index, "sample": i, "x": x.tolist(),
                                   "test": "hull-lp"})
    return {"samples": len(margins), "max_margin": float(margins.max()),
            "violations": violations, "points": traj.states}


def hull_coverage(z, cloud, resolution: int = 40) -> float:
    """Fraction of simplex grid points inside the permutohedron of ``z`` that have
    a sample within one grid cell (1-norm radius ``2 / resolution``).
    """
    n = len(z)
    grid = simplex_grid(n, resolution)
    inside = grid[[classical_margin(z, g) <= 1e-12 for g in grid]]
    if len(inside) == 0:
        return 1.0
    cloud = np.asarray(cloud)
    radius = 2.0 / resolution + 1e-12
    hit = 0
    for chunk in np.array_split(inside, max(1, len(inside) // 256)):
        dist = np.abs(chunk[:, None, :] - cloud[None, :, :]).sum(axis=2)
        hit += int(np.sum(dist.min(axis=1) <= radius))
    return hit / len(inside)


def check_thm5_6(d, x0, samples: int = 100, budget: int = 30, seed: int = 0, *,
                 samples_per_dwell: int = 2, workers: int = 1,
                 membership: str = "partial-sums", tol: float = CONTAINMENT_TOL,
                 coverage_resolution: int | None = None) -> Report:
    """Sampled reachable points lie in the permutohedron of the dominating vertex.

    ``membership`` selects the containment test: ``"partial-sums"`` (against
    ``z``), ``"hull-lp"`` (LP membership in the convex hull of all permuted
    polytope vertices, an independent route) or ``"both"``.
    """
    if membership not in ("partial-sums", "hull-lp", "both"):
        raise InvalidInputError(f"unknown membership test {membership!r}")
    with _Timer() as timer:
        G = thermal_generator(d)
        d = np.array(G.fixed_point)
        x0 = prob_vector(x0)
        start = align_to_chamber(x0, d)
        P = build_polytope(d, start)
        z = np.array(dominating_vertex(P))
        candidates = dominating_candidates(P)
        hull_pts = None
        if membership in ("hull-lp", "both"):
            hull_pts = np.vstack([permutohedron_vertices(v) for v in P.vertices])
        use_partial = membership != "hull-lp"
        jobs = [(d, np.array(G.B0), np.array(x0), z, hull_pts, use_partial, seed, i,
                 budget, samples_per_dwell, tol) for i in range(samples)]
        parts = _ordered_map(_thm56_run, jobs, workers)
        details = {
            "z": z.tolist(),
            "polytope_vertices": P.vertices.tolist(),
            "dominating_candidates": len(candidates),
        }
        if coverage_resolution:
            cloud = np.vstack([p["points"] for p in parts])
            details["hull_coverage"] = hull_coverage(details["z"], cloud,
                                                     coverage_resolution)
        for p in parts:
            p.pop("points")
    instance = {"d": d.tolist(), "x0": x0.tolist(), "runs": samples,
                "budget": budget, "seed": seed, "membership": membership,
                "assumption_a": is_geometric(d)}
    name = {"partial-sums": "thm6", "hull-lp": "thm5", "both": "thm5_6"}[membership]
    return _merge(name, instance, parts, details, runtime_ms=timer.ms)


# --- the flow points inward at the hull vertices ------------------------------

def active_subsets(point, tol: float = 1e-12):
    """Index sets ``S`` whose permutohedron facet ``sum_S x <= top-|S| sum`` is
    tight at ``point`` (a vertex of that permutohedron)."""
    point = np.asarray(point, dtype=float)
    n = point.size
    top = np.cumsum(np.sort(point)[::-1])
    for size in range(1, n):
        for S in itertools.combinations(range(n), size):
            if abs(point[list(S)].sum() - top[size - 1]) <= tol:
                yield S


def inward_check(G: GeneratorMatrix, z, tol: float = CONTAINMENT_TOL) -> Report:
    """The flow at every vertex ``pi(z)`` points into the permutohedron of ``z``."""
    z = np.asarray(z, dtype=float)
    violations, worst, checked = [], -np.inf, 0
    per_vertex = []
    for v in permutohedron_vertices(z):
        f = vector_field(G, v)
        vertex_worst = -np.inf
        for S in active_subsets(v):
            rate = float(f[list(S)].sum())
            checked += 1
            vertex_worst = max(vertex_worst, rate)
            if rate > tol:
                violations.append({"vertex": v.tolist(), "subset": list(S), "rate": rate})
        worst = max(worst, vertex_worst)
        per_vertex.append({"vertex": v.tolist(), "max_rate": vertex_worst})
    return Report("fact_ii", {"z": z.tolist()}, len(per_vertex), violations,
                  worst, details={"halfspaces_checked": checked, "vertices": per_vertex})


# --- greedy reachability search (zero temperature) -------------------------------

@dataclass(frozen=True)
class GreedyResult:
    target: np.ndarray
    endpoint: np.ndarray
    residual: float
    controls: ControlSequence
    history: tuple

    @property
    def steps(self) -> int:
        return len(self.controls)


class GreedySearch:
    """Reusable greedy controller for a fixed generator.

    Each step tries every permutation against a log-spaced dwell grid (cached
    propagators), keeps the pair that brings the sorted state closest to the
    sorted target in 1-norm, and refines the dwell with a golden-section search.
    A final zero-dwell permutation aligns the ordering with the target.
    """

    def __init__(self, G: GeneratorMatrix, grid_points: int = 160, refine_iters: int = 24):
        n = G.n
        if math.factorial(n) > math.factorial(MAX_EXHAUSTIVE_PERMS):
            raise SizeError(f"exhaustive permutation search is limited to n <= {MAX_EXHAUSTIVE_PERMS}")
        self.G = G
        self.perms = np.array(list(itertools.permutations(range(n))))
        scale = G.rate_scale
        self.taus = np.concatenate([[0.0], np.logspace(-3, 2, grid_points)]) / scale
        self.props = np.stack([G.propagator(t) for t in self.taus])
        self.refine_iters = refine_iters

    def _cost(self, tau, x, g_sorted):
        y = self.G.propagator(tau) @ x
        return np.abs(np.sort(y)[::-1] - g_sorted).sum(), y

    def _refine(self, k, x, g_sorted):
        lo = self.taus[max(k - 1, 0)]
        hi = self.taus[min(k + 1, len(self.taus) - 1)]
        phi = (math.sqrt(5) - 1) / 2
        a, b = lo, hi
        c1, c2 = b - phi * (b - a), a + phi * (b - a)
        f1, _ = self._cost(c1, x, g_sorted)
        f2, _ = self._cost(c2, x, g_sorted)
        for _ in range(self.refine_iters):
            if f1 <= f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - phi * (b - a)
                f1, _ = self._cost(c1, x, g_sorted)
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + phi * (b - a)
                f2, _ = self._cost(c2, x, g_sorted)
        tau = c1 if f1 <= f2 else c2
        cost, y = self._cost(tau, x, g_sorted)
        return tau, cost, y

    def run(self, x0, target, eps: float = 0.02, budget: int = 40) -> GreedyResult:
        """Best of two greedy descents: one from ``x0`` and one after a single long
        identity dwell that first purifies the state toward the absorbing level
        (plain descent stalls from near-uniform starts at zero temperature).
        Taking the better one keeps the residual non-increasing in ``budget``.
        """
        direct = self._descend(x0, target, eps, budget, ())
        if budget < 3:
            return direct
        prefix = ((tuple(range(self.G.n)), float(self.taus[-1])),)
        x1 = clamp_flow_result(self.props[-1] @ np.asarray(x0, dtype=float))
        retry = self._descend(x1, target, eps, budget - 1, prefix)
        return retry if retry.residual < direct.residual else direct

    def _descend(self, x0, target, eps, budget, prefix) -> GreedyResult:
        x = prob_vector(x0)
        g = np.asarray(target, dtype=float)
        g_sorted = np.sort(g)[::-1]
        best = np.abs(np.sort(x)[::-1] - g_sorted).sum()
        steps, history = list(prefix), [best]
        while best > eps and len(steps) - len(prefix) < budget - 1:
            cand = np.einsum("kij,pj->pki", self.props, x[self.perms])
            dist = np.abs(np.sort(cand, axis=-1)[..., ::-1] - g_sorted).sum(axis=-1)
            p, k = np.unravel_index(int(dist.argmin()), dist.shape)
            xp = x[self.perms[p]]
            tau, cost, y = self.taus[k], dist[p, k], cand[p, k]
            if k > 0:
                rtau, rcost, ry = self._refine(k, xp, g_sorted)
                if rcost < cost:
                    tau, cost, y = rtau, rcost, ry
            if cost >= best - 1e-15:
                break
            x = clamp_flow_result(y)
            best = cost
            steps.append((tuple(self.perms[p].tolist()), float(tau)))
            history.append(best)
        # align: k-th largest of x goes where the k-th largest of g sits
        align = np.empty(x.size, dtype=int)
        align[np.argsort(-g, kind="stable")] = np.argsort(-x, kind="stable")
        if not np.array_equal(align, np.arange(x.size)):
            steps.append((tuple(align.tolist()), 0.0))
            x = x[align]
        residual = float(np.abs(x - g).sum())
        return GreedyResult(g, x, residual, ControlSequence(tuple(steps)), tuple(history))


def simplex_grid(n: int, divisions: int) -> np.ndarray:
    """All points of the simplex with coordinates in ``(1/divisions) * Z``."""
    pts = []
    for combo in itertools.combinations(range(divisions + n - 1), n - 1):
        bars = (-1,) + combo + (divisions + n - 1,)
        pts.append([bars[i + 1] - bars[i] - 1 for i in range(n)])
    return np.array(pts[::-1], dtype=float) / divisions


_SEARCH_CACHE: dict = {}


def _coverage_job(args):
    key, B0, local, idim, x0, g, eps, budget = args
    search = _SEARCH_CACHE.get(key)
    if search is None:
        G = GeneratorMatrix(B0, None, local, idim)
        search = _SEARCH_CACHE[key] = GreedySearch(G)
    res = search.run(x0, g, eps, budget)
    return {"target": g.tolist(), "residual": res.residual, "steps": res.steps}


def check_thm1_coverage(n: int = 3, grid_spacing: float = 0.05, eps: float = 0.02,
                        budget: int = 40, *, m: int = 1, x0=None,
                        workers: int = 1) -> Report:
    """Greedy epsilon-coverage of the simplex grid under the zero-temperature model.

    ``m > 1`` couples the bath to the last of ``m`` qudits only. Failed targets
    are reported as violations; coverage is complete iff there are none.
    """
    with _Timer() as timer:
        G = build_tensor_B0(n, m, np.full(n - 1, np.pi / 2))
        N = G.n
        divisions = int(round(1.0 / grid_spacing))
        if abs(divisions * grid_spacing - 1.0) > 1e-9:
            raise InvalidInputError("grid spacing must divide 1")
        grid = simplex_grid(N, divisions)
        if x0 is None:
            x0 = np.full(N, 1.0 / N)
        x0 = prob_vector(x0)
        local = None if G.local is None else np.array(G.local)
        key = (n, m)
        jobs = [(key, np.array(G.B0), local, G.identity_dim, x0, g, eps, budget)
                for g in grid]
        results = _ordered_map(_coverage_job, jobs, workers)
    residuals = np.array([r["residual"] for r in results])
    steps = np.array([r["steps"] for r in results])
    violations = [r for r in results if r["residual"] > eps]
    instance = {"n": n, "m": m, "grid_spacing": grid_spacing, "eps": eps,
                "budget": budget, "x0": x0.tolist()}
    details = {
        "targets": len(grid),
        "coverage": 1.0 - len(violations) / len(grid),
        "max_residual": float(residuals.max()),
        "max_steps": int(steps.max()),
        "mean_steps": float(steps.mean()),
    }
    name = "thm1" if m == 1 else "thm2"
    return Report(name, instance, len(grid), violations,
                  float(residuals.max() - eps), timer.ms, details)
