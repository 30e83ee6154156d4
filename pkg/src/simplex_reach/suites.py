"""Verification suites that combine several modules.

Each suite returns a :class:`~simplex_reach.reachability.Report`. Sampling is
indexed by ``(seed, run index)`` so results do not depend on ``workers``.
"""

from __future__ import annotations

import numpy as np

from . import quantum_lift as ql
from .errors import MajorisationViolation
from .generator import GeneratorMatrix, thermal_generator
from .majorisation import (
    build_polytope,
    classical_margin,
    d_majorises,
    dominating_candidates,
    dominating_vertex,
    random_triple,
    witness_matrix,
)
from .reachability import (
    Report,
    _merge,
    _ordered_map,
    _Timer,
    align_to_chamber,
    inward_check,
    is_geometric,
    run_rng,
)

QUANTUM_TIMES = (0.01, 0.1, 1.0, 10.0)


def _oracle_job(args):
    seed, index, n = args
    d, y, x = random_triple(n, run_rng(seed, index))
    by_norms = d_majorises(d, y, x)
    by_lp = witness_matrix(d, y, x) is not None
    violations = []
    if by_norms != by_lp:
        violations.append({"run": index, "d": d.tolist(), "y": y.tolist(),
                           "x": x.tolist(), "norm_test": by_norms, "lp": by_lp})
    return {"samples": 1, "max_margin": 0.0, "violations": violations,
            "majorised": by_norms}


def run_oracle(ns, samples: int = 1000, seed: int = 0, workers: int = 1) -> Report:
    """Compare the 1-norm criterion with LP witness feasibility on random triples."""
    with _Timer() as timer:
        parts = []
        positives = {}
        for n in ns:
            # offset seeds per dimension so n=3 and n=4 draw different triples
            jobs = [(seed + 1000003 * n, i, n) for i in range(samples)]
            res = _ordered_map(_oracle_job, jobs, workers)
            positives[str(n)] = sum(r["majorised"] for r in res)
            parts.extend(res)
    rep = _merge("oracle", {"n": list(ns), "triples_per_n": samples, "seed": seed},
                 parts, {"majorised_cases": positives}, timer.ms)
    rep.max_margin = None
    return rep


def run_quantum(G: GeneratorMatrix, ops, seed: int = 0, tol: float = 1e-10,
                times=QUANTUM_TIMES) -> Report:
    """Diagonal restriction, trace preservation and complete positivity of the lift."""
    with _Timer() as timer:
        n = G.n
        checks = []
        inv = ql.diagonal_invariance_check(ops)
        checks.append({"check": "diagonal_invariance", "value": inv.max_offdiagonal,
                       "limit": 1e-12})
        rng = run_rng(seed, 0)
        pairs = [(ql.random_density_matrix(n, rng), ql.random_density_matrix(n, rng))
                 for _ in range(8)]
        for t in times:
            S = ql.lift_semigroup(ops, t)
            diag_err = float(np.abs(ql.diagonal_restriction(S) - G.propagator(t)).max())
            checks.append({"check": "diagonal_restriction", "t": t, "value": diag_err,
                           "limit": tol})
            checks.append({"check": "trace_preservation", "t": t,
                           "value": ql.trace_preservation_residual(S), "limit": tol})
            checks.append({"check": "choi_negativity", "t": t,
                           "value": max(0.0, -ql.choi_min_eigenvalue(S)), "limit": tol})
            checks.append({"check": "trace_norm_contraction", "t": t,
                           "value": max(0.0, ql.contraction_excess(S, pairs)), "limit": tol})
        # exp(+Gamma) is trace preserving but not CP; recorded as a sanity check
        inverse = ql.SuperOperator(np.linalg.inv(ql.lift_semigroup(ops, 1.0).matrix))
        violations = [c for c in checks if c["value"] > c["limit"]]
    details = {"checks": checks,
               "inverse_choi_min_eigenvalue": ql.choi_min_eigenvalue(inverse)}
    return Report("quantum", {"n": n, "times": list(times), "seed": seed},
                  len(checks), violations, max(c["value"] for c in checks),
                  timer.ms, details)


def _facts_instance(d, x0, tol):
    d = np.asarray(d, dtype=float)
    G = thermal_generator(d)
    start = align_to_chamber(x0, d)
    P = build_polytope(G.fixed_point, start)
    violations = []
    try:
        z = dominating_vertex(P)
    except MajorisationViolation as exc:
        return {"samples": 1, "max_margin": None,
                "violations": [{"fact": "i", "d": d.tolist(), "x0": list(x0),
                                "error": str(exc)}]}
    cands = dominating_candidates(P)
    distinct = {tuple(np.round(np.sort(c)[::-1], 9)) for c in cands}
    if len(distinct) != 1:
        violations.append({"fact": "i-uniqueness", "d": d.tolist(),
                           "candidates": [list(c) for c in distinct]})
    margin = max(classical_margin(z, v) for v in P.vertices)
    inward = inward_check(G, z, tol)
    for v in inward.violations:
        violations.append(dict(v, fact="ii", d=d.tolist()))
    return {"samples": 1, "max_margin": max(margin, inward.max_margin),
            "violations": violations, "z": z.tolist()}


def _facts_job(args):
    seed, index, n, tol = args
    rng = run_rng(seed, index)
    ratio = rng.uniform(0.05, 1.0)
    d = ratio ** np.arange(n)
    d /= d.sum()
    x0 = rng.dirichlet(np.ones(n))
    return _facts_instance(d, x0, tol)


def run_facts(d, x0, samples: int = 200, seed: int = 0, tol: float = 1e-10,
              workers: int = 1) -> Report:
    """Dominating vertex (fact i) and inward flow at its permutations (fact ii).

    Runs the given instance plus ``samples`` random geometric-``d`` instances.
    """
    with _Timer() as timer:
        n = len(d)
        first = _facts_instance(d, x0, tol)
        jobs = [(seed, i, n, tol) for i in range(samples)]
        parts = [first] + _ordered_map(_facts_job, jobs, workers)
    instance = {"d": list(map(float, d)), "x0": list(map(float, x0)),
                "random_instances": samples, "seed": seed,
                "assumption_a": is_geometric(d)}
    return _merge("facts", instance, parts, {"z": first.get("z")}, timer.ms)
