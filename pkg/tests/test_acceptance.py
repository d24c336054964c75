"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Statistical criteria run at fixed seeds with the tolerances stated below;
runtime budgets are asserted where the criterion carries one.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from recgraph import laws
from recgraph import rng as streams
from recgraph.bounds import (contraction_estimate, estimate_bound_inputs,
                             moment_bound)
from recgraph.cli import main as cli_main
from recgraph.distances import EmpiricalDist, fit_log_slope, wasserstein_p
from recgraph.dynamics import coupled_contraction_run, iterate, marginal_at
from recgraph.graphs import (DegreeSequence, generate_dcm,
                             iid_degree_sequence, tree_likeness_rate)
from recgraph.models import (model_degroot, model_pagerank, model_voter,
                             sample_attrs)
from recgraph.trees import (NonContractionError, fixed_point_solve,
                            pool_trajectory, population_dynamics,
                            spec_from_joint_degree_law, spec_regular)

POOL = 100_000


def report(num, ok, detail=""):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def iid_degree_spec(c=0.5, p=1.0):
    joint, dm, dp = [], [], []
    for a in (1, 2, 3):
        for b in (1, 2, 3):
            joint.append(1 / 9)
            dm.append(a)
            dp.append(b)
    spec = spec_from_joint_degree_law(joint, dm, dp,
                                      attr_laws={"teleport": laws.constant(1.0)})
    return spec, model_pagerank(c, p=p)


def test_01_exact_scalar_fixed_point():
    """Regular fan-in keeps every vertex on the closed-form orbit 1 - c^k."""
    t0 = time.perf_counter()
    n, c = 1000, 0.5
    model = model_pagerank(c)
    g = generate_dcm(DegreeSequence.regular(n, 2), "raw", seed=1,
                     attrs=sample_attrs(model, n, seed=1))
    traj = iterate(g, model, 0.0, 30, seed=2)
    worst = max(float(np.max(np.abs(s.r - (1 - c ** k)))) for k, s in enumerate(traj))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    assert report(1, ok, f"(max deviation {worst:.2e}, {elapsed:.2f}s)")


def test_02_graph_to_tree_convergence():
    """Vertex marginal approaches the tree readout as the graph grows."""
    t0 = time.perf_counter()
    spec, model = iid_degree_spec(c=0.5)
    _, nu = population_dynamics(spec, model, POOL, 3, seed=101)
    medians = []
    for n in (100, 1000, 10000):
        dists = []
        for rep in range(20):
            s = streams.child_seed(12345, 0, n, rep)
            seq = iid_degree_sequence(n, [1, 2, 3], seed=s)
            g = generate_dcm(seq, "raw", seed=s, attrs=sample_attrs(model, n, seed=s))
            traj = iterate(g, model, 0.0, 3, seed=s)
            dists.append(wasserstein_p(marginal_at(traj, 3), nu, 1))
        medians.append(float(np.median(dists)))
    elapsed = time.perf_counter() - t0
    ok = (medians[0] > medians[1] > medians[2] and medians[2] < 0.02
          and elapsed < 120.0)
    assert report(2, ok, f"(medians {['%.4f' % m for m in medians]}, {elapsed:.1f}s)")


def test_03_fixed_point_geometric_decay():
    """Consecutive readout gaps decay at rate c for a spec with c_hat = c = 0.5."""
    t0 = time.perf_counter()
    spec = spec_regular(2, attr_laws={"teleport": laws.constant(1.0)})
    model = model_pagerank(0.5)
    _, diag = fixed_point_solve(spec, model, POOL, tol=0.0, max_iter=11, seed=77)
    slope = fit_log_slope(diag.trace[:10])
    elapsed = time.perf_counter() - t0
    ok = (abs(diag.c_hat - 0.5) <= 1e-12
          and math.log(0.5) - 0.15 <= slope <= math.log(0.5) + 0.15
          and elapsed < 60.0)
    assert report(3, ok, f"(slope {slope:.4f} vs log 0.5 = {math.log(0.5):.4f}, {elapsed:.1f}s)")


def test_04_vector_contraction():
    """Coupled runs with shared noise contract by at least the damping factor."""
    t0 = time.perf_counter()
    c = 0.5
    model = model_pagerank(c)
    seq = iid_degree_sequence(2000, [1, 2, 3], seed=31)
    g = generate_dcm(seq, "raw", seed=31, attrs=sample_attrs(model, 2000, seed=31))
    dists = coupled_contraction_run(g, model, laws.uniform(0, 1), 15, seed=32)
    worst = 0.0
    for prev, curr in zip(dists, dists[1:]):
        if prev > 1e-300:
            worst = max(worst, curr / prev)
    elapsed = time.perf_counter() - t0
    ok = worst <= c + 1e-12 and elapsed < 1.0
    assert report(4, ok, f"(worst ratio {worst:.15f}, {elapsed:.2f}s)")


def test_05_wasserstein_oracle():
    """Quantile integration equals brute-force min-cost assignment."""
    rng = np.random.default_rng(55)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        x, y = rng.normal(size=n), rng.normal(size=n)
        got = wasserstein_p(EmpiricalDist.from_samples(x),
                            EmpiricalDist.from_samples(y), 1)
        best = min(sum(abs(x[i] - y[pi[i]]) for i in range(n))
                   for pi in itertools.permutations(range(n))) / n
        worst = max(worst, abs(got - best))
    ok = worst <= 1e-12
    assert report(5, ok, f"(worst gap {worst:.2e})")


def test_06_voter_symmetry():
    """Fair votes stay fair through pool refreshes, for every flip rate."""
    band = 3 * 0.5 / math.sqrt(POOL)
    worst = 0.0
    for eps in (0.0, 0.1, 0.3):
        pools = pool_trajectory(spec_regular(3), model_voter(eps), POOL, 3,
                                init=laws.bernoulli(0.5), seed=202)
        worst = max(worst, max(abs(p.values.mean() - 0.5) for p in pools))
    ok = worst < band
    assert report(6, ok, f"(worst deviation {worst:.4f}, band {band:.4f})")


def test_07_moment_bound_audit():
    """Empirical pool moments respect the closed-form chain at every
    generation, for at least 99% of bootstrap resamples."""
    cases = [
        ("pagerank", model_pagerank(0.5, p=2.0),
         spec_from_joint_degree_law([1 / 3] * 3, [1, 2, 3], [2, 2, 2],
                                    attr_laws={"teleport": laws.constant(1.0)})),
        ("degroot", model_degroot(0.25, "shock", zeta_law=laws.choice([-1.0, 1.0])),
         spec_from_joint_degree_law([1 / 3] * 3, [1, 2, 3], [2, 2, 2])),
    ]
    ok = True
    details = []
    for name, model, spec in cases:
        binp = estimate_bound_inputs(spec, model, 50000, seed=111, eps=0.1, r0=0.0)
        pools = pool_trajectory(spec, model, POOL, 10, seed=112)
        boot = np.random.default_rng(113)
        worst_frac = 1.0
        for k, pool in enumerate(pools):
            v, _ = moment_bound(binp, k)
            ap = np.abs(pool.values) ** model.p
            hits = 0
            reps = 200
            for start in range(0, reps, 50):  # chunked full-size resamples
                idx = boot.integers(0, POOL, size=(50, POOL))
                vals = ap[idx].mean(axis=1) ** (1.0 / model.p)
                hits += int((vals <= v + 1e-12).sum())
            worst_frac = min(worst_frac, hits / reps)
        ok = ok and worst_frac >= 0.99
        details.append(f"{name} min frac {worst_frac:.3f}")
    assert report(7, ok, f"({'; '.join(details)})")


def test_08_tree_likeness_monotone():
    """Neighborhoods look like trees more often as the graph grows."""
    rates = []
    for n in (100, 1000, 10000):
        per_seed = [tree_likeness_rate(
            generate_dcm(DegreeSequence.regular(n, 2), "raw", seed=s), 2,
            min(n, 1000), seed=s) for s in range(20)]
        rates.append(float(np.mean(per_seed)))
    ok = rates[0] < rates[1] < rates[2] and rates[2] > 0.95
    assert report(8, ok, f"(rates {['%.4f' % r for r in rates]})")


def test_09_non_contraction_honesty():
    """The majority model reports its constant 2 and the solver refuses."""
    spec = spec_regular(3)
    model = model_voter(0.1)
    est = contraction_estimate(spec, model, 2000, seed=9)
    ok = abs(est.value - 2.0) <= max(3 * est.stderr, 1e-12)
    refused = False
    try:
        fixed_point_solve(spec, model, 1000, tol=1e-3, max_iter=10, seed=9)
    except NonContractionError:
        refused = True
    ok = ok and refused
    assert report(9, ok, f"(c_hat {est.value} +- {est.stderr}, refused={refused})")


def test_10_determinism_across_workers(tmp_path):
    """Identical configs give byte-identical reports for 1, 4 and 8 workers."""
    cfg = {
        "graph": {"family": "dcm", "degrees": {"kind": "iid_choice",
                                               "values": [1, 2, 3]},
                  "sizes": [60, 120]},
        "model": {"name": "pagerank", "c": 0.5},
        "run": {"k": 2, "replicas": 4, "pool_size": 2000, "seed": 7},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    blobs = []
    for w in (1, 4, 8):
        out = tmp_path / f"out{w}"
        code = cli_main(["converge", "--config", str(cfg_path),
                         "--out", str(out), "--workers", str(w)])
        assert code == 0
        blobs.append(((out / "converge.csv").read_bytes(),
                      (out / "summary.json").read_bytes()))
    ok = blobs[0] == blobs[1] == blobs[2]
    assert report(10, ok, "(csv+summary bytes identical across 1/4/8 workers)")
