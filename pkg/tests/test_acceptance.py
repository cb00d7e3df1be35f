"""Acceptance criteria 1-13.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary) and then asserts it, so a failing criterion shows up red.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import json
import time

import numpy as np
import pytest
from scipy.spatial.distance import jensenshannon

from digmilp.analytics import (
    ObjectivePredictor,
    corpus_stats,
    effort_profile,
    js_distance,
    js_similarity,
    optimal_values,
    pearson,
    rel_mse,
    solver_configs,
    tuning_correlation,
)
from digmilp.baselines import BowlyGenerator, RandomDecoderGenerator
from digmilp.datasets import ScConfig, gen_set_cover, generate_family
from digmilp.exceptions import ConstantInput
from digmilp.instance import MilpInstance, Mode, Status, derive_bc, weak_duality_gap
from digmilp.nn import autograd as ag
from digmilp.nn import huber, kl_std_normal, reparameterize
from digmilp.nn.gradcheck import check_store
from digmilp.pipeline import PipelineConfig, run_pipeline
from digmilp.solver import classify, extract_labels, lp_relaxation, solve_dual, solve_milp
from digmilp.vae import DigMilpGenerator, elbo_loss

from conftest import brute_force, random_binary_instance
from test_analytics import FIXTURE_X, FIXTURE_Y, pearson_oracle
from test_nn import _check_op
from test_vae import toy_setup

pytestmark = pytest.mark.slow

RESULTS = {}


def verdict(n, ok, detail):
    line = f"acceptance {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def trained(toy_sc):
    """The toy model shared by criteria 1, 6, 7 and 10."""
    return DigMilpGenerator(alpha=5.0, epochs=50, seed=123).fit(toy_sc)


def test_01_feasibility_guarantee(trained, toy_sc):
    t0 = time.perf_counter()
    sources = {
        **{f"vae γ={g}": trained.sample(1000, gamma=g, seed=1) for g in (0.05, 0.2, 0.5)},
        "random γ=0.1": RandomDecoderGenerator(seed=1).fit(toy_sc).sample(1000, gamma=0.1),
        "bowly": BowlyGenerator(family="sc", seed=1).fit(toy_sc).sample(1000),
    }
    counts = {k: sum(classify(i) is Status.OPTIMAL for i in v) for k, v in sources.items()}
    elapsed = time.perf_counter() - t0
    ok = all(c == 1000 for c in counts.values()) and elapsed < 300
    detail = ", ".join(f"{k} {c}/1000" for k, c in counts.items())
    verdict(1, ok, f"{detail}; {elapsed:.0f}s (limit 300s)")


def test_02_round_trip():
    insts = generate_family("sc", 250, seed=500, n_cons=10, n_vars=20) + \
        generate_family("ca", 250, seed=500, n_items=8, n_bids=12, max_bundle=3)
    worst = 0.0
    for inst in insts:
        b, c = derive_bc(extract_labels(inst))
        worst = max(worst, float(np.abs(b - inst.b).max()), float(np.abs(c - inst.c).max()))
    verdict(2, worst <= 1e-9, f"500 SC/CA instances, max |Δb|,|Δc| = {worst:.2e} (tol 1e-9)")


def test_03_weak_duality():
    rng = np.random.default_rng(3)
    gaps, k = [], 0
    while len(gaps) < 10_000:
        mode = Mode.BINARY if k % 2 else Mode.GENERAL
        m, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
        a = rng.integers(0 if mode is Mode.GENERAL else -4, 6, size=(m, n)).astype(float)
        if mode is Mode.GENERAL:
            a[0] += 1  # row 0 bounds every variable
        b = rng.integers(-2 if mode is Mode.BINARY else 0, 15, size=m).astype(float)
        c = rng.integers(-8, 10, size=n).astype(float)
        inst = MilpInstance(a, b, c, mode)
        k += 1
        rep = solve_milp(inst)
        if rep.outcome.status is not Status.OPTIMAL:
            continue
        out, y, y2 = solve_dual(inst)
        if out.status is not Status.OPTIMAL:
            continue
        gaps.append(weak_duality_gap(inst, rep.outcome.solution, y, y2))
    worst = min(gaps)
    verdict(3, worst >= -1e-9, f"{len(gaps)} primal/dual pairs, min gap {worst:.2e} (tol -1e-9)")


def test_04_solver_vs_brute_force():
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(200):
        inst = random_binary_instance(rng, n=int(rng.integers(1, 13)))
        ref = brute_force(inst)
        out = solve_milp(inst).outcome
        if ref is None:
            bad += out.status is not Status.INFEASIBLE
        else:
            bad += out.status is not Status.OPTIMAL or out.value != ref
    verdict(4, bad == 0, f"200 binary instances (n <= 12), {bad} mismatches vs enumeration")


def _op_checks(seed):
    """Finite-difference check of every differentiable op on 3x4-shaped inputs."""
    checks = [
        (ag.add, (3, 4), (4,)),
        (ag.mul, (3, 4), (3, 4)),
        (ag.matmul, (3, 4), (4, 3)),
        (ag.relu, (3, 4)),
        (lambda a: ag.neg(ag.square(ag.exp(a))), (3, 4)),
        (lambda a: ag.add(ag.sum(a, axis=0), ag.mean(a, axis=0)), (3, 4)),
        (lambda a, b: ag.reshape(ag.concat([a, b], axis=1), (-1,)), (3, 4), (3, 2)),
        (lambda a: ag.segment_sum(ag.take_rows(a, [0, 2, 2, 1]), [3, 0, 1, 1], 4), (3, 4)),
        (lambda a: huber(a, np.linspace(-3, 3, 12).reshape(3, 4)), (3, 4)),
        (lambda mu, lv: ag.add(kl_std_normal(mu, lv), ag.sum(reparameterize(mu, lv, np.ones((3, 4))))),
         (3, 4), (3, 4)),
    ]
    for fn, *shapes in checks:
        _check_op(fn, *shapes, seed=seed)


def test_05_gradient_checks():
    worst, op_fail = 0.0, 0
    for seed in range(20):
        try:
            _op_checks(seed)
        except AssertionError:
            op_fail += 1
        mode = Mode.BINARY if seed % 2 == 0 else Mode.GENERAL
        net, g, scaler = toy_setup(seed, mode=mode)
        loss = lambda: elbo_loss(net, g, scaler, 5.0, np.random.default_rng(seed))[0]
        worst = max(worst, check_store(loss, net.store))
    ok = op_fail == 0 and worst <= 1e-4
    verdict(5, ok, f"20 seeds: {op_fail} op-check failures, full-ELBO max rel err {worst:.2e} (tol 1e-4)")


def test_06_training_signal(trained):
    first, last = trained.loss_trace_[0], trained.loss_trace_[-1]
    verdict(6, last < 0.7 * first, f"epoch loss {first:.4f} -> {last:.4f}, ratio {last / first:.3f} (need < 0.7)")


def test_07_similarity_ordering(trained, toy_sc):
    gammas = (0.01, 0.1, 0.5)
    violations, wins, rows = 0, 0, []
    for seed in range(3):
        cands = [trained.sample(20, gamma=g, seed=seed) for g in gammas]
        cands.append(RandomDecoderGenerator(seed=seed).fit(toy_sc).sample(20, gamma=0.1))
        scores = [r.score for r in js_similarity(toy_sc, cands)]
        violations += sum(scores[i + 1] > scores[i] for i in range(2))
        wins += scores[1] >= scores[3]
        rows.append("/".join(f"{s:.3f}" for s in scores))
    ok = violations <= 1 and wins >= 2
    verdict(7, ok, f"scores γ=.01/.1/.5/random per seed {rows}; {violations} order violations (<=1), "
                   f"trained>=random {wins}/3 (>=2)")


def _safe_r(a, b):
    try:
        return pearson(a, b).r
    except ConstantInput:
        return float("nan")


def test_08_js_machinery(toy_sc):
    same = js_similarity(toy_sc, [toy_sc])[0]
    zero = all(v == 0 for v in same.distances.values())
    disjoint = abs(js_distance([1, 0, 0], [0, 1, 0]) - np.sqrt(np.log(2)))
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        p, q = rng.uniform(size=10), rng.uniform(size=10)
        p[rng.uniform(size=10) < 0.3] = 0
        p[0] += 0.1
        worst = max(worst, abs(js_distance(p, q) - jensenshannon(p, q)))
    ok = zero and disjoint <= 1e-12 and worst <= 1e-10
    verdict(8, ok, f"identical D=0: {zero}; disjoint err {disjoint:.1e}; scipy oracle max err {worst:.1e}")


def test_09_pearson(toy_sc):
    self_r = tuning_correlation(toy_sc, toy_sc, n_configs=45).r
    r_ref, p_ref = pearson_oracle(FIXTURE_X, FIXTURE_Y)
    rep = pearson(FIXTURE_X, FIXTURE_Y)
    dr, dp = abs(rep.r - r_ref), abs(rep.p - p_ref)
    ok = self_r == 1.0 and dr <= 1e-10 and dp <= 1e-10
    verdict(9, ok, f"self r = {self_r!r}; fixture |Δr| {dr:.1e}, |Δp| {dp:.1e} (tol 1e-10)")


def test_10_s1_trend(trained, toy_sc):
    configs = solver_configs(45)
    base = effort_profile(toy_sc, configs)
    wins, rows = 0, []
    for seed in range(3):
        vae = trained.sample(20, gamma=0.1, seed=seed)
        rnd = RandomDecoderGenerator(seed=seed).fit(toy_sc).sample(20, gamma=0.1)
        r_v = _safe_r(base, effort_profile(vae, configs))
        r_r = _safe_r(base, effort_profile(rnd, configs))
        wins += bool(r_v > r_r)
        rows.append(f"{r_v:+.3f} vs {r_r:+.3f}")
    verdict(10, wins >= 2, f"r(orig,vae) vs r(orig,random) per seed: {rows}; wins {wins}/3 (need >= 2)")


def _s2_run(seed):
    dens = [0.15, 0.20, 0.25, 0.30, 0.35]
    originals = [gen_set_cover(ScConfig(n_cons=10, n_vars=20, density=dens[k % 5], seed=10_000 * seed + k))
                 for k in range(50)]
    ood = [gen_set_cover(ScConfig(n_cons=10, n_vars=20, density=0.10, seed=10_000 * seed + 500 + k))
           for k in range(20)]
    y_ood = optimal_values(ood)
    half = originals[:25]
    gen = DigMilpGenerator(alpha=5.0, epochs=50, seed=123).fit(half)
    augmented = half + gen.sample(25, gamma=0.1, seed=seed)
    errs = []
    for corpus in (originals, augmented):
        model = ObjectivePredictor(seed=seed).fit(corpus, optimal_values(corpus))
        errs.append(rel_mse(model.predict(ood), y_ood))
    return errs


def test_11_s2_trend():
    wins, rows = 0, []
    for seed in range(5):
        orig, aug = _s2_run(seed)
        wins += aug <= orig
        rows.append(f"{orig:.4f}/{aug:.4f}")
    verdict(11, wins >= 3, f"OOD rel_mse original/augmented per seed {rows}; augmented wins {wins}/5 (need >= 3)")


def test_12_sc_fidelity():
    corpus = [gen_set_cover(ScConfig(n_cons=200, n_vars=400, density=0.25, seed=s)) for s in range(5)]
    dens = float(corpus_stats(corpus)[:, 0].mean())
    signs = all(np.all(i.a.data == -1) and np.all(i.b == -1) and np.all(i.c <= -1) for i in corpus)
    # full scale: the LP relaxation optimum is a fractional cover with a positive cost
    lp = lp_relaxation(corpus[0])
    covers = bool(np.all(-corpus[0].dense() @ lp.solution >= 1 - 1e-9)) and lp.value < 0
    # toy scale, same generator: the exact optimum is a 0/1 cover whose cost is -value
    exact = True
    for inst in generate_family("sc", 10, seed=0, n_cons=10, n_vars=20):
        out = solve_milp(inst).outcome
        exact &= bool(np.all(-inst.dense() @ out.solution >= 1)) and -out.value == float(-inst.c @ out.solution) > 0
    ok = abs(dens - 0.251) <= 0.01 and signs and covers and exact
    verdict(12, ok, f"density_mean {dens:.4f} (0.251 ± 0.01); signs {signs}; LP cover {covers}; "
                    f"toy round-trip {exact}")


def test_13_pipeline_determinism(tmp_path):
    cfg = PipelineConfig.from_dict({
        "dataset": {"family": "sc", "count": 20, "seed": 0, "n_cons": 10, "n_vars": 20, "density": 0.25},
        "train": {"epochs": 30},
        "infer": {"gamma": 0.1, "count": 20, "seed": 0},
    })
    a = run_pipeline(cfg, tmp_path / "a")
    b = run_pipeline(cfg, tmp_path / "b")
    verify = (tmp_path / "a" / "verify.txt").read_text().strip()
    same = json.dumps(a["stages"], sort_keys=True) == json.dumps(b["stages"], sort_keys=True)
    verdict(13, same and a["complete"] and verify == "feasible-bounded: 20/20",
            f"stage hashes identical: {same}; {verify}")
