"""End-to-end acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The training-based criteria share a few cached runs (module fixtures) so the
whole file finishes in roughly ten minutes on one core.
"""

import itertools
import math
import time

import numpy as np
import pytest

from swarmdist.baselines import (
    alternating_suboptimal,
    exhaustive_oracle,
    greedy_heuristic,
    random_instance,
    random_policy,
)
from swarmdist.cnn_catalog import build_network
from swarmdist.harness import ExperimentConfig, device_sweep, dynamic_swarm_event, memory_sweep, run_experiment, train_policy
from swarmdist.latency_model import validate_plan
from swarmdist.ppo import PolicyNet
from swarmdist.radio_grid import GridConfig, RadioParams, channel_gain, data_rate

from conftest import ACCEPTANCE

TAIL = 1000  # episodes treated as post-convergence at the end of a run
STEPS = 500_000


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


# -- 1: layer formulas ---------------------------------------------------------

# (kind, n_in, n_out, filter, output side) typed out independently of the catalog
GEOMETRY = {
    "LeNet": [("c", 3, 6, 5, 28), ("c", 6, 16, 5, 10), ("f", 400, 120), ("f", 120, 84), ("f", 84, 10)],
    "AlexNet": [
        ("c", 3, 96, 11, 55), ("c", 96, 256, 5, 27), ("c", 256, 384, 3, 13), ("c", 384, 384, 3, 13),
        ("c", 384, 256, 3, 13), ("f", 9216, 4096), ("f", 4096, 4096), ("f", 4096, 1000),
    ],
    "VGG16": [
        ("c", 3, 64, 3, 224), ("c", 64, 64, 3, 224), ("c", 64, 128, 3, 112), ("c", 128, 128, 3, 112),
        ("c", 128, 256, 3, 56), ("c", 256, 256, 3, 56), ("c", 256, 256, 3, 56),
        ("c", 256, 512, 3, 28), ("c", 512, 512, 3, 28), ("c", 512, 512, 3, 28),
        ("c", 512, 512, 3, 14), ("c", 512, 512, 3, 14), ("c", 512, 512, 3, 14),
        ("f", 25088, 4096), ("f", 4096, 4096), ("f", 4096, 1000),
    ],
}


def counted_mults(g):
    """Multiplications counted by walking the loop nest (small layers only)."""
    if g[0] == "f":
        return sum(1 for _ in itertools.product(range(g[1]), range(g[2])))
    _, n_in, n_out, s, z = g
    return sum(1 for _ in itertools.product(range(z * z), range(n_out), range(n_in), range(s * s)))


def product_mults(g):
    return g[1] * g[2] if g[0] == "f" else g[1] * g[3] ** 2 * g[2] * g[4] ** 2


def weights(g):
    return g[1] * g[2] if g[0] == "f" else g[1] * g[3] ** 2 * g[2]


def test_criterion_1_layer_formulas():
    start = time.perf_counter()
    bad = []
    for name, geo in GEOMETRY.items():
        net = build_network(name)
        if len(net) != len(geo):
            bad.append(f"{name} has {len(net)} layers")
            continue
        for j, g in enumerate(geo):
            if net.compute[j] != product_mults(g):
                bad.append(f"{name}[{j}] compute")
            if net.memory[j] != 4 * weights(g):
                bad.append(f"{name}[{j}] memory")
    lenet = build_network("LeNet")
    bad += [f"LeNet[{j}] loop count" for j, g in enumerate(GEOMETRY["LeNet"]) if counted_mults(g) != lenet.compute[j]]
    if build_network("AlexNet").compute[0] != 105_415_200:
        bad.append("AlexNet conv1 != 105,415,200")
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 1.0
    record(1, ok, f"{sum(map(len, GEOMETRY.values()))} layers checked in {elapsed:.2f}s; mismatches: {bad or 'none'}")
    assert ok


# -- 2: radio model ----------------------------------------------------------


def test_criterion_2_radio():
    start = time.perf_counter()
    p, grid = RadioParams(), GridConfig()
    # cells 0, 1, 2 of the top row: 20 m and 40 m from cell 0
    ratio = channel_gain((0, 1, 2), 0, 1, p, grid) / channel_gain((0, 1, 2), 0, 2, p, grid)
    rate = data_rate((0, 1), 0, 1, p, grid)
    oracle = 1e3 * math.log2(1 + (1e-3 / 400) * 0.1 / 7.9e-9)
    elapsed = time.perf_counter() - start
    ok = abs(ratio - 4.0) <= 1e-12 and abs(rate - 5029) <= 1 and abs(rate - oracle) < 1e-9 and elapsed < 1.0
    record(2, ok, f"gain ratio {ratio!r}, rate at 20 m {rate:.3f} bit/s, {elapsed:.3f}s")
    assert ok


# -- 3: solver ordering on small instances -----------------------------------


def test_criterion_3_solver_ordering():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    n_instances = 50
    invalid, order_breaks, close = [], [], 0
    for k in range(n_instances):
        inst = random_instance(rng, max_uavs=3, max_layers=4, sides=(2, 3))
        oracle = exhaustive_oracle(inst)
        alt = alternating_suboptimal(inst, seed=k)
        greedy = greedy_heuristic(inst)
        rand = random_policy(inst, trials=100, seed=k)
        for res in (oracle, alt, greedy, rand):
            if validate_plan(res.plan, inst.setup):
                invalid.append((k, res.name))
        chain = [oracle.total, alt.total, greedy.total, rand.extras["mean"]]
        eps = 1e-9 * max(chain)
        for name, a, b in zip(("oracle<=alternating", "alternating<=greedy", "greedy<=random-mean"), chain, chain[1:]):
            if a > b + eps:
                order_breaks.append(f"#{k} {name} ({a:.4g} > {b:.4g})")
        close += alt.total <= 1.4 * oracle.total
    elapsed = time.perf_counter() - start
    ok = not invalid and not order_breaks and close >= 0.9 * n_instances and elapsed < 120
    record(
        3,
        ok,
        f"{n_instances} instances, invalid plans {len(invalid)}, ordering breaks {order_breaks or 'none'}, "
        f"alternating within 40% on {close}/{n_instances}, {elapsed:.1f}s",
    )
    assert ok


# -- 4: gradient check -------------------------------------------------------


def test_criterion_4_gradient_check():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    net = PolicyNet(6, 4, (8, 8), seed=0)
    for k in net.params:
        net.params[k] = rng.normal(scale=0.5, size=net.params[k].shape)
    b = 5
    x = rng.normal(size=(b, 6))
    a1, a2 = rng.integers(2, size=b), rng.integers(4, size=b)
    fw = net.forward(x)
    rows = np.arange(b)
    old = fw.logp_alloc[rows, a1] + fw.logp_cell[rows, a2] + rng.uniform(-0.05, 0.05, size=b)
    args = (x, a1, a2, old, rng.normal(size=b), rng.normal(size=b), 0.2)
    _, _, grads = net.ppo_loss(*args)
    worst = 0.0
    h = 1e-5
    for k, p in net.params.items():
        for i in np.ndindex(p.shape):
            orig = p[i]
            p[i] = orig + h
            up = net.ppo_loss(*args, want_grads=False)[0]
            p[i] = orig - h
            down = net.ppo_loss(*args, want_grads=False)[0]
            p[i] = orig
            num = (up - down) / (2 * h)
            rel = abs(num - grads[k][i]) / max(abs(num), abs(grads[k][i]), 1e-7)
            worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 10
    record(4, ok, f"worst relative error {worst:.2e} over {sum(p.size for p in net.params.values())} parameters, {elapsed:.2f}s")
    assert ok


# -- 5, 6: PPO training on LeNet ---------------------------------------------


def lenet_config(**kw):
    return ExperimentConfig(network="LeNet", n_uavs=5, total_steps=STEPS, **kw)


@pytest.fixture(scope="module")
def seed_runs():
    out = {}
    for seed in (0, 1, 2):
        start = time.perf_counter()
        res = train_policy(lenet_config(seed=seed))
        out[seed] = (res, time.perf_counter() - start)
    return out


def test_criterion_5_ppo_accuracy(seed_runs):
    accs = {s: float(r.series("accuracy")[-TAIL:].mean()) for s, (r, _) in seed_runs.items()}
    worst_time = max(t for _, t in seed_runs.values())
    steps = {r.steps for r, _ in seed_runs.values()}
    passing = sum(a >= 0.90 for a in accs.values())
    ok = passing >= 2 and max(steps) <= STEPS and worst_time <= 1800
    detail = ", ".join(f"seed {s}: {a:.3f}" for s, a in accs.items())
    record(5, ok, f"final-{TAIL}-episode step accuracy {detail}; {passing}/3 seeds >= 0.90")
    assert ok


def test_criterion_6_qos_ordering(seed_runs):
    start = time.perf_counter()
    with_qos = train_policy(lenet_config(seed=0, qos_factor=1.0))
    elapsed = time.perf_counter() - start
    cov0 = float(seed_runs[0][0].series("coverage")[-TAIL:].mean())
    cov1 = float(with_qos.series("coverage")[-TAIL:].mean())
    ok = cov1 - cov0 >= 0.2 and elapsed <= 1800
    record(6, ok, f"hot-cell coverage S_f=1: {cov1:.3f}, S_f=0: {cov0:.3f}, gap {cov1 - cov0:.3f}")
    assert ok


# -- 7: latency and shared-data trends ---------------------------------------


def test_criterion_7_trends(seed_runs):
    start = time.perf_counter()
    config = lenet_config(seed=0)
    dev = device_sweep(config, (256e6, 512e6, 560e6), net=seed_runs[0][0].net)
    lat = [r["mean_latency"] for r in dev]
    mem = memory_sweep(config, (0.8, 0.9, 1.0), solver="alternating")
    shared = [r["shared_bytes"] for r in mem]
    elapsed = time.perf_counter() - start
    lat_ok = all(math.isfinite(v) for v in lat) and all(a > b for a, b in zip(lat, lat[1:]))
    shared_ok = all(a > b for a, b in zip(shared, shared[1:]))
    ok = lat_ok and shared_ok and elapsed <= 1200
    record(
        7,
        ok,
        f"mean latency at 256/512/560 M mult/s: {', '.join(f'{v:.4f}' for v in lat)} s "
        f"({dev[0]['complete_requests']}/{dev[0]['requests']} requests complete); "
        f"shared bytes at memory share 0.8/0.9/1.0: {shared}",
    )
    assert ok


# -- 8: dynamic swarm --------------------------------------------------------


def test_criterion_8_dynamic_swarm():
    start = time.perf_counter()
    budget = 3000
    out = dynamic_swarm_event(lenet_config(seed=0), kind="add", at_episode=10_000, window=100, fraction=0.95, budget=budget)
    elapsed = time.perf_counter() - start
    ok = out["recovered"] and elapsed <= 1800
    record(
        8,
        ok,
        f"UAV joins at episode {out['event_episode']}: pre-event average {out['pre_event_average']:.3f}, "
        f"first post-event window {out['first_window_average']:.3f}, recovered at {out['recovered_at']} "
        f"(budget {budget} episodes)",
    )
    assert ok


# -- 9: determinism ----------------------------------------------------------


def test_criterion_9_determinism(tmp_path):
    config = ExperimentConfig(network="LeNet", n_uavs=5, total_steps=20_000, frames=5, seed=7)
    run_experiment(config, tmp_path / "a")
    run_experiment(config, tmp_path / "b")
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    b = (tmp_path / "b" / "trace.csv").read_bytes()
    ok = a == b and len(a) > 0
    record(9, ok, f"trace.csv {len(a)} vs {len(b)} bytes, identical: {a == b}")
    assert ok
