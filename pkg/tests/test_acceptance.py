"""Acceptance checks, one test per numbered criterion.

Each test prints a single PASS/FAIL line (visible with -s, or in the
captured output on failure) and asserts the same condition.  The slow
criteria (07-09) share one trained full model via a module fixture.
"""

import itertools
import time

import numpy as np
import pytest

from sthode.data import synth_generate
from sthode.hypergraph import (
    Hypergraph,
    build_geo_adjacency,
    build_spatial_hyperedges,
    build_temporal_hypergraph,
    dtw_distance,
    normalized_transform,
)
from sthode.metrics import mae
from sthode.model import (
    ModelConfig,
    SthodeNetwork,
    batch_loss,
    evaluate,
    load_checkpoint,
    naive_last_value,
    save_checkpoint,
    train_epoch,
)
from sthode.ode import SpatialOdeDynamics, analytic_oracle, integrate
from sthode.optim import Adam, grad_check, grad_check_params
from sthode.tensor import (
    Tensor,
    concat,
    dilated_causal_conv,
    huber_loss,
    matmul,
    maximum,
    mode_product,
    outer,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax_rows,
    squash01,
    tmean,
    tsum,
)


def verdict(num: str, desc: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {num} {desc}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def sym_pd(rng, n, lo=0.25, hi=0.9):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q @ np.diag(rng.uniform(lo, hi, n)) @ q.T


# ---------------------------------------------------------------------------
# 01: gradients


class TestGradientCorrectness:
    def test_c01_gradients(self):
        t0 = time.time()
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(3, 4))
        m = rng.normal(size=(4, 3))
        ops = [
            ("add", lambda x, y: tsum(x + y), [a, b]),
            ("hadamard", lambda x, y: tsum(x * y), [a, b]),
            ("matmul", lambda x, y: tsum(matmul(x, y)), [a, m]),
            ("mode_product", lambda x, y: tsum(mode_product(x, y, 2)),
             [rng.normal(size=(2, 3, 4)), rng.normal(size=(3, 3))]),
            ("relu", lambda x: tsum(relu(x)), [a + 0.3]),
            ("sigmoid", lambda x: tsum(sigmoid(x)), [a]),
            ("softmax_rows", lambda x: tsum(softmax_rows(x) * Tensor(b)), [a]),
            ("squash01", lambda x: tsum(squash01(x)), [a]),
            ("outer", lambda x, y: tsum(outer(x, y)), [a[0], b[1]]),
            ("maximum", lambda x, y: tsum(maximum([x, y])), [a, b + 0.1]),
            ("concat", lambda x, y: tsum(concat([x, y], axis=1) * Tensor(np.ones((3, 8)))), [a, b]),
            ("reshape", lambda x: tsum(reshape(x, (4, 3)) * Tensor(m)), [a]),
            ("tmean", tmean, [a]),
            ("scale", lambda x: tsum(scale(x, 1.7)), [a]),
            ("conv", lambda x, f: tsum(dilated_causal_conv(x, f, dilation=2)),
             [rng.normal(size=(2, 6, 3)), rng.normal(size=(2, 3, 2))]),
            ("huber", lambda p: huber_loss(Tensor(b * 3), p, delta=1.0), [a * 3]),
        ]
        worst_op, worst = "", 0.0
        for name, f, points in ops:
            rep = grad_check(f, points, tol=1e-4)
            if rep.max_rel_error > worst:
                worst_op, worst = name, rep.max_rel_error
        per_op_ok = worst < 1e-4

        # end-to-end: 4-node toy, T=S=4, F=1, one window, K=2, r=2
        geo = build_geo_adjacency([(i, i + 1, 1.0) for i in range(3)], 4, sigma=2.0)
        spatial = build_spatial_hyperedges(geo, radius=2)
        temporal = build_temporal_hypergraph(
            np.random.default_rng(1).normal(size=(4, 20)), r=2)
        cfg = ModelConfig(n_nodes=4, t_in=4, horizon=4, k_depth=2, blocks=1,
                          tcn_channels=(3, 3), mlp_hidden=8, ode_steps=3)
        net = SthodeNetwork(cfg, spatial, temporal, seed=0)
        # keep every ReLU preactivation away from its kink, which central
        # differences cannot straddle
        for p in net.parameters():
            if p.name.endswith((".bias", "head.b1")):
                p.tensor.data[:] += 0.05
        x = np.random.default_rng(2).normal(size=(1, 4, 4, 1))
        y = np.random.default_rng(3).normal(size=(1, 4, 4, 1))
        rep = grad_check_params(lambda: batch_loss(net, x, y), net.parameters(),
                                tol=1e-3)
        elapsed = time.time() - t0
        verdict("01", "gradient checks (per-op < 1e-4, end-to-end < 1e-3, < 60 s)",
                per_op_ok and rep.passed and elapsed < 60,
                f"worst op {worst_op} {worst:.2e}, end-to-end {rep.max_rel_error:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 02-03: ODE propagation


class TestOdeAgainstOracle:
    def test_c02_rk4_matches_analytic_oracle(self):
        t0 = time.time()
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(20):
            n, t, f = rng.integers(2, 4, size=3)
            a, u, q = sym_pd(rng, n), sym_pd(rng, t), sym_pd(rng, f)
            x0 = rng.normal(size=(n, t, f))
            dyn = SpatialOdeDynamics(a, [u], [q], x0, ln_mode="exact")
            x_init = analytic_oracle(a, u, q, x0, 0.0)
            got = integrate(dyn, Tensor(x_init), t_end=1.0, steps=200, method="rk4").data
            want = analytic_oracle(a, u, q, x0, 1.0)
            worst = max(worst, float(np.max(np.abs(got - want))))
        elapsed = time.time() - t0
        verdict("02", "rk4(200 steps) vs closed-form propagation <= 1e-5 on 20 instances",
                worst <= 1e-5 and elapsed < 30, f"worst {worst:.2e}, {elapsed:.1f}s")

    def test_c03_solver_orders(self):
        decay = lambda x, t: scale(x, -1.0)
        x0 = Tensor(np.array([1.0]))
        exact = np.exp(-1.0)

        def err(method, steps):
            out = integrate(decay, x0, t_end=1.0, steps=steps, method=method)
            return abs(out.data[0] - exact)

        orders = {}
        for method in ("euler", "rk4"):
            e1, e2 = err(method, 40), err(method, 80)
            orders[method] = np.log2(e1 / e2)
        ok = abs(orders["euler"] - 1.0) < 0.1 and abs(orders["rk4"] - 4.0) < 0.3
        verdict("03", "convergence orders: euler 1.0 +/- 0.1, rk4 4.0 +/- 0.3", ok,
                f"euler {orders['euler']:.3f}, rk4 {orders['rk4']:.3f}")


# ---------------------------------------------------------------------------
# 04-05: hypergraph machinery


def dtw_bruteforce(x, y):
    n, m = len(x), len(y)
    best = [np.inf]

    def walk(i, j, acc):
        acc += abs(x[i] - y[j])
        if i == n - 1 and j == m - 1:
            best[0] = min(best[0], acc)
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


class TestDtwOracle:
    def test_c04_dp_equals_enumeration(self):
        t0 = time.time()
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100):
            x = rng.normal(size=rng.integers(1, 7))
            y = rng.normal(size=rng.integers(1, 7))
            worst = max(worst, abs(dtw_distance(x, y) - dtw_bruteforce(x, y)))
        elapsed = time.time() - t0
        verdict("04", "DTW dynamic program equals path enumeration (100 trials)",
                worst < 1e-12 and elapsed < 10, f"worst {worst:.2e}, {elapsed:.1f}s")


def random_hypergraph(rng):
    n, m = rng.integers(2, 7), rng.integers(1, 6)
    while True:
        h = (rng.random((n, m)) < 0.5).astype(float)
        for j in range(m):
            if h[:, j].sum() == 0:
                h[rng.integers(0, n), j] = 1.0
        if np.all(h.sum(axis=1) > 0):
            break
    return Hypergraph(h, rng.uniform(0.5, 3.0, m))


class TestHypergraphAlgebra:
    def test_c05_transform_properties(self):
        rng = np.random.default_rng(9)
        sym_ok = spec_ok = deg_ok = True
        for _ in range(50):
            hg = random_hypergraph(rng)
            a = normalized_transform(hg)
            sym_ok &= bool(np.allclose(a, a.T))
            lam = np.linalg.eigvalsh((a + a.T) / 2)
            spec_ok &= bool(np.all(lam >= -1 - 1e-9) and np.all(lam <= 1 + 1e-9))
            deg_ok &= bool(np.array_equal(hg.node_degrees(), hg.incidence @ hg.weights))
            deg_ok &= bool(np.array_equal(hg.edge_degrees(), hg.incidence.sum(axis=0)))
        two = normalized_transform(Hypergraph(np.ones((2, 1)), np.ones(1)))
        pair_ok = np.array_equal(two, np.full((2, 2), 0.5))
        verdict("05", "normalized transform symmetric, spectrum in [-1,1], degrees exact, "
                "two-node case = [[1/2,1/2],[1/2,1/2]]",
                sym_ok and spec_ok and deg_ok and pair_ok)


# ---------------------------------------------------------------------------
# 06: discrete vs continuous propagation


class TestDiscreteContinuousConsistency:
    def test_c06_single_step_consistency(self):
        rng = np.random.default_rng(13)
        x0 = rng.normal(size=(3, 3, 2))
        eye = [np.eye(3), np.eye(3), np.eye(2)]
        dyn = SpatialOdeDynamics(eye[0], [eye[1]], [eye[2]], x0, ln_mode="taylor")
        x = Tensor(rng.normal(size=(3, 3, 2)))
        euler = integrate(dyn, x, t_end=1.0, steps=1, method="euler").data
        exact_ok = np.array_equal(euler, dyn.discrete_propagation(x).data)

        def deviation(eps):
            mats = [np.eye(d) + eps * sym_pd(rng2, d, 0.1, 0.3)
                    for d, rng2 in zip((3, 3, 2), itertools.repeat(np.random.default_rng(17)))]
            d2 = SpatialOdeDynamics(mats[0], [mats[1]], [mats[2]], x0, ln_mode="taylor")
            e = integrate(d2, x, t_end=1.0, steps=1, method="euler").data
            return float(np.max(np.abs(e - d2.discrete_propagation(x).data)))

        rates = [np.log2(deviation(e) / deviation(e / 2))
                 for e in (0.2, 0.1, 0.05)]
        rate_ok = all(abs(r - 2.0) < 0.25 for r in rates)
        verdict("06", "one Euler step = discrete propagation at identity; "
                "deviation is second order near identity",
                exact_ok and rate_ok, f"rates {['%.2f' % r for r in rates]}")


# ---------------------------------------------------------------------------
# 07-09: learning on synthetic data (shared trained model)


N_NODES, T_TOTAL, EPOCHS, BATCH, LR = 16, 2000, 50, 32, 3e-3


@pytest.fixture(scope="module")
def synth():
    # interleaved phase groups + lagged incident pulses: the DTW hyperedges
    # and the road neighborhoods then carry genuinely different information
    s = synth_generate(N_NODES, T_TOTAL, seed=7, interleave_groups=True,
                       event_scale=1.0, noise=0.05)
    series = s.dataset.training_series()
    return {
        "data": s,
        "spatial": s.truth_hypergraph,
        "temporal_r4": build_temporal_hypergraph(series, r=4),
        "temporal_r2": build_temporal_hypergraph(series, r=2),
    }


def train_variant(synth, temporal_key="temporal_r4", epochs=EPOCHS, **cfg_kw):
    ds = synth["data"].dataset
    kw = dict(k_depth=2, blocks=1, tcn_channels=(16, 16),
              mlp_hidden=64, ode_steps=4)
    kw.update(cfg_kw)
    cfg = ModelConfig(n_nodes=N_NODES, **kw)
    net = SthodeNetwork(cfg, synth["spatial"], synth[temporal_key], seed=1)
    opt = Adam(net.parameters(), lr=LR)
    x, y, miss = ds.windows("train")
    rng = np.random.default_rng(0)
    for _ in range(epochs):
        train_epoch(net, opt, x, y, miss, BATCH, rng)
    return net, evaluate(net, ds, "test").mae


@pytest.fixture(scope="module")
def full_model(synth):
    t0 = time.time()
    net, test_mae = train_variant(synth)
    return {"net": net, "mae": test_mae, "seconds": time.time() - t0}


class TestLearningSignal:
    def test_c07_beats_naive_baseline(self, synth, full_model):
        ds = synth["data"].dataset
        x, y, _ = ds.windows("test")
        naive = mae(ds.inverse_zscore(y),
                    ds.inverse_zscore(naive_last_value(x, ds.horizon)))
        gain = 1.0 - full_model["mae"] / naive
        verdict("07", "50-epoch training beats last-value baseline by >= 20% test MAE",
                gain >= 0.20 and full_model["seconds"] < 600,
                f"model {full_model['mae']:.3f} vs naive {naive:.3f}, "
                f"gain {100 * gain:.1f}%, {full_model['seconds']:.0f}s")

    def test_c08_ablations_do_not_beat_full_model(self, synth, full_model):
        t0 = time.time()
        results = {}
        for ab in ("spatial", "temporal", "ode", "adaptive"):
            _, results[ab] = train_variant(synth, ablations=(ab,))
        full = full_model["mae"]
        tol = {"adaptive": 0.98}
        ok = all(m >= full * tol.get(ab, 1.0) for ab, m in results.items())
        elapsed = full_model["seconds"] + (time.time() - t0)
        detail = ", ".join(f"w/o {ab} {m:.3f}" for ab, m in results.items())
        verdict("08", "each ablation's test MAE >= full model's (2% slack for w/o adaptive)",
                ok and elapsed < 2400, f"full {full:.3f}; {detail}; {elapsed:.0f}s total")

    def test_c09_depth_and_uniformity_help(self, synth, full_model):
        _, mae_k1 = train_variant(synth, k_depth=1)
        _, mae_r2 = train_variant(synth, temporal_key="temporal_r2")
        full = full_model["mae"]
        verdict("09", "K=2 beats K=1 and r=4 beats r=2 in test MAE",
                full < mae_k1 and full < mae_r2,
                f"K=2 {full:.3f} < K=1 {mae_k1:.3f}; r=4 {full:.3f} < r=2 {mae_r2:.3f}")


# ---------------------------------------------------------------------------
# 10: determinism and round-trips


class TestDeterminismAndRoundTrips:
    def test_c10_round_trips(self, tmp_path, synth):
        ds = synth["data"].dataset

        def short_run():
            return train_variant(synth, epochs=2)[0]

        a, b = short_run(), short_run()
        bitwise = all(np.array_equal(pa.tensor.data, pb.tensor.data)
                      for pa, pb in zip(a.parameters(), b.parameters()))

        save_checkpoint(a, tmp_path / "ck.npz", extra={"note": "acceptance"})
        loaded, meta = load_checkpoint(tmp_path / "ck.npz")
        ck_ok = all(np.array_equal(pa.tensor.data, pl.tensor.data)
                    for pa, pl in zip(a.parameters(), loaded.parameters()))
        ck_ok &= meta["extra"] == {"note": "acceptance"}

        hg = synth["temporal_r4"]
        hg2 = Hypergraph.from_text(hg.to_text())
        hg_ok = (np.array_equal(hg.incidence, hg2.incidence)
                 and np.array_equal(hg.weights, hg2.weights))

        raw = synth["data"].dataset.signals
        z_err = float(np.max(np.abs(ds.inverse_zscore(ds.zscore(raw)) - raw)))

        verdict("10", "seeded training bitwise reproducible; checkpoint and hypergraph "
                "round-trips exact; zscore round-trip < 1e-10",
                bitwise and ck_ok and hg_ok and z_err < 1e-10,
                f"zscore err {z_err:.1e}")
