"""End-to-end acceptance checks for the whole package.

Run with `pytest -v tests/test_acceptance.py` to get one pass/fail line per
criterion. The shared pipeline fixture runs calibration and evaluation once
on the pinned noise-free blob dataset; the numbered tests then assert the
headline guarantees: exactness where the math promises it, first-order error
decay, optimizer quality against a grid oracle, and bitwise reproducibility.
"""

import time
from types import SimpleNamespace

import numpy as np
import pytest

from pathattr.fileio import read_schedule
from pathattr.harness import (
    build_model,
    build_path,
    load_dataset,
    parse_experiment_config,
    run_all,
    run_calibration,
    run_evaluation,
    schedule_half_deviation,
)
from pathattr.metrics import insertion_score
from pathattr.models import (
    GaussianBumpModel,
    InputVector,
    LinearModel,
    QuadraticModel,
    gradient_check,
    tiny_mlp,
)
from pathattr.paths import linear_path
from pathattr.riemann import AlphaSchedule, AttributionMap, attribute
from pathattr.schedule_opt import (
    DerivativeProfile,
    error_bound,
    estimate_profile,
    grid_search_schedule,
    optimize_schedule,
)

PINNED = {"dataset.noise": "0.0"}


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_run")
    cfg = parse_experiment_config(dict(PINNED))
    run_calibration(cfg, out)
    rows = run_evaluation(cfg, out)
    mean_ce = {(r[0], r[1], r[2]): r[5] for r in rows}
    return SimpleNamespace(cfg=cfg, out=out, mean_ce=mean_ce)


def test_c01_linear_models_recovered_exactly():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 41))
        model = LinearModel(rng.standard_normal(dim), bias=float(rng.standard_normal()))
        base = InputVector(rng.standard_normal(dim))
        inp = InputVector(rng.standard_normal(dim))
        k = int(rng.integers(1, 65))
        attr = attribute(model, linear_path(base, inp), AlphaSchedule.uniform(k))
        gap = abs(attr.sum - attr.model_delta) / max(1.0, abs(attr.model_delta))
        worst = max(worst, gap)
        assert gap <= 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    print(f"C01 linear exactness: PASS (worst gap {worst:.2e}, {elapsed:.2f}s)")


def test_c02_quadratic_error_matches_closed_form():
    model = QuadraticModel(1)
    path = linear_path(InputVector([0.0]), InputVector([1.0]))
    profile = estimate_profile(model, [path], probes=16)
    for k in (4, 16, 64):
        attr = attribute(model, path, AlphaSchedule.uniform(k))
        assert abs(attr.sum - attr.model_delta) == pytest.approx(1.0 / k, abs=1e-9)
        bound = error_bound(profile, AlphaSchedule.uniform(k))
        assert bound == pytest.approx(1.0 / k, abs=1e-6)
    print("C02 quadratic left-rule error and bound equal 1/k: PASS")


def test_c03_error_halves_when_samples_double():
    cfg = parse_experiment_config(dict(PINNED))
    dataset = load_dataset(cfg)[:16]
    model = build_model(cfg, dataset[0].dim)
    errs = {k: [] for k in (16, 32, 64)}
    for img in dataset:
        path = build_path("ig", model, img, cfg, steps=16)
        ref = attribute(model, path, AlphaSchedule.uniform(8192)).sum
        for k in errs:
            errs[k].append(abs(attribute(model, path, AlphaSchedule.uniform(k)).sum - ref))
    means = {k: float(np.mean(v)) for k, v in errs.items()}
    r1 = means[16] / means[32]
    r2 = means[32] / means[64]
    assert 1.8 <= r1 <= 2.2
    assert 1.8 <= r2 <= 2.2
    print(f"C03 first-order decay: PASS (ratios {r1:.3f}, {r2:.3f})")


def test_c04_optimizer_close_to_grid_oracle():
    rng = np.random.default_rng(104)
    t0 = time.perf_counter()
    worst_rel = 0.0
    for _ in range(20):
        n = int(rng.integers(4, 17))
        knots = np.sort(rng.uniform(0.0, 1.0, n))
        while np.any(np.diff(knots) <= 1e-6):
            knots = np.sort(rng.uniform(0.0, 1.0, n))
        profile = DerivativeProfile(knots, rng.lognormal(0.0, 1.0, n))
        slack = 10.0 * float(profile.magnitudes.max()) / 256
        for k in (2, 4, 8):
            opt = optimize_schedule(profile, k)
            oracle = error_bound(profile, grid_search_schedule(profile, k, 256))
            assert opt.bound <= oracle + slack
            worst_rel = max(worst_rel, (opt.bound - oracle) / slack)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    print(f"C04 oracle agreement: PASS (worst gap {worst_rel:.2f} of slack, {elapsed:.1f}s)")


# magnitudes from the first verified pipeline run, frozen as regression constants
PINNED_MEAN_CE = {
    ("ig", "uniform", 16): 0.5193053779282331,
    ("ig", "riemannopt", 16): 0.3631598226225735,
    ("blurig", "uniform", 16): 0.9562323097335479,
    ("blurig", "riemannopt", 16): 0.5008481717092929,
    ("blurig", "uniform", 32): 0.623717329392513,
}

PINNED_BLURIG_K16 = [
    0.0, 0.16060501584272388, 0.29487891884527606, 0.40863431589430393,
    0.5070608984899887, 0.5891006293647535, 0.6587551347215279,
    0.7171171563900091, 0.7673728766204692, 0.8103561592669078,
    0.8489200863383886, 0.8820646278673707, 0.9110394198228319,
    0.9358839703319219, 0.9578103131862158, 0.9761904761904557,
]


def test_c05_optimized_schedules_dominate_uniform(pipeline):
    ce = pipeline.mean_ce
    for method in ("ig", "blurig", "gig"):
        for k in (16, 32, 64):
            uni = ce[(method, "uniform", k)]
            opt = ce[(method, "riemannopt", k)]
            assert opt <= uni + 1e-12, f"{method} k={k}: {opt} > {uni}"
    assert ce[("ig", "riemannopt", 16)] < ce[("ig", "uniform", 16)]
    assert ce[("blurig", "riemannopt", 16)] < ce[("blurig", "uniform", 16)]
    for key, expected in PINNED_MEAN_CE.items():
        assert ce[key] == pytest.approx(expected, rel=1e-6), key
    sched = read_schedule(pipeline.out / "schedule_blurig_k16.txt")
    assert float(np.mean(sched.points >= 0.6)) >= 0.5
    assert np.allclose(sched.points, PINNED_BLURIG_K16, atol=1e-6)
    print("C05 dominance over uniform at every (method, k): PASS")


def test_c06_optimized_16_beats_uniform_32(pipeline):
    ce = pipeline.mean_ce
    opt16 = ce[("blurig", "riemannopt", 16)]
    uni32 = ce[("blurig", "uniform", 32)]
    assert opt16 <= uni32
    print(f"C06 half-budget parity: PASS (opt-16 {opt16:.4f} <= uniform-32 {uni32:.4f})")


def test_c07_schedules_stable_across_calibration_halves(pipeline):
    cfg = pipeline.cfg
    dataset = load_dataset(cfg)[:32]
    model = build_model(cfg, dataset[0].dim)
    worst = 0.0
    for method in ("ig", "blurig"):
        paths = [build_path(method, model, img, cfg, steps=cfg.probes) for img in dataset]
        for k in (16, 32, 64):
            dev = schedule_half_deviation(model, paths, cfg.probes, k)
            worst = max(worst, dev)
            assert dev <= 0.05, f"{method} k={k}: half deviation {dev}"
    print(f"C07 calibration stability: PASS (worst deviation {worst:.4f})")


def test_c08_insertion_metric_sanity():
    rng = np.random.default_rng(108)
    model = LinearModel([1.0] + [0.0] * 15)
    img = InputVector(rng.uniform(0.5, 1.0, 16), (4, 4, 1))
    base = InputVector(np.zeros(16), (4, 4, 1))

    def as_map(values):
        values = np.asarray(values, dtype=np.float64)
        return AttributionMap(values, float(values.sum()), 1.0, AlphaSchedule.uniform(4))

    good = insertion_score(model, img, base, as_map([1.0] + [0.0] * 15), steps=16)
    bad = insertion_score(model, img, base, as_map([-1.0] + [0.25] * 15), steps=16)
    assert good.scores[0] == model.evaluate(base)
    assert good.scores[-1] == model.evaluate(img)
    assert good.auc > bad.auc
    for curve in (good, bad):
        assert curve.scores.min() - 1e-12 <= curve.auc <= curve.scores.max() + 1e-12
    print(f"C08 insertion sanity: PASS (good auc {good.auc:.3f} > bad auc {bad.auc:.3f})")


def test_c09_analytic_gradients_match_finite_differences():
    rng = np.random.default_rng(109)
    dim = 12
    models = [
        LinearModel(rng.standard_normal(dim)),
        QuadraticModel(coeffs=rng.uniform(0.5, 2.0, dim)),
        GaussianBumpModel(rng.uniform(0, 1, dim), 1.5),
        tiny_mlp(dim, hidden=(10, 6), seed=3),
    ]
    worst = 0.0
    for model in models:
        for _ in range(100):
            x = InputVector(rng.uniform(-1.0, 1.0, dim))
            # step 1e-5 keeps truncation error below the per-coordinate
            # relative tolerance even where a gradient component crosses zero
            worst = max(worst, gradient_check(model, x, step=1e-5))
    assert worst <= 1e-5
    print(f"C09 gradient fidelity: PASS (worst deviation {worst:.2e})")


def test_c10_reruns_are_bitwise_identical(tmp_path):
    cfg = parse_experiment_config(dict(PINNED) | {
        "dataset.count": "16", "calibration.m": "8", "calibration.probes": "16",
        "samples": "8,16", "dataset.height": "8", "dataset.width": "8",
    })
    dirs = (tmp_path / "a", tmp_path / "b")
    for d in dirs:
        run_all(cfg, d)
    compared = 0
    for rel in sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*") if p.is_file()):
        if rel.suffix == ".svg" or rel.name == "timing.txt":
            continue
        a, b = dirs[0] / rel, dirs[1] / rel
        assert b.exists(), f"second run missing {rel}"
        assert a.read_bytes() == b.read_bytes(), f"{rel} differs between runs"
        compared += 1
    assert compared >= 10
    print(f"C10 bitwise reproducibility: PASS ({compared} files identical)")
