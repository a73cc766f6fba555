import numpy as np
import pytest

from pathattr.cli import main as cli_main
from pathattr.errors import ConfigError, DomainError
from pathattr.fileio import parse_config_text, read_csv, read_pgm, write_pgm, write_weights
from pathattr.harness import (
    METHODS,
    RESULTS_HEADER,
    ExperimentConfig,
    SyntheticDatasetSpec,
    _blob_image,
    _blob_params,
    build_model,
    build_path,
    generate_dataset,
    load_dataset,
    parse_experiment_config,
    read_profile_matrix,
    run_calibration,
    run_evaluation,
    run_generate,
    schedule_half_deviation,
)
from pathattr.models import (
    GaussianBumpModel,
    LinearModel,
    QuadraticModel,
    TanhMLP,
    tiny_mlp,
)
from pathattr.riemann import AlphaSchedule
from pathattr.schedule_opt import estimate_profile

MINI_CONFIG = """
dataset.count = 8
dataset.height = 8
dataset.width = 8
dataset.noise = 0.0
calibration.m = 4
calibration.probes = 8
samples = 4,8
insertion.steps = 4
"""


def mini_config(extra: str = "") -> ExperimentConfig:
    return parse_experiment_config(parse_config_text(MINI_CONFIG + extra))


def test_dataset_spec_validation():
    with pytest.raises(DomainError):
        SyntheticDatasetSpec(4, 0, 8)
    with pytest.raises(DomainError):
        SyntheticDatasetSpec(-1, 8, 8)
    with pytest.raises(DomainError):
        SyntheticDatasetSpec(4, 8, 8, generator="perlin")
    with pytest.raises(DomainError):
        SyntheticDatasetSpec(4, 8, 8, noise=-0.1)


def test_generate_dataset_empty_and_range():
    assert generate_dataset(SyntheticDatasetSpec(0, 8, 8)) == []
    for gen in ("gaussian-blob", "bars", "checker"):
        for img in generate_dataset(SyntheticDatasetSpec(3, 5, 7, gen, noise=0.1, seed=1)):
            assert img.shape == (5, 7, 1)
            assert np.all(img.values >= 0.0) and np.all(img.values <= 1.0)


def test_generate_dataset_seeded_determinism():
    spec = SyntheticDatasetSpec(5, 6, 6, noise=0.2, seed=3)
    a = generate_dataset(spec)
    b = generate_dataset(spec)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
    c = generate_dataset(SyntheticDatasetSpec(5, 6, 6, noise=0.2, seed=4))
    assert not np.array_equal(a[0].values, c[0].values)


def test_blob_matches_closed_form():
    spec = SyntheticDatasetSpec(1, 9, 9, seed=12)
    img = generate_dataset(spec)[0]
    cy, cx, sigma = _blob_params(np.random.default_rng(12), 9, 9)
    expected = np.clip(_blob_image(cy, cx, sigma, 9, 9), 0.0, 1.0)
    assert np.array_equal(img.as_image()[:, :, 0], expected)


def test_parse_config_defaults():
    assert parse_experiment_config({}) == ExperimentConfig()


def test_parse_config_seed_override():
    cfg = parse_experiment_config({"seed": "3"}, seed_override=11)
    assert cfg.seed == 11
    assert cfg.dataset.seed == 11
    assert parse_experiment_config({"seed": "3"}).seed == 3


def test_parse_config_rejects_bad_values():
    bad = [
        {"nonsense.key": "1"},
        {"path.kind": "ig,foo"},
        {"path.kind": ""},
        {"samples": "4,x"},
        {"samples": "0"},
        {"model.kind": "transformer"},
        {"model.hidden": "16,-1"},
        {"dataset.generator": "perlin"},
        {"dataset.noise": "-0.5"},
        {"calibration.m": "0"},
        {"calibration.probes": "1"},
        {"gig.fraction": "0"},
        {"gig.fraction": "1.5"},
        {"insertion.steps": "0"},
        {"seed": "abc"},
    ]
    for raw in bad:
        with pytest.raises(ConfigError):
            parse_experiment_config(raw)


def test_parse_config_full():
    cfg = parse_experiment_config(parse_config_text(
        """
        path.kind = ig, blurig
        samples = 8
        dataset.count = 10
        dataset.generator = bars
        model.kind = linear
        blur.alpha_max = 4.0
        output.dir = results
        """
    ))
    assert cfg.methods == ("ig", "blurig")
    assert cfg.samples == (8,)
    assert cfg.dataset.generator == "bars"
    assert cfg.model_kind == "linear"
    assert cfg.blur_alpha_max == 4.0
    assert cfg.output_dir == "results"


def test_build_model_kinds():
    kinds = {
        "tiny-mlp": TanhMLP,
        "linear": LinearModel,
        "quadratic": QuadraticModel,
        "gaussian-bump": GaussianBumpModel,
    }
    for kind, cls in kinds.items():
        cfg = parse_experiment_config({"model.kind": kind})
        model = build_model(cfg, 9)
        assert isinstance(model, cls)
        assert model.input_dim == 9


def test_build_model_from_weight_file(tmp_path):
    reference = tiny_mlp(9, hidden=(4,), seed=5)
    wfile = tmp_path / "w.txt"
    write_weights(wfile, reference)
    cfg = parse_experiment_config({"model.weights": str(wfile)})
    model = build_model(cfg, 9)
    assert isinstance(model, TanhMLP)
    assert model.layer_sizes == reference.layer_sizes
    with pytest.raises(ConfigError, match="dimension"):
        build_model(cfg, 16)
    missing = parse_experiment_config({"model.weights": str(tmp_path / "nope.txt")})
    with pytest.raises(ConfigError):
        build_model(missing, 9)


def test_load_dataset_from_directory(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(3):
        write_pgm(tmp_path / f"img_{i}.pgm", rng.uniform(0, 1, (6, 6)))
    cfg = parse_experiment_config({"dataset.dir": str(tmp_path)})
    imgs = load_dataset(cfg)
    assert len(imgs) == 3
    assert imgs[0].shape == (6, 6, 1)
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ConfigError):
        load_dataset(parse_experiment_config({"dataset.dir": str(empty)}))


def test_generate_writes_readable_images(tmp_path):
    cfg = mini_config()
    run_generate(cfg, tmp_path)
    files = sorted((tmp_path / "dataset").glob("*.pgm"))
    assert len(files) == 8
    dataset = load_dataset(cfg)
    back = read_pgm(files[0])
    assert np.max(np.abs(back - dataset[0].as_image()[:, :, 0])) <= 0.5 / 65535 + 1e-12
    assert (tmp_path / "model_weights.txt").exists()


def test_calibration_artifacts_and_cost_accounting(tmp_path):
    cfg = mini_config()
    summary = run_calibration(cfg, tmp_path)
    assert set(summary) == set(METHODS)
    for method in METHODS:
        assert (tmp_path / f"profile_{method}.txt").exists()
        for k in (4, 8):
            assert (tmp_path / f"schedule_{method}_k{k}.txt").exists()
        # profiling costs m * probes gradient calls, path building is free
        # for the straight line but not for the guided walk
        assert summary[method]["profile_gradient_evals"] == 4 * 8
    assert summary["ig"]["path_gradient_evals"] == 0
    assert summary["gig"]["path_gradient_evals"] > 0
    assert (tmp_path / "calibration_log.txt").exists()
    knots, rows = read_profile_matrix(tmp_path / "profiles_per_image_ig.txt")
    assert rows.shape == (4, knots.size)
    assert knots.size == 8 - 1


def test_calibration_needs_enough_images(tmp_path):
    raw = parse_config_text(MINI_CONFIG)
    raw["calibration.m"] = "100"
    with pytest.raises(ConfigError, match="calibration needs"):
        run_calibration(parse_experiment_config(raw), tmp_path)


def test_profile_matrix_rejects_malformed(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("m=2 n=2\n0.25 0.75\n1.0 2.0\n")
    with pytest.raises(ConfigError):
        read_profile_matrix(p)
    p.write_text("0.25 0.75\n")
    with pytest.raises(ConfigError):
        read_profile_matrix(p)


def test_evaluation_rows_and_rerun_determinism(tmp_path):
    cfg = mini_config()
    run_calibration(cfg, tmp_path)
    first = {p.name: p.read_bytes() for p in tmp_path.glob("schedule_*.txt")}
    rows = run_evaluation(cfg, tmp_path)
    assert len(rows) == len(METHODS) * 2 * 2
    header, csv_rows = read_csv(tmp_path / "results.csv")
    assert header == RESULTS_HEADER
    assert len(csv_rows) == len(rows)
    kinds = {(r[0], r[1], int(r[2])) for r in csv_rows}
    assert ("ig", "uniform", 4) in kinds and ("gig", "riemannopt", 8) in kinds
    assert (tmp_path / "timing.txt").exists()
    assert (tmp_path / "curves" / "curve_ig_uniform_k4.csv").exists()

    results_before = (tmp_path / "results.csv").read_bytes()
    run_calibration(cfg, tmp_path)
    run_evaluation(cfg, tmp_path)
    assert {p.name: p.read_bytes() for p in tmp_path.glob("schedule_*.txt")} == first
    assert (tmp_path / "results.csv").read_bytes() == results_before


def test_evaluation_requires_schedules(tmp_path):
    cfg = mini_config()
    with pytest.raises(ConfigError, match="run calibrate first"):
        run_evaluation(cfg, tmp_path)


def test_linear_model_keeps_uniform_schedule(tmp_path):
    # a linear model makes the straight-line integrand constant per image, so
    # the profile is zero and the optimizer has nothing to move
    cfg = mini_config("model.kind = linear\npath.kind = ig\n")
    summary = run_calibration(cfg, tmp_path)
    for k in (4, 8):
        sched = summary["ig"]["schedules"][k].schedule
        assert np.array_equal(sched.points, AlphaSchedule.uniform(k).points)


def test_quadratic_pixel_completeness_pipeline(tmp_path):
    # 1x1 blob images are identically 1.0, so with f(x) = x^2 the uniform
    # left rule at k=4 gives attribution 0.75 against a delta of 1
    cfg = parse_experiment_config(parse_config_text(
        """
        dataset.count = 4
        dataset.height = 1
        dataset.width = 1
        dataset.noise = 0.0
        calibration.m = 2
        calibration.probes = 4
        samples = 4
        path.kind = ig
        model.kind = quadratic
        insertion.steps = 1
        """
    ))
    run_calibration(cfg, tmp_path)
    rows = run_evaluation(cfg, tmp_path)
    by_kind = {r[1]: r for r in rows}
    assert by_kind["uniform"][5] == pytest.approx(0.25, abs=1e-9)
    assert by_kind["riemannopt"][5] == pytest.approx(0.25, abs=1e-2)
    assert by_kind["uniform"][4] == 4  # every image clears the guard


def test_schedule_half_deviation_identical_halves():
    cfg = mini_config()
    dataset = load_dataset(parse_experiment_config(parse_config_text(
        "dataset.count = 4\ndataset.height = 1\ndataset.width = 1\ndataset.noise = 0.0\n"
    )))
    model = QuadraticModel(1)
    paths = [build_path("ig", model, img, cfg, steps=4) for img in dataset]
    assert schedule_half_deviation(model, paths, probes=4, k=4) == 0.0
    with pytest.raises(DomainError):
        schedule_half_deviation(model, paths[:1], probes=4, k=4)


def test_estimate_profile_pipeline_shapes():
    cfg = mini_config()
    dataset = load_dataset(cfg)[:2]
    model = build_model(cfg, dataset[0].dim)
    paths = [build_path("ig", model, img, cfg, steps=8) for img in dataset]
    prof = estimate_profile(model, paths, cfg.probes)
    assert prof.knots.size == cfg.probes - 1
    assert np.all(prof.magnitudes >= 0.0)


def test_results_header_frozen():
    assert RESULTS_HEADER == [
        "method", "schedule_kind", "k", "n_images", "n_scored",
        "mean_completeness_error", "median_completeness_error",
        "mean_insertion_score", "mean_normalized_insertion_score",
        "gradient_evals", "path_gradient_evals",
    ]


# ---------------------------------------------------------------------------
# CLI exit codes


def write_mini_config(tmp_path, extra: str = ""):
    p = tmp_path / "exp.cfg"
    p.write_text(MINI_CONFIG + extra)
    return p


def test_cli_requires_config(capsys):
    assert cli_main(["calibrate"]) == 1
    assert "requires --config" in capsys.readouterr().err


def test_cli_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("who.knows = 1\n")
    assert cli_main(["calibrate", "--config", str(cfg)]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path, capsys):
    assert cli_main(["calibrate", "--config", str(tmp_path / "nope.cfg")]) == 3
    assert "i/o error" in capsys.readouterr().err


def test_cli_numerical_failure_exit_code(tmp_path, capsys):
    # a weight file full of NaNs breaks the probe stage with a numerical error
    model = tiny_mlp(64, hidden=(3,), seed=0)
    wfile = tmp_path / "w.txt"
    write_weights(wfile, model)
    text = wfile.read_text()
    first_weight = model.weights[0][0][0]
    wfile.write_text(text.replace(repr(float(first_weight)), "nan"))
    cfg = write_mini_config(tmp_path, f"model.weights = {wfile}\npath.kind = ig\n")
    code = cli_main(["calibrate", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "numerical error" in capsys.readouterr().err


def test_cli_calibrate_evaluate_ok(tmp_path, capsys):
    cfg = write_mini_config(tmp_path)
    out = tmp_path / "out"
    assert cli_main(["calibrate", "--config", str(cfg), "--out", str(out), "--verbose"]) == 0
    assert cli_main(["evaluate", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "results.csv").exists()
    assert "calibrate:" in capsys.readouterr().err


def test_cli_plot_without_results(tmp_path, capsys):
    assert cli_main(["plot", "--out", str(tmp_path / "missing")]) == 0
    assert "no results" in capsys.readouterr().err


def test_cli_seed_override_changes_dataset(tmp_path):
    cfg = write_mini_config(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert cli_main(["generate", "--config", str(cfg), "--out", str(out_a)]) == 0
    assert cli_main(["generate", "--config", str(cfg), "--out", str(out_b), "--seed", "9"]) == 0
    img_a = (out_a / "dataset" / "img_0000.pgm").read_bytes()
    img_b = (out_b / "dataset" / "img_0000.pgm").read_bytes()
    assert img_a != img_b
