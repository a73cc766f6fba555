"""Config-driven experiment pipeline.

Stages: synthesize a dataset, calibrate sample schedules on its leading
subset, evaluate uniform vs optimized schedules across the configured
attribution methods, and hand the artifacts to the plotting stage. Every
stage is deterministic under a fixed config and seed; wall-clock timings are
quarantined in timing.txt so the comparable artifacts stay byte-stable.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .errors import ConfigError, DomainError
from .fileio import (
    read_pgm,
    read_schedule,
    read_weights,
    write_csv,
    write_curve_csv,
    write_pgm,
    write_profile,
    write_schedule,
    write_weights,
)
from .metrics import aggregate, completeness_error, insertion_score
from .models import (
    CountingModel,
    DifferentiableModel,
    GaussianBumpModel,
    InputVector,
    LinearModel,
    QuadraticModel,
    TanhMLP,
    tiny_mlp,
)
from .paths import (
    BlurPath,
    BlurPathConfig,
    Path,
    default_blur_config,
    guided_path,
    linear_path,
)
from .riemann import AlphaSchedule, attribute
from .schedule_opt import DerivativeProfile, estimate_profile, optimize_schedule

RESULTS_HEADER = [
    "method",
    "schedule_kind",
    "k",
    "n_images",
    "n_scored",
    "mean_completeness_error",
    "median_completeness_error",
    "mean_insertion_score",
    "mean_normalized_insertion_score",
    "gradient_evals",
    "path_gradient_evals",
]

METHODS = ("ig", "blurig", "gig")
GENERATORS = ("gaussian-blob", "bars", "checker")


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    count: int
    height: int
    width: int
    generator: str = "gaussian-blob"
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DomainError(f"image size must be positive, got {self.height}x{self.width}")
        if self.count < 0:
            raise DomainError(f"count must be non-negative, got {self.count}")
        if self.generator not in GENERATORS:
            raise DomainError(f"unknown generator {self.generator!r}")
        if self.noise < 0:
            raise DomainError(f"noise must be non-negative, got {self.noise}")


def _blob_params(rng: np.random.Generator, h: int, w: int):
    cy = rng.uniform(0.25 * (h - 1), 0.75 * (h - 1))
    cx = rng.uniform(0.25 * (w - 1), 0.75 * (w - 1))
    sigma = rng.uniform(0.15, 0.35) * min(h, w)
    return cy, cx, sigma


def _blob_image(cy: float, cx: float, sigma: float, h: int, w: int) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w]
    r2 = (ys - cy) ** 2 + (xs - cx) ** 2
    return np.exp(-r2 / (2.0 * sigma * sigma))


def generate_dataset(spec: SyntheticDatasetSpec) -> list[InputVector]:
    """Deterministic [0, 1] grayscale images with (h, w, 1) shape metadata."""
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    images = []
    for _ in range(spec.count):
        if spec.generator == "gaussian-blob":
            cy, cx, sigma = _blob_params(rng, h, w)
            img = _blob_image(cy, cx, sigma, h, w)
        elif spec.generator == "bars":
            img = np.zeros((h, w))
            for _ in range(int(rng.integers(1, 4))):
                horizontal = bool(rng.integers(0, 2))
                extent = h if horizontal else w
                pos = int(rng.integers(0, extent))
                width = int(rng.integers(1, 3))
                intensity = float(rng.uniform(0.5, 1.0))
                if horizontal:
                    img[pos : pos + width, :] = intensity
                else:
                    img[:, pos : pos + width] = intensity
        else:
            cell = int(rng.integers(2, 5))
            phase = int(rng.integers(0, 2))
            lo = float(rng.uniform(0.0, 0.3))
            hi = float(rng.uniform(0.6, 1.0))
            ys, xs = np.mgrid[0:h, 0:w]
            img = np.where((ys // cell + xs // cell + phase) % 2 == 0, lo, hi)
        if spec.noise > 0:
            img = img + spec.noise * rng.standard_normal((h, w))
        img = np.clip(img, 0.0, 1.0)
        images.append(InputVector.from_image(img))
    return images


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[str, ...] = METHODS
    samples: tuple[int, ...] = (16, 32, 64)
    calibration_m: int = 32
    probes: int = 64
    dataset: SyntheticDatasetSpec = field(
        default_factory=lambda: SyntheticDatasetSpec(64, 12, 12, "gaussian-blob", 0.05, 0)
    )
    dataset_dir: str | None = None
    model_kind: str = "tiny-mlp"
    model_seed: int = 7
    model_hidden: tuple[int, ...] = (16, 8)
    model_gain: float = 2.0
    model_width: float = 0.0
    model_weights: str | None = None
    gig_fraction: float = 0.1
    gig_steps: int = 0
    blur_alpha_max: float = 0.0
    blur_kernel_radius: int = 0
    blur_velocity_step: float = 1e-3
    insertion_steps: int = 16
    guard: float = 1e-6
    seed: int = 0
    output_dir: str = "out"


_KNOWN_KEYS = {
    "path.kind", "samples", "calibration.m", "calibration.probes",
    "dataset.count", "dataset.height", "dataset.width", "dataset.generator",
    "dataset.noise", "dataset.dir",
    "model.kind", "model.seed", "model.hidden", "model.gain", "model.width",
    "model.weights",
    "gig.fraction", "gig.steps",
    "blur.alpha_max", "blur.kernel_radius", "blur.velocity_step",
    "insertion.steps", "guard", "seed", "output.dir",
}


def _parse_int(raw: dict, key: str, default: int) -> int:
    if key not in raw:
        return default
    try:
        return int(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected integer, got {raw[key]!r}") from exc


def _parse_float(raw: dict, key: str, default: float) -> float:
    if key not in raw:
        return default
    try:
        return float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected number, got {raw[key]!r}") from exc


def parse_experiment_config(raw: dict[str, str], seed_override: int | None = None) -> ExperimentConfig:
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    methods_text = raw.get("path.kind", "ig,blurig,gig")
    methods = tuple(tok.strip() for tok in methods_text.split(",") if tok.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"path.kind must list values from {METHODS}, got {methods_text!r}")

    samples_text = raw.get("samples", "16,32,64")
    try:
        samples = tuple(int(tok) for tok in samples_text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"samples: expected comma-separated integers, got {samples_text!r}") from exc
    if not samples or any(s < 1 for s in samples):
        raise ConfigError(f"samples must be positive integers, got {samples_text!r}")

    hidden_text = raw.get("model.hidden", "16,8")
    try:
        hidden = tuple(int(tok) for tok in hidden_text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"model.hidden: expected comma-separated integers, got {hidden_text!r}") from exc
    if not hidden or any(s < 1 for s in hidden):
        raise ConfigError(f"model.hidden must be positive integers, got {hidden_text!r}")

    model_kind = raw.get("model.kind", "tiny-mlp")
    if model_kind not in ("tiny-mlp", "linear", "quadratic", "gaussian-bump"):
        raise ConfigError(f"unknown model.kind {model_kind!r}")
    generator = raw.get("dataset.generator", "gaussian-blob")
    if generator not in GENERATORS:
        raise ConfigError(f"dataset.generator must be one of {GENERATORS}, got {generator!r}")

    seed = _parse_int(raw, "seed", 0)
    if seed_override is not None:
        seed = seed_override

    m = _parse_int(raw, "calibration.m", 32)
    probes = _parse_int(raw, "calibration.probes", 64)
    if m < 1:
        raise ConfigError(f"calibration.m must be >= 1, got {m}")
    if probes < 2:
        raise ConfigError(f"calibration.probes must be >= 2, got {probes}")

    try:
        dataset = SyntheticDatasetSpec(
            count=_parse_int(raw, "dataset.count", 64),
            height=_parse_int(raw, "dataset.height", 12),
            width=_parse_int(raw, "dataset.width", 12),
            generator=generator,
            noise=_parse_float(raw, "dataset.noise", 0.05),
            seed=seed,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    fraction = _parse_float(raw, "gig.fraction", 0.1)
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"gig.fraction must lie in (0, 1], got {fraction}")
    insertion_steps = _parse_int(raw, "insertion.steps", 16)
    if insertion_steps < 1:
        raise ConfigError(f"insertion.steps must be >= 1, got {insertion_steps}")

    return ExperimentConfig(
        methods=methods,
        samples=samples,
        calibration_m=m,
        probes=probes,
        dataset=dataset,
        dataset_dir=raw.get("dataset.dir"),
        model_kind=model_kind,
        model_seed=_parse_int(raw, "model.seed", 7),
        model_hidden=hidden,
        model_gain=_parse_float(raw, "model.gain", 2.0),
        model_width=_parse_float(raw, "model.width", 0.0),
        model_weights=raw.get("model.weights"),
        gig_fraction=fraction,
        gig_steps=_parse_int(raw, "gig.steps", 0),
        blur_alpha_max=_parse_float(raw, "blur.alpha_max", 0.0),
        blur_kernel_radius=_parse_int(raw, "blur.kernel_radius", 0),
        blur_velocity_step=_parse_float(raw, "blur.velocity_step", 1e-3),
        insertion_steps=insertion_steps,
        guard=_parse_float(raw, "guard", 1e-6),
        seed=seed,
        output_dir=raw.get("output.dir", "out"),
    )


def load_dataset(config: ExperimentConfig) -> list[InputVector]:
    if config.dataset_dir is not None:
        directory = FsPath(config.dataset_dir)
        files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")
        if not files:
            raise ConfigError(f"no PGM files in {directory}")
        return [InputVector.from_image(read_pgm(p)) for p in files]
    return generate_dataset(config.dataset)


def build_model(config: ExperimentConfig, dim: int) -> DifferentiableModel:
    if config.model_weights is not None:
        try:
            model = read_weights(config.model_weights)
        except OSError as exc:
            raise ConfigError(f"cannot read model.weights: {exc}") from exc
        if model.input_dim != dim:
            raise ConfigError(
                f"weight file expects dimension {model.input_dim}, dataset has {dim}"
            )
        return model
    if config.model_kind == "tiny-mlp":
        return tiny_mlp(dim, config.model_hidden, seed=config.model_seed,
                        gain=config.model_gain)
    if config.model_kind == "linear":
        rng = np.random.default_rng(config.model_seed)
        return LinearModel(rng.standard_normal(dim) / np.sqrt(dim))
    if config.model_kind == "quadratic":
        return QuadraticModel(dim)
    width = config.model_width if config.model_width > 0 else 0.5 * np.sqrt(dim)
    return GaussianBumpModel(np.full(dim, 0.5), width)


def blur_config_for(config: ExperimentConfig, shape) -> BlurPathConfig:
    if config.blur_alpha_max > 0:
        radius = config.blur_kernel_radius
        if radius < 1:
            radius = int(np.ceil(3.0 * np.sqrt(config.blur_alpha_max / 2.0)))
        return BlurPathConfig(config.blur_alpha_max, radius, config.blur_velocity_step)
    return default_blur_config(shape, config.blur_velocity_step)


def zero_baseline(image: InputVector) -> InputVector:
    return InputVector(np.zeros(image.dim), image.shape)


def build_path(method: str, model: DifferentiableModel, image: InputVector,
               config: ExperimentConfig, steps: int) -> Path:
    if method == "ig":
        return linear_path(zero_baseline(image), image)
    if method == "blurig":
        return BlurPath(image, blur_config_for(config, image.shape))
    if method == "gig":
        gig_steps = config.gig_steps if config.gig_steps >= 2 else steps
        return guided_path(model, zero_baseline(image), image,
                           steps=gig_steps, fraction=config.gig_fraction)
    raise ConfigError(f"unknown method {method!r}")


def schedule_path(out_dir: FsPath, method: str, k: int) -> FsPath:
    return out_dir / f"schedule_{method}_k{k}.txt"


def run_generate(config: ExperimentConfig, out_dir: FsPath, verbose: bool = False) -> None:
    """Export the synthetic dataset as 16-bit PGMs plus the model weight file."""
    dataset = load_dataset(config)
    img_dir = out_dir / "dataset"
    img_dir.mkdir(parents=True, exist_ok=True)
    for i, vec in enumerate(dataset):
        write_pgm(img_dir / f"img_{i:04d}.pgm", vec.as_image()[:, :, 0])
    if dataset:
        model = build_model(config, dataset[0].dim)
        if isinstance(model, TanhMLP):
            write_weights(out_dir / "model_weights.txt", model)
    if verbose:
        print(f"generate: wrote {len(dataset)} images to {img_dir}", file=sys.stderr)


def run_calibration(config: ExperimentConfig, out_dir: FsPath, verbose: bool = False) -> dict:
    """Estimate one profile per method and write one schedule file per k."""
    dataset = load_dataset(config)
    if len(dataset) < config.calibration_m:
        raise ConfigError(
            f"calibration needs {config.calibration_m} images, dataset has {len(dataset)}"
        )
    calib = dataset[: config.calibration_m]
    model = build_model(config, calib[0].dim)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_lines = []
    summary: dict = {}
    for method in config.methods:
        constructing = CountingModel(model)
        paths = [
            build_path(method, constructing, img, config, steps=config.probes)
            for img in calib
        ]
        probing = CountingModel(model)
        profile = estimate_profile(probing, paths, config.probes)
        write_profile(out_dir / f"profile_{method}.txt", profile)

        # one profile per calibration image feeds the overlay plot
        per_image = [estimate_profile(model, [p], config.probes) for p in paths]
        _write_profile_matrix(out_dir / f"profiles_per_image_{method}.txt",
                              profile.knots, [pi.magnitudes for pi in per_image])

        entry = {
            "profile_gradient_evals": probing.gradient_calls,
            "path_gradient_evals": constructing.gradient_calls,
            "schedules": {},
        }
        log_lines.append(
            f"{method}: profile_gradient_evals={probing.gradient_calls} "
            f"path_gradient_evals={constructing.gradient_calls}"
        )
        for k in config.samples:
            opt = optimize_schedule(profile, k)
            write_schedule(schedule_path(out_dir, method, k), opt.schedule)
            entry["schedules"][k] = opt
            log_lines.append(
                f"{method} k={k}: bound={opt.bound!r} converged={opt.converged}"
            )
            if verbose:
                print(f"calibrate: {method} k={k} bound={opt.bound:.3e}", file=sys.stderr)
        summary[method] = entry
    (out_dir / "calibration_log.txt").write_text("\n".join(log_lines) + "\n",
                                                 encoding="utf-8")
    return summary


def _write_profile_matrix(path, knots, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"m={len(rows)} n={len(knots)}\n")
        fh.write(" ".join(repr(float(x)) for x in knots) + "\n")
        for row in rows:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_profile_matrix(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("m="):
        raise ConfigError(f"missing profile-matrix header in {path}")
    try:
        head = dict(part.split("=", 1) for part in lines[0].split())
        m, n = int(head["m"]), int(head["n"])
        knots = np.asarray([float(t) for t in lines[1].split()])
        rows = np.asarray([[float(t) for t in ln.split()] for ln in lines[2 : 2 + m]])
    except (KeyError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed profile matrix in {path}") from exc
    if knots.size != n or rows.shape != (m, n):
        raise ConfigError(f"profile matrix shape mismatch in {path}")
    return knots, rows


def run_evaluation(config: ExperimentConfig, out_dir: FsPath, verbose: bool = False) -> list[list]:
    """Score uniform vs optimized schedules for every method and sample count."""
    dataset = load_dataset(config)
    if not dataset:
        raise ConfigError("evaluation needs a non-empty dataset")
    model = build_model(config, dataset[0].dim)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves_dir = out_dir / "curves"
    curves_dir.mkdir(exist_ok=True)

    blur_cfg = blur_config_for(config, dataset[0].shape)
    insertion_baselines = [BlurPath(img, blur_cfg).baseline for img in dataset]
    input_scores = [model.evaluate(img) for img in dataset]

    rows: list[list] = []
    timings: list[str] = []
    for method in config.methods:
        for k in config.samples:
            for kind in ("uniform", "riemannopt"):
                if kind == "uniform":
                    schedule = AlphaSchedule.uniform(k)
                else:
                    spath = schedule_path(out_dir, method, k)
                    if not spath.exists():
                        raise ConfigError(
                            f"missing schedule file {spath}; run calibrate first"
                        )
                    schedule = read_schedule(spath)
                t0 = time.perf_counter()
                scoring = CountingModel(model)
                constructing = CountingModel(model)
                comp_errors: list[float] = []
                ins_scores: list[float] = []
                norm_scores: list[float] = []
                for idx, img in enumerate(dataset):
                    path = build_path(method, constructing, img, config, steps=k)
                    attr = attribute(scoring, path, schedule)
                    if abs(attr.model_delta) > config.guard:
                        comp_errors.append(completeness_error(attr, config.guard))
                    curve = insertion_score(model, img, insertion_baselines[idx],
                                            attr, config.insertion_steps)
                    ins_scores.append(curve.auc)
                    if abs(input_scores[idx]) > 1e-12:
                        norm_scores.append(curve.auc / input_scores[idx])
                    if idx == 0:
                        write_curve_csv(
                            curves_dir / f"curve_{method}_{kind}_k{k}.csv", curve
                        )
                if comp_errors:
                    mean_ce, median_ce, _ = aggregate(comp_errors)
                else:
                    mean_ce = median_ce = float("nan")
                mean_ins = aggregate(ins_scores)[0] if ins_scores else float("nan")
                mean_norm = aggregate(norm_scores)[0] if norm_scores else float("nan")
                rows.append([
                    method, kind, k, len(dataset), len(comp_errors),
                    mean_ce, median_ce, mean_ins, mean_norm,
                    scoring.gradient_calls, constructing.gradient_calls,
                ])
                timings.append(
                    f"{method} {kind} k={k}: {time.perf_counter() - t0:.3f}s"
                )
                if verbose:
                    print(f"evaluate: {method} {kind} k={k} "
                          f"mean_err={mean_ce:.4f}", file=sys.stderr)
    write_csv(out_dir / "results.csv", RESULTS_HEADER, rows)
    # wall times drift run to run, so they live outside the comparable CSVs
    (out_dir / "timing.txt").write_text("\n".join(timings) + "\n", encoding="utf-8")
    return rows


def schedule_half_deviation(model: DifferentiableModel, paths: list[Path],
                            probes: int, k: int) -> float:
    """Max pointwise schedule gap between two disjoint calibration halves."""
    half = len(paths) // 2
    if half < 1:
        raise DomainError("need at least two calibration paths to split")
    first = estimate_profile(model, paths[:half], probes)
    second = estimate_profile(model, paths[half : 2 * half], probes)
    s1 = optimize_schedule(first, k).schedule
    s2 = optimize_schedule(second, k).schedule
    return float(np.max(np.abs(s1.points - s2.points)))


def run_all(config: ExperimentConfig, out_dir: FsPath, verbose: bool = False) -> None:
    from .plots import emit_plots

    run_generate(config, out_dir, verbose=verbose)
    run_calibration(config, out_dir, verbose=verbose)
    run_evaluation(config, out_dir, verbose=verbose)
    emit_plots(out_dir, verbose=verbose)
