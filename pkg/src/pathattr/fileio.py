"""On-disk formats: config text, PGM images, weight files, schedules, CSV.

All text artifacts are written with '\n' endings except CSV, which uses the
conventional CRLF rows. Floats are serialized with repr so they round-trip
bit-exactly and identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .metrics import InsertionCurve
from .models import TanhMLP
from .riemann import AlphaSchedule
from .schedule_opt import DerivativeProfile


# ---------------------------------------------------------------------------
# Flat key = value configuration text.


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines; `#` starts a comment; duplicates are errors."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


# ---------------------------------------------------------------------------
# PGM (P2 ASCII / P5 binary), 8-bit or 16-bit grayscale.


def write_pgm(path, image: np.ndarray, maxval: int = 65535, binary: bool = True) -> None:
    """Quantize a [0, 1] float image (h, w) onto 0..maxval and write it out."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ConfigError(f"PGM writer needs a non-empty 2D array, got shape {image.shape}")
    if maxval not in (255, 65535):
        raise ConfigError(f"maxval must be 255 or 65535, got {maxval}")
    levels = np.rint(np.clip(image, 0.0, 1.0) * maxval).astype(np.uint32)
    h, w = image.shape
    magic = "P5" if binary else "P2"
    header = f"{magic}\n{w} {h}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            dtype = ">u2" if maxval > 255 else np.uint8
            fh.write(levels.astype(dtype).tobytes())
        else:
            lines = [" ".join(str(int(v)) for v in row) for row in levels]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


def read_pgm(path) -> np.ndarray:
    """Read P2/P5 grayscale into floats in [0, 1] (levels divided by maxval)."""
    with open(path, "rb") as fh:
        data = fh.read()

    def tokens():
        i = 0
        n = len(data)
        while i < n:
            c = data[i : i + 1]
            if c == b"#":
                while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                    i += 1
            elif c.isspace():
                i += 1
            else:
                j = i
                while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                    j += 1
                yield i, data[i:j]
                i = j

    it = tokens()
    try:
        _, magic = next(it)
        if magic not in (b"P2", b"P5"):
            raise ConfigError(f"unsupported PGM magic {magic!r}")
        _, w_tok = next(it)
        _, h_tok = next(it)
        max_pos, max_tok = next(it)
        w, h, maxval = int(w_tok), int(h_tok), int(max_tok)
    except (StopIteration, ValueError) as exc:
        raise ConfigError(f"malformed PGM header in {path}") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ConfigError(f"bad PGM dimensions {w}x{h} maxval {maxval}")
    if magic == b"P5":
        # binary payload starts after exactly one whitespace byte past maxval
        offset = max_pos + len(max_tok) + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        count = w * h
        try:
            raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        except ValueError as exc:
            raise ConfigError(f"PGM payload truncated in {path}") from exc
        levels = raw.astype(np.float64)
    else:
        vals = []
        for _, tok in it:
            try:
                vals.append(int(tok))
            except ValueError as exc:
                raise ConfigError(f"non-integer PGM sample {tok!r} in {path}") from exc
        if len(vals) != w * h:
            raise ConfigError(
                f"PGM sample count {len(vals)} != {w * h} in {path}"
            )
        levels = np.asarray(vals, dtype=np.float64)
    if levels.max(initial=0.0) > maxval:
        raise ConfigError(f"PGM sample exceeds maxval in {path}")
    return (levels / maxval).reshape(h, w)


# ---------------------------------------------------------------------------
# MLP weight file: header line of layer sizes, then per layer the weight
# matrix row-major followed by the bias vector, whitespace separated.


def write_weights(path, model: TanhMLP) -> None:
    parts = [" ".join(str(s) for s in model.layer_sizes)]
    for W, b in zip(model.weights, model.biases):
        for row in W:
            parts.append(" ".join(repr(float(v)) for v in row))
        parts.append(" ".join(repr(float(v)) for v in b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def read_weights(path) -> TanhMLP:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"empty weight file {path}")
    try:
        sizes = [int(tok) for tok in lines[0].split()]
    except ValueError as exc:
        raise ConfigError(f"bad layer-size header in {path}") from exc
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ConfigError(f"need at least two positive layer sizes in {path}")
    flat = []
    for ln in lines[1:]:
        for tok in ln.split():
            try:
                flat.append(float(tok))
            except ValueError as exc:
                raise ConfigError(f"non-numeric weight {tok!r} in {path}") from exc
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        need = fan_out * fan_in + fan_out
        chunk = flat[pos : pos + need]
        if len(chunk) < need:
            raise ConfigError(f"weight file {path} truncated")
        pos += need
        W = np.asarray(chunk[: fan_out * fan_in]).reshape(fan_out, fan_in)
        b = np.asarray(chunk[fan_out * fan_in :])
        weights.append(W)
        biases.append(b)
    if pos != len(flat):
        raise ConfigError(f"weight file {path} has {len(flat) - pos} extra values")
    return TanhMLP(weights, biases)


# ---------------------------------------------------------------------------
# Schedule file: header `k=<n> terminal=1.0`, then one alpha per line.


def write_schedule(path, schedule: AlphaSchedule) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"k={schedule.k} terminal={repr(schedule.terminal)}\n")
        for alpha in schedule.points:
            fh.write(repr(float(alpha)) + "\n")


def read_schedule(path) -> AlphaSchedule:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ConfigError(f"empty schedule file {path}")
    header = lines[0].split()
    fields = {}
    for part in header:
        if "=" not in part:
            raise ConfigError(f"bad schedule header {lines[0]!r} in {path}")
        key, value = part.split("=", 1)
        fields[key] = value
    try:
        k = int(fields["k"])
        terminal = float(fields["terminal"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad schedule header {lines[0]!r} in {path}") from exc
    if len(lines) - 1 != k:
        raise ConfigError(f"schedule file {path} lists {len(lines) - 1} points, header says {k}")
    try:
        points = np.asarray([float(ln) for ln in lines[1:]])
    except ValueError as exc:
        raise ConfigError(f"non-numeric schedule point in {path}") from exc
    try:
        return AlphaSchedule(points, terminal)
    except Exception as exc:
        raise ConfigError(f"invalid schedule in {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Profile file: header `n=<count>`, then `knot magnitude` per line.


def write_profile(path, profile: DerivativeProfile) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n={profile.knots.size}\n")
        for knot, mag in zip(profile.knots, profile.magnitudes):
            fh.write(f"{repr(float(knot))} {repr(float(mag))}\n")


def read_profile(path) -> DerivativeProfile:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise ConfigError(f"missing profile header in {path}")
    try:
        n = int(lines[0][2:])
    except ValueError as exc:
        raise ConfigError(f"bad profile header {lines[0]!r} in {path}") from exc
    if len(lines) - 1 != n:
        raise ConfigError(f"profile file {path} lists {len(lines) - 1} rows, header says {n}")
    knots, mags = [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ConfigError(f"bad profile row {ln!r} in {path}")
        try:
            knots.append(float(parts[0]))
            mags.append(float(parts[1]))
        except ValueError as exc:
            raise ConfigError(f"non-numeric profile row {ln!r} in {path}") from exc
    try:
        return DerivativeProfile(np.asarray(knots), np.asarray(mags))
    except Exception as exc:
        raise ConfigError(f"invalid profile in {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# CSV, RFC-4180 style (CRLF rows, minimal quoting).


def format_number(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([c if isinstance(c, str) else format_number(c) for c in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_curve_csv(path, curve: InsertionCurve) -> None:
    write_csv(
        path,
        ["fraction", "score"],
        zip(curve.fractions, curve.scores),
    )


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise ConfigError(f"empty CSV {path}")
    return rows[0], rows[1:]
