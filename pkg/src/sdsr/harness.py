"""Experiment orchestration behind the command-line interface.

A run is described by an :class:`ExperimentConfig`, read from an INI-style
key-value file (section ``[experiment]``) with optional ``key=value``
overrides. Every command validates its config before it writes anything,
and stores the fully resolved config next to its outputs.

Independent (image, scenario, levels) tasks run in a process pool whose
size comes from the ``SDSR_THREADS`` environment variable; rows of the
results table are written by the parent process only, in task order, so
output files do not depend on scheduling.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .degradation import PSF_KINDS, BlurOperator, degrade, get_scenario, make_psf
from .framelet import CoefficientPyramid, FrameletSystem
from .image_core import ImageIOError, cameraman, load_image, save_image
from .metrics import psnr, ssim
from .solver import (
    REGULARIZERS, SolverConfig, SolverDivergedError, default_rho, lambda_grid, mdal_solve,
    sdsr_run, select_lambda,
)
from .support import SupportMask, detect_support, support_map_image

log = logging.getLogger(__name__)

THREADS_ENV = "SDSR_THREADS"
BUILTIN_IMAGES = {"cameraman": cameraman}
REFERENCE_SOURCES = ("internal-l0", "oracle", "file")
SCHEMA_VERSION = 1
RESULT_COLUMNS = ("image", "scenario", "method", "levels", "stage", "rho", "lam", "psnr", "ssim",
                  "ar", "iters", "seconds", "stop_reason", "status")


class ConfigError(ValueError):
    """Invalid experiment configuration (reported with exit code 1)."""


# -- configuration ------------------------------------------------------------

def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(t) for t in str(text).replace(",", " ").split()]


def _strings(text):
    return [t for t in str(text).replace(",", " ").split()]


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    v = str(text).strip().lower()
    return None if v in ("", "none", "grid", "auto") else float(v)


def _opt_str(text):
    v = str(text).strip()
    return None if v.lower() in ("", "none") else v


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a harness command needs.

    The file form is one ``[experiment]`` section of ``key = value`` lines
    named like the fields; tuples are space or comma separated.
    ``lam=None`` selects the weight from the logarithmic grid by PSNR against
    the ground truth; ``rho=None`` uses the per-level default.
    """

    images: tuple = ("cameraman",)
    scenarios: tuple = (3,)
    levels: tuple = (1,)
    regularizer: str = "trunc_l0"
    rho: float | None = None
    rho_grid: tuple = (50.0, 100.0, 200.0, 400.0, 800.0)
    stages: int = 2
    seed: int = 0
    lam: float | None = None
    lam_grid_start: int = 0
    lam_grid_size: int = 9
    reference: str = "internal-l0"
    reference_path: str | None = None
    reference_levels: int = 1
    mu: float = 0.01
    gamma: float = 0.003
    tol: float = 5e-4
    max_inner_iters: int = 300
    stop_window: int = 10
    lowpass_in_threshold: bool = True
    trace_every: int = 0
    output_dir: str = "results"

    def solver_config(self, levels: int, lam: float = 0.0, **changes) -> SolverConfig:
        cfg = SolverConfig(lam=lam, mu=self.mu, gamma=self.gamma, rho=self.rho, levels=levels,
                           stages=self.stages, max_inner_iters=self.max_inner_iters, tol=self.tol,
                           stop_window=self.stop_window,
                           regularizer=self.regularizer, lowpass_in_threshold=self.lowpass_in_threshold)
        return cfg.with_(**changes) if changes else cfg

    def lam_candidates(self, sigma: float) -> list[float]:
        if self.lam is not None:
            return [self.lam]
        grid = lambda_grid(sigma, self.lam_grid_start + self.lam_grid_size)
        return grid[self.lam_grid_start:]

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # serialization

    def to_ini(self) -> str:
        lines = ["[experiment]"]
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = " ".join(_fmt(x) for x in v)
            elif v is None:
                v = "none"
            else:
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_PARSERS = {
    "images": lambda t: tuple(_strings(t)),
    "scenarios": lambda t: tuple(_ints(t)),
    "levels": lambda t: tuple(_ints(t)),
    "regularizer": str.strip,
    "rho": _opt_float,
    "rho_grid": lambda t: tuple(_floats(t)),
    "stages": int,
    "seed": int,
    "lam": _opt_float,
    "lam_grid_start": int,
    "lam_grid_size": int,
    "reference": str.strip,
    "reference_path": _opt_str,
    "reference_levels": int,
    "mu": float,
    "gamma": float,
    "tol": float,
    "max_inner_iters": int,
    "stop_window": int,
    "lowpass_in_threshold": _bool,
    "trace_every": int,
    "output_dir": str.strip,
}


def parse_overrides(pairs) -> dict:
    """Turn ``["key=value", ...]`` into a raw-string mapping."""
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def load_config(path=None, overrides=None, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a config file (optional), apply overrides and validate."""
    raw = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        if parser.sections() != ["experiment"]:
            raise ConfigError("config must contain exactly one [experiment] section")
        raw.update(parser["experiment"])
    raw.update(overrides or {})
    values = {}
    for key, text in raw.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    cfg = (base or ExperimentConfig()).with_(**values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Raise :class:`ConfigError` unless the config can run; touches no files for writing."""
    if not cfg.images:
        raise ConfigError("no images configured")
    for img in cfg.images:
        if img not in BUILTIN_IMAGES and not Path(img).is_file():
            raise ConfigError(f"image {img!r} does not exist")
    if not cfg.scenarios:
        raise ConfigError("no scenarios configured")
    for sid in cfg.scenarios:
        if not 1 <= sid <= 8:
            raise ConfigError(f"scenario id must be in 1..8, got {sid}")
    if not cfg.levels or any(lv < 1 for lv in cfg.levels):
        raise ConfigError("levels must be positive integers")
    if cfg.reference_levels < 1:
        raise ConfigError("reference_levels must be >= 1")
    if cfg.regularizer not in REGULARIZERS:
        raise ConfigError(f"regularizer must be one of {REGULARIZERS}")
    if cfg.reference not in REFERENCE_SOURCES:
        raise ConfigError(f"reference must be one of {REFERENCE_SOURCES}")
    if cfg.reference == "file":
        if cfg.reference_path is None or not Path(cfg.reference_path).is_file():
            raise ConfigError("reference = file needs an existing reference_path")
    if cfg.rho is not None and cfg.rho < 1:
        raise ConfigError("rho must be >= 1")
    if not cfg.rho_grid or any(r < 1 for r in cfg.rho_grid):
        raise ConfigError("rho_grid needs values >= 1")
    if cfg.lam is not None and cfg.lam < 0:
        raise ConfigError("lam must be >= 0")
    if cfg.lam_grid_start < 0 or cfg.lam_grid_size < 1:
        raise ConfigError("lam grid bounds are invalid")
    if cfg.trace_every < 0:
        raise ConfigError("trace_every must be >= 0")
    try:
        cfg.solver_config(cfg.levels[0])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def write_resolved_config(cfg: ExperimentConfig, directory: Path, name: str = "config.resolved.ini") -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(cfg.to_ini(), encoding="utf-8")
    return path


def worker_count() -> int:
    """Pool size from ``SDSR_THREADS`` (default: CPU count)."""
    text = os.environ.get(THREADS_ENV)
    if text is None or text.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(text)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {text!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {text!r}")
    return n


def run_tasks(fn, tasks, workers: int | None = None):
    """Map ``fn`` over ``tasks``; results come back in task order."""
    tasks = list(tasks)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# -- images and naming --------------------------------------------------------------

def image_name(spec: str) -> str:
    return spec if spec in BUILTIN_IMAGES else Path(spec).stem


def read_truth(spec: str) -> np.ndarray:
    if spec in BUILTIN_IMAGES:
        return BUILTIN_IMAGES[spec]()
    return load_image(spec)


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()


# -- results table --------------------------------------------------------------------

class ResultsTable:
    """Append-only CSV of per-stage results with a versioned header line."""

    MAGIC = f"# sdsr-results schema={SCHEMA_VERSION}"

    def __init__(self, path):
        self.path = Path(path)

    @staticmethod
    def _cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            if math.isnan(v):
                return ""
            return f"{v:.6f}" if abs(v) >= 1e-3 or v == 0 else f"{v:.6g}"
        return str(v)

    def append(self, rows) -> None:
        rows = list(rows)
        new = not self.path.exists()
        if not new:
            self.read()  # schema check before touching the file
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", newline="", encoding="utf-8") as fh:
            if new:
                fh.write(self.MAGIC + "\n")
                csv.writer(fh, lineterminator="\n").writerow(RESULT_COLUMNS)
            w = csv.writer(fh, lineterminator="\n")
            for row in rows:
                w.writerow([self._cell(row.get(c)) for c in RESULT_COLUMNS])

    def read(self) -> list[dict]:
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ImageIOError(f"cannot read results table {self.path}: {exc}") from None
        return parse_results(text, self.path)


def parse_results(text: str, origin="results") -> list[dict]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != ResultsTable.MAGIC:
        raise ValueError(f"{origin}: missing or unsupported schema line")
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
        raise ValueError(f"{origin}: unexpected columns {reader.fieldnames}")
    rows = list(reader)
    for r in rows:
        if None in r or any(v is None for v in r.values()):
            raise ValueError(f"{origin}: ragged row {r}")
    return rows


def write_trajectory(path: Path, report) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "psnr", "ssim"))
        for k, p in enumerate(report.psnr, start=1):
            s = report.ssim[k - 1] if k - 1 < len(report.ssim) else ""
            w.writerow((k, f"{p:.6f}", f"{s:.6f}" if s != "" else ""))


# -- pyramid dump ---------------------------------------------------------------------

def dump_pyramid(pyr, directory) -> Path:
    """Write each band as an 8-bit PGM plus a ``manifest.json``.

    Masks are stored as 0/255 bytes. Real coefficient bands are mapped
    linearly from ``[min, max]`` to ``[0, 255]``; the manifest keeps both
    ends so the scaling can be undone to 8-bit precision.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    is_mask = isinstance(pyr, SupportMask)
    data = pyr.data
    bands = []
    names = [(lv, i, j) for lv in range(pyr.levels) for (i, j) in
             [(a, b) for a in range(3) for b in range(3) if (a, b) != (0, 0)]]
    names.append((pyr.levels - 1, 0, 0))
    for k, (lv, i, j) in enumerate(names):
        band = data[k]
        fname = f"band_L{lv}_{i}{j}.pgm"
        if is_mask:
            img = band.astype(np.float64) * 255.0
            entry = {"kind": "mask"}
        else:
            lo, hi = float(band.min()), float(band.max())
            img = np.zeros_like(band) if hi <= lo else (band - lo) * (255.0 / (hi - lo))
            entry = {"kind": "coefficients", "min": lo, "max": hi}
        save_image(img, directory / fname)
        entry.update({"index": k, "level": lv, "i": i, "j": j, "file": fname,
                      "lowpass": (i, j) == (0, 0)})
        bands.append(entry)
    manifest = {"format": "sdsr-pyramid", "version": 1, "levels": pyr.levels,
                "shape": list(data.shape[1:]), "bands": bands}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_pyramid_dump(directory):
    """Read a dump written by :func:`dump_pyramid` (masks exactly, coefficients to 8 bits)."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    levels = manifest["levels"]
    bands = sorted(manifest["bands"], key=lambda b: b["index"])
    data = np.stack([load_image(directory / b["file"]) for b in bands])
    if bands[0]["kind"] == "mask":
        return SupportMask(data > 127, levels)
    for k, b in enumerate(bands):
        data[k] = b["min"] + data[k] * (b["max"] - b["min"]) / 255.0
    return CoefficientPyramid(data, levels)


# -- degrade --------------------------------------------------------------------------

def degraded_path(out: Path, name: str, sid: int) -> Path:
    return out / "degraded" / f"{name}_s{sid}.npy"


def degrade_one(cfg: ExperimentConfig, spec: str, sid: int, out: Path):
    """Write f (exact ``.npy`` plus 8-bit preview), the PSF grid and a manifest."""
    sc = get_scenario(sid)
    truth = read_truth(spec)
    f = degrade(truth, sc, cfg.seed)
    name = image_name(spec)
    npy = degraded_path(out, name, sid)
    npy.parent.mkdir(parents=True, exist_ok=True)
    np.save(npy, f)
    save_image(f, npy.with_suffix(".pgm"))
    psf_dir = out / "psf"
    psf_dir.mkdir(parents=True, exist_ok=True)
    (psf_dir / f"{sc.psf_kind}.txt").write_text(make_psf(sc.psf_kind).to_text(), encoding="utf-8")
    manifest = {
        "image": spec, "image_name": name, "scenario": sid, "psf": sc.psf_kind,
        "sigma": sc.sigma, "seed": cfg.seed, "shape": list(f.shape),
        "noise": "PCG64 uniforms, Box-Muller normals", "sha256": _digest(f),
    }
    npy.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return f


def cmd_degrade(cfg: ExperimentConfig) -> list[Path]:
    out = Path(cfg.output_dir)
    write_resolved_config(cfg, out)
    written = []
    for spec in cfg.images:
        for sid in cfg.scenarios:
            degrade_one(cfg, spec, sid, out)
            written.append(degraded_path(out, image_name(spec), sid))
    return written


def observed(cfg: ExperimentConfig, spec: str, sid: int, out: Path) -> np.ndarray:
    """The degraded image for (image, scenario), reusing a stored one when present."""
    path = degraded_path(out, image_name(spec), sid)
    if path.exists():
        return np.load(path)
    return degrade_one(cfg, spec, sid, out)


# -- deblur -----------------------------------------------------------------------------

def _row(name, sid, method, levels, stage, rho, lam, report=None, truth=None, u=None, status="ok"):
    row = {"image": name, "scenario": sid, "method": method, "levels": levels, "stage": stage,
           "rho": rho, "lam": lam, "status": status}
    if report is not None:
        row.update(psnr=report.final_psnr, ssim=report.final_ssim, ar=report.accuracy,
                   iters=report.iterations, seconds=report.seconds, stop_reason=report.stop_reason)
    elif u is not None and truth is not None:
        row.update(psnr=psnr(u, truth), ssim=ssim(u, truth))
    return row


def plain_l0_reference(cfg: ExperimentConfig, f, op, truth, sigma):
    """Internal reference: plain l0 restoration with its own weight selection."""
    levels = cfg.reference_levels
    base = cfg.solver_config(levels, regularizer="plain_l0", track_ssim=False)
    lam, u, report, _ = select_lambda(
        lambda lam: mdal_solve(f, op, None, base.with_(lam=lam), f, truth=truth),
        cfg.lam_candidates(sigma), truth)
    return u, lam, report


def _reference_image(cfg, f, op, truth, sigma):
    # oracle runs take only the support from the truth; warm-starting from it
    # would leak the answer into the averaged output
    if cfg.reference == "file":
        return load_image(cfg.reference_path), None, None
    return plain_l0_reference(cfg, f, op, truth, sigma)


def _tracer(directory: Path, every: int):
    if every <= 0:
        return None

    def hook(stage, k, mean):
        if k % every == 0:
            save_image(mean, directory / f"stage{stage}_iter{k:04d}.pgm")

    directory.mkdir(parents=True, exist_ok=True)
    return hook


def deblur_task(args):
    """One (image, scenario, levels) job; returns result rows. Runs in a worker."""
    cfg, spec, sid, levels = args
    out = Path(cfg.output_dir)
    name = image_name(spec)
    sc = get_scenario(sid)
    truth = read_truth(spec)
    f = observed(cfg, spec, sid, out)
    op = BlurOperator.from_kind(sc.psf_kind, truth.shape)
    tag = f"{name}_s{sid}_L{levels}"
    rows = []
    rho = cfg.rho if cfg.rho is not None else default_rho(levels)

    try:
        if cfg.regularizer in ("plain_l0", "l1"):
            base = cfg.solver_config(levels)
            lam, u, report, _ = select_lambda(
                lambda lam: mdal_solve(f, op, None, base.with_(lam=lam), f, truth=truth),
                cfg.lam_candidates(sc.sigma), truth)
            write_trajectory(out / "trajectories" / f"{tag}_{cfg.regularizer}_stage1.csv", report)
            _save_restored(out, f"{tag}_{cfg.regularizer}", u)
            rows.append(_row(name, sid, cfg.regularizer, levels, 1, "", lam, report))
            return rows

        ref, ref_lam, ref_report = _reference_image(cfg, f, op, truth, sc.sigma)
        if ref_report is not None:
            rows.append(_row(name, sid, "plain_l0-ref", cfg.reference_levels, 0, "", ref_lam, ref_report))
        method = "oracle" if cfg.reference == "oracle" else "sdsr"
        base = cfg.solver_config(levels)
        tracer = _tracer(out / "trace" / tag, cfg.trace_every)

        masks = {}

        def solve(lam):
            kept = masks.setdefault(lam, [])
            return sdsr_run(f, op, base.with_(lam=lam), ref, truth=truth, oracle=method == "oracle",
                            stage_hook=lambda s, mask, _u: kept.append(mask))

        lam, u, reports, _ = select_lambda(solve, cfg.lam_candidates(sc.sigma), truth)
        if tracer is not None:  # replay the winner with tracing on
            sdsr_run(f, op, base.with_(lam=lam), ref, truth=truth, oracle=method == "oracle",
                     callback=tracer)
        system = FrameletSystem(levels)
        (out / "support").mkdir(parents=True, exist_ok=True)
        for report, mask in zip(reports, masks[lam]):
            rows.append(_row(name, sid, method, levels, report.stage, rho, lam, report))
            write_trajectory(out / "trajectories" / f"{tag}_{method}_stage{report.stage}.csv", report)
            save_image(support_map_image(mask, system),
                       out / "support" / f"{tag}_{method}_stage{report.stage}.pgm")
        _save_restored(out, f"{tag}_{method}", u)
    except SolverDivergedError as exc:
        log.error("%s diverged: %s", tag, exc)
        rows.append(_row(name, sid, cfg.regularizer, levels, "", rho, "", status=f"diverged@{exc.iteration}"))
    return rows


def _save_restored(out: Path, stem: str, u) -> None:
    d = out / "restored"
    d.mkdir(parents=True, exist_ok=True)
    np.save(d / f"{stem}.npy", u)
    save_image(u, d / f"{stem}.pgm")


def cmd_deblur(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    out = Path(cfg.output_dir)
    write_resolved_config(cfg, out)
    tasks = [(cfg, spec, sid, lv) for spec in cfg.images for sid in cfg.scenarios for lv in cfg.levels]
    # degraded inputs are produced up front so workers never race on them
    for spec in cfg.images:
        for sid in cfg.scenarios:
            observed(cfg, spec, sid, out)
    rows = [r for chunk in run_tasks(deblur_task, tasks, workers) for r in chunk]
    ResultsTable(out / "results.csv").append(rows)
    return rows


# -- rho sweep ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("rho", "psnr", "ssim", "lam", "ar", "support_size", "iters")


def sweep_task(args):
    cfg, f, op, ref, truth, levels, sigma, rho = args
    base = cfg.solver_config(levels, rho=rho)
    oracle = cfg.reference == "oracle"
    lam, u, reports, _ = select_lambda(
        lambda lam: sdsr_run(f, op, base.with_(lam=lam), ref, truth=truth, oracle=oracle),
        cfg.lam_candidates(sigma), truth)
    last = reports[-1]
    return {"rho": rho, "psnr": last.final_psnr, "ssim": last.final_ssim, "lam": lam,
            "ar": last.accuracy, "support_size": last.support_size, "iters": last.iterations}


def cmd_sweep_rho(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """PSNR/SSIM versus rho for the first image, scenario and level of the config."""
    out = Path(cfg.output_dir)
    write_resolved_config(cfg, out)
    spec, sid, levels = cfg.images[0], cfg.scenarios[0], cfg.levels[0]
    sc = get_scenario(sid)
    truth = read_truth(spec)
    f = observed(cfg, spec, sid, out)
    op = BlurOperator.from_kind(sc.psf_kind, truth.shape)
    ref, _, _ = _reference_image(cfg, f, op, truth, sc.sigma)
    grid = sorted(set(cfg.rho_grid))
    series = run_tasks(sweep_task, [(cfg, f, op, ref, truth, levels, sc.sigma, r) for r in grid], workers)
    path = out / f"sweep_rho_{image_name(spec)}_s{sid}_L{levels}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in series:
            w.writerow([ResultsTable._cell(row[c]) for c in SWEEP_COLUMNS])
    return series


# -- report -------------------------------------------------------------------------------

def _num(text, digits):
    if text == "":
        return "-"
    return f"{float(text):.{digits}f}"


def cmd_report(results_dir) -> Path:
    """Aggregate ``results.csv`` and trajectory files into ``report.md`` and plot data.

    Wall-clock columns are left out so that identical runs give identical bytes.
    """
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise ConfigError(f"results directory {results_dir} does not exist")
    table = results_dir / "results.csv"
    rows = ResultsTable(table).read() if table.exists() else []

    lines = ["# Deblurring results", ""]
    if not rows:
        lines.append("No results found.")
    by_scenario = {}
    for r in rows:
        by_scenario.setdefault(r["scenario"], []).append(r)
    for sid in sorted(by_scenario, key=int):
        group = sorted(by_scenario[sid], key=lambda r: (r["image"], r["method"], int(r["levels"] or 0),
                                                         int(r["stage"] or 0)))
        show_ar = any(r["ar"] for r in group)
        lines += ["", f"## Scenario {sid}", ""]
        head = ["image", "method", "L", "stage", "rho", "lambda", "PSNR (dB)", "SSIM"]
        if show_ar:
            head.append("AR")
        head += ["iters", "status"]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for r in group:
            cells = [r["image"], r["method"], r["levels"], r["stage"] or "-", r["rho"] or "-",
                     _num(r["lam"], 4), _num(r["psnr"], 2), _num(r["ssim"], 4)]
            if show_ar:
                cells.append(f"{100 * float(r['ar']):.2f}%" if r["ar"] else "-")
            cells += [r["iters"] or "-", r["status"]]
            lines.append("| " + " | ".join(cells) + " |")

    report = results_dir / "report.md"
    report.write_text("\n".join(lines) + "\n", encoding="utf-8")

    # one long-format file with every trajectory, for external plotting
    traj_dir = results_dir / "trajectories"
    with open(results_dir / "trajectories_long.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("run", "iteration", "psnr", "ssim"))
        if traj_dir.is_dir():
            for path in sorted(traj_dir.glob("*.csv")):
                with open(path, newline="", encoding="utf-8") as src:
                    reader = csv.reader(src)
                    if next(reader, None) != ["iteration", "psnr", "ssim"]:
                        raise ValueError(f"{path}: unexpected trajectory header")
                    for rec in reader:
                        w.writerow([path.stem] + rec)
    return report


# -- small utilities --------------------------------------------------------------------

def psf_text(kind_or_scenario: str) -> str:
    text = str(kind_or_scenario)
    if text.isdigit():
        try:
            kind = get_scenario(int(text)).psf_kind
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif text in PSF_KINDS:
        kind = text
    else:
        raise ConfigError(f"unknown PSF {text!r}; give a scenario id or one of {PSF_KINDS}")
    return make_psf(kind).to_text()


def cmd_support_map(image: str, levels: int, rho: float, out_dir, lowpass_in_threshold: bool = True):
    """Detect the support of an image, save its map and the per-band mask dump."""
    if image not in BUILTIN_IMAGES and not Path(image).is_file():
        raise ConfigError(f"image {image!r} does not exist")
    if levels < 1:
        raise ConfigError("levels must be >= 1")
    if rho < 1:
        raise ConfigError("rho must be >= 1")
    out = Path(out_dir)
    u = read_truth(image)
    system = FrameletSystem(levels)
    mask = detect_support(u, system, rho, lowpass_in_threshold)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{image_name(image)}_L{levels}_rho{rho:g}"
    save_image(support_map_image(mask, system), out / f"{stem}_support.pgm")
    dump_pyramid(mask, out / f"{stem}_mask")
    return mask


__all__ = [
    "ExperimentConfig", "ConfigError", "ResultsTable", "load_config", "validate", "parse_overrides",
    "cmd_degrade", "cmd_deblur", "cmd_sweep_rho", "cmd_report", "cmd_support_map", "psf_text",
    "dump_pyramid", "load_pyramid_dump", "worker_count", "THREADS_ENV", "plain_l0_reference",
]
