"""Command line entry points: ``seqreplay run`` and ``seqreplay sweep``.

Every file a run emits is a pure function of the canonical config, except
``manifest.json`` which also records wall-clock time.  Floats are written with
9 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import POPULATIONS
from .config import (ExperimentConfig, canonical_text, config_hash, parse_config,
                     with_overrides)
from .environment import write_codebook, write_sequences
from .errors import ConfigError, SeqReplayError
from .protocol import ExperimentResult, run_experiment

__all__ = ["RunManifest", "cmd_run", "cmd_sweep", "derive_seed", "write_result", "main"]

log = logging.getLogger("seqreplay")

OUT_ENV = "SEQREPLAY_OUT"
PHASES = ("online", "consolidation", "recall")


def fmt(x) -> str:
    return f"{float(x):.9g}"


def _plain(obj):
    """JSON-ready copy with numpy scalars unwrapped and floats cut to 9 digits."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    return obj


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    wall_seconds: float
    files: list[str]

    def to_json(self) -> str:
        return json.dumps({
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "wall_seconds": round(self.wall_seconds, 3),
            "files": self.files,
        }, indent=2, sort_keys=True) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _raster_rows(rasters: dict[str, np.ndarray]):
    rows = []
    for pop in POPULATIONS:
        t, i = np.nonzero(rasters[pop])
        rows.extend(zip(t.tolist(), [pop] * len(t), i.tolist()))
    rows.sort(key=lambda r: (r[0], POPULATIONS.index(r[1]), r[2]))
    return rows


def write_result(result: ExperimentResult, out: Path) -> list[str]:
    """Write every result file into ``out`` (which must exist); return their names."""
    files: dict[str, str | bytes] = {}
    files["config.txt"] = canonical_text(result.config)
    for name, report in result.reports.items():
        files[f"raster_{name}.csv"] = _csv_text(("timestep", "population", "neuron_id"),
                                                _raster_rows(report.rasters))
        ov = result.overlaps[name]
        header = ["timestep"] + [f"p{pid}" for pid in ov.pattern_ids]
        for pop in POPULATIONS:
            rows = ([t] + [fmt(v) for v in row] for t, row in enumerate(ov[pop]))
            files[f"overlap_{name}_{pop}.csv"] = _csv_text(header, rows)
        for when, snap in (("before", report.weights_before), ("after", report.weights_after)):
            for w, arr in snap.items():
                buf = io.BytesIO()
                np.save(buf, np.ascontiguousarray(arr, dtype="<f8"), allow_pickle=False)
                files[f"weights_{name}_{when}_{w}.npy"] = buf.getvalue()
    files["horizon.csv"] = _csv_text(("offset", "mean_overlap"),
                                     ((d, fmt(v)) for d, v in sorted(result.horizon.values.items())))
    files["summary.json"] = json.dumps(_plain(result.summary()), indent=2, sort_keys=True) + "\n"

    for name, data in files.items():
        mode = "wb" if isinstance(data, bytes) else "w"
        kw = {} if isinstance(data, bytes) else {"encoding": "utf-8", "newline": ""}
        with open(out / name, mode, **kw) as fh:
            fh.write(data)
    write_codebook(out / "codebook.tsv", result.codebook)
    write_sequences(out / "sequences.tsv", result.sequences)
    return sorted(list(files) + ["codebook.tsv", "sequences.tsv"])


def _publish(staging: Path, out: Path) -> None:
    if not out.exists():
        os.replace(staging, out)
        return
    for item in sorted(staging.iterdir()):
        os.replace(item, out / item.name)
    staging.rmdir()


def _execute(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    """Run ``cfg`` and publish its files to ``out`` only once all are written."""
    out = Path(out)
    if out.exists() and not out.is_dir():
        raise OSError(f"output path {out} exists and is not a directory")
    parent = out.parent
    parent.mkdir(parents=True, exist_ok=True)
    if out.exists() and not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=parent))
    try:
        names = write_result(result, staging)
        manifest = RunManifest(config_hash(cfg), cfg.seed, __version__,
                               time.perf_counter() - t0, names + ["manifest.json"])
        (staging / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
        _publish(staging, out)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return result


def _load(config_path, seed: int | None) -> ExperimentConfig:
    cfg = parse_config(config_path)
    if seed is not None:
        cfg = with_overrides(cfg, {"seed": seed})
    return cfg


def _resolve_out(out, cfg: ExperimentConfig) -> Path:
    if out is not None:
        return Path(out)
    root = os.environ.get(OUT_ENV)
    if not root:
        raise ConfigError(f"no output directory: pass --out or set {OUT_ENV}")
    return Path(root) / f"run-{config_hash(cfg)[:12]}"


def cmd_run(config_path, out_dir=None, seed: int | None = None) -> int:
    try:
        cfg = _load(config_path, seed)
        out = _resolve_out(out_dir, cfg)
        result = _execute(cfg, out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (OSError, SeqReplayError, ArithmeticError) as exc:
        log.error("run failed: %s", exc)
        return 1
    passed, total = result.accuracy
    log.info("accuracy %d/%d, results in %s", passed, total, out)
    return 0


def derive_seed(master_seed: int, param: str, value: str) -> int:
    """Per-run seed for one sweep value: first 8 bytes of a sha256, as a u64."""
    digest = hashlib.sha256(f"{master_seed}\x00{param}\x00{value}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _sweep_one(cfg: ExperimentConfig, param: str, value: str, out: Path):
    try:
        overrides = {param: value}
        if param != "seed":
            overrides["seed"] = derive_seed(cfg.seed, param, value)
        run_cfg = with_overrides(cfg, overrides)
        result = _execute(run_cfg, out)
    except Exception as exc:  # isolate sibling runs
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
    passed, total = result.accuracy
    return {"status": "ok", "seed": run_cfg.seed, "passed": passed, "total": total,
            "horizon": dict(result.horizon.values)}


def _safe(value: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in value)


def cmd_sweep(config_path, param: str, values, out_dir=None, seed: int | None = None,
              jobs: int = 1) -> int:
    try:
        cfg = _load(config_path, seed)
        if param not in cfg.flat():
            raise ConfigError(f"{param}: unknown key")
        values = [str(v).strip() for v in values]
        if not values or any(not v for v in values):
            raise ConfigError("--values must be a nonempty comma separated list")
        if len(set(values)) != len(values):
            raise ConfigError("--values contains duplicates")
        out = _resolve_out(out_dir, cfg)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except OSError as exc:
        log.error("sweep failed: %s", exc)
        return 1

    dirs = [out / f"{_safe(param)}={_safe(v)}" for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_one, cfg, param, v, d) for v, d in zip(values, dirs)]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_sweep_one(cfg, param, v, d) for v, d in zip(values, dirs)]

    offsets = sorted({d for o in outcomes if o["status"] == "ok" for d in o["horizon"]})
    header = ["param", "value", "seed", "status", "passed", "total"] + [
        f"profile_{d}" for d in offsets]
    rows = []
    for v, o in zip(values, outcomes):
        if o["status"] == "ok":
            rows.append([param, v, o["seed"], "ok", o["passed"], o["total"]]
                        + [fmt(o["horizon"][d]) if d in o["horizon"] else "" for d in offsets])
        else:
            log.error("sweep value %s failed: %s", v, o["error"])
            rows.append([param, v, "", "error", "", ""] + [""] * len(offsets))
    try:
        (out / "sweep.csv").write_text(_csv_text(header, rows), encoding="utf-8")
    except OSError as exc:
        log.error("cannot write sweep table: %s", exc)
        return 1
    failed = sum(o["status"] != "ok" for o in outcomes)
    log.info("sweep finished: %d/%d runs ok, table in %s", len(values) - failed,
             len(values), out / "sweep.csv")
    return 1 if failed else 0


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqreplay", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="key=value config file")
    common.add_argument("--out", help=f"output directory (default: under ${OUT_ENV})")
    common.add_argument("--seed", type=_u64, help="override the master seed")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one experiment")
    sw = sub.add_parser("sweep", parents=[common], help="run one experiment per value")
    sw.add_argument("--param", required=True, help="dotted config key to vary")
    sw.add_argument("--values", required=True, help="comma separated values")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed)
    return cmd_sweep(args.config, args.param, args.values.split(","), args.out, args.seed,
                     max(1, args.jobs))


if __name__ == "__main__":
    sys.exit(main())
