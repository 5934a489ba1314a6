"""Dispatch a validated config to its estimator and persist the results."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from .. import __version__
from ..environment import save_snapshot
from ..errors import IoError
from ..estimators import (block_decomposition, clt_sample, couple_demo, efron_stein_sum, estimate_lln_gap,
                          excursion_identity_check, influence_profile, ldp_check, lindeberg_sum, midpoint_tail,
                          near_vertical_gap, pinning_curve, row_maximum_quantile, variance_curve)
from ..estimators.common import Tabular
from .config import ExperimentConfig
from .oracle import OracleReport, validate_against_oracle

log = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
REPLICATE_FILE = "replicates.csv"
MANIFEST_FILE = "manifest.json"


@dataclass
class ValidationResult(Tabular):
    report: OracleReport

    def summary_rows(self):
        return self.report.rows()

    def replicate_rows(self):
        return []

    def summary_lines(self):
        return self.report.lines() or ["PASS (no instances)"]


@dataclass
class ResultRecord:
    """What one run produced: the estimator output plus the files written."""

    config: ExperimentConfig
    result: Tabular
    out_dir: Path
    files: dict[str, str] = field(default_factory=dict)
    passed: bool = True

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1

    @property
    def lines(self) -> list[str]:
        return self.result.summary_lines()


# ---------------------------------------------------------------- dispatch


def _influence(c: ExperimentConfig):
    b_low = c.B_low if c.B_low is not None else row_maximum_quantile(c.spec, c.x_max)
    b_high = c.B_high if c.B_high is not None else b_low + 1.0
    return influence_profile(c.spec, c.n, c.rows, c.x_max, b_low, b_high, c.replicate_count, c.mode, c.seed,
                             c.threads, epsilon=c.epsilon)


DISPATCH: dict[str, Callable[[ExperimentConfig], Tabular]] = {
    "validate": lambda c: ValidationResult(validate_against_oracle(c.seed, c.instance_count)),
    "lln": lambda c: estimate_lln_gap(c.spec, c.n_list, c.replicate_count, c.geometry, c.mode, c.seed, c.threads,
                                      c.level),
    "pinning": lambda c: pinning_curve(c.spec, c.n, c.s1, c.s2_list, c.replicate_count, c.mode, c.seed, c.threads,
                                       c.fit_range),
    "midpoint": lambda c: midpoint_tail(c.spec, c.n, c.k_list, c.replicate_count, c.mode, c.seed, c.threads,
                                        c.fit_range),
    "variance": lambda c: variance_curve(c.spec, c.n_list, c.replicate_count, c.mode, c.seed, c.threads),
    "clt": lambda c: clt_sample(c.spec, c.n, c.replicate_count, c.mode, c.seed, c.threads, c.alpha),
    "blocks": lambda c: block_decomposition(c.spec, c.n, c.J, c.K, c.replicate_count, c.mode, c.seed, c.threads,
                                            c.eps_hwy),
    "near-vertical": lambda c: near_vertical_gap(c.spec, c.n_list, c.y_rule_value, c.replicate_count, c.mode,
                                                 c.seed, c.threads),
    "ldp": lambda c: ldp_check(c.spec, c.t_list, c.delta, c.replicate_count, c.mode, c.seed, c.threads,
                               c.cutoff_power, c.level),
    "influence": _influence,
    "efron-stein": lambda c: efron_stein_sum(c.spec, c.n, c.replicate_count, c.mode, c.seed, c.threads),
    "lindeberg": lambda c: lindeberg_sum(c.spec, c.n, c.epsilon_list, c.replicate_count, c.mode, c.seed,
                                         c.threads, c.J, c.K, c.min_blocks),
    "excursion": lambda c: excursion_identity_check(c.spec, c.n, c.replicate_count, c.mode, c.seed, c.threads,
                                                    c.alpha),
    "couple-demo": lambda c: couple_demo(c.spec, c.u, c.v, c.u2, c.v2, c.replicate_count, c.mode, c.seed,
                                         c.threads),
}


# ---------------------------------------------------------------- persistence


def format_value(value) -> str:
    """CSV cell text; floats keep 17 significant digits so they round-trip."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "%.17g" % value
    if value is None:
        return ""
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


def write_csv(path: Path, rows: Sequence[dict]) -> None:
    columns: dict[str, None] = {}
    for row in rows:
        for key in row:
            columns.setdefault(key, None)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow([format_value(row.get(k)) for k in columns])


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def verify_manifest(out_dir: str | Path) -> bool:
    """True iff every checksum listed in the manifest matches the file on disk."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / MANIFEST_FILE).read_text())
    return all((out_dir / name).is_file() and sha256_file(out_dir / name) == digest
               for name, digest in manifest["files"].items())


def run_experiment(config: ExperimentConfig, dump_env: Sequence[int] | bool | None = None,
                   echo: Callable[[str], None] | None = print) -> ResultRecord:
    """Run ``config`` and write ``summary.csv``, ``replicates.csv`` and ``manifest.json`` to ``config.out``.

    ``dump_env`` writes ``env-<r>.hspe`` snapshots: ``True`` (or the
    config flag) for every replicate, or an explicit list of indices.
    """
    out_dir = Path(config.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc.strerror}") from None
    started = _now()
    log.info("running %s with seed %d", config.experiment, config.seed)
    result = DISPATCH[config.experiment](config)

    files = {}
    try:
        write_csv(out_dir / SUMMARY_FILE, result.summary_rows())
        write_csv(out_dir / REPLICATE_FILE, result.replicate_rows())
    except OSError as exc:
        raise IoError(f"cannot write results to {out_dir}: {exc.strerror}") from None
    for name in (SUMMARY_FILE, REPLICATE_FILE):
        files[name] = sha256_file(out_dir / name)

    if dump_env is None:
        dump_env = config.dump_env
    if dump_env is not False and dump_env is not None and result.env_source is not None:
        indices = range(config.replicate_count) if dump_env is True else dump_env
        for r in indices:
            name = f"env-{int(r)}.hspe"
            save_snapshot(result.env_source.environment(int(r)), out_dir / name)
            files[name] = sha256_file(out_dir / name)

    passed = result.report.passed if isinstance(result, ValidationResult) else True
    manifest = {
        "artifact_version": __version__,
        "config": json.loads(config.canonical()),
        "config_canonical": config.canonical(),
        "config_hash": config.config_hash(),
        "experiment": config.experiment,
        "seed": config.seed,
        "started": started,
        "finished": _now(),
        "passed": passed,
        "files": files,
    }
    (out_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    record = ResultRecord(config, result, out_dir, files, passed)
    if echo is not None:
        for line in record.lines:
            echo(f"{config.experiment}: {line}")
    return record

