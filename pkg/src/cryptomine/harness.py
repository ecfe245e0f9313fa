"""Experiment orchestration: dataset build, estimator run, sweeps and report files."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .huncc import HunccConfig, build_pair_dataset, dataset_digest
from .mine import MineConfig, TrainingError, TrainTrace, train
from .scenarios import (
    PROFILES,
    Profile,
    Scenario,
    SweepSpec,
    huncc_scenario,
    probe_scenario,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("scenario", "alpha", "scheme", "final_mi_nats", "seed", "n_samples", "epochs")
# slack above ln(eval batch) tolerated before a run is rejected
CEILING_SLACK = 0.5


class ScenarioError(RuntimeError):
    """A scenario failed; the message names the scenario."""


@dataclass
class Report:
    scenario: str
    scheme: str
    alpha: float | None
    seed: int
    n_samples: int
    epochs: int
    final_mi_nats: float
    dataset_digest: str
    config_echo: dict[str, Any]
    metadata: dict[str, Any] = field(default_factory=dict)
    trace: TrainTrace = field(default_factory=TrainTrace, repr=False)

    def row(self) -> dict[str, Any]:
        return {c: getattr(self, c) for c in CSV_COLUMNS}

    def to_dict(self) -> dict[str, Any]:
        d = {k: v for k, v in dataclasses.asdict(self).items() if k != "trace"}
        d["trace"] = [dataclasses.asdict(p) for p in self.trace.points]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Report":
        from .mine import TracePoint

        d = dict(d)
        trace = TrainTrace()
        for p in d.pop("trace", []):
            trace.append(TracePoint(**p))
        return cls(**d, trace=trace)


def _profile(profile: Profile | str) -> Profile:
    if isinstance(profile, Profile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}") from None


def ceiling(cfg: MineConfig) -> float:
    """Largest DV value attainable on the evaluation batch (ln of its size)."""
    return math.log(cfg.eval_size)


def run_scenario(scn: Scenario, profile: Profile | str = "quick",
                 huncc_cfg: HunccConfig | None = None) -> Report:
    """Build the scenario's dataset, train the estimator and report the smoothed MI."""
    prof = _profile(profile)
    n = scn.resolved_samples(prof)
    try:
        cfg = scn.mine_config(prof)
        ds = build_pair_dataset(scn, n, huncc_cfg=huncc_cfg)
        _, trace = train(ds, cfg)
    except (TrainingError, ValueError, ArithmeticError) as exc:
        raise ScenarioError(f"scenario {scn.name!r} (seed {scn.seed}): {exc}") from exc
    final = trace.final_estimate() if len(trace) else 0.0
    top = ceiling(cfg)
    if final > top + CEILING_SLACK:
        raise ScenarioError(
            f"scenario {scn.name!r}: estimate {final:.4f} exceeds ln(eval batch) "
            f"{top:.4f} + {CEILING_SLACK}"
        )
    meta = {
        "profile": prof.name,
        "eval_batch_size": cfg.eval_size,
        "ceiling_nats": top,
        "reported_estimate": "mean of EMA over final 10% of trace points",
    }
    if scn.probe_view is not None:
        meta["probe_view"] = scn.probe_view
    return Report(
        scenario=scn.name,
        scheme=scn.scheme,
        alpha=scn.source.alpha,
        seed=scn.seed,
        n_samples=n,
        epochs=cfg.epochs,
        final_mi_nats=final,
        dataset_digest=dataset_digest(ds),
        config_echo={"scenario": scn.to_dict(), "mine": dataclasses.asdict(cfg)},
        metadata=meta,
        trace=trace,
    )


def _sweep_cell(args):
    scn, prof = args
    try:
        return run_scenario(scn, prof), None
    except ScenarioError as exc:
        return None, str(exc)


def sweep_cells(spec: SweepSpec) -> list[Scenario]:
    cells = []
    for alpha in spec.alphas:
        for scheme in spec.schemes:
            for seed in spec.seeds:
                cells.append(huncc_scenario(alpha, scheme, seed=seed, n_samples=spec.n_samples))
    return cells


def sweep_alpha(spec: SweepSpec, profile: Profile | str = "quick",
                jobs: int | None = None) -> tuple[list[Report], list[str]]:
    """Run every (alpha, scheme, seed) cell. Failed cells are logged and skipped;
    the returned reports keep the grid order."""
    prof = _profile(profile)
    cells = sweep_cells(spec)
    jobs = jobs or os.cpu_count() or 1
    work = [(c, prof) for c in cells]
    if jobs == 1 or len(cells) == 1:
        results = [_sweep_cell(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as pool:
            results = list(pool.map(_sweep_cell, work))
    reports, errors = [], []
    for rep, err in results:
        if err is not None:
            log.error("sweep cell failed: %s", err)
            errors.append(err)
        else:
            reports.append(rep)
    return reports, errors


def sweep_table(reports: Iterable[Report]) -> dict[tuple[float, str], float]:
    """Seed-averaged estimate per (alpha, scheme)."""
    acc: dict[tuple[float, str], list[float]] = {}
    for r in reports:
        acc.setdefault((r.alpha, r.scheme), []).append(r.final_mi_nats)
    return {k: float(np.mean(v)) for k, v in acc.items()}


def individual_secrecy_probe(cfg: HunccConfig | None = None, n_samples: int | None = None,
                             seed: int = 0, profile: Profile | str = "quick",
                             view: str = "fixed_message", fixed_link: int = 0) -> Report:
    """One message fixed to all-ones, the rest uniform, through HUNCC.

    ``view`` picks the estimator's x: the fixed message alone (16 bytes) or
    all plaintext messages (the fixed one included).
    """
    n_links = cfg.n_links if cfg else 8
    n_encrypted = cfg.n_encrypted if cfg else 1
    scn = probe_scenario(view, seed=seed, n_samples=n_samples, n_encrypted=n_encrypted,
                         fixed_link=fixed_link)
    if n_links != scn.n_links:
        scn = dataclasses.replace(scn, n_links=n_links)
    return run_scenario(scn, profile, huncc_cfg=cfg)


# ---------------------------------------------------------------------------
# output


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(reports: Iterable[Report]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([_fmt(r.row()[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit(reports: Report | Iterable[Report], fmt: str, path: str | Path) -> Path:
    """Write one report or a table of reports as CSV or JSON."""
    if isinstance(reports, Report):
        reports = [reports]
    reports = list(reports)
    path = Path(path)
    if fmt == "csv":
        text = rows_to_csv(reports)
    elif fmt == "json":
        text = json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path.write_text(text)
    return path


def load_json_reports(path: str | Path) -> list[Report]:
    return [Report.from_dict(d) for d in json.loads(Path(path).read_text())]


def trace_filename(r: Report) -> str:
    return f"{r.scenario}_seed{r.seed}_trace.csv"


def write_outputs(reports: list[Report], out_dir: str | Path, fmt: str = "csv",
                  stem: str = "results") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in reports:
        r.trace.to_csv(out / trace_filename(r))
    return emit(reports, fmt, out / f"{stem}.{fmt}")
