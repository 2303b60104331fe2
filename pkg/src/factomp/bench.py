"""Monte-Carlo harness: paired accuracy/speed comparison over grid densities."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from threadpoolctl import threadpool_limits

from . import radar, solver

log = logging.getLogger(__name__)

RAW_HEADER = ["algo", "n_star", "trial", "seed", "time_total_ns", "time_select_ns",
              "time_refit_ns", "time_correct_ns", "misses", "k"]
SUMMARY_HEADER = ["algo", "n_star", "trials", "miss_rate", "miss_ci95",
                  "time_median_ns", "time_mean_ns"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    radar: radar.RadarConfig = field(default_factory=radar.RadarConfig)
    K: int = 5
    grid_sizes: list[int] = field(default_factory=lambda: [16, 32, 64, 128])
    algorithms: list[str] = field(default_factory=lambda: list(solver.ALGORITHMS))
    trials: int = 200
    base_seed: int = 0
    noise_sigma: float = 0.0
    min_separation: float = 2.0
    out_dir: str = "results"
    svg: bool = False
    parallel: bool = False

    def validate(self) -> "ExperimentSpec":
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.K < 0:
            raise ConfigError("K must be >= 0")
        if not self.grid_sizes or any(int(n) < 2 for n in self.grid_sizes):
            raise ConfigError("grid_sizes must be a nonempty list of values >= 2")
        bad = [a for a in self.algorithms if a not in solver.ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms {bad}; choose from {solver.ALGORITHMS}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        data = dict(data)
        try:
            if "radar" in data:
                data["radar"] = radar.RadarConfig(**data["radar"])
            spec = cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        spec.grid_sizes = [int(n) for n in spec.grid_sizes]
        spec.algorithms = list(spec.algorithms)
        return spec.validate()

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data.get("spec", data))


@dataclass
class TrialRecord:
    algo: str
    n_star: int
    trial: int
    seed: int
    time_total_ns: int
    time_select_ns: int
    time_refit_ns: int
    time_correct_ns: int
    misses: int
    k: int
    distances: tuple = ()
    checksum: str = ""

    def row(self) -> list:
        return [getattr(self, h) for h in RAW_HEADER]


def trial_seed(spec: ExperimentSpec, trial: int) -> int:
    return spec.base_seed + trial


def trial_measurement(spec: ExperimentSpec, trial: int,
                      scene_factory: Callable | None = None):
    """Scene and measurement for one trial; depends only on (base_seed, trial)."""
    seed = trial_seed(spec, trial)
    for attempt in range(100):
        rng = np.random.default_rng(seed if attempt == 0 else [seed, attempt])
        try:
            if scene_factory is not None:
                scene = scene_factory(spec, rng)
            else:
                scene = radar.generate_random_scene(spec.K, spec.radar, rng,
                                                    min_separation=spec.min_separation,
                                                    noise_sigma=spec.noise_sigma)
            break
        except radar.InfeasibleScene:
            log.warning("trial %d: infeasible scene on attempt %d, reseeding", trial, attempt)
    else:
        raise radar.InfeasibleScene(f"trial {trial}: no feasible scene after 100 attempts")
    Y = radar.synthesize_measurement(scene, spec.radar, rng)
    return seed, scene, Y


def checksum(Y: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(Y).tobytes()).hexdigest()[:16]


def _run_trial(spec, trial, n_star, d, dense, timing, scene_factory):
    seed, scene, Y = trial_measurement(spec, trial, scene_factory)
    digest = checksum(Y)
    log.debug("trial %d N*=%d seed %d checksum %s", trial, n_star, seed, digest)
    out = []
    for algo in spec.algorithms:
        sol = solver.solve(algo, Y, d, scene.K, dense) if scene.K else None
        est = radar.estimates_from_solution(sol.params, spec.radar) if sol else []
        misses, dist = radar.evaluate_misses(est, scene, spec.radar)
        t = sol.timings if (sol and timing) else {}
        out.append(TrialRecord(algo, n_star, trial, seed, t.get("total", 0), t.get("select", 0),
                               t.get("refit", 0), t.get("correct", 0), misses, scene.K,
                               tuple(float(x) for x in dist), digest))
    return out


def run_experiment(spec: ExperimentSpec, scene_factory: Callable | None = None) -> list[TrialRecord]:
    """Every requested algorithm sees the same measurement for a given (trial, N*).

    Timed runs are single-threaded with one untimed warm-up solve per
    (algorithm, N*). ``spec.parallel`` fans trials over threads and
    zeroes all timing columns.
    """
    spec.validate()
    timing = not spec.parallel
    records: list[TrialRecord] = []
    for n_star in spec.grid_sizes:
        d = spec.radar.dictionary(n_star)
        needs_dense = any(a in ("omp", "comp") for a in spec.algorithms)
        dense = solver.DenseDictionary(d) if needs_dense else None
        log.info("N*=%d: %d trials of %s", n_star, spec.trials, ",".join(spec.algorithms))
        if timing:
            with threadpool_limits(1):
                _, scene, Y = trial_measurement(spec, 0, scene_factory)
                if scene.K:
                    for algo in spec.algorithms:
                        solver.solve(algo, Y, d, scene.K, dense)
                for trial in range(spec.trials):
                    records += _run_trial(spec, trial, n_star, d, dense, True, scene_factory)
        else:
            with ThreadPoolExecutor(max_workers=os.cpu_count() or 1) as pool:
                futures = [pool.submit(_run_trial, spec, trial, n_star, d, dense, False, scene_factory)
                           for trial in range(spec.trials)]
                for f in futures:
                    records += f.result()
    return records


def summarize(records: Iterable[TrialRecord]) -> list[dict]:
    """Per (algorithm, N*) miss rate with normal-approximation 95% CI and times."""
    groups: dict[tuple[str, int], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.algo, int(r.n_star)), []).append(r)
    order = {a: i for i, a in enumerate(solver.ALGORITHMS)}
    rows = []
    for (algo, n_star) in sorted(groups, key=lambda g: (order.get(g[0], 99), g[0], g[1])):
        recs = groups[(algo, n_star)]
        targets = sum(r.k for r in recs)
        rate = sum(r.misses for r in recs) / targets if targets else 0.0
        ci = 1.96 * math.sqrt(rate * (1 - rate) / targets) if targets else 0.0
        times = np.array([r.time_total_ns for r in recs], dtype=float)
        rows.append({"algo": algo, "n_star": n_star, "trials": len(recs), "miss_rate": rate,
                     "miss_ci95": ci, "time_median_ns": float(np.median(times)),
                     "time_mean_ns": float(np.mean(times))})
    return rows


# -- files -------------------------------------------------------------------

def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_raw_csv(records: Iterable[TrialRecord], path) -> Path:
    path = Path(path)
    with _open_for_write(path) as f:
        w = csv.writer(f)
        w.writerow(RAW_HEADER)
        for r in records:
            w.writerow(r.row())
    return path


def read_raw_csv(path) -> list[TrialRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RAW_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [TrialRecord(row["algo"], *(int(row[h]) for h in RAW_HEADER[1:]))
                for row in reader]


def write_summary_csv(summary: list[dict], path) -> Path:
    path = Path(path)
    with _open_for_write(path) as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_HEADER)
        w.writeheader()
        for row in summary:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return path


def read_summary_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{"algo": r["algo"], "n_star": int(r["n_star"]), "trials": int(r["trials"]),
                 **{k: float(r[k]) for k in SUMMARY_HEADER[3:]}}
                for r in csv.DictReader(f)]


def write_manifest(spec: ExperimentSpec, path, extra: dict | None = None) -> Path:
    path = Path(path)
    doc = {"spec": spec.to_dict(), "seeds": {"base_seed": spec.base_seed,
                                             "trial_seed": "base_seed + trial"}}
    doc.update(extra or {})
    with _open_for_write(path) as f:
        json.dump(doc, f, indent=2)
    return path


def write_svg_charts(summary: list[dict], out_dir) -> list[Path]:
    """Time-vs-N* and miss-rate-vs-N* line charts on log axes."""
    from matplotlib.figure import Figure

    out_dir = Path(out_dir)
    paths = []
    for key, label, fname in (("time_median_ns", "median solve time [ns]", "time.svg"),
                              ("miss_rate", "miss rate", "miss_rate.svg")):
        fig = Figure(figsize=(5, 3.5))
        ax = fig.add_subplot()
        for algo in dict.fromkeys(r["algo"] for r in summary):
            rows = [r for r in summary if r["algo"] == algo]
            ax.plot([r["n_star"] for r in rows], [r[key] for r in rows], marker="o", label=algo)
        ax.set_xscale("log", base=2)
        if key == "miss_rate":
            ax.set_yscale("symlog", linthresh=1e-3)
        else:
            ax.set_yscale("log")
        ax.set_xlabel("N*")
        ax.set_ylabel(label)
        ax.legend()
        fig.tight_layout()
        path = out_dir / fname
        try:
            fig.savefig(path, format="svg")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        paths.append(path)
    return paths


def emit_outputs(records, summary, spec: ExperimentSpec, out_dir=None, svg=None) -> dict[str, Path]:
    out_dir = Path(out_dir or spec.out_dir)
    svg = spec.svg if svg is None else svg
    checks = {}
    for r in records:
        checks.setdefault(f"{r.n_star}:{r.trial}", r.checksum)
    paths = {
        "raw": write_raw_csv(records, out_dir / "raw.csv"),
        "summary": write_summary_csv(summary, out_dir / "summary.csv"),
        "manifest": write_manifest(spec, out_dir / "manifest.json",
                                   {"measurement_checksums": checks}),
    }
    if svg:
        paths["svg_time"], paths["svg_miss"] = write_svg_charts(summary, out_dir)
    return paths
