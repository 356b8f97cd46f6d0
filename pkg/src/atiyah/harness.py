"""Verification campaigns, |D| minimization and campaign persistence.

Every sample is a pure function of ``(spec, index)``: its random stream is
seeded by ``sample_seed(spec.seed, index)``.  That makes runs reproducible
sample for sample, lets a campaign be split across worker processes, and
lets it be resumed by appending later index ranges to the same file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__, kernels, precision
from .determinant import RCOND_CUTOFF, atiyah_lines, real_spinor_table, spinor_table
from .geometry import EPS_SEP, Configuration, Sampler, sample_configuration, sample_with_rng
from .labels import Label
from .operad import (
    ClusterTree,
    LabeledState,
    collinear_state,
    independence_margin,
    leaf_direction_table,
    nu_compose,
    nu_compose_real,
    sample_tree,
)

log = logging.getLogger(__name__)

TARGETS = ("strong-complex", "strong-real", "weak-complex", "weak-real", "e3", "e2", "minimize")
STATE_RETRIES = 100
STATE_MIN_MARGIN = 1e-6

LOW_CONFIDENCE = "LOW_CONFIDENCE"
DEGENERATE = "DEGENERATE"


@dataclass(frozen=True)
class CampaignSpec:
    target: str
    n: int
    k: tuple[int, ...] | None = None
    sampler: str = "uniform-ball"
    sample_count: int = 1
    seed: int = 0
    start_index: int = 0
    tol_violation: float = 1e-9
    tol_margin: float = 1e-10
    k_max: int = 12
    tree_kind: str = "flat"
    state_kind: str = "random"
    dim: int | None = None
    restarts: int = 20
    max_iter: int = 4000
    dps: int = precision.DEFAULT_DPS

    def __post_init__(self) -> None:
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; choose from {TARGETS}")
        if self.n < (1 if self.target in ("e3", "e2") else 2):
            raise ValueError(f"n = {self.n} is too small for target {self.target}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        if not (self.tol_violation > 0 and self.tol_margin > 0):
            raise ValueError("tolerances must be positive")
        Sampler.parse(self.sampler)
        if self.target in ("e3", "e2"):
            k = tuple(int(x) for x in (self.k or (1,) * self.n))
            object.__setattr__(self, "k", k)
            if len(k) != self.n or min(k) < 1:
                raise ValueError(f"k must list {self.n} positive block sizes")
            if sum(k) > self.k_max:
                raise ValueError(f"sum(k) = {sum(k)} exceeds k_max = {self.k_max}")
            if self.tree_kind not in ("flat", "nested"):
                raise ValueError("tree_kind must be 'flat' or 'nested'")
            if self.state_kind not in ("random", "collinear"):
                raise ValueError("state_kind must be 'random' or 'collinear'")
        elif self.k is not None:
            object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        if self.target == "minimize":
            if self.dim is None:
                object.__setattr__(self, "dim", 3)
            if self.dim not in (2, 3):
                raise ValueError("dim must be 2 or 3")
            if self.restarts < 1:
                raise ValueError("restarts must be at least 1")

    @property
    def real(self) -> bool:
        return self.target in ("strong-real", "weak-real", "e2") or (self.target == "minimize" and self.dim == 2)

    @property
    def space_dim(self) -> int:
        if self.target == "minimize":
            return self.dim
        return 2 if self.real else 3

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["k"] = list(self.k) if self.k is not None else None
        return d

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> CampaignSpec:
        obj = dict(obj)
        if obj.get("k") is not None:
            obj["k"] = tuple(obj["k"])
        return cls(**obj)

    def identity(self) -> dict[str, Any]:
        """Fields that must agree for two segments to belong to one campaign."""
        d = self.to_json()
        d.pop("sample_count")
        d.pop("start_index")
        return d


@dataclass
class SampleRecord:
    index: int
    seed: int
    input_hash: str
    value: float | None
    log_value: float | None = None
    flags: list[str] = field(default_factory=list)
    confirmation: dict[str, Any] | None = None
    points: list | None = None
    trace: list | None = None

    def to_json(self) -> dict[str, Any]:
        d = {"type": "sample"}
        d.update({k: v for k, v in asdict(self).items() if v is not None})
        return d

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SampleRecord:
        obj = {k: v for k, v in obj.items() if k != "type"}
        return cls(**obj)


@dataclass
class CampaignReport:
    spec: CampaignSpec
    records: list[SampleRecord]
    environment: dict[str, Any]
    runtime_ms: float = 0.0

    @property
    def summary(self) -> dict[str, Any]:
        return summarize(self.spec, self.records, self.runtime_ms)

    @property
    def confirmed_violations(self) -> int:
        return self.summary["confirmed_violations"]

    def values(self) -> np.ndarray:
        return np.array([np.nan if r.value is None else r.value for r in self.records])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CampaignReport):
            return NotImplemented
        return self.spec == other.spec and self.records == other.records and self.environment == other.environment


def sample_seed(seed: int, index: int) -> int:
    """64-bit seed of sample ``index`` in a campaign seeded with ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def input_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=complex if np.iscomplexobj(a) else float).tobytes())
    return h.hexdigest()[:16]


def environment() -> dict[str, Any]:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "kernel_backend": kernels.BACKEND,
        "package_version": __version__,
    }


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ATIYAH_THREADS", "1")))
    except ValueError:
        return 1


def summarize(spec: CampaignSpec, records: Sequence[SampleRecord], runtime_ms: float = 0.0) -> dict[str, Any]:
    """Aggregate records; only unflagged values enter the minimum."""
    good = [r for r in records if not r.flags and r.value is not None]
    best = min(good, key=lambda r: (r.value, r.index)) if good else None
    threshold = _threshold(spec)
    below = [r for r in good if r.value < threshold]
    confirmed = [r for r in records if r.confirmation and r.confirmation.get("confirmed")]
    out = {
        "target": spec.target,
        "n": spec.n,
        "k": list(spec.k) if spec.k else None,
        "samples": len(records),
        "flagged": len(records) - len(good),
        "min": best.value if best else None,
        "argmin_index": best.index if best else None,
        "argmin_seed": best.seed if best else None,
        "count_below_threshold": len(below),
        "confirmed_violations": len(confirmed),
        "threshold": threshold,
        "runtime_ms": runtime_ms,
        "seed": spec.seed,
        "defaults_note": "samplers and tolerances are this package's own campaign defaults",
    }
    if best is not None and best.points is not None:
        out["argmin_points"] = best.points
    if spec.target == "minimize" and spec.n == 2:
        out["constant_objective"] = True
    return out


def _threshold(spec: CampaignSpec) -> float:
    if spec.target.startswith("strong"):
        return 1.0 - spec.tol_violation
    if spec.target == "minimize":
        return math.log1p(-spec.tol_violation)
    return spec.tol_margin


# --- per-sample evaluation ------------------------------------------------------------


def sample_input(spec: CampaignSpec, index: int):
    """Regenerate the input of sample ``index``: a configuration, or (tree, states)."""
    s = sample_seed(spec.seed, index)
    sampler = Sampler.parse(spec.sampler)
    if spec.target in ("e3", "e2"):
        rng = np.random.default_rng(s)
        dim = spec.space_dim
        if spec.tree_kind == "flat":
            tree = ClusterTree.corolla(sample_with_rng(rng, spec.n, dim, sampler)) if spec.n > 1 else ClusterTree.identity(dim)
        else:
            tree = sample_tree(spec.n, dim, rng, sampler=sampler)
        states = [_sample_state(k, rng, spec.real, spec.state_kind) for k in spec.k]
        return s, (tree, states)
    return s, sample_configuration(spec.n, spec.space_dim, sampler, s)


def sample_independent_labels(k: int, rng: np.random.Generator, real: bool = False) -> list[Label]:
    """Random projectively independent k-tuple of labels of degree k-1."""
    for _ in range(STATE_RETRIES):
        if real:
            m = rng.standard_normal((k, k))
        else:
            m = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        labels = [Label(row) for row in m]
        if independence_margin(labels) >= STATE_MIN_MARGIN:
            return labels
    raise RuntimeError(f"no independent {k}-tuple after {STATE_RETRIES} draws")


def _sample_state(k: int, rng: np.random.Generator, real: bool, kind: str) -> LabeledState:
    if kind == "collinear":
        st = collinear_state(k)
        if real:
            st = LabeledState(st.grouping, tuple(Label(y.coeffs.real) for y in st.labels))
        return st
    return LabeledState.flat(sample_independent_labels(k, rng, real))


def _evaluate_chunk(spec_json: dict[str, Any], indices: Sequence[int]) -> list[SampleRecord]:
    spec = CampaignSpec.from_json(spec_json)
    if spec.target.startswith("strong"):
        return _strong_chunk(spec, indices)
    if spec.target.startswith("weak"):
        return [_weak_sample(spec, i) for i in indices]
    return [_e3_sample(spec, i) for i in indices]


def _strong_chunk(spec: CampaignSpec, indices: Sequence[int]) -> list[SampleRecord]:
    seeds, configs = zip(*(sample_input(spec, i) for i in indices))
    pts = np.stack([c.points for c in configs])
    log_abs, _, rcond = kernels.batch_eval(pts, spec.real, EPS_SEP)
    out = []
    threshold = _threshold(spec)
    for idx, s, c, la, rc in zip(indices, seeds, configs, log_abs, rcond):
        flags = []
        if not np.isfinite(rc):
            flags.append(DEGENERATE)
        elif rc < RCOND_CUTOFF:
            flags.append(LOW_CONFIDENCE)
        value = float(math.exp(la)) if np.isfinite(la) else (0.0 if la == -np.inf else None)
        rec = SampleRecord(int(idx), int(s), input_hash(c.points), value, float(la) if np.isfinite(la) else None, flags)
        if value is not None and value < threshold:
            ext = abs(precision.D(c.points, spec.real, spec.dps))
            rec.confirmation = {"dps": spec.dps, "abs_D": float(ext), "confirmed": bool(ext < threshold)}
            rec.points = c.points.tolist()
            log.warning("sample %d: |D| = %.17g below threshold; extended precision gives %.17g", idx, value, float(ext))
        out.append(rec)
    return out


def weak_margin(c: Configuration) -> float:
    table = real_spinor_table(c) if c.dim == 2 else spinor_table(c)
    return independence_margin(atiyah_lines(table))


def _weak_sample(spec: CampaignSpec, index: int) -> SampleRecord:
    s, c = sample_input(spec, index)
    m = weak_margin(c)
    rec = SampleRecord(index, s, input_hash(c.points), m)
    if m < spec.tol_margin:
        ext = precision.atiyah_margin(c.points, spec.real, spec.dps)
        rec.confirmation = {"dps": spec.dps, "margin": ext, "confirmed": bool(ext < spec.tol_margin)}
        rec.points = c.points.tolist()
    return rec


def e3_output(spec: CampaignSpec, tree: ClusterTree, states: Sequence[LabeledState]) -> LabeledState:
    return nu_compose_real(tree, states) if spec.real else nu_compose(tree, states)


def _e3_sample(spec: CampaignSpec, index: int) -> SampleRecord:
    s, (tree, states) = sample_input(spec, index)
    out = e3_output(spec, tree, states)
    m = independence_margin(out.labels)
    coeffs = [y.coeffs for st in states for y in st.labels]
    rec = SampleRecord(index, s, input_hash(*[v.config.points for v in tree.vertices()], *coeffs), m)
    if m < spec.tol_margin:
        dirs = leaf_direction_table(tree).tolist()
        ext = precision.weighted_margin(
            dirs, list(spec.k), [[y.coeffs.tolist() for y in st.labels] for st in states], spec.real, spec.dps
        )
        rec.confirmation = {"dps": spec.dps, "margin": ext, "confirmed": bool(ext < spec.tol_margin)}
    return rec


# --- campaign drivers ----------------------------------------------------------------


def _chunks(indices: Sequence[int], size: int) -> list[list[int]]:
    return [list(indices[i : i + size]) for i in range(0, len(indices), size)]


def _run(
    spec: CampaignSpec, out: str | Path | None, workers: int | None, append: bool = False, chunk: int = 2000
) -> CampaignReport:
    workers = workers or default_workers()
    indices = list(range(spec.start_index, spec.start_index + spec.sample_count))
    chunks = _chunks(indices, chunk if spec.target.startswith("strong") else max(1, chunk // 10))
    records: list[SampleRecord] = []
    env = environment()
    writer = _JsonlWriter(out, spec, env, append) if out is not None else None
    t0 = time.perf_counter()
    try:
        if workers == 1:
            results: Iterable[list[SampleRecord]] = (_evaluate_chunk(spec.to_json(), c) for c in chunks)
            for recs in results:
                records.extend(recs)
                if writer:
                    writer.write_records(recs)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_evaluate_chunk, spec.to_json(), c) for c in chunks]
                for fut in futures:
                    recs = fut.result()
                    records.extend(recs)
                    if writer:
                        writer.write_records(recs)
    finally:
        runtime = (time.perf_counter() - t0) * 1000.0
        if writer:
            writer.close(runtime, len(records))
    records.sort(key=lambda r: r.index)
    return CampaignReport(spec, records, env, runtime)


def run_strong(spec: CampaignSpec, out=None, workers: int | None = None, append: bool = False) -> CampaignReport:
    """Evaluate |D| on sampled configurations and confirm any value below 1 - tol."""
    if not spec.target.startswith("strong"):
        raise ValueError("run_strong needs a strong-complex or strong-real spec")
    return _run(spec, out, workers, append)


def run_weak(spec: CampaignSpec, out=None, workers: int | None = None, append: bool = False) -> CampaignReport:
    """Record the independence margin of the Atiyah lines of sampled configurations."""
    if not spec.target.startswith("weak"):
        raise ValueError("run_weak needs a weak-complex or weak-real spec")
    return _run(spec, out, workers, append)


def run_e3(spec: CampaignSpec, out=None, workers: int | None = None, append: bool = False) -> CampaignReport:
    """Margins of structure-map outputs on sampled trees and independent states."""
    if spec.target not in ("e3", "e2"):
        raise ValueError("run_e3 needs an e3 or e2 spec")
    return _run(spec, out, workers, append)


def run_campaign(spec: CampaignSpec, out=None, workers: int | None = None, append: bool = False) -> CampaignReport:
    if spec.target.startswith("strong"):
        return run_strong(spec, out, workers, append)
    if spec.target.startswith("weak"):
        return run_weak(spec, out, workers, append)
    if spec.target == "minimize":
        return minimize_absD(spec, out=out, append=append)
    return run_e3(spec, out, workers, append)


# --- minimization ----------------------------------------------------------------------


class _Objective:
    """log|D| on gauge-fixed coordinates: first point at 0, unit diameter."""

    def __init__(self, n: int, dim: int):
        self.n, self.dim = n, dim
        self.best = math.inf
        self.best_x: np.ndarray | None = None
        self.nfev = 0
        self.rejected = 0

    def points(self, x: np.ndarray) -> np.ndarray:
        pts = np.vstack([np.zeros(self.dim), np.asarray(x).reshape(self.n - 1, self.dim)])
        diff = pts[:, None] - pts[None]
        dist = np.sqrt((diff**2).sum(axis=2))
        diam = dist.max()
        if diam == 0.0:
            return None
        iu = np.triu_indices(self.n, 1)
        if dist[iu].min() < EPS_SEP * diam:
            return None
        return pts / diam

    def __call__(self, x: np.ndarray) -> float:
        self.nfev += 1
        pts = self.points(x)
        if pts is None:
            self.rejected += 1
            return math.inf
        la, _, rc = kernels.batch_eval(pts[None], self.dim == 2)
        if not rc[0] >= RCOND_CUTOFF:
            self.rejected += 1
            return math.inf
        v = float(la[0])
        if v < self.best:
            self.best, self.best_x = v, np.array(x, dtype=float)
        return v


def minimize_absD(spec: CampaignSpec, out=None, append: bool = False) -> CampaignReport:
    """Multi-start Nelder-Mead minimization of log|D|.

    Each restart starts from a sampled configuration, converges, then is
    re-gauged (first point at the origin, unit diameter) and polished until
    the improvement stalls.  The reported best is the least objective value
    evaluated anywhere, so it never undercuts the trace.
    """
    from scipy.optimize import minimize

    if spec.target != "minimize":
        raise ValueError("minimize_absD needs a minimize spec")
    n, dim = spec.n, spec.space_dim
    env = environment()
    writer = _JsonlWriter(out, spec, env, append) if out is not None else None
    records = []
    t0 = time.perf_counter()
    sampler = Sampler.parse(spec.sampler)
    try:
        for r in range(spec.start_index, spec.start_index + spec.restarts):
            s = sample_seed(spec.seed, r)
            c = sample_configuration(n, dim, sampler, s)
            obj = _Objective(n, dim)
            x = ((c.points - c.points[0]) / c.diameter())[1:].ravel()
            trace = [obj(x)]
            for _ in range(8):
                before = obj.best
                res = minimize(
                    obj,
                    x,
                    method="Nelder-Mead",
                    callback=lambda xk: trace.append(obj.best),
                    options={"xatol": 1e-11, "fatol": 1e-16, "maxiter": spec.max_iter, "adaptive": True},
                )
                # re-fix the gauge before polishing
                pts = obj.points(obj.best_x)
                x = pts[1:].ravel()
                trace.append(obj.best)
                if before - obj.best < 1e-15:
                    break
            best_pts = obj.points(obj.best_x)
            rec = SampleRecord(
                r, s, input_hash(c.points), obj.best, obj.best, [], None, best_pts.tolist(), trace
            )
            if obj.best < _threshold(spec):
                ext = precision.log_abs_D(best_pts, dim == 2, spec.dps)
                rec.confirmation = {"dps": spec.dps, "log_abs_D": ext, "confirmed": bool(ext < _threshold(spec))}
            records.append(rec)
            if writer:
                writer.write_records([rec])
            log.info("restart %d: best log|D| = %.3e after %d evaluations", r, obj.best, obj.nfev)
    finally:
        runtime = (time.perf_counter() - t0) * 1000.0
        if writer:
            writer.close(runtime, len(records))
    return CampaignReport(spec, records, env, runtime)


# --- persistence -------------------------------------------------------------------------


class _JsonlWriter:
    """Single writer: header once, then records as they arrive, then a segment line."""

    def __init__(self, path, spec: CampaignSpec, env: dict[str, Any], append: bool = False):
        self.path = Path(path)
        self.spec = spec
        exists = self.path.exists() and self.path.stat().st_size > 0
        if exists and append:
            header = _read_header(self.path)
            if CampaignSpec.from_json(header["spec"]).identity() != spec.identity():
                raise ValueError(f"{self.path} holds a different campaign")
            self.fh = open(self.path, "a")
        else:
            self.fh = open(self.path, "w")
            self._write({"type": "header", "spec": spec.to_json(), "environment": env})

    def _write(self, obj) -> None:
        self.fh.write(json.dumps(obj) + "\n")

    def write_records(self, recs: Iterable[SampleRecord]) -> None:
        for r in recs:
            self._write(r.to_json())
        self.fh.flush()

    def close(self, runtime_ms: float, count: int) -> None:
        self._write(
            {"type": "segment", "start_index": self.spec.start_index, "count": count, "runtime_ms": runtime_ms}
        )
        self.fh.close()


def _read_header(path: Path) -> dict[str, Any]:
    with open(path) as fh:
        header = json.loads(fh.readline())
    if header.get("type") != "header":
        raise ValueError(f"{path} does not start with a campaign header")
    return header


def persist(report: CampaignReport, path, append: bool = False) -> None:
    """Write ``report`` as JSONL; with ``append`` add its records to an existing campaign file."""
    w = _JsonlWriter(path, report.spec, report.environment, append=append)
    w.write_records(report.records)
    w.close(report.runtime_ms, len(report.records))


def load(path) -> CampaignReport:
    """Read a campaign file; a corrupt final line is dropped with a warning."""
    path = Path(path)
    lines = path.read_text().splitlines()
    header, records, runtime, count = None, [], 0.0, 0
    for lineno, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            if lineno == len(lines) - 1:
                warnings.warn(f"{path}: truncated final line dropped", RuntimeWarning, stacklevel=2)
                break
            raise ValueError(f"{path}:{lineno + 1}: corrupt record") from None
        kind = obj.get("type")
        if kind == "header":
            if header is None:
                header = obj
        elif kind == "sample":
            records.append(SampleRecord.from_json(obj))
        elif kind == "segment":
            runtime += float(obj["runtime_ms"])
            count += int(obj["count"])
    if header is None:
        raise ValueError(f"{path} has no campaign header")
    spec = CampaignSpec.from_json(header["spec"])
    records.sort(key=lambda r: r.index)
    if records:
        first = records[0].index
        spec = replace(spec, start_index=first, **({"restarts": len(records)} if spec.target == "minimize" else {"sample_count": len(records)}))
    return CampaignReport(spec, records, header["environment"], runtime)


SUMMARY_FIELDS = ("target", "n", "k", "samples", "min", "violations", "runtime_ms", "seed")


def summary_row(report: CampaignReport) -> dict[str, Any]:
    s = report.summary
    return {
        "target": s["target"],
        "n": s["n"],
        "k": "" if not s["k"] else ",".join(map(str, s["k"])),
        "samples": s["samples"],
        "min": s["min"],
        "violations": s["confirmed_violations"],
        "runtime_ms": round(s["runtime_ms"], 3),
        "seed": s["seed"],
    }


def write_summary_csv(reports: Sequence[CampaignReport], path, append: bool = False) -> None:
    """One row per campaign."""
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        if new:
            w.writeheader()
        for r in reports:
            w.writerow(summary_row(r))
