"""Scenario replay and the weight-sweep / random-weight experiment families."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from splitflow.core import Call, CallClose, Packet, RoutingWeightVector, T, Trace, U, normalize_weights, validate_weights
from splitflow.metrics import DeviationAccumulator
from splitflow.splitters import RrMode, SplitterKind, make_splitter
from splitflow.traffic import Rng, TrafficConfig, generate

TRAFFIC_MIX = {"U": 1.0, "T": 0.0}
DEFAULT_GRID = (0.001,) + tuple(round(0.05 * k, 2) for k in range(1, 11))


@dataclass(frozen=True)
class Scenario:
    weights: RoutingWeightVector
    algorithm: SplitterKind
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    rr_mode: Optional[RrMode] = None
    label: str = ""
    traffic_name: str = "Mixed"


@dataclass
class RunResult:
    label: str
    algorithm: SplitterKind
    traffic: str
    weights: RoutingWeightVector
    msd: float
    max_abs_dev: float
    per_path_bytes: list[int]
    per_path_packets: list[int]
    per_path_calls: list[int]
    msd_by_class: dict[str, float] = field(default_factory=dict)
    seed: Optional[int] = None


def traffic_for(name: str, template: TrafficConfig) -> TrafficConfig:
    """Template with ``class_mix`` set for ``U``, ``T``; ``Mixed`` keeps the template's mix."""
    if name in TRAFFIC_MIX:
        return template.with_(class_mix=TRAFFIC_MIX[name])
    if name != "Mixed":
        raise ValueError(f"unknown traffic class {name!r}")
    return template


def replay(
    trace: Trace,
    weights: RoutingWeightVector,
    algorithm: SplitterKind,
    rr_mode: Optional[RrMode] = None,
    decisions: Optional[list] = None,
    label: str = "",
    traffic: str = "",
) -> RunResult:
    """Run ``trace`` through a fresh splitter, scoring every packet decision.

    ``decisions``, if given, is extended with ``(packet, path)`` pairs.
    """
    splitter = make_splitter(algorithm, weights, rr_mode)
    acc = DeviationAccumulator(weights)
    by_class = {U: DeviationAccumulator(weights), T: DeviationAccumulator(weights)}
    n = weights.n
    nbytes = [0] * n
    npackets = [0] * n
    ncalls = [0] * n
    route = splitter.route_packet
    record = acc.record
    for ev in trace.events:
        kind = type(ev)
        if kind is Packet:
            path = route(ev)
            record(ev.size, path)
            by_class[ev.cls].record(ev.size, path)
            nbytes[path - 1] += ev.size
            npackets[path - 1] += 1
            if decisions is not None:
                decisions.append((ev, path))
        elif kind is Call:
            path = splitter.open_call(ev)
            if path is not None:
                ncalls[path - 1] += 1
        elif kind is CallClose:
            splitter.close_call(ev.id)
    return RunResult(
        label=label,
        algorithm=algorithm,
        traffic=traffic,
        weights=weights,
        msd=acc.msd(),
        max_abs_dev=acc.max_abs_dev,
        per_path_bytes=nbytes,
        per_path_packets=npackets,
        per_path_calls=ncalls,
        msd_by_class={c.value: a.msd() for c, a in by_class.items() if a.m},
    )


def run_scenario(s: Scenario, trace: Optional[Trace] = None, decisions: Optional[list] = None) -> RunResult:
    if trace is None:
        trace = generate(s.traffic)
    result = replay(trace, s.weights, s.algorithm, s.rr_mode, decisions, s.label, s.traffic_name)
    result.seed = s.traffic.seed
    return result


@dataclass(frozen=True)
class SweepSpec:
    """Three paths, third weight pinned, first weight swept; second takes the remainder."""

    p1_grid: Sequence[float] = DEFAULT_GRID
    algorithms: Sequence[SplitterKind] = (SplitterKind.PWFR, SplitterKind.PGRR)
    traffic_classes: Sequence[str] = ("U",)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    p3: float = 0.0
    n_paths: int = 3
    rr_mode: Optional[RrMode] = None

    def __post_init__(self) -> None:
        for p1 in self.p1_grid:
            if not 0.001 <= p1 <= 0.5:
                raise ValueError(f"p1 grid value {p1} outside [0.001, 0.5]")

    def weights_at(self, p1: float) -> RoutingWeightVector:
        return validate_weights([p1, 1.0 - p1 - self.p3, self.p3])


def label_for(traffic: str, algorithm: SplitterKind, weights: RoutingWeightVector, tag: str = "") -> str:
    ws = "_".join(f"{w:.6f}" for w in weights)
    prefix = f"{tag}/" if tag else ""
    return f"{prefix}{traffic}/{algorithm.name}/p={ws}"


def _replay_job(args) -> RunResult:
    return replay(*args)


def _execute(jobs: list[tuple], workers: int) -> list[RunResult]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replay_job, jobs))
    else:
        results = [_replay_job(j) for j in jobs]
    return sorted(results, key=lambda r: r.label)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[RunResult]:
    """One result per (grid point, algorithm, traffic class), each class on one shared trace."""
    jobs = []
    for tclass in spec.traffic_classes:
        cfg = traffic_for(tclass, spec.traffic)
        trace = generate(cfg) if spec.p1_grid and spec.algorithms else None
        for p1 in spec.p1_grid:
            w = spec.weights_at(p1)
            for algo in spec.algorithms:
                jobs.append((trace, w, algo, spec.rr_mode, None, label_for(tclass, algo, w), tclass))
    results = _execute(jobs, workers)
    for r in results:
        r.seed = spec.traffic.seed
    return results


def random_weights(n_paths: int, seed: int) -> RoutingWeightVector:
    rng = Rng(seed)
    return normalize_weights([rng.uniform() for _ in range(n_paths)])


def random_weight_run(
    n_paths: int = 5,
    seed: int = 0,
    algorithms: Sequence[SplitterKind] = (SplitterKind.PWFR, SplitterKind.PGRR),
    traffic_classes: Sequence[str] = ("U",),
    traffic: Optional[TrafficConfig] = None,
    rr_mode: Optional[RrMode] = None,
    workers: int = 1,
) -> list[RunResult]:
    """Draw a weight vector from ``seed`` and run every algorithm/class on it.

    The traffic seed is the same ``seed`` unless ``traffic`` sets its own.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    w = random_weights(n_paths, seed)
    template = traffic if traffic is not None else TrafficConfig(seed=seed)
    jobs = []
    for tclass in traffic_classes:
        trace = generate(traffic_for(tclass, template))
        for algo in algorithms:
            jobs.append((trace, w, algo, rr_mode, None, label_for(tclass, algo, w, f"seed={seed}"), tclass))
    results = _execute(jobs, workers)
    for r in results:
        r.seed = seed
    return results


def csv_header(n_paths: int) -> list[str]:
    ps = [f"p{i}" for i in range(1, n_paths + 1)]
    bs = [f"bytes_{i}" for i in range(1, n_paths + 1)]
    return ["label", "algorithm", "traffic", *ps, "msd", "max_abs_dev", *bs]


def csv_row(r: RunResult) -> list[str]:
    return [
        r.label,
        r.algorithm.name,
        r.traffic,
        *(repr(float(w)) for w in r.weights),
        repr(float(r.msd)),
        repr(float(r.max_abs_dev)),
        *(str(b) for b in r.per_path_bytes),
    ]


def results_to_csv(results: Iterable[RunResult], n_paths: Optional[int] = None) -> str:
    results = list(results)
    if n_paths is None:
        n_paths = results[0].weights.n if results else 3
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(n_paths))
    for r in results:
        writer.writerow(csv_row(r))
    return buf.getvalue()


def geometric_mean(values: Iterable[float]) -> float:
    values = list(values)
    return math.exp(math.fsum(math.log(v) for v in values) / len(values))


@dataclass(frozen=True)
class Figure:
    """A reproducible experiment preset and the ordering it is expected to show."""

    number: int
    title: str
    family: str  # "sweep" (three paths, p1 grid) or "random" (five paths, seeded weights)
    traffic: str
    better: SplitterKind
    worse: SplitterKind
    algorithms: tuple[SplitterKind, ...]
    uniform_tie: bool = False  # accept equal msd at uniform weights


_K = SplitterKind
FIGURES = {
    f.number: f
    for f in (
        Figure(6, "PGRR vs PWFR, connectionless", "sweep", "U", _K.PWFR, _K.PGRR, (_K.PWFR, _K.PGRR), True),
        Figure(7, "CGRR vs CWFR, connection oriented", "sweep", "T", _K.CWFR, _K.CGRR, (_K.CWFR, _K.CGRR)),
        Figure(13, "PWFR vs MWFR, mixed", "sweep", "Mixed", _K.MWFR, _K.PWFR, (_K.PWFR, _K.MWFR)),
        Figure(14, "PGRR vs MRR, mixed", "sweep", "Mixed", _K.MRR, _K.PGRR, (_K.PGRR, _K.MRR)),
        Figure(15, "MRR vs MWFR, mixed", "sweep", "Mixed", _K.MWFR, _K.MRR, (_K.MRR, _K.MWFR)),
        Figure(17, "PGRR vs PWFR, connectionless, 5 paths", "random", "U", _K.PWFR, _K.PGRR, (_K.PWFR, _K.PGRR)),
        Figure(18, "CGRR vs CWFR, connection oriented, 5 paths", "random", "T", _K.CWFR, _K.CGRR, (_K.CWFR, _K.CGRR)),
        Figure(19, "MRR vs MWFR, mixed, 5 paths", "random", "Mixed", _K.MWFR, _K.MRR, (_K.MWFR, _K.MRR)),
    )
}
DEFAULT_SEEDS = tuple(range(1, 11))


def run_figure(
    fig: Figure,
    traffic: Optional[TrafficConfig] = None,
    grid: Sequence[float] = DEFAULT_GRID,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    rr_mode: Optional[RrMode] = None,
    workers: int = 1,
) -> list[RunResult]:
    traffic = traffic if traffic is not None else TrafficConfig(seed=1)
    if fig.family == "sweep":
        spec = SweepSpec(grid, fig.algorithms, (fig.traffic,), traffic, rr_mode=rr_mode)
        return run_sweep(spec, workers)
    results: list[RunResult] = []
    for seed in seeds:
        results += random_weight_run(
            5, seed, fig.algorithms, (fig.traffic,), traffic.with_(seed=seed), rr_mode, workers
        )
    return results


def is_uniform(weights: RoutingWeightVector) -> bool:
    active = [w for w in weights if w > 0]
    return max(active) - min(active) <= 1e-12


def dominance_violations(
    results: Sequence[RunResult], better: SplitterKind, worse: SplitterKind, uniform_tie: bool = False
) -> list[str]:
    """Describe every weight vector (and seed) where ``better`` fails to beat ``worse``.

    Strict improvement is required. With ``uniform_tie`` a tie is accepted
    when all nonzero weights are equal.
    """
    groups: dict[tuple, dict[SplitterKind, RunResult]] = {}
    for r in results:
        groups.setdefault((r.seed, r.traffic, r.weights.weights), {})[r.algorithm] = r
    problems = []
    for (seed, traffic, weights), by_algo in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        if better not in by_algo or worse not in by_algo:
            continue
        b, w = by_algo[better].msd, by_algo[worse].msd
        ok = b <= w if uniform_tie and is_uniform(by_algo[better].weights) else b < w
        if not ok:
            ws = ",".join(f"{x:.4f}" for x in weights)
            problems.append(f"seed={seed} {traffic} p=({ws}): {better.name} {b!r} vs {worse.name} {w!r}")
    return problems
