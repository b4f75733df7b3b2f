"""Level and power studies with a conditional KS baseline.

Each study simulates ``n_sims`` independent pool pairs and tallies, per test,
how often the null is rejected, with 99% asymptotic confidence intervals
``p +- 2.576 sqrt(p(1-p)/n_sims)``.

Determinism contract: simulation ``i`` draws everything from sub-streams
keyed by ``(master_seed, i, tag)`` (see streams), and per-simulation numeric
work runs with BLAS pinned to a single thread, so reports are identical for
any worker count; workers only split the simulation index range.  Rejection
tallies are integers, so the reduction order is immaterial.

``reproduce_experiment`` regenerates the named benchmark tables: the level
table rows (f1, beta(2,5), laplace(7)) and the four power figures, at desk
scale (1000 simulations, B = 10^4) or paper scale (5000 level simulations,
1000 power simulations, B = 4*10^5).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .aggregate import KernelCollection, collection_from_id, run_multi_test
from .intensity import model_from_id
from .point_process import MarkedPool, pool, simulate
from .streams import TAG_F, TAG_G, TAG_SIGNS, stream

Z_99 = 2.576


@dataclass(frozen=True)
class StudyConfig:
    """Inputs of one level/power study; field names double as config-file keys."""

    f_model: str
    g_model: str
    n: float = 100.0
    alpha: float = 0.05
    n_sims: int = 1000
    b: int = 10000
    tests: tuple[str, ...] = ("KS", "Ne:Jbar=7", "Th:Jtilde=6", "G", "E")
    master_seed: int = 0
    grid_step: float = 2.0**-16

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if self.n <= 0:
            raise ValueError("n must be positive")
        object.__setattr__(self, "tests", tuple(self.tests))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["tests"] = list(self.tests)
        return out


@dataclass(frozen=True)
class TestTally:
    test: str
    rejections: int
    n_sims: int
    proportion: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class StudyReport:
    config: StudyConfig
    tallies: tuple[TestTally, ...]
    elapsed_seconds: float

    def proportion(self, test: str) -> float:
        for tally in self.tallies:
            if tally.test == test:
                return tally.proportion
        raise KeyError(test)

    def tally(self, test: str) -> TestTally:
        for t in self.tallies:
            if t.test == test:
                return t
        raise KeyError(test)


def confidence_interval(p_hat: float, n: int) -> tuple[float, float]:
    """99% asymptotic CI with variance estimation, clamped to [0, 1]."""
    half = Z_99 * math.sqrt(p_hat * (1.0 - p_hat) / n)
    return max(0.0, p_hat - half), min(1.0, p_hat + half)


# ---------------------------------------------------------------------------
# conditional Kolmogorov-Smirnov baseline
# ---------------------------------------------------------------------------


def _ks_distance(x1: np.ndarray, x2: np.ndarray) -> float:
    s1, s2 = np.sort(x1), np.sort(x2)
    grid = np.concatenate([s1, s2])
    cdf1 = np.searchsorted(s1, grid, side="right") / len(s1)
    cdf2 = np.searchsorted(s2, grid, side="right") / len(s2)
    return float(np.max(np.abs(cdf1 - cdf2)))


def ks_baseline(pooled: MarkedPool, alpha: float) -> bool:
    """Two-sided two-sample KS test between the two mark classes.

    Uses the asymptotic critical value c(alpha) sqrt((n1+n2)/(n1 n2)) with
    c(alpha) = sqrt(ln(2/alpha)/2); rejection is strict.  If either class is
    empty the test accepts by convention.
    """
    x1 = pooled.points[pooled.marks == 1]
    x2 = pooled.points[pooled.marks == -1]
    if len(x1) == 0 or len(x2) == 0:
        return False
    c_alpha = math.sqrt(0.5 * math.log(2.0 / alpha))
    critical = c_alpha * math.sqrt((len(x1) + len(x2)) / (len(x1) * len(x2)))
    return _ks_distance(x1, x2) > critical


# ---------------------------------------------------------------------------
# study runner
# ---------------------------------------------------------------------------


def _run_sim_range(config: StudyConfig, start: int, stop: int) -> np.ndarray:
    """Rejection counts per test over simulations [start, stop)."""
    f = model_from_id(config.f_model)
    g = model_from_id(config.g_model)
    collections: list[KernelCollection | None] = [
        None if t == "KS" else collection_from_id(t) for t in config.tests
    ]
    counts = np.zeros(len(config.tests), dtype=np.int64)
    # single-threaded BLAS keeps per-simulation floats identical no matter
    # how simulations are spread over workers
    with threadpool_limits(limits=1, user_api="blas"):
        for i in range(start, stop):
            pat_f = simulate(f, config.n, stream(config.master_seed, i, TAG_F))
            pat_g = simulate(g, config.n, stream(config.master_seed, i, TAG_G))
            pooled = pool(pat_f, pat_g)
            for c, (test_id, coll) in enumerate(zip(config.tests, collections)):
                if coll is None:
                    rejected = ks_baseline(pooled, config.alpha)
                else:
                    report = run_multi_test(
                        coll,
                        pooled,
                        config.alpha,
                        config.b,
                        stream(config.master_seed, i, TAG_SIGNS, c),
                        grid_step=config.grid_step,
                    )
                    rejected = report.reject
                counts[c] += int(rejected)
    return counts


def _run_study(config: StudyConfig, workers: int) -> StudyReport:
    t0 = time.perf_counter()
    if workers <= 1 or config.n_sims == 1:
        counts = _run_sim_range(config, 0, config.n_sims)
    else:
        nchunks = min(config.n_sims, workers * 4)
        edges = np.linspace(0, config.n_sims, nchunks + 1).astype(int)
        jobs = [(config, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if a < b]
        counts = np.zeros(len(config.tests), dtype=np.int64)
        with ProcessPoolExecutor(max_workers=workers) as pool_exec:
            for part in pool_exec.map(_run_sim_range_star, jobs):
                counts += part
    elapsed = time.perf_counter() - t0
    tallies = []
    for test_id, rejections in zip(config.tests, counts):
        rejections = int(rejections)
        p_hat = rejections / config.n_sims
        lo, hi = confidence_interval(p_hat, config.n_sims)
        tallies.append(
            TestTally(
                test=test_id,
                rejections=int(rejections),
                n_sims=config.n_sims,
                proportion=p_hat,
                ci_low=lo,
                ci_high=hi,
            )
        )
    return StudyReport(config=config, tallies=tuple(tallies), elapsed_seconds=elapsed)


def _run_sim_range_star(args) -> np.ndarray:
    return _run_sim_range(*args)


def level_study(config: StudyConfig, workers: int = 1) -> StudyReport:
    """First-kind-error study; requires f_model == g_model."""
    if config.f_model != config.g_model:
        raise ValueError("level_study requires f_model == g_model")
    return _run_study(config, workers)


def power_study(config: StudyConfig, workers: int = 1) -> StudyReport:
    """Rejection-rate study under an arbitrary (f, g) pair."""
    return _run_study(config, workers)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _sidecar_path(path: str) -> str:
    s = str(path)
    return s[:-4] + ".json" if s.endswith(".csv") else s + ".json"


def write_report(report: StudyReport, path) -> None:
    """CSV of per-test tallies plus a JSON sidecar with the full config.

    Byte-deterministic for fixed inputs: floats are written with repr and
    wall-clock time is not serialized.
    """
    lines = ["test,rejections,n_sims,proportion,ci_low,ci_high"]
    for t in report.tallies:
        lines.append(
            f"{t.test},{t.rejections},{t.n_sims},{t.proportion!r},{t.ci_low!r},{t.ci_high!r}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(_sidecar_path(path), "w") as fh:
        json.dump({"config": report.config.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report_csv(path) -> list[dict]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            row = dict(zip(header, parts))
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# named experiment reproduction
# ---------------------------------------------------------------------------

KERNEL_TESTS = ("Ne:Jbar=7", "Th:Jtilde=6", "G", "E")
ALL_TESTS = ("KS",) + KERNEL_TESTS

EXPERIMENTS: dict[str, dict] = {
    "level-table": {
        "kind": "level",
        "tests": KERNEL_TESTS,
        "pairs": [("f1", "f1"), ("beta:2:5", "beta:2:5"), ("laplace:7", "laplace:7")],
    },
    "fig1-left": {
        "kind": "power",
        "tests": ALL_TESTS,
        "pairs": [
            ("f1", "g1:0.25:0.7"),
            ("f1", "g1:0.25:0.9"),
            ("f1", "g1:0.25:1"),
            ("f1", "g1:0.125:1"),
        ],
    },
    "fig1-right": {
        "kind": "power",
        "tests": ALL_TESTS,
        "pairs": [("f1", "g2:4"), ("f1", "g2:8"), ("f1", "g2:15")],
    },
    "fig2-left": {
        "kind": "power",
        "tests": ALL_TESTS,
        "pairs": [("f1", "g3:0.5"), ("f1", "g3:1")],
    },
    "fig2-right": {
        "kind": "power",
        "tests": ALL_TESTS,
        "pairs": [("laplace:7", "gauss:0.5:0.25"), ("laplace:10", "gauss:0.5:0.25")],
    },
}

SCALES = {
    "desk": {"level_sims": 1000, "power_sims": 1000, "b": 10_000},
    "paper": {"level_sims": 5000, "power_sims": 1000, "b": 400_000},
}


def reproduce_experiment(
    name: str, scale: str = "desk", seed: int = 0, workers: int = 1
) -> list[tuple[str, str, StudyReport]]:
    """Run one named experiment; row r uses master seed ``seed + r``."""
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; choose from {sorted(SCALES)}")
    exp = EXPERIMENTS[name]
    sc = SCALES[scale]
    n_sims = sc["level_sims"] if exp["kind"] == "level" else sc["power_sims"]
    out = []
    for r, (f_id, g_id) in enumerate(exp["pairs"]):
        config = StudyConfig(
            f_model=f_id,
            g_model=g_id,
            n_sims=n_sims,
            b=sc["b"],
            tests=exp["tests"],
            master_seed=seed + r,
        )
        runner = level_study if exp["kind"] == "level" else power_study
        out.append((f_id, g_id, runner(config, workers=workers)))
    return out


def write_reproduce_report(
    name: str, scale: str, seed: int, rows: list[tuple[str, str, StudyReport]], path
) -> None:
    lines = ["f,g,test,rejections,n_sims,proportion,ci_low,ci_high"]
    for f_id, g_id, report in rows:
        for t in report.tallies:
            lines.append(
                f"{f_id},{g_id},{t.test},{t.rejections},{t.n_sims},"
                f"{t.proportion!r},{t.ci_low!r},{t.ci_high!r}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    sidecar = {
        "experiment": name,
        "scale": scale,
        "seed": seed,
        "configs": [report.config.to_dict() for _, _, report in rows],
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
