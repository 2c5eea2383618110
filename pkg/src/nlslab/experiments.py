"""Experiment drivers, run records and plain-text reports.

Every driver takes an :class:`ExperimentConfig`, derives all randomness
from the master seed and sample index, and returns a :class:`RunRecord`
whose ``rows`` and ``summary`` are reproducible bit for bit.  Wall-clock time
is kept apart so it never enters a comparison.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import counting
from .evolver import SolverConfig, evolve_batch
from .lattice import alias_free_size, bracket_grid, coeffs_to_grid, is_dyadic
from .picard import scaling_study
from .randomdata import GaussianDataSpec, ensemble, sigma_n
from .tensorlab import (Axis, LabeledTensor, check_bilinear, check_multilinear, contract_stat,
                        without_pairings)
from .wick import wick_apply

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KINDS = ("convergence", "longtime", "scaling", "tensor-suite", "counting-suite")
MAX_ENSEMBLE = 4096
MAX_SUITE = 100_000


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def s_pr(p: int) -> float:
    return -1.0 / (p - 1)


def s_cr(d: int, p: int) -> float:
    return d / 2 - 2.0 / (p - 1)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    d: int = 1
    p: int = 5
    s: float = 0.0
    alpha: float | None = None          # defaults to s + d/2
    Ns: tuple = (8, 16, 32)
    tau: float = 0.05
    nu: float = 0.2
    dt: float = 1e-4
    dt_ref_N: int | None = None         # if set, dt scales like (dt_ref_N / N)^2 above that size
    ensemble: int = 32
    seed: int = 0
    s_prime: float | None = None        # defaults to s - 0.05
    stride: int = 100                  # steps between stored snapshots
    verify_samples: int = 2
    step_tol: float = 1e-4
    data_kinds: tuple = ("deterministic", "random")   # scaling study
    data: str = "gaussian"              # dynamics data: gaussian | zero | single-mode
    mode: tuple | None = None           # single-mode data: the wavevector k
    amplitude: float = 0.5
    ratio_target: float = 0.9           # convergence: consecutive median ratios below this
    deviation_target: float = 0.5       # longtime: median normalised deviation below this
    # tensor suite
    n_bilinear: int = 1000
    n_multilinear: int = 500
    n_masked: int = 100
    descent_Ms: tuple = (4, 8, 16, 32)
    descent_trials: int = 100
    descent_quantile: float = 0.95
    descent_max_slope: float = 0.35
    # counting suite
    count_Ms_d1: tuple = (8, 16, 32, 64, 128, 256)
    count_Ms_d2: tuple = (8, 16, 32, 64)
    count_samples: int = 64
    count_max_slope_d1: float = 0.3
    count_max_slope_d2: float = 2.3
    n_schur: int = 500
    out: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"config schema {self.schema_version} is not supported (expected {SCHEMA_VERSION})")
        if self.p < 3 or self.p % 2 == 0:
            raise ValueError("p must be odd and at least 3")
        for name in ("Ns", "data_kinds", "descent_Ms", "count_Ms_d1", "count_Ms_d2"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if any(not is_dyadic(N) for N in self.Ns):
            raise ValueError(f"N values must be dyadic, got {self.Ns}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not 1 <= self.stride <= 100:
            raise ValueError("snapshot stride must lie in [1, 100] steps")
        if not 0 <= self.ensemble <= MAX_ENSEMBLE:
            raise ValueError(f"ensemble size must lie in [0, {MAX_ENSEMBLE}]")
        if max(self.n_bilinear, self.n_multilinear, self.n_masked, self.n_schur) > MAX_SUITE:
            raise ValueError(f"suite sizes are capped at {MAX_SUITE}")
        if self.data not in ("gaussian", "zero", "single-mode"):
            raise ValueError(f"unknown data {self.data!r}")
        if self.data == "single-mode":
            if self.mode is None or len(self.mode) != self.d:
                raise ValueError("single-mode data need a mode with d components")
            object.__setattr__(self, "mode", tuple(int(k) for k in self.mode))
        if self.kind in ("convergence", "longtime"):
            if self.d * (self.p - 1) < 4 or (self.d, self.p) == (1, 3):
                raise ValueError("dynamics experiments assume d(p-1) >= 4 and (d, p) != (1, 3)")
        if self.kind == "convergence" and self.s <= s_pr(self.p):
            raise ValueError(f"s = {self.s} must exceed s_pr = {s_pr(self.p):.4g}")
        if self.kind == "longtime":
            top = (self.p - 1) * (self.s - s_pr(self.p))
            if not 0 < self.nu < top:
                raise ValueError(f"nu must satisfy 0 < nu < (p-1)(s - s_pr) = {top:.4g}")

    @property
    def a(self) -> float:
        return self.s + self.d / 2 if self.alpha is None else self.alpha

    @property
    def sp(self) -> float:
        return self.s - 0.05 if self.s_prime is None else self.s_prime

    def dt_for(self, N: int) -> float:
        if self.dt_ref_N is None or N <= self.dt_ref_N:
            return self.dt
        return self.dt * (self.dt_ref_N / N) ** 2

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class RunRecord:
    config: dict
    seeds: list
    rows: list
    summary: dict
    passed: bool
    flags: dict = field(default_factory=dict)
    wall: float = 0.0
    version: str = field(default_factory=code_version)

    def comparable(self) -> dict:
        """Everything except wall-clock time."""
        return {"config": self.config, "seeds": self.seeds, "rows": self.rows,
                "summary": self.summary, "passed": self.passed, "flags": self.flags}


# ---------------------------------------------------------------- convergence

def initial_data(cfg: ExperimentConfig, N: int, kind: str = "powerlaw") -> np.ndarray:
    """Stacked coefficient arrays for samples 0..ensemble-1 on the storage box of level N."""
    n = cfg.ensemble
    if cfg.data == "gaussian":
        spec = GaussianDataSpec(cfg.seed, cfg.d, cfg.a, N, kind=kind)
        return ensemble(spec, n).reshape((n,) + (2 * spec.box + 1,) * cfg.d)
    K = N if kind == "powerlaw" else 4 * N
    u0 = np.zeros((n,) + (2 * K + 1,) * cfg.d, dtype=complex)
    if cfg.data == "single-mode":
        u0[(slice(None),) + tuple(K + k for k in cfg.mode)] = cfg.amplitude
    return u0


def _wick_sigma(cfg: ExperimentConfig, N: int) -> float:
    # deterministic data carry no expected mass to renormalise
    return sigma_n(cfg.d, cfg.a, N) if cfg.data == "gaussian" else 0.0


def _embed(c: np.ndarray, K: int, K2: int, d: int) -> np.ndarray:
    out = np.zeros(c.shape[: c.ndim - d] + (2 * K2 + 1,) * d, dtype=c.dtype)
    sl = (Ellipsis,) + tuple(slice(K2 - K, K2 + K + 1) for _ in range(d))
    out[sl] = c
    return out


def run_convergence(cfg: ExperimentConfig, workers=None) -> RunRecord:
    """D_N = max_t ||u_2N(t) - u_N(t)||_{H^{s'}} from nested data, per sample."""
    t0 = time.time()
    n = cfg.ensemble
    levels = sorted(set(cfg.Ns) | {2 * N for N in cfg.Ns})
    dt = min(cfg.dt_for(M) for M in levels)      # common step so snapshot times coincide
    runs, flags = {}, {}
    for N in levels:
        sc = SolverConfig(cfg.d, cfg.p, N, _wick_sigma(cfg, N), dt=dt, tau=cfg.tau, stride=cfg.stride,
                          verify=cfg.verify_samples > 0, verify_samples=cfg.verify_samples or None,
                          tol=cfg.step_tol, workers=workers)
        times, snaps, fl = evolve_batch(sc, initial_data(cfg, N), N)
        runs[N] = (np.asarray(times), np.stack(snaps, axis=1))
        flags[str(N)] = fl
        log.info("convergence level N=%d done %s", N, fl)
    rows, D = [], {}
    for N in cfg.Ns:
        ta, ua = runs[N]
        tb, ub = runs[2 * N]
        if not np.array_equal(ta, tb):
            raise RuntimeError("snapshot times differ between truncation levels")
        w = bracket_grid(cfg.d, 2 * N) ** (2 * cfg.sp)
        diff = ub - _embed(ua, N, 2 * N, cfg.d)
        axes = tuple(range(2, 2 + cfg.d))
        D[N] = np.sqrt(np.sum(w * np.abs(diff) ** 2, axis=axes)).max(axis=1)
        rows += [{"N": N, "sample": i, "D": float(v)} for i, v in enumerate(D[N])]
    summary = {f"median_D_{N}": float(np.median(D[N])) if n else 0.0 for N in cfg.Ns}
    ratios = []
    for N, N2 in zip(cfg.Ns, cfg.Ns[1:]):
        if n and np.all(D[N] > 0):
            r = float(np.median(D[N2] / D[N]))
            summary[f"median_ratio_{N2}_{N}"] = r
            summary[f"ratio_of_medians_{N2}_{N}"] = float(np.median(D[N2]) / np.median(D[N]))
            ratios.append(r)
    summary["step_doubling_ok"] = all(f.get("step_doubling_ok", True) for f in flags.values())
    passed = len(ratios) == len(cfg.Ns) - 1 > 0 and all(r < cfg.ratio_target for r in ratios)
    return RunRecord(cfg.to_dict(), list(range(n)), rows, summary, bool(passed), flags, time.time() - t0)


# ---------------------------------------------------------------- long time

def _gauge_means(u: np.ndarray, p: int, K: int, d: int, workers=None) -> np.ndarray:
    """Spatial mean of |u|^{p-1} per sample and snapshot; u has shape (n, T, box)."""
    G = alias_free_size(K, p - 1)
    g = coeffs_to_grid(u, K, G, workers=workers)
    return np.mean(wick_apply(g, p - 1, 0.0).real, axis=tuple(range(-d, 0)))


def longtime_level(cfg: ExperimentConfig, N: int, T: float, workers=None):
    """Per-sample sup_{t <= T} ||u(t) - e^{-iB(t)} e^{it Laplace} u(0)||_{H^s}, ||u(0)||_{H^s} and flags."""
    from scipy.integrate import cumulative_trapezoid
    u0 = initial_data(cfg, N, kind="homogeneous")
    K = (u0.shape[-1] - 1) // 2
    norm0 = np.sqrt(np.sum(bracket_grid(cfg.d, K) ** (2 * cfg.s) * np.abs(u0) ** 2,
                           axis=tuple(range(1, 1 + cfg.d))))
    if T == 0:
        return np.zeros(cfg.ensemble), norm0, {}
    steps = int(np.ceil(T / cfg.dt_for(N)))
    dt = T / steps
    sc = SolverConfig(cfg.d, cfg.p, N, None, dt=dt, tau=steps * dt, stride=cfg.stride,
                      verify=cfg.verify_samples > 0, verify_samples=cfg.verify_samples or None,
                      tol=cfg.step_tol, workers=workers)
    times, snaps, flags = evolve_batch(sc, u0, K)
    times = np.asarray(times)
    u = np.stack(snaps, axis=1)                    # (n, T, box)
    B = 0.5 * (cfg.p + 1) * cumulative_trapezoid(_gauge_means(u, cfg.p, K, cfg.d, workers), times,
                                                   axis=1, initial=0.0)
    k2 = bracket_grid(cfg.d, K) ** 2 - 1
    w = bracket_grid(cfg.d, K) ** (2 * cfg.s)
    ext = (1,) * cfg.d
    lin = (np.exp(-1j * B).reshape(B.shape + ext) * np.exp(-1j * times.reshape((1, -1) + ext) * k2)
           * u0[:, None])
    dev = np.sqrt(np.sum(w * np.abs(u - lin) ** 2, axis=tuple(range(2, 2 + cfg.d)))).max(axis=1)
    return dev, norm0, flags


def run_longtime(cfg: ExperimentConfig, workers=None) -> RunRecord:
    """sup over [0, N^nu] of the gauged-linear deviation, normalised by ||u(0)||_{H^s}."""
    t0 = time.time()
    n = cfg.ensemble
    rows, summary, flags, med = [], {}, {}, {}
    for N in cfg.Ns:
        T = float(N) ** cfg.nu
        dev, norm0, fl = longtime_level(cfg, N, T, workers)
        flags[str(N)] = fl
        rel = dev / np.where(norm0 > 0, norm0, np.inf)
        med[N] = float(np.median(rel)) if n else 0.0
        rows += [{"N": N, "sample": i, "deviation": float(a), "norm0": float(b), "normalized": float(c)}
                 for i, (a, b, c) in enumerate(zip(dev, norm0, rel))]
        summary[f"median_normalized_{N}"] = med[N]
        summary[f"T_{N}"] = T
        log.info("longtime N=%d median=%.4g %s", N, med[N], fl)
    summary["tail_ok"] = all(f.get("tail_ok", True) for f in flags.values())
    summary["step_doubling_ok"] = all(f.get("step_doubling_ok", True) for f in flags.values())
    Ns = list(cfg.Ns)
    passed = bool(Ns) and all(med[N] < cfg.deviation_target for N in Ns) \
        and all(med[b] < med[a] for a, b in zip(Ns, Ns[1:]))
    return RunRecord(cfg.to_dict(), list(range(n)), rows, summary, bool(passed), flags, time.time() - t0)


# ---------------------------------------------------------------- scaling

def run_scaling(cfg: ExperimentConfig, workers=None, tol: float = 0.3) -> RunRecord:
    t0 = time.time()
    rows, summary, ok = [], {}, True
    for kind in cfg.data_kinds:
        r = scaling_study(cfg.d, cfg.p, cfg.s, cfg.Ns, cfg.ensemble, kind, seed=cfg.seed, workers=workers)
        for N in cfg.Ns:
            rows += [{"kind": kind, "N": N, "sample": i, "norm": v} for i, v in enumerate(r.norms[N])]
        summary[f"{kind}_slope"] = r.slope
        summary[f"{kind}_stderr"] = r.stderr
        summary[f"{kind}_prediction"] = r.prediction
        ok &= abs(r.slope - r.prediction) <= tol
    n = 1 if cfg.data_kinds == ("deterministic",) else cfg.ensemble
    return RunRecord(cfg.to_dict(), list(range(n)), rows, summary, bool(ok), {}, time.time() - t0)


# ---------------------------------------------------------------- tensor suite

def _rand(labels, sizes, rng, signs=None):
    signs = signs or [1] * len(labels)
    return LabeledTensor.random(tuple(Axis(l, s, 0, n - 1) for l, n, s in zip(labels, sizes, signs)), rng)


def _random_split(free, rng):
    X = [l for l in free if rng.random() < 0.5]
    return X, [l for l in free if l not in X]


def random_bilinear_instance(rng):
    """Two random tensors with <= 5 axes of size <= 6 sharing at least one label."""
    universe = list("abcdefgh")
    while True:
        A = sorted(rng.choice(universe, size=int(rng.integers(1, 6)), replace=False))
        B = sorted(rng.choice(universe, size=int(rng.integers(1, 6)), replace=False))
        if set(A) & set(B):
            break
    sizes = {l: int(rng.integers(1, 7)) for l in universe}
    h = _rand(A, [sizes[l] for l in A], rng)
    h2 = _rand(B, [sizes[l] for l in B], rng)
    return (h, h2) + tuple(_random_split(sorted(set(A) ^ set(B)), rng))


def random_multilinear_instance(rng, m: int = 3):
    """m tensors in which every label occurs at most twice."""
    universe = list("abcdefghijkl")
    while True:
        sets = [set() for _ in range(m)]
        for l in universe:
            k = int(rng.choice([0, 1, 2], p=[0.35, 0.35, 0.3]))
            for j in rng.choice(m, size=k, replace=False):
                sets[j].add(l)
        if all(1 <= len(s) <= 5 for s in sets) and any(sets[i] & sets[j] for i in range(m) for j in range(i)):
            break
    sizes = {l: int(rng.integers(1, 5)) for l in universe}
    ts = [_rand(sorted(s), [sizes[l] for l in sorted(s)], rng) for s in sets]
    count = {}
    for s in sets:
        for l in s:
            count[l] = count.get(l, 0) + 1
    return (ts,) + tuple(_random_split(sorted(l for l, c in count.items() if c == 1), rng))


def masked_instance(rng):
    """No-pairing masked and <k>-weighted factors over lattice ranges."""
    h = without_pairings(LabeledTensor.random((Axis("a", 1, -2, 2), Axis("b", -1, -2, 2), Axis("x", 1, 0, 2)), rng),
                         ["a", "b"])
    wb = (1.0 + np.arange(-2, 3) ** 2) ** -0.35
    h1 = LabeledTensor.random((Axis("b", -1, -2, 2), Axis("c", 1, 0, 3), Axis("y", 1, 0, 1)), rng).multiply(wb[:, None, None])
    h2 = LabeledTensor.random((Axis("c", 1, 0, 3), Axis("z", -1, 0, 2)), rng)
    X, Y = _random_split(["a", "x", "y", "z"], rng)
    return [h, h1, h2], X, Y


def descent_statistic(Ms, trials: int, q: float, seed: int) -> dict:
    """q-quantile of the contraction ratio for random +-1 tensors h_{b c a1 a2}, a1, a2 contracted."""
    out = {}
    for M in Ms:
        rng = np.random.default_rng([seed, 7, M])
        axes = (Axis("b", 1, 1, M), Axis("c", 1, 1, M), Axis("a1", 1, 1, M), Axis("a2", -1, 1, M))
        h = LabeledTensor.random(axes, rng, kind="sign")
        rep = contract_stat(h, ["b", "c"], ["b"], ["c"], trials=trials, seed=seed * 100_003 + 1000 * M)
        out[M] = rep
    return out


def run_tensor_suite(cfg: ExperimentConfig) -> RunRecord:
    t0 = time.time()
    rng = np.random.default_rng([cfg.seed, 6])
    rows, violations = [], 0

    def record(kind, i, r):
        nonlocal violations
        violations += not r.satisfied
        rows.append({"check": kind, "index": i, "lhs": r.lhs, "rhs": r.rhs, "satisfied": bool(r.satisfied)})

    for i in range(cfg.n_bilinear):
        record("bilinear", i, check_bilinear(*random_bilinear_instance(rng)))
    for i in range(cfg.n_multilinear):
        record("multilinear", i, check_multilinear(*random_multilinear_instance(rng)))
    for i in range(cfg.n_masked):
        record("masked", i, check_multilinear(*masked_instance(rng)))
    n = len(rows)
    summary = {"checks": n, "violations": violations}
    passed = violations == 0
    if cfg.descent_Ms:
        stats_ = descent_statistic(cfg.descent_Ms, cfg.descent_trials, cfg.descent_quantile, cfg.seed)
        qs = [stats_[M].quantile(cfg.descent_quantile) for M in cfg.descent_Ms]
        for M, qv in zip(cfg.descent_Ms, qs):
            rows.append({"check": "descent", "index": M, "lhs": qv, "rhs": stats_[M].reference, "satisfied": True})
            summary[f"descent_q_{M}"] = qv
        if len(qs) >= 3:
            fit = counting.fit_exponent(cfg.descent_Ms, qs)
            summary["descent_slope"] = fit.slope
            passed &= fit.slope <= cfg.descent_max_slope
    return RunRecord(cfg.to_dict(), [cfg.seed], rows, summary, bool(passed), {}, time.time() - t0)


# ---------------------------------------------------------------- counting suite

def random_indicator(rng) -> tuple:
    shape = tuple(int(x) for x in rng.integers(1, 7, 3))
    data = (rng.random(shape) < rng.uniform(0.05, 0.5)).astype(float)
    h = LabeledTensor(tuple(Axis(l, 1, 0, n - 1) for l, n in zip("abc", shape)), data)
    B = [l for l in "abc" if rng.random() < 0.5]
    C = [l for l in "abc" if l not in B and rng.random() < 0.8]
    return h, B, C


def run_counting_suite(cfg: ExperimentConfig) -> RunRecord:
    from .tensorlab import op_norm
    t0 = time.time()
    rows, summary, passed = [], {}, True
    for d, Ms, top in ((1, cfg.count_Ms_d1, cfg.count_max_slope_d1), (2, cfg.count_Ms_d2, cfg.count_max_slope_d2)):
        counts = []
        for M in Ms:
            n, (m, G) = counting.worst_cubic(d, M, samples=cfg.count_samples, seed=cfg.seed)
            counts.append(n)
            rows.append({"suite": f"cubic_d{d}", "M": M, "count": n, "m": " ".join(map(str, m)), "Gamma": G})
        if len(Ms) >= 3:
            fit = counting.fit_exponent(Ms, counts)
            summary[f"slope_d{d}"] = fit.slope
            summary[f"stderr_d{d}"] = fit.stderr
            passed &= fit.slope <= top
    rng = np.random.default_rng([cfg.seed, 8])
    fails = 0
    for i in range(cfg.n_schur):
        h, B, C = random_indicator(rng)
        bound, norm = counting.schur_bound(h, B, C), op_norm(h, B, C)
        fails += bound < norm * (1 - 1e-12)
    for G in (2, -4, 12) if cfg.n_schur else ():
        h = counting.cubic_tensor(6, Gamma=G)
        for B, C in ((["k"], ["k1", "k2", "k3"]), (["k", "k2"], ["k1", "k3"]), (["k1"], ["k", "k2"])):
            fails += counting.schur_bound(h, B, C) < op_norm(h, B, C) * (1 - 1e-12)
    summary["schur_failures"] = int(fails)
    passed &= fails == 0
    return RunRecord(cfg.to_dict(), [cfg.seed], rows, summary, bool(passed), {}, time.time() - t0)


RUNNERS = {
    "convergence": run_convergence,
    "longtime": run_longtime,
    "scaling": run_scaling,
    "tensor-suite": lambda cfg, workers=None: run_tensor_suite(cfg),
    "counting-suite": lambda cfg, workers=None: run_counting_suite(cfg),
}


def run(cfg: ExperimentConfig, workers=None) -> RunRecord:
    return RUNNERS[cfg.kind](cfg, workers=workers)


# ---------------------------------------------------------------- persistence and reports

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def report(record: RunRecord | None, kind: str | None = None) -> str:
    """Deterministic text: header, pass line, then sorted key = value summary lines."""
    kind = kind or (record.config.get("kind") if record else "empty")
    lines = [f"# nlslab report: {kind}"]
    if record is None:
        return "\n".join(lines) + "\n"
    lines.append(f"passed = {_fmt(record.passed)}")
    for k in sorted(record.summary):
        lines.append(f"{k} = {_fmt(record.summary[k])}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition(" = ")
        out[k] = _parse(v)
    return out


def rows_csv(rows: list) -> str:
    buf = io.StringIO()
    if rows:
        keys = list(dict.fromkeys(k for r in rows for k in r))
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def write_manifest(cfg: ExperimentConfig, out: Path, status: str, extra: dict | None = None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.json"
    data = {"schema_version": SCHEMA_VERSION, "version": code_version(), "status": status,
            "config": cfg.to_dict()}
    data.update(extra or {})
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def persist(record: RunRecord, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(rows_csv(record.rows))
    summary = {"passed": record.passed, "summary": record.summary, "flags": record.flags,
               "seeds": record.seeds, "wall_seconds": record.wall, "version": record.version}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_fmt) + "\n")
    (out / "report.txt").write_text(report(record))


def execute(cfg: ExperimentConfig, out: Path | str, workers=None) -> RunRecord:
    """Write the manifest, run, persist, then mark the manifest complete."""
    out = Path(out)
    manifest = out / "manifest.json"
    if manifest.exists() and json.loads(manifest.read_text()).get("status") == "running":
        log.warning("previous run in %s did not finish; starting over", out)
    write_manifest(cfg, out, "running")
    rec = run(cfg, workers=workers)
    persist(rec, out)
    write_manifest(cfg, out, "complete", {"passed": rec.passed})
    return rec


def load_summary(out: Path | str) -> RunRecord:
    """Rebuild a record (without rows) from a finished output directory."""
    out = Path(out)
    man = json.loads((out / "manifest.json").read_text())
    summ = json.loads((out / "summary.json").read_text())
    return RunRecord(man["config"], summ["seeds"], [], summ["summary"], summ["passed"],
                     summ.get("flags", {}), summ.get("wall_seconds", 0.0), summ.get("version", ""))


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, seed=seed)
