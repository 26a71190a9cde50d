"""Experiment orchestration: configuration, reference cache, error tables."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .assembly import AssembledSystem, CoefficientField, assemble_system, constant, \
    disc_indicator, model_coefficients
from .cauchy import CauchyProblem, EvolutionTrace, Init, Scheme, run_scheme, run_two_level, \
    sigma_opt
from .mesh import Mesh, build_uniform_mesh
from .sparse import SparseMatrix, estimate_lambda_min, linear_combine

log = logging.getLogger(__name__)

CSV_HEADER = ["scheme", "init", "m", "alpha", "sigma", "N", "eps1", "eps2", "order1", "order2"]
DELTA_FACTOR = 0.99
CACHE_FORMAT = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    n: int = 50
    alpha: float = 0.5
    delta: float | None = None
    preset: str = "paper5"
    scheme: str = "two"
    sigma: float | str = 0.5
    N: int = 100
    init: str = "fine"
    m: int | None = None
    nref: int = 5000
    cg_tol: float = 1e-10
    out: str = "results"
    cache: str = ".fraccauchy_cache"

    def __post_init__(self):
        try:
            Scheme(self.scheme)
            Init(self.init)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"grid size n must be a positive integer, got {self.n!r}")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.delta is not None and not float(self.delta) > 0:
            raise ConfigError(f"delta must be positive, got {self.delta!r}")
        if not isinstance(self.N, int) or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        if self.scheme == Scheme.THREE_LEVEL.value and self.N < 2:
            raise ConfigError("the three-level scheme needs N >= 2")
        if self.m is not None and (not isinstance(self.m, int) or self.m < 1):
            raise ConfigError(f"m must be a positive integer, got {self.m!r}")
        if not isinstance(self.nref, int) or self.nref < 1:
            raise ConfigError(f"nref must be a positive integer, got {self.nref!r}")
        if not float(self.cg_tol) > 0:
            raise ConfigError("cg tolerance must be positive")
        self.resolved_sigma()

    def resolved_sigma(self) -> float:
        return resolve_sigma(self.sigma, self.alpha)

    def resolved_m(self) -> int | None:
        if self.scheme != Scheme.THREE_LEVEL.value or self.init != Init.FINE_GRID.value:
            return None
        return self.N if self.m is None else self.m

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)


def resolve_sigma(sigma, alpha) -> float:
    if isinstance(sigma, str):
        if sigma.strip().lower() == "opt":
            return sigma_opt(alpha)
        try:
            sigma = float(sigma)
        except ValueError:
            raise ConfigError(f"sigma must be a number or 'opt', got {sigma!r}") from None
    sigma = float(sigma)
    if not math.isfinite(sigma) or sigma < 0:
        raise ConfigError(f"sigma must be finite and non-negative, got {sigma!r}")
    return sigma


# -- coefficient presets ----------------------------------------------------

_EXPR_NAMESPACE = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "where", "pi", "minimum", "maximum",
    "tanh", "arctan", "arctan2", "hypot")}


def _coefficient_from_json(item) -> Any:
    if isinstance(item, (int, float)) and not isinstance(item, bool):
        return constant(float(item))
    if isinstance(item, dict) and "disc" in item:
        d = item["disc"]
        return disc_indicator(d["inside"], d["outside"], d.get("radius", 0.5),
                              d.get("center", (0.0, 0.0)))
    if isinstance(item, str):
        # trusted input only: numpy expression in x1, x2
        code = compile(item, "<coefficient>", "eval")

        def fn(x1, x2):
            env = dict(_EXPR_NAMESPACE, x1=x1, x2=x2)
            val = eval(code, {"__builtins__": {}}, env)
            return np.broadcast_to(np.asarray(val, dtype=float), np.broadcast(x1, x2).shape)
        return fn
    raise ConfigError(f"unsupported coefficient entry {item!r}")


def load_preset(preset: str) -> tuple[CoefficientField, str]:
    """Coefficient field and a stable hash identifying it."""
    if preset == "paper5":
        return model_coefficients(), hashlib.sha256(b"preset:paper5").hexdigest()
    if preset == "constant_c":
        one = constant(1.0)
        return (CoefficientField(k=one, c=one, mu=constant(0.0), f=one),
                hashlib.sha256(b"preset:constant_c").hexdigest())
    path = Path(preset)
    if not path.is_file():
        raise ConfigError(f"unknown preset {preset!r} (expected paper5, constant_c or a JSON file)")
    raw = path.read_bytes()
    try:
        data = json.loads(raw)
        coeffs = CoefficientField(**{key: _coefficient_from_json(data.get(key, default))
                                     for key, default in (("k", 1.0), ("c", 1.0),
                                                          ("mu", 0.0), ("f", 1.0))})
    except (json.JSONDecodeError, KeyError, TypeError, SyntaxError) as exc:
        raise ConfigError(f"bad coefficient file {preset}: {exc}") from exc
    return coeffs, hashlib.sha256(b"file:" + raw).hexdigest()


# -- problem setup ----------------------------------------------------------

@dataclass
class Setup:
    config: RunConfig
    mesh: Mesh
    system: AssembledSystem
    problem: CauchyProblem
    preset_hash: str

    @property
    def h1_matrix(self) -> SparseMatrix:
        return linear_combine(self.system.M, 1.0, self.system.G, 1.0)


def build_setup(cfg: RunConfig) -> Setup:
    coeffs, preset_hash = load_preset(cfg.preset)
    mesh = build_uniform_mesh(cfg.n)
    try:
        coeffs.check(mesh)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    system = assemble_system(mesh, coeffs)
    lam1 = estimate_lambda_min(system.K, system.M)
    delta = DELTA_FACTOR * lam1 if cfg.delta is None else float(cfg.delta)
    log.info("lambda_1 estimate %.12g, delta %.12g", lam1, delta)
    problem = CauchyProblem(system.K, system.M, float(cfg.alpha), delta, system.psi,
                            cg_tol=float(cfg.cg_tol), lambda1=lam1)
    return Setup(cfg, mesh, system, problem, preset_hash)


def build_problem(cfg: RunConfig) -> CauchyProblem:
    return build_setup(cfg).problem


# -- reference cache --------------------------------------------------------

def reference_key(setup: Setup) -> dict[str, Any]:
    cfg = setup.config
    return {
        "format": CACHE_FORMAT,
        "preset": setup.preset_hash,
        "n": cfg.n,
        "alpha": repr(float(cfg.alpha)),
        "delta": repr(float(setup.problem.delta)),
        "nref": cfg.nref,
        "cg_tol": repr(float(cfg.cg_tol)),
    }


def _key_digest(key) -> str:
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()


def reference_paths(setup: Setup) -> tuple[Path, Path]:
    stem = "ref-" + _key_digest(reference_key(setup))[:20]
    root = Path(setup.config.cache)
    return root / (stem + ".bin"), root / (stem + ".json")


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_cached_reference(setup: Setup) -> np.ndarray | None:
    bin_path, meta_path = reference_paths(setup)
    try:
        meta = json.loads(meta_path.read_text())
        payload = bin_path.read_bytes()
    except (OSError, json.JSONDecodeError):
        return None
    if (meta.get("key") != reference_key(setup)
            or meta.get("dimension") != setup.problem.n
            or meta.get("checksum") != hashlib.sha256(payload).hexdigest()
            or len(payload) != 8 * setup.problem.n):
        log.warning("reference cache %s failed verification, recomputing", bin_path.name)
        return None
    return np.frombuffer(payload, dtype="<f8").astype(np.float64)


def compute_reference(cfg: RunConfig, setup: Setup | None = None, refresh=False) -> np.ndarray:
    """Symmetric two-level solution with N = nref, cached on disk."""
    setup = setup or build_setup(cfg)
    if not refresh:
        cached = load_cached_reference(setup)
        if cached is not None:
            return cached
    t0 = time.perf_counter()
    ref = run_two_level(setup.problem, 0.5, cfg.nref).w_final
    log.info("reference (nref=%d) computed in %.1f s", cfg.nref, time.perf_counter() - t0)
    payload = np.asarray(ref, dtype="<f8").tobytes()
    bin_path, meta_path = reference_paths(setup)
    meta = {"key": reference_key(setup), "dimension": setup.problem.n,
            "checksum": hashlib.sha256(payload).hexdigest()}
    _atomic_write(bin_path, payload)
    _atomic_write(meta_path, json.dumps(meta, indent=1, sort_keys=True).encode())
    return ref


# -- errors -----------------------------------------------------------------

@dataclass
class ErrorReport:
    epsilon1: float
    epsilon2: float
    scheme: str
    init: str | None
    m: int | None
    alpha: float
    sigma: float
    N: int
    delta: float
    lambda1: float
    cg_iterations: int = 0
    seconds: float = 0.0
    l2_norms: list[float] = field(default_factory=list)
    energies: list[float] | None = None
    order1: float | None = None
    order2: float | None = None
    stability_guaranteed: bool = True

    def metadata(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d.pop("l2_norms")
        d.pop("energies")
        return d


def relative_error(w, ref, norm_matrix: SparseMatrix) -> float:
    diff = np.asarray(w) - np.asarray(ref)
    denom = norm_matrix.quad(ref)
    if denom <= 0:
        raise ValueError("reference has zero norm")
    return math.sqrt(max(norm_matrix.quad(diff), 0.0) / denom)


def run_errors(cfg: RunConfig, reference, setup: Setup | None = None,
               trace: EvolutionTrace | None = None) -> ErrorReport:
    """Run the configured scheme and measure it against ``reference``."""
    setup = setup or build_setup(cfg)
    p = setup.problem
    reference = np.asarray(reference, dtype=float)
    if reference.shape != (p.n,):
        raise ValueError(f"reference dimension {reference.shape} does not match problem {p.n}")
    sigma = cfg.resolved_sigma()
    m = cfg.resolved_m()
    seconds = 0.0
    if trace is None:
        t0 = time.perf_counter()
        trace = run_scheme(p, cfg.scheme, sigma, cfg.N, cfg.init, m)
        seconds = time.perf_counter() - t0
    three = cfg.scheme == Scheme.THREE_LEVEL.value
    return ErrorReport(
        epsilon1=relative_error(trace.w_final, reference, setup.system.M),
        epsilon2=relative_error(trace.w_final, reference, setup.h1_matrix),
        scheme=cfg.scheme,
        init=cfg.init if three else None,
        m=m,
        alpha=float(cfg.alpha),
        sigma=sigma,
        N=cfg.N,
        delta=p.delta,
        lambda1=p.lambda1,
        cg_iterations=trace.cg_iterations,
        seconds=seconds,
        l2_norms=list(trace.l2_norms),
        energies=None if trace.energies is None else list(trace.energies),
        stability_guaranteed=(sigma > 0.25) if three else (sigma >= 0.5),
    )


def observed_order(e_coarse: float, e_fine: float) -> float | None:
    """log2(e(N) / e(2N)); None when either error vanishes."""
    if e_coarse > 0 and e_fine > 0:
        return math.log2(e_coarse / e_fine)
    return None


def convergence_sweep(cfg: RunConfig, N_list: Sequence[int], sigma_list: Sequence,
                      reference=None, setup: Setup | None = None) -> list[ErrorReport]:
    """Error table over sigma x N; orders filled for every (N, 2N) pair present."""
    if not sigma_list or not N_list:
        return []
    Ns = sorted(set(int(N) for N in N_list))
    if Ns[-1] >= cfg.nref:
        raise ConfigError(f"nref = {cfg.nref} must exceed every swept N (max {Ns[-1]})")
    setup = setup or build_setup(cfg)
    if reference is None:
        reference = compute_reference(cfg, setup)
    rows = []
    for sigma in sigma_list:
        by_N = {}
        for N in Ns:
            run_cfg = cfg.replace(sigma=sigma, N=N)
            by_N[N] = run_errors(run_cfg, reference, setup)
        for N in Ns:
            r = by_N[N]
            if 2 * N in by_N:
                r.order1 = observed_order(r.epsilon1, by_N[2 * N].epsilon1)
                r.order2 = observed_order(r.epsilon2, by_N[2 * N].epsilon2)
            rows.append(r)
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def convergence_csv(rows: Sequence[ErrorReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(v) for v in (r.scheme, r.init, r.m, r.alpha, r.sigma, r.N,
                                      r.epsilon1, r.epsilon2, r.order1, r.order2)])
    return buf.getvalue()


def write_solution_csv(mesh: Mesh, w, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["vertex_id", "x1", "x2", "value"])
        for k, ((x1, x2), v) in enumerate(zip(mesh.vertices, w)):
            out.writerow([k, repr(float(x1)), repr(float(x2)), repr(float(v))])
