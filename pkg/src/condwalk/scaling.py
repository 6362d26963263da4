"""Rescaling, norming sequences, limit oracles and convergence experiments."""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special
from scipy import stats as _st

from . import stats
from ._io import atomic_write, canonical_json, dump_json, stamp
from .errors import InsufficientSurvivors, NonAperiodicWarning, UncalibratedLaw
from .kernel import meander_law, survival_curve
from .laws import PathSample, StepLaw, load_law
from .renewal import RenewalTable, renewal_table
from .rng import concat, map_chunks
from .samplers import (die_at_zero_kernel_for, die_at_zero_paths, plus_kernel_for, plus_paths,
                       rejection_paths)

C3 = math.sqrt(2.0 / math.pi)
EXACT_SPAN = 64
MIN_SURVIVORS = 1000


# -- rescaling ---------------------------------------------------------------

@dataclass(frozen=True)
class RescaledPath:
    """Step function ``t -> S_{floor(N t)} / a_N`` on ``[0, n / N]``."""

    values: np.ndarray
    N: int
    a_N: float

    @property
    def horizon(self) -> float:
        return (self.values.size - 1) / self.N

    def __call__(self, t):
        k = np.floor(np.asarray(t, dtype=float) * self.N + 1e-9).astype(np.int64)
        if np.any(k < 0) or np.any(k >= self.values.size):
            raise ValueError("time outside the rescaled path's domain")
        return self.values[k] / self.a_N


def rescale_path(path, N: int, a_N: float) -> RescaledPath:
    if not a_N > 0:
        raise ValueError("a_N must be positive")
    vals = path.values if isinstance(path, PathSample) else np.asarray(path)
    return RescaledPath(np.asarray(vals, dtype=np.int64), int(N), float(a_N))


# -- norming -----------------------------------------------------------------

def stable_beta(alpha: float, rho: float) -> float:
    """Skewness ``beta`` of the strictly stable law with ``P(X >= 0) = rho``."""
    if abs(alpha - 1.0) < 1e-12:
        if abs(rho - 0.5) > 1e-12:
            raise UncalibratedLaw("alpha = 1 with rho != 1/2 is not strictly stable")
        return 0.0
    return float(np.clip(math.tan(math.pi * alpha * (rho - 0.5)) / math.tan(math.pi * alpha / 2), -1, 1))


def stable_abs_median(alpha: float, rho: float) -> float:
    """Median of ``|X|`` for the strictly stable target law (scipy S1 scale 1)."""
    if abs(alpha - 2.0) < 1e-12:
        return math.sqrt(2.0) * special.erfinv(0.5) * math.sqrt(2.0)  # N(0, 2) in S1 scale
    beta = stable_beta(alpha, rho)
    if beta == 0.0 and abs(alpha - 1.0) < 1e-12:
        return 1.0
    dist = _st.levy_stable(alpha, beta)
    return optimize.brentq(lambda m: dist.cdf(m) - dist.cdf(-m) - 0.5, 1e-6, 1e6)


@dataclass
class NormingSequence:
    """Positive increasing sequence ``a_N`` with ``S_N / a_N`` converging."""

    method: str
    params: dict
    _fn: Callable[[int], float] = field(repr=False)
    calibration: dict = field(default_factory=dict)

    def __call__(self, N) -> float:
        return float(self._fn(int(N)))


def norming_sequence(law: StepLaw, *, samples: int = 4000, seed: int = 0) -> NormingSequence:
    """``sqrt(var * N)`` for finite-variance laws, else a median calibration.

    The empirical route sets ``a_N = median|S_N| / median|Y|`` with ``Y``
    the target stable law, estimated per requested ``N`` from ``samples``
    walks on a stream addressed by ``(seed, N)``.
    """
    alpha = law.alpha
    if (alpha is None or abs(alpha - 2.0) < 1e-12) and law.truncated_mass == 0.0:
        var = law.variance
        return NormingSequence("analytic", {"variance": var}, lambda N: math.sqrt(var * N))
    if alpha is None or law.rho is None:
        raise UncalibratedLaw(f"law {law.name!r} has no stable index/positivity tag")
    target = stable_abs_median(alpha, law.rho)
    cache: dict = {}

    def a(N: int) -> float:
        if N not in cache:
            def chunk(k, st):
                s = np.zeros(k, dtype=np.int64)
                for _ in range(N):
                    s += law.draw(k, st.gen)
                return np.abs(s)
            draws = concat(map_chunks(chunk, samples, seed, base_id=N << 8))
            cache[N] = float(np.median(draws)) / target
        return cache[N]

    seq = NormingSequence("empirical", {"alpha": alpha, "rho": law.rho, "target_abs_median": target,
                                        "samples": samples, "seed": seed}, a)
    seq.calibration = cache
    return seq


# -- rescaled renewal functions ------------------------------------------------

def limit_renewal(x, alpha: float = 2.0, rho: float = 0.5, c3: float = C3) -> np.ndarray:
    """``U(x) = C3 x^(alpha (1 - rho))``."""
    return c3 * np.power(np.asarray(x, dtype=float), alpha * (1.0 - rho))


def rescaled_renewal(table: RenewalTable, survival: float, a_N: float, x) -> np.ndarray:
    """``V_N(x) = P(C_N) V(floor(a_N x))``."""
    return survival * table.v(np.floor(a_N * np.asarray(x, dtype=float) + 1e-12).astype(np.int64))


def rescaled_local(table: RenewalTable, a_N: float, x) -> np.ndarray:
    """``W_N(x) = W(floor(a_N x)) / W(floor(a_N))``."""
    idx = np.floor(a_N * np.asarray(x, dtype=float) + 1e-12).astype(np.int64)
    return table.w(idx) / table.w(int(math.floor(a_N + 1e-12)))


def _alpha_rho(law: StepLaw):
    return (law.alpha or 2.0), (law.rho if law.rho is not None else 0.5)


def constant_product_check(law: StepLaw, N_grid, *, table: Optional[RenewalTable] = None, norming=None) -> dict:
    """``P(C_N) V(a_N)`` along ``N_grid`` with exact survival from one forward pass."""
    N_grid = sorted(int(n) for n in N_grid)
    a = norming or norming_sequence(law)
    surv = survival_curve(law, N_grid[-1])
    top = int(math.floor(a(N_grid[-1]))) + 1
    table = table if table is not None and table.grid_max >= top else renewal_table(law, top)
    alpha, rho = _alpha_rho(law)
    limit = C3 if (abs(alpha - 2) < 1e-12 and abs(rho - 0.5) < 1e-12) else None
    rows = []
    for N in N_grid:
        aN = a(N)
        prod = float(surv[N] * table.v(int(math.floor(aN + 1e-12))))
        rows.append({"N": N, "a_N": aN, "survival": float(surv[N]), "product": prod,
                     "error": None if limit is None else abs(prod - limit)})
    return {"law": law.name, "limit": limit, "rows": rows}


def sup_convergence_check(law: StepLaw, N: int, *, M: float = 2.0, mesh: float = 0.01,
                          table: Optional[RenewalTable] = None, norming=None, survival: Optional[float] = None) -> dict:
    """``sup_{[0, M]} |V_N - U|`` and the consistency bound built from the product.

    The supremum is taken over a grid of the given mesh together with every
    jump point ``k / a_N`` of ``V_N`` (both one-sided values), so it is the
    exact supremum of the step function against the continuous ``U``.
    The bound is ``|P(C_N) V(a_N) - C3| M^g + sup |V_N(x) - V_N(1) x^g|``.
    """
    a = norming or norming_sequence(law)
    aN = a(N)
    alpha, rho = _alpha_rho(law)
    g = alpha * (1.0 - rho)
    top = int(math.floor(aN * M + 1e-12)) + 1
    table = table if table is not None and table.grid_max >= top else renewal_table(law, top)
    if survival is None:
        survival = float(survival_curve(law, N)[-1])
    grid = np.linspace(0.0, M, int(math.ceil(M / mesh)) + 1)
    jumps = np.arange(1, top + 1) / aN
    jumps = jumps[jumps <= M]
    xs = np.concatenate([grid, jumps])
    right = rescaled_renewal(table, survival, aN, xs)
    # value just left of each jump point
    left = survival * table.v(np.arange(0, jumps.size))
    U = limit_renewal(xs, alpha, rho)
    diff = np.concatenate([np.abs(right - U), np.abs(left - U[grid.size:])])
    sup = float(diff.max())
    v1 = float(rescaled_renewal(table, survival, aN, 1.0))
    shape = np.concatenate([np.abs(right - v1 * xs ** g), np.abs(left - v1 * jumps ** g)])
    lattice = float(shape.max())
    bound = abs(v1 - C3) * M ** g + lattice
    return {"N": int(N), "a_N": aN, "M": M, "sup": sup, "product": v1, "lattice_term": lattice,
            "bound": bound, "consistent": bool(sup <= bound + 1e-12)}


# -- limit oracles ---------------------------------------------------------------

def rayleigh_cdf(x):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return -np.expm1(-0.5 * x * x)


def maxwell_pdf(x):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return C3 * x * x * np.exp(-0.5 * x * x)


def maxwell_cdf(x):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return special.erf(x / math.sqrt(2.0)) - C3 * x * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class LimitOracle:
    name: str
    cdf: Optional[Callable] = None
    alpha: Optional[float] = 2.0
    rho: Optional[float] = 0.5

    def applies_to(self, law: StepLaw) -> bool:
        if self.cdf is None:
            return True
        a, r = _alpha_rho(law)
        return abs(a - self.alpha) < 1e-12 and abs(r - self.rho) < 1e-12


def limit_oracles() -> dict:
    return {
        "rayleigh-meander": LimitOracle("rayleigh-meander", rayleigh_cdf),
        "maxwell-plus": LimitOracle("maxwell-plus", maxwell_cdf),
        "two-sample-self": LimitOracle("two-sample-self", None, None, None),
    }


ORACLE_ALIASES = {"rayleigh": "rayleigh-meander", "maxwell": "maxwell-plus", "two-sample": "two-sample-self"}


# -- convergence experiments -----------------------------------------------------

KINDS = ("meander", "plus", "die-at-zero")


def start_sequence(spec) -> Callable[[int], float]:
    """``{"const": v}`` gives ``x_N = v``; ``{"power": p}`` gives ``N^-p``; both add."""
    if isinstance(spec, (int, float)):
        spec = {"const": spec}
    if not isinstance(spec, dict) or not set(spec) <= {"const", "power"} or not spec:
        raise ValueError(f"bad start sequence {spec!r}")
    c = float(spec.get("const", 0.0))
    p = spec.get("power")
    return (lambda N: c + N ** (-float(p))) if p is not None else (lambda N: c)


def _meander_endpoints(law, start, N, size, seed, base_id):
    if law.max_step - law.min_step <= EXACT_SPAN:
        ml = meander_law(law, N, start)
        vals = concat(map_chunks(lambda k, st: ml.sample(k, st.gen), size, seed, base_id=base_id))
        return vals, ml.survival, size
    parts = map_chunks(lambda k, st: rejection_paths(law, start, N, N, k, st.gen, max_attempts=1000 * k),
                       size, seed, base_id=base_id)
    attempts = sum(p["attempts"] for p in parts)
    accepted = sum(p["accepted"] for p in parts)
    return concat([p["endpoints"] for p in parts]), accepted / attempts, attempts


def _plus_endpoints(law, start, N, size, seed, base_id, table):
    k = plus_kernel_for(law, start, N, table)
    return concat(map_chunks(lambda m, st: plus_paths(k, start, N, m, st.gen), size, seed, base_id=base_id))


def _die_endpoints(law, start, N, size, seed, base_id, table, pilot: int = 4096):
    k = die_at_zero_kernel_for(law, start, N, table)
    run = lambda m, st: die_at_zero_paths(k, start, N, m, st.gen)["state"]
    pilot_vals = concat(map_chunks(run, pilot, seed, base_id=base_id + (1 << 19)))
    p_hat = max(float(np.mean(pilot_vals > 0)), 1.0 / pilot)
    draws = int(math.ceil(1.1 * size / p_hat))
    vals = concat(map_chunks(run, draws, seed, base_id=base_id))
    surv = vals[vals > 0]
    return surv[:size], surv.size / draws, draws


@dataclass
class ExperimentReport:
    """Per-N convergence diagnostics; ``endpoints`` keeps the rescaled samples."""

    config: dict
    rows: list
    endpoints: dict = field(default_factory=dict, repr=False)
    paired: dict = field(default_factory=dict, repr=False)
    wall_time: float = 0.0

    @property
    def ks(self) -> np.ndarray:
        return np.array([r["ks"] for r in self.rows])

    def summary(self) -> dict:
        ks = self.ks
        floor = np.array([r["noise_floor"] for r in self.rows])
        mono = bool(np.all(np.diff(ks) <= floor[1:]))
        return dict(stamp(self.config), config=self.config, rows=self.rows,
                    final_ks=float(ks[-1]), ks_non_increasing=mono)

    def csv_text(self) -> str:
        keys = list(self.rows[0])
        st = stamp(self.config)
        lines = [f"# config_hash={st['config_hash']} version={st['version']}", ",".join(keys)]
        for r in self.rows:
            lines.append(",".join(_fmt(r[k]) for k in keys))
        return "\n".join(lines) + "\n"

    def tsv_text(self, N: int, points: int = 201) -> str:
        x_all = self.endpoints[N]
        hi = float(np.quantile(x_all, 0.999)) if x_all.size else 1.0
        xs = np.linspace(0.0, max(hi, 1e-9), points)
        ecdf = stats.Ecdf.of(x_all)(xs)
        if N in self.paired:
            ref = stats.Ecdf.of(self.paired[N])(xs)
        else:
            ref = _oracle_cdf(self.config.get("oracle"))(xs)
        st = stamp(self.config)
        lines = [f"# config_hash={st['config_hash']} version={st['version']} N={N}", "x\tecdf\toracle_cdf"]
        lines += [f"{x!r}\t{e!r}\t{r!r}" for x, e, r in zip(xs.tolist(), ecdf.tolist(), np.asarray(ref).tolist())]
        return "\n".join(lines) + "\n"

    def write(self, outdir, stem: str = "experiment") -> list:
        """Write CSV rows, JSON summary and one TSV per N; returns the paths."""
        out = Path(outdir)
        paths = [out / f"{stem}.csv", out / f"{stem}.json"]
        atomic_write(paths[0], self.csv_text())
        dump_json(paths[1], self.summary())
        for N in sorted(self.endpoints):
            p = out / f"{stem}_N{N}.tsv"
            atomic_write(p, self.tsv_text(N))
            paths.append(p)
        return paths


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _oracle_cdf(name):
    if name is None:
        return lambda x: np.full(np.shape(x), np.nan)
    key = ORACLE_ALIASES.get(name, name)
    o = limit_oracles().get(key)
    if o is None or o.cdf is None:
        return lambda x: np.full(np.shape(x), np.nan)
    return o.cdf


def convergence_experiment(kind: str, law, N_grid, *, xN=None, samples: int = 100_000, seed: int = 0,
                           oracle=None, paired_law=None, table: Optional[RenewalTable] = None,
                           norming=None, min_survivors: int = MIN_SURVIVORS, M: float = 2.0) -> ExperimentReport:
    """Rescaled endpoint laws along ``N_grid`` compared with a limit.

    ``oracle`` names an analytic CDF (``"rayleigh"``, ``"maxwell"``) or
    ``"two-sample"``, in which case the same experiment is run on
    ``paired_law`` and the two rescaled samples are compared.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    law = load_law(law)
    t0 = time.perf_counter()
    x_of = start_sequence(xN if xN is not None else {"const": 0.0})
    key = ORACLE_ALIASES.get(oracle, oracle) if oracle is not None else None
    if key is not None and key not in limit_oracles():
        raise ValueError(f"unknown oracle {oracle!r}")
    if key == "two-sample-self" and paired_law is None:
        raise ValueError("the two-sample oracle needs a paired law")
    if kind == "die-at-zero" and not law.aperiodic:
        warnings.warn(f"law {law.name!r} is not aperiodic", NonAperiodicWarning, stacklevel=2)
    paired = load_law(paired_law) if paired_law is not None else None
    config = {"kind": kind, "law": law.name, "law_hash": law.law_hash, "xN": xN if xN is not None else {"const": 0.0},
              "Ngrid": [int(n) for n in N_grid], "samples": int(samples), "seed": int(seed), "oracle": oracle,
              "paired_law": paired.name if paired is not None else None}
    report = ExperimentReport(config, [])
    a = norming or norming_sequence(law)
    a_p = norming_sequence(paired) if paired is not None else None
    exact_tables = law.max_step - law.min_step <= EXACT_SPAN
    surv_curve = survival_curve(law, max(N_grid)) if exact_tables and kind != "die-at-zero" else None
    for i, N in enumerate(N_grid):
        N = int(N)
        vals, extra = _endpoints(kind, law, a(N), x_of(N), N, samples, seed, i << 24, table)
        if vals.size < min_survivors:
            raise InsufficientSurvivors(f"only {vals.size} conditioned samples at N = {N}")
        x = vals / a(N)
        report.endpoints[N] = x
        row = {"N": N, "a_N": a(N), "start": extra["start"], "samples": int(x.size),
               "draws": int(extra["draws"]), "survival": extra["survival"]}
        if key == "two-sample-self":
            pv, _ = _endpoints(kind, paired, a_p(N), x_of(N), N, samples, seed, (i << 24) + (1 << 23), None)
            px = pv / a_p(N)
            report.paired[N] = px
            row["ks"] = stats.ks_two_sample(x, px)
            row["ks_pvalue"] = stats.ks_pvalue(row["ks"], x.size, px.size)
            row["noise_floor"] = 1.36 * math.sqrt(1.0 / x.size + 1.0 / px.size)
        elif key is not None:
            cdf = limit_oracles()[key].cdf
            row["ks"] = stats.ks_one_sample(x, cdf)
            row["ks_pvalue"] = stats.ks_pvalue(row["ks"], x.size)
            row["noise_floor"] = 1.36 / math.sqrt(x.size)
        else:
            row["ks"], row["ks_pvalue"], row["noise_floor"] = float("nan"), float("nan"), 1.36 / math.sqrt(x.size)
        if surv_curve is not None:
            sc = sup_convergence_check(law, N, M=M, norming=a, survival=float(surv_curve[N]))
            row["P_CN"] = float(surv_curve[N])
            row["product"] = sc["product"]
            row["sup_VN_U"] = sc["sup"]
            row["sup_bound"] = sc["bound"]
        report.rows.append(row)
    report.wall_time = time.perf_counter() - t0
    return report


def _endpoints(kind, law, aN, x, N, samples, seed, base_id, table):
    start = int(math.floor(aN * x + 1e-12))
    if kind == "meander":
        vals, surv, draws = _meander_endpoints(law, start, N, samples, seed, base_id)
    elif kind == "plus":
        vals = _plus_endpoints(law, start, N, samples, seed, base_id, table)
        surv, draws = None, samples
    else:
        vals, surv, draws = _die_endpoints(law, start, N, samples, seed, base_id, table)
    return vals, {"start": start, "survival": surv, "draws": draws}


def experiment_from_config(config: dict) -> ExperimentReport:
    """Run :func:`convergence_experiment` from a JSON-style configuration."""
    required = {"kind", "law", "Ngrid", "samples", "seed"}
    missing = required - set(config)
    if missing:
        raise ValueError(f"config is missing {sorted(missing)}")
    oracle = config.get("oracle")
    paired = None
    if isinstance(oracle, dict):
        paired = oracle.get("paired_law")
        oracle = oracle.get("name", "two-sample")
    return convergence_experiment(config["kind"], config["law"], config["Ngrid"], xN=config.get("xN"),
                                  samples=int(config["samples"]), seed=int(config["seed"]), oracle=oracle,
                                  paired_law=paired if paired is not None else config.get("paired_law"))
