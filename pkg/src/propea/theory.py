"""Closed-form runtime bounds, parameter regimes and the level-condition auditor.

Level-based bounds take a ``LevelParams``: level count ``m``, per-level
upgrade probabilities ``s_j`` (j = 1..m-1), the no-change probability
``p0``, the selective-pressure margin ``delta``, ``gamma0`` and ``lam``.

Asymptotic (big-O) results are evaluated as "order values": the bracketed
expression times a caller-chosen multiplier, using natural logs clamped so
that ``log(x) >= 1``.  They are not guaranteed bounds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np

from .bitcore import all_bitstrings
from .diagnostics import cumulative_selection_prob, selection_values
from .engine import RunTrace
from .fitness import FitnessSpec, LinearSpec, ScaledSpec, base_spec, evaluate
from .operators import SelectionMode, log_mutation_probability

LN2 = math.log(2)
EXHAUSTIVE_MAX_N = 12


def clamped_log(x: float) -> float:
    return math.log(max(x, math.e))


@dataclass(frozen=True)
class LevelParams:
    m: int
    s: tuple
    p0: float
    delta: float
    gamma0: float
    lam: float

    def __post_init__(self):
        s = tuple(float(v) for v in self.s)
        object.__setattr__(self, "s", s)
        if self.m < 2 or len(s) != self.m - 1:
            raise ValueError("need m >= 2 and exactly m-1 upgrade probabilities")
        for name, v in [("p0", self.p0), ("delta", self.delta)] + [("s_j", v) for v in s]:
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not 0 < self.gamma0 < 1:
            raise ValueError(f"gamma0 must lie in (0, 1), got {self.gamma0}")
        if self.lam <= 0:
            raise ValueError("lam must be positive")

    @classmethod
    def uniform(cls, m, s, p0, delta, gamma0, lam):
        return cls(m, (s,) * (m - 1), p0, delta, gamma0, lam)

    @property
    def s_star(self) -> float:
        return min(self.s)


def population_size_threshold(m: int, gamma0: float, delta: float, s_star: float) -> float:
    """Smallest population size allowed by the population-size condition."""
    return 4 / (gamma0 * delta ** 2) * math.log(128 * m / (gamma0 * s_star * delta ** 2))


def updrift_population_rhs(params: LevelParams, C: float = 1.0) -> float:
    """Right-hand side of the up-drift population-size condition at ``params.lam`` (logs base 2)."""
    lam = params.lam
    inner = C * params.m / params.delta * (math.log2(lam) + 1 / (params.gamma0 * params.s_star * lam))
    return 8 / (params.gamma0 * params.delta ** 2) * math.log2(inner)


@dataclass
class BoundReport:
    value: float
    kind: str
    condition_holds: bool
    condition_threshold: float
    feasible: bool = True
    warnings: list = field(default_factory=list)


def level_bound(params: LevelParams) -> BoundReport:
    """Explicit level-based upper bound on the expected runtime."""
    lam, d, g0 = params.lam, params.delta, params.gamma0
    total = 0.0
    for s in params.s:
        arg = 6 * d * lam / (4 + g0 * s * d * lam)
        total += lam * math.log(arg) + 1 / (g0 * s)
    thr = population_size_threshold(params.m, g0, d, params.s_star)
    rep = BoundReport(8 / d ** 2 * total, "bound", lam >= thr, thr)
    if not rep.condition_holds:
        rep.warnings.append(f"population-size condition violated: lam={lam} < {thr:.6g}")
    return rep


def level_order_value(params: LevelParams, multiplier: float = 1.0, C: float = 1.0) -> BoundReport:
    """Multiplicative up-drift variant; an order value, not a guaranteed bound."""
    lam, d, g0 = params.lam, params.delta, params.gamma0
    first = params.m * lam * clamped_log(g0 * lam) / d
    second = sum(1 / (g0 * s) for s in params.s) / d
    rhs = updrift_population_rhs(params, C)
    rep = BoundReport(multiplier * (first + second), "order value", lam >= rhs, rhs)
    if g0 * lam <= math.e:
        rep.warnings.append("log(gamma0*lam) clamped to 1")
    if not rep.condition_holds:
        rep.warnings.append(f"up-drift population-size condition violated for C={C}: lam={lam} < {rhs:.6g}")
    return rep


@dataclass
class RegimeReport:
    regime: str
    inputs: dict
    derived: dict
    feasible: bool = True
    reasons: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def level_params(self, lam: Optional[float] = None) -> LevelParams:
        d = self.derived
        return LevelParams.uniform(d["m"], d["s_star"], d["p0"], d["delta"], d["gamma0"],
                                   lam if lam is not None else d["lam"])

    def to_dict(self) -> dict:
        return asdict(self)


def _note_population_size(rep: "RegimeReport") -> None:
    d = rep.derived
    d["pop_size_threshold"] = population_size_threshold(d["m"], d["gamma0"], d["delta"], d["s_star"])
    if d["lam_min"] < d["pop_size_threshold"]:
        rep.notes.append(f"closed-form lam_min {d['lam_min']:.6g} is below the exact population-size "
                         f"threshold {d['pop_size_threshold']:.6g}")


def _low_rate_common(n: int, a1: int, c: float) -> dict:
    if not 0 < c < 1:
        raise ValueError("rate constant c must lie in (0, 1)")
    if a1 < 1 or int(a1) != a1:
        raise ValueError("largest weight a1 must be a positive integer")
    chi = (1 - c) / (n * a1)
    return {"chi": chi, "rate": chi / n, "p0": (1 - chi / n) ** n,
            "gamma0": c / 4, "delta": c / (4 * n * a1)}


def low_rate_lambda_min(n: int, a1: int, c: float) -> float:
    return 2 ** 8 * n ** 2 * a1 ** 2 / c ** 3 * (math.log((n + 1) ** 5 * a1 ** 3 / (c * (1 - c))) + 11)


def low_rate_bound(n: int, a1: int, c: float, lam: float) -> float:
    """Closed-form runtime bound for the reduced-rate regime on linear functions."""
    delta = c / (4 * n * a1)
    return 2 ** 7 * n ** 2 * a1 ** 2 / c ** 2 * (
        n * lam * math.log(3 * delta * lam / 2) + 4 * math.e * n ** 3 * a1 / (c * (1 - c)))


def regime_low_rate(n: int, a1: int, c: float, lam: Optional[float] = None) -> RegimeReport:
    d = _low_rate_common(n, a1, c)
    d["m"] = n + 1
    d["s_star"] = (1 - c) / (math.e * n ** 2 * a1)
    d["lam_min"] = low_rate_lambda_min(n, a1, c)
    d["lam"] = lam if lam is not None else d["lam_min"]
    d["T_bound_at_lam_min"] = low_rate_bound(n, a1, c, d["lam_min"])
    d["T_bound"] = low_rate_bound(n, a1, c, d["lam"])
    rep = RegimeReport("low-rate", {"n": n, "a1": a1, "c": c, "lam": lam}, d)
    _note_population_size(rep)
    if d["lam"] < d["lam_min"]:
        rep.notes.append("lam below lam_min: bound not guaranteed")
    return rep


def regime_low_rate_order(n: int, a1: int, c: float, c_prime: float = 1.0, K: float = 3.0,
                    lam: Optional[float] = None, multiplier: float = 1.0) -> RegimeReport:
    d = _low_rate_common(n, a1, c)
    d["m"] = n + 1
    d["s_star"] = (1 - c) / (math.e * n ** 2 * a1)
    d["lam_min"] = c_prime * n ** 2 * a1 ** 2 * math.log(n * a1)
    d["lam_max"] = float(n * a1) ** K
    d["lam"] = lam if lam is not None else d["lam_min"]
    L = d["lam"]
    d["order_value"] = multiplier * (n ** 2 * a1 * L * clamped_log(n * a1) + n ** 3 * a1 ** 2)
    rep = RegimeReport("low-rate-order", {"n": n, "a1": a1, "c": c, "c_prime": c_prime, "K": K,
                                    "lam": lam, "multiplier": multiplier}, d)
    rep.notes.append("order value: asymptotic expression with explicit multiplier, not a bound")
    if d["lam_min"] <= 0:
        rep.feasible = False
        rep.reasons.append("n*a1 must exceed 1")
    if L > d["lam_max"]:
        rep.notes.append(f"lam exceeds (n a1)^K = {d['lam_max']:.6g}")
    return rep


def regime_scaled(n: int, chi: float, c: float, lam: Optional[float] = None) -> RegimeReport:
    inputs = {"n": n, "chi": chi, "c": c, "lam": lam}
    if chi <= 0:
        raise ValueError("chi must be positive")
    if c <= math.exp(chi):
        return RegimeReport("scaled", inputs, {"chi": chi, "rate": chi / n}, feasible=False,
                            reasons=[f"c={c} must exceed e^chi={math.exp(chi):.6g}"])
    eps = (c / math.exp(chi)) ** (1 / 3) - 1
    d = {"chi": chi, "rate": chi / n, "epsilon": eps, "delta": eps, "gamma0": eps / c,
         "s_star": chi / (math.e * n), "p0": (1 - chi / n) ** n, "m": n + 1}
    d["lam_min"] = 4 * c / eps ** 3 * math.log(128 * (n + 1) ** 2 * c * math.e / (eps ** 3 * chi))
    d["lam"] = lam if lam is not None else d["lam_min"]
    d["T_bound"] = scaled_bound(n, chi, c, d["lam"])
    rep = RegimeReport("scaled", inputs, d)
    _note_population_size(rep)
    return rep


def scaled_bound(n: int, chi: float, c: float, lam: float) -> float:
    eps = (c / math.exp(chi)) ** (1 / 3) - 1
    return 8 / eps ** 2 * (lam * n * math.log(3 * eps * lam / 2) + n ** 2 * math.e * c / (eps * chi))


def regime_decomposed(n: int, a1: int, r: int, c: float, c_prime: float = 1.0, K: float = 3.0,
                    N: Optional[int] = None, lam: Optional[float] = None,
                    multiplier: float = 1.0) -> RegimeReport:
    if r < 1:
        raise ValueError("block length r must be >= 1")
    d = _low_rate_common(n, a1, c)
    N = N if N is not None else n // r
    d["N"] = N
    d["m"] = N + 1
    d["s_star"] = (1 - c) ** r / (math.e * n ** (2 * r) * a1 ** r)
    d["lam_min"] = c_prime * n ** 2 * a1 ** 2 * r * math.log(n * a1)
    d["lam_max"] = float(n * a1) ** K
    d["lam"] = lam if lam is not None else d["lam_min"]
    L = d["lam"]
    d["order_value"] = multiplier * (n ** 2 * a1 * L * clamped_log(n * a1)
                                     + n ** (2 * r + 2) * a1 ** (r + 1) * (1 - c) ** (-r))
    rep = RegimeReport("decomposed", {"n": n, "a1": a1, "r": r, "c": c, "c_prime": c_prime, "K": K,
                                    "N": N, "lam": lam, "multiplier": multiplier}, d)
    rep.notes.append("order value: asymptotic expression with explicit multiplier, not a bound")
    return rep


def zero_bit_margin(chi: float) -> float:
    """``M(chi) = (1 - sqrt(r/2 - r^2/4 + 3/4)) / 2`` with ``r = ln 2 / chi``; NaN if undefined."""
    r = LN2 / chi
    inner = r / 2 - r * r / 4 + 3 / 4
    if inner < 0:
        return float("nan")
    return (1 - math.sqrt(inner)) / 2


def negative_regime(chi: float, eps: float = 0.2, weight_ratio: float = 1.0,
                    n: Optional[int] = None) -> RegimeReport:
    """Thresholds for the standard-rate regime where the EA stalls."""
    if chi <= 0:
        raise ValueError("chi must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if weight_ratio < 1:
        raise ValueError("weight ratio max_i a_i / min_j a_j is at least 1")
    psi = LN2 / (2 * chi) + 0.5
    M = zero_bit_margin(chi)
    eps_prime = (chi - LN2) / (2 * math.e)
    d = {"chi": chi, "psi": psi, "zero_fraction": M, "eps_prime": eps_prime,
         "alpha": 2 / (1 - eps_prime) if eps_prime < 1 else float("inf"),
         "approx_threshold": 1 - M / weight_ratio}
    if n is not None:
        a_n = n * (1 - eps) * M
        b_n = n * (1 - eps / 2) * M
        d.update({"n": n, "zero_bit_floor": a_n, "a_n": a_n, "b_n": b_n,
                  "b_over_n_limit": min(0.2, 0.5 - math.sqrt(psi * (2 - psi) / 4)),
                  "b_n_within_n_over_chi": b_n <= n / chi})
    rep = RegimeReport("standard-rate", {"chi": chi, "eps": eps, "weight_ratio": weight_ratio, "n": n}, d)
    if chi <= LN2:
        rep.feasible = False
        rep.reasons.append("regime inapplicable: needs chi > ln 2")
    rep.notes.append(
        "approximation threshold, literal reading: no solution with f(x)/f* <= threshold is reached; "
        "intended reading: the ratio stays below the threshold")
    return rep


# ---------------------------------------------------------------------------
# Condition auditor


@dataclass
class AuditReport:
    upgrade_analytic: Optional[bool] = None
    upgrade_exhaustive: Optional[bool] = None
    upgrade_min: list = field(default_factory=list)
    stay_analytic: Optional[bool] = None
    stay_exhaustive: Optional[bool] = None
    pressure_checked: int = 0
    pressure_violations: int = 0
    pressure_skipped_optimal: int = 0
    pressure_min_ratio: Optional[float] = None
    pop_size_ok: Optional[bool] = None
    pop_size_threshold: Optional[float] = None
    pop_size_updrift_ok: Optional[bool] = None
    pop_size_updrift_rhs: Optional[float] = None
    unsupported: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        checks = [self.upgrade_analytic, self.upgrade_exhaustive, self.stay_analytic, self.stay_exhaustive, self.pop_size_ok]
        return all(c is not False for c in checks) and self.pressure_violations == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _block_flip_distance(table: np.ndarray, size: int) -> int:
    """Worst-case Hamming distance from any block assignment to a satisfying one."""
    codes = np.arange(1 << size)
    sat = codes[table]
    dist = np.array([[bin(a ^ b).count("1") for b in sat] for a in codes])
    return int(dist.min(axis=1).max())


def analytic_upgrade_bounds(spec: FitnessSpec, rate: float) -> np.ndarray:
    """Lower bound on the probability of leaving level j upwards, j = 0..m-2.

    Linear: flip one 0-bit among the first j+1 positions and nothing else.
    Decomposed: solve one unsolved block among the first j+1 blocks and
    change nothing else.
    """
    spec = base_spec(spec)
    n = spec.n
    if isinstance(spec, LinearSpec):
        p = math.exp(log_mutation_probability(1, n, rate))
        return np.full(n, p)
    per_block = np.array([math.exp(log_mutation_probability(_block_flip_distance(t, len(b)), n, rate))
                          for b, t in zip(spec.blocks, spec.tables)])
    return np.minimum.accumulate(per_block)


def exhaustive_transition_bounds(spec: FitnessSpec, rate: float):
    """Exact per-level minima of P(upgrade) and P(stay at or above) over all strings.

    Returns ``(upgrade_min, stay_min)``, each of length m-1 with NaN for empty
    levels.  Only feasible for ``n <= 12``.
    """
    n = spec.n
    if n > EXHAUSTIVE_MAX_N:
        raise ValueError(f"exhaustive verification is limited to n <= {EXHAUSTIVE_MAX_N}")
    X = all_bitstrings(n)
    levels = spec.partition().level_of_values(evaluate(spec, X))
    m = spec.partition().m
    pmut = np.exp(log_mutation_probability(np.arange(n + 1), n, rate))
    popcount = np.array([bin(k).count("1") for k in range(1 << n)])
    codes = np.arange(1 << n)
    up = np.empty(1 << n)
    stay = np.empty(1 << n)
    for start in range(0, 1 << n, 256):
        src = codes[start:start + 256]
        P = pmut[popcount[src[:, None] ^ codes[None, :]]]
        lv = levels[src][:, None]
        up[start:start + 256] = (P * (levels[None, :] > lv)).sum(axis=1)
        stay[start:start + 256] = (P * (levels[None, :] >= lv)).sum(axis=1)
    up_min = np.full(m - 1, np.nan)
    stay_min = np.full(m - 1, np.nan)
    for j in range(m - 1):
        mask = levels == j
        if mask.any():
            up_min[j] = up[mask].min()
            stay_min[j] = stay[mask].min()
    return up_min, stay_min


def pressure_ratio(beta: float, gamma: float, delta: float, p0: float) -> float:
    """Ratio ``beta * p0 / ((1 + delta) * gamma)``; selective pressure holds iff it is >= 1."""
    return beta * p0 / ((1 + delta) * gamma)


def audit_conditions(spec: FitnessSpec, regime: RegimeReport, rate: Optional[float] = None,
                     trace: Optional[RunTrace] = None, populations: Iterable[np.ndarray] = (),
                     selection: Optional[SelectionMode] = None, lam: Optional[float] = None,
                     delta: Optional[float] = None, C: float = 1.0,
                     exhaustive: Optional[bool] = None) -> AuditReport:
    """Check the upgrade, stay, selective-pressure and population-size conditions.

    ``trace`` supplies sampled populations through their recorded beta
    values; ``populations`` are raw fitness vectors.  ``delta`` overrides the
    regime's selective-pressure margin.  Populations containing an optimum are
    skipped by the pressure check.
    """
    d = regime.derived
    rep = AuditReport()
    rate = rate if rate is not None else d["rate"]
    p0_regime = d["p0"]
    delta = delta if delta is not None else d["delta"]
    gamma0 = d["gamma0"]
    s_star = d["s_star"]
    scaled = isinstance(spec, ScaledSpec)
    if scaled and regime.regime != "scaled":
        rep.unsupported.append("scaled fitness audited against an integer-weight unscaled regime")
    if not base_spec(spec).integer and regime.regime != "scaled":
        rep.unsupported.append("integer-only checks requested on non-integer weights")
    if spec.partition().m != d["m"]:
        rep.unsupported.append(f"spec has {spec.partition().m} levels, regime assumes {d['m']}")
        return rep

    analytic = analytic_upgrade_bounds(spec, rate)
    rep.upgrade_analytic = bool(np.all(analytic >= s_star))
    rep.stay_analytic = (1 - rate) ** spec.n >= p0_regime * (1 - 1e-12)
    if exhaustive is None:
        exhaustive = spec.n <= EXHAUSTIVE_MAX_N
    if exhaustive:
        up_min, stay_min = exhaustive_transition_bounds(spec, rate)
        rep.upgrade_min = [None if np.isnan(v) else float(v) for v in up_min]
        rep.upgrade_exhaustive = bool(np.all(np.isnan(up_min) | (up_min >= s_star)))
        rep.stay_exhaustive = bool(np.all(np.isnan(stay_min) | (stay_min >= p0_regime * (1 - 1e-12))))

    if not rep.unsupported:
        tol = 1e-12
        ratios = []
        if trace is not None:
            for rec in trace.records:
                if rec.optimum_present:
                    rep.pressure_skipped_optimal += 1
                    continue
                for g, b in rec.beta.items():
                    if g <= gamma0 + tol:
                        ratios.append(pressure_ratio(b, g, delta, p0_regime))
        sel = selection or (SelectionMode.scaled(spec.c) if scaled else SelectionMode.proportionate())
        grid = sorted({g for g in (0.01, 0.05, 0.1, 0.25, gamma0) if g <= gamma0 + tol})
        top = d["m"] - 1
        for f in populations:
            f = np.asarray(f)
            if np.any(spec.partition().level_of_values(f) == top):
                rep.pressure_skipped_optimal += 1
                continue
            vals = selection_values(f, sel)
            for g in grid:
                ratios.append(pressure_ratio(cumulative_selection_prob(vals, g, sel), g, delta, p0_regime))
        rep.pressure_checked = len(ratios)
        rep.pressure_violations = int(sum(r < 1 - tol for r in ratios))
        rep.pressure_min_ratio = min(ratios) if ratios else None

    L = lam if lam is not None else d["lam"]
    rep.pop_size_threshold = population_size_threshold(d["m"], gamma0, d["delta"], s_star)
    rep.pop_size_ok = L >= rep.pop_size_threshold
    params = LevelParams.uniform(d["m"], s_star, p0_regime, d["delta"], gamma0, L)
    rep.pop_size_updrift_rhs = updrift_population_rhs(params, C)
    rep.pop_size_updrift_ok = L >= rep.pop_size_updrift_rhs
    return rep
