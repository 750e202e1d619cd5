"""Exact oracles and statistics for the verification protocol.

Everything here is either an enumeration over instructions and outcomes
(small n) or a thin statistical wrapper. Comparisons are reported as
:class:`Comparison` records carrying the estimate, the exact value when one
exists, the interval used and the verdict.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from mevsim import qstate
from mevsim.ac.scheduler import exact_distribution
from mevsim.errors import DimensionError
from mevsim.mev.machines import ProtocolParams, SourceBehavior, verdict
from mevsim.mev.worlds import MevDriver, build_concrete, build_ideal, parse_leaks, party_label
from mevsim.qstate import DensityMatrix

MAX_REJECTION_QUBITS = 6
MAX_ROUND_QUBITS = 4


# ---------------------------------------------------------------------------
# rejection probability
# ---------------------------------------------------------------------------


def rejection_by_instruction(rho: DensityMatrix) -> dict[tuple[int, ...], float]:
    """Pr[b_out = 1 | X] for every even-parity X."""
    rho = qstate.as_density(rho)
    n = rho.n
    if n > MAX_REJECTION_QUBITS:
        raise DimensionError(f"exact rejection is capped at {MAX_REJECTION_QUBITS} qubits; use Monte Carlo for n={n}")
    out = {}
    for X in qstate.even_parity_strings(n):
        dist = qstate.gated_outcome_distribution(rho, X)
        out[X] = float(math.fsum(dist[k] for k, Y in enumerate(qstate.all_bitstrings(n)) if verdict(X, Y)))
    return out


def exact_rejection_probability(rho: DensityMatrix) -> float:
    """Concrete one-round rejection probability of the XY test, averaged over uniform even-parity X."""
    table = rejection_by_instruction(rho)
    return math.fsum(table.values()) / len(table)


def ideal_rejection_probability(rho: DensityMatrix) -> float:
    tau = qstate.ghz_distance(qstate.as_density(rho))
    return tau * tau / 2


# ---------------------------------------------------------------------------
# exact one-round distributions
# ---------------------------------------------------------------------------

# key layout: (C, v, X, Y, b_out); for C = 0 every other slot is None
Key = tuple


def hide_verifier_outcome(key: Key) -> Key:
    """What the leak interfaces reveal: y_v is replaced by None."""
    c, v, X, Y, b = key
    if c == 0:
        return key
    return (c, v, X, tuple(None if j == v - 1 else y for j, y in enumerate(Y)), b)


def tv_distance(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class ExactRoundDistribution:
    """Joint distribution of one round's (C, v, X, Y, b_out) in one world."""

    world: str
    n: int
    joint: dict[Key, float]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def total(self) -> float:
        return math.fsum(self.joint.values())

    def marginal(self, fn: Callable[[Key], object], name: str | None = None) -> dict:
        if name is not None and name in self._cache:
            return self._cache[name]
        out: dict = {}
        for k, pr in self.joint.items():
            m = fn(k)
            out[m] = out.get(m, 0.0) + pr
        if name is not None:
            self._cache[name] = out
        return out

    def conditional(self, cond: Callable[[Key], object], value: Callable[[Key], object]) -> dict:
        """cond-value -> normalized distribution of value given it."""
        groups: dict = {}
        for k, pr in self.joint.items():
            g = groups.setdefault(cond(k), {})
            val = value(k)
            g[val] = g.get(val, 0.0) + pr
        out = {}
        for c, g in groups.items():
            z = math.fsum(g.values())
            if z > 0:
                out[c] = {val: pr / z for val, pr in g.items()}
        return out

    def observable(self) -> "ExactRoundDistribution":
        return ExactRoundDistribution(self.world, self.n, self.marginal(hide_verifier_outcome))


def _without(bits, v):
    return tuple(None if j == v - 1 else b for j, b in enumerate(bits))


COMPONENTS: dict[str, Callable[[Key], object]] = {
    "C": lambda k: k[0],
    "v": lambda k: k[1],
    "X\\x_v": lambda k: None if k[0] == 0 else _without(k[2], k[1]),
    "b_out": lambda k: k[4],
}


def component_tvs(a: ExactRoundDistribution, b: ExactRoundDistribution) -> dict[str, float]:
    """Per-component TV; ``Y\\y_v|v,X`` is the largest conditional TV over (v, X)."""
    out = {name: tv_distance(a.marginal(fn), b.marginal(fn)) for name, fn in COMPONENTS.items()}

    def cond(k):
        return (k[1], k[2]) if k[0] == 1 else None

    def value(k):
        return None if k[0] == 0 else _without(k[3], k[1])

    ca, cb = a.conditional(cond, value), b.conditional(cond, value)
    out["Y\\y_v|v,X"] = max((tv_distance(ca.get(c, {}), cb.get(c, {})) for c in set(ca) | set(cb) if c is not None), default=0.0)
    out["observable"] = tv_distance(a.observable().joint, b.observable().joint)
    out["full"] = tv_distance(a.joint, b.joint)
    return out


def exact_round_distribution(rho: DensityMatrix, params: ProtocolParams) -> tuple[ExactRoundDistribution, ExactRoundDistribution]:
    """Closed-form joints for the concrete world and the sigma_S world.

    Concrete: b_out = verdict(X, Y) with Y drawn from the gated outcome table.
    Simulated: the same v, X and Y construction, and b_out = 1 with
    probability tau**2 / 2 independently of them.
    """
    rho = qstate.as_density(rho)
    n = rho.n
    if n > MAX_ROUND_QUBITS:
        raise DimensionError(f"exact round distribution is capped at {MAX_ROUND_QUBITS} qubits, got {n}")
    if n != params.n:
        raise DimensionError(f"state has {n} qubits, params say {params.n}")
    p = params.p
    q = ideal_rejection_probability(rho)
    concrete = {(0, None, None, None, None): p}
    simulated = {(0, None, None, None, None): p}
    even = qstate.even_parity_strings(n)
    outcomes = qstate.all_bitstrings(n)
    w_vx = (1 - p) / (n * len(even))
    for v in range(1, n + 1):
        for X in even:
            dist = qstate.gated_outcome_distribution(rho, X)
            for idx, Y in enumerate(outcomes):
                pr = w_vx * float(dist[idx])
                if pr <= 0.0:
                    continue
                key = (1, v, X, Y)
                concrete[key + (verdict(X, Y),)] = concrete.get(key + (verdict(X, Y),), 0.0) + pr
                for b, pb in ((0, 1 - q), (1, q)):
                    if pb > 0:
                        simulated[key + (b,)] = pr * pb
    return ExactRoundDistribution("concrete", n, concrete), ExactRoundDistribution("simulated", n, simulated)


class _LeakRecorder(MevDriver):
    name = "leak-recorder"


def _observed_key(result, n: int) -> Key:
    outputs = result.transcript.outputs()
    view = outputs.get(party_label(1), [])
    c = view[0].b
    if c == 0:
        return (0, None, None, None, None)
    b = view[1].b
    leaks = parse_leaks(outputs)
    v = leaks["v"][0]
    X, Y = [0] * n, [None] * n
    for j in range(1, n + 1):
        if j == v:
            continue
        a, z = sorted((v, j))
        xj, yj, _ = leaks["channels"][f"leak.ch.{a}.{z}"]
        X[j - 1], Y[j - 1] = xj, yj
    X[v - 1] = sum(X) % 2
    return (1, v, tuple(X), tuple(Y), b)


def enumerated_round_distribution(rho: DensityMatrix, params: ProtocolParams, world: str) -> ExactRoundDistribution:
    """Observable joint of one round, by exhaustive enumeration of the actual wiring.

    ``world`` is ``"concrete"`` (pi_[n] R with the source open) or
    ``"simulated"`` (MEV_C sigma_S). x_v is recovered from the leaked
    entries by parity; y_v never leaks and is None.
    """
    rho = qstate.as_density(rho)
    if rho.n > MAX_ROUND_QUBITS:
        raise DimensionError(f"exact round distribution is capped at {MAX_ROUND_QUBITS} qubits, got {rho.n}")
    behavior = SourceBehavior.fixed(rho)
    if world == "concrete":
        w = build_concrete(params, behavior)
    elif world == "simulated":
        w = build_ideal(params, behavior)
    else:
        raise ValueError(f"unknown world {world!r}")
    joint = exact_distribution(w, _LeakRecorder(params.n, behavior), key=lambda r: _observed_key(r, params.n))
    return ExactRoundDistribution(world, params.n, joint)


# ---------------------------------------------------------------------------
# security parameters and the multi-round chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecurityParams:
    epsilon: float
    delta: float
    n: int
    k: int = 1

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if self.n < 1 or self.k < 1:
            raise ValueError(f"n and k must be positive, got n={self.n}, k={self.k}")


def usage_failure_bound(sp: SecurityParams) -> tuple[float, float]:
    """(p_choice, bound) = (eps^2 / (4 n delta), 1 / delta)."""
    return sp.epsilon**2 / (4 * sp.n * sp.delta), 1.0 / sp.delta


def choice_probability_ceiling(sp: SecurityParams) -> float:
    """4n / (k eps^2); values above 1 are vacuous as probabilities."""
    return 4 * sp.n / (sp.k * sp.epsilon**2)


def multiround_absorption(p: float, r: float) -> float:
    """Pr[the state is used before an abort] when every tested round rejects with probability r."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r!r}")
    return p / (p + (1 - p) * r)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

Z95 = 1.959963984540054


def proportion_ci(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """(estimate, normal-approximation half width)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    est = successes / trials
    return est, z * math.sqrt(est * (1 - est) / trials)


def binomial_band(p: float, trials: int, sigmas: float = 4.0) -> float:
    """Half width of the sigmas-wide band around a known success probability."""
    return sigmas * math.sqrt(p * (1 - p) / trials)


def hoeffding_one_sample(trials: int, alpha: float = 0.05) -> float:
    """One-sample two-sided Hoeffding deviation at confidence 1 - alpha."""
    return math.sqrt(math.log(2 / alpha) / (2 * trials))


def mean_ci(values: Sequence[float], z: float = Z95) -> tuple[float, float]:
    m = math.fsum(values) / len(values)
    if len(values) < 2:
        return m, math.inf
    var = math.fsum((x - m) ** 2 for x in values) / (len(values) - 1)
    return m, z * math.sqrt(var / len(values))


@dataclass(frozen=True)
class Comparison:
    """One statistical or exact check: never a bare pass/fail."""

    name: str
    estimate: float
    exact: float | None
    interval: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        exact = "n/a" if self.exact is None else f"{self.exact:.6g}"
        tail = f" ({self.note})" if self.note else ""
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: estimate={self.estimate:.6g} exact={exact} interval={self.interval:.3g}{tail}"


def compare(name: str, estimate: float, exact: float | None, interval: float, note: str = "") -> Comparison:
    """Pass iff |estimate - exact| <= interval (always passes without an exact value)."""
    ok = exact is None or abs(estimate - exact) <= interval
    return Comparison(name, estimate, exact, interval, ok, note)


# ---------------------------------------------------------------------------
# Monte Carlo rejection and the results table
# ---------------------------------------------------------------------------

RESULTS_HEADER = ("state", "n", "tau", "tau2_over_2", "exact_reject", "mc_reject", "ci95", "n_trials")


@dataclass(frozen=True)
class RejectionRow:
    state: str
    n: int
    tau: float
    tau2_over_2: float
    exact_reject: float | None
    mc_reject: float | None
    ci95: float | None
    n_trials: int

    def as_row(self) -> list:
        def fmt(x):
            return "" if x is None else (f"{x:.10g}" if isinstance(x, float) else x)

        return [fmt(getattr(self, f)) for f in RESULTS_HEADER]


def rejection_row(name: str, rho: DensityMatrix, rejects: int | None = None, tested: int = 0) -> RejectionRow:
    rho = qstate.as_density(rho)
    tau = qstate.ghz_distance(rho)
    exact = exact_rejection_probability(rho) if rho.n <= MAX_REJECTION_QUBITS else None
    mc = ci = None
    if rejects is not None and tested > 0:
        mc, ci = proportion_ci(rejects, tested)
    return RejectionRow(name, rho.n, tau, tau * tau / 2, exact, mc, ci, tested)


def write_results_csv(rows: Iterable, path: str | Path, extra: dict | None = None) -> None:
    """Write the results table; ``extra`` appends constant columns (seed, build ...)."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(RESULTS_HEADER) + list(extra))
        for r in rows:
            w.writerow(r.as_row() + [extra[k] for k in extra])


def depolarized_grid(n: int = 3, steps: int = 10) -> list[tuple[float, float, float]]:
    """(lambda, exact concrete rejection, tau**2 / 2) on an even lambda grid."""
    out = []
    for i in range(steps + 1):
        lam = i / steps
        rho = qstate.depolarize_ghz(n, lam)
        out.append((lam, exact_rejection_probability(rho), ideal_rejection_probability(rho)))
    return out
