"""Batch experiment runner.

    mevsim verify-round --config cfg.json --seed 7 --trials 10000 --out runs/a
    mevsim distinguish  --config cfg.json --seed 7 --out runs/b
    mevsim multiround   --config cfg.json --seed 7 --trials 10000 --out runs/c
    mevsim params --epsilon 0.2 --n 5 --delta 10

Scenario config (JSON)::

    {"n": 3, "p": 0.5, "max_rounds": 100,
     "source": {"kind": "fixed", "state": "rho.json"},
     "world": "concrete", "seed": 7, "trials": 1000,
     "pair": "honest-mev", "distinguisher": "all"}

``source.kind`` is ``honest``, ``fixed`` (``state``), ``schedule``
(``states``) or ``depolarized`` (``lambda``). A state is a path to a state
document (relative to the config file), an inline state document,
``{"basis": "000"}``, ``{"ghz": true}`` or ``{"depolarized": 0.3}``.
Command-line flags override config fields. The seed is mandatory.

Every trial t runs on its own seed derived from (seed, t), so records do not
depend on ``--workers``; they are written in trial order.

Exit codes: 0 ok, 2 config error, 3 runtime error, 4 a ``--check`` failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from mevsim import __version__, analysis, qstate
from mevsim.ac import otp
from mevsim.ac.advantage import advantage_estimate, trial_seed
from mevsim.ac.advantage import hoeffding_halfwidth as hoeffding_two_sample
from mevsim.ac.scheduler import exact_distribution
from mevsim.errors import ConfigError, EnumerationTooLarge, InvalidStateError, MevsimError
from mevsim.mev import distinguishers as mevd
from mevsim.mev.machines import ProtocolParams, SourceBehavior
from mevsim.mev.worlds import (
    Outcome,
    build_concrete,
    build_ghz,
    build_ideal,
    build_multiround_ideal,
    multiround_world,
    round_world,
    run_multiround,
    run_round,
)

BUILD = f"mevsim-{__version__}"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4
PAIRS = ("otp", "honest-mev", "dishonest-mev", "multiround-ghz", "control")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def _state_from_spec(spec, n: int, base: Path):
    if isinstance(spec, str):
        path = Path(spec)
        if not path.is_absolute():
            path = base / path
        try:
            return qstate.as_density(qstate.load_state(path))
        except FileNotFoundError as exc:
            raise ConfigError(f"state file not found: {path}") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot parse state file {path}: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError(f"bad state spec {spec!r}")
    try:
        if "basis" in spec:
            return qstate.to_density(qstate.basis_state(str(spec["basis"])))
        if spec.get("ghz"):
            return qstate.ghz_density(n)
        if "depolarized" in spec:
            return qstate.depolarize_ghz(n, float(spec["depolarized"]))
        return qstate.as_density(qstate.state_from_document(spec))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad state spec {spec!r}: {exc}") from exc


def _state_label(spec) -> str:
    if isinstance(spec, str):
        return Path(spec).stem
    if isinstance(spec, dict):
        if "basis" in spec:
            return f"|{spec['basis']}>"
        if spec.get("ghz"):
            return "ghz"
        if "depolarized" in spec:
            return f"depolarized({spec['depolarized']})"
    return "inline"


@dataclass
class Scenario:
    n: int
    p: float
    seed: int
    trials: int
    max_rounds: int
    source: dict
    world: str
    pair: str
    distinguisher: str
    check: bool
    workers: int
    save_transcripts: bool
    base: Path
    extra: dict = field(default_factory=dict)

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams(self.n, self.p, self.seed)

    def behavior(self) -> SourceBehavior:
        kind = self.source.get("kind", "honest")
        if kind == "honest":
            return SourceBehavior.honest()
        if kind == "fixed":
            if "state" not in self.source:
                raise ConfigError("fixed source needs a 'state'")
            return SourceBehavior.fixed(_state_from_spec(self.source["state"], self.n, self.base))
        if kind == "depolarized":
            lam = self.source.get("lambda")
            if lam is None:
                raise ConfigError("depolarized source needs 'lambda'")
            try:
                return SourceBehavior.fixed(qstate.depolarize_ghz(self.n, float(lam)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad depolarizing strength {lam!r}: {exc}") from exc
        if kind == "schedule":
            states = self.source.get("states")
            if not states:
                raise ConfigError("schedule source needs a non-empty 'states' list")
            return SourceBehavior.schedule([_state_from_spec(s, self.n, self.base) for s in states])
        raise ConfigError(f"unknown source kind {kind!r} (adaptive sources are library-only)")

    def source_label(self) -> str:
        kind = self.source.get("kind", "honest")
        if kind == "fixed":
            return _state_label(self.source.get("state"))
        if kind == "depolarized":
            return f"depolarized({self.source.get('lambda')})"
        if kind == "schedule":
            return "schedule[" + ";".join(_state_label(s) for s in self.source["states"]) + "]"
        return "ghz"


def load_scenario(args) -> Scenario:
    cfg: dict = {}
    base = Path.cwd()
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            cfg = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        base = path.parent
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or 'seed' in the config)")
    trials = args.trials if args.trials is not None else cfg.get("trials", 1000)
    try:
        seed, trials = int(seed), int(trials)
        n, p = int(cfg.get("n", 3)), float(cfg.get("p", 0.5))
        max_rounds = int(cfg.get("max_rounds", cfg.get("rounds", 1000)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric field: {exc}") from exc
    if seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if trials < 1:
        raise ConfigError(f"trials must be at least 1, got {trials}")
    if max_rounds < 1:
        raise ConfigError(f"max_rounds must be at least 1, got {max_rounds}")
    source = cfg.get("source", {"kind": "honest"})
    if isinstance(source, str):
        source = {"kind": source}
    sc = Scenario(
        n=n,
        p=p,
        seed=seed,
        trials=trials,
        max_rounds=max_rounds,
        source=source,
        world=str(cfg.get("world", "concrete")),
        pair=str(cfg.get("pair", "honest-mev")),
        distinguisher=str(cfg.get("distinguisher", "all")),
        check=bool(getattr(args, "check", False)),
        workers=int(getattr(args, "workers", 1) or 1),
        save_transcripts=bool(cfg.get("save_transcripts", False)),
        base=base,
        extra={k: cfg[k] for k in ("epsilon", "delta", "k") if k in cfg},
    )
    if getattr(args, "pair", None):
        sc.pair = args.pair
    if getattr(args, "distinguisher", None):
        sc.distinguisher = args.distinguisher
    if getattr(args, "world", None):
        sc.world = args.world
    try:
        sc.params
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return sc


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_records(out: Path, records) -> None:
    with open(out / "records.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _transcript_ref(out: Path, sc: Scenario, trial: int, transcript) -> str:
    text = transcript.dump()
    if sc.save_transcripts:
        d = out / "transcripts"
        d.mkdir(exist_ok=True)
        name = f"transcripts/{trial:06d}.txt"
        (out / name).write_text(text)
        return name
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()[:16]


def _map_trials(fn, sc: Scenario, payload) -> list:
    """Apply fn(payload, trial) over all trials, in trial order, optionally in worker processes."""
    if sc.workers <= 1:
        return [fn(payload, t) for t in range(sc.trials)]
    chunk = max(1, sc.trials // (4 * sc.workers))
    with ProcessPoolExecutor(sc.workers) as pool:
        return list(pool.map(fn, [payload] * sc.trials, range(sc.trials), chunksize=chunk))


# ---------------------------------------------------------------------------
# verify-round
# ---------------------------------------------------------------------------


def _round_trial(sc: Scenario, trial: int) -> dict:
    params = sc.params
    behavior, w = _world_cache(sc, "round", lambda b: round_world(params, b, sc.world))
    r = run_round(params, behavior, wiring=w, seed=trial_seed(sc.seed, trial))
    return {
        "trial": trial,
        "C": r.C,
        "outcome": r.kind,
        "rounds": 1,
        "b_out_history": [] if r.b_out is None else [r.b_out],
        "_transcript": r.transcript,
    }


_WORLDS: dict = {}


def _world_cache(sc: Scenario, kind: str, make):
    """(behavior, wiring) built once per process and scenario."""
    key = (kind, repr(sc))
    if key not in _WORLDS:
        behavior = sc.behavior()
        _WORLDS[key] = (behavior, make(behavior))
    return _WORLDS[key]


def cmd_verify_round(args) -> int:
    sc = load_scenario(args)
    behavior = sc.behavior()
    if sc.world not in ("concrete", "ideal"):
        raise ConfigError(f"verify-round world must be concrete or ideal, got {sc.world!r}")
    out = _out_dir(args)
    rows = _map_trials(_round_trial, sc, sc)
    records = []
    for r in rows:
        t = r.pop("_transcript")
        r["transcript"] = _transcript_ref(out, sc, r["trial"], t)
        records.append(r)
    _write_records(out, records)
    tested = sum(r["C"] == 1 for r in records)
    rejects = sum(r["b_out_history"] == [1] for r in records)
    rho = qstate.ghz_density(sc.n) if behavior.is_honest else behavior.states[0]
    row = analysis.rejection_row(sc.source_label(), rho, rejects, tested)
    row = analysis.RejectionRow(row.state, row.n, row.tau, row.tau2_over_2, row.exact_reject, row.mc_reject, row.ci95, sc.trials)
    analysis.write_results_csv(
        [row], out / "summary.csv", extra={"tested": tested, "world": sc.world, "seed": sc.seed, "build": BUILD}
    )
    mc = "n/a" if row.mc_reject is None else f"{row.mc_reject:.4f}"
    print(f"verify-round: {sc.trials} trials, {tested} tested, {rejects} rejected (mc_reject={mc}, exact={_fmt(row.exact_reject)})")
    if sc.check and tested and behavior.kind in ("honest", "fixed"):
        expected = row.exact_reject if sc.world == "concrete" else row.tau2_over_2
        if expected is not None:
            band = analysis.binomial_band(expected, tested) + 1e-12
            if abs(row.mc_reject - expected) > band:
                print(f"check failed: mc_reject {row.mc_reject:.4f} outside {expected:.4f} +/- {band:.4f}", file=sys.stderr)
                return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------------------
# distinguish
# ---------------------------------------------------------------------------


def _pair(sc: Scenario):
    """(world A, world B, distinguisher library)."""
    params = sc.params
    if sc.pair == "otp":
        concrete, ideal, _ = otp.otp_demo_wirings()
        return concrete, ideal, otp.otp_library()
    if sc.pair == "control":
        a, b = otp.control_pair()
        return a, b, {"forward": otp.ForwardCheck()}
    if sc.pair == "honest-mev":
        return build_concrete(params), build_ideal(params), mevd.honest_library(sc.n)
    behavior = sc.behavior()
    if sc.pair == "dishonest-mev":
        if behavior.is_honest:
            raise ConfigError("dishonest-mev needs a non-honest source")
        return build_concrete(params, behavior), build_ideal(params, behavior), mevd.dishonest_library(sc.n, behavior)
    if sc.pair == "multiround-ghz":
        a = build_multiround_ideal(params, behavior, sc.max_rounds)
        b = build_ghz(params, behavior)
        lib = mevd.honest_library(sc.n) if behavior.is_honest else mevd.dishonest_library(sc.n, behavior)
        return a, b, lib
    raise ConfigError(f"unknown pair {sc.pair!r}; expected one of {', '.join(PAIRS)}")


def cmd_distinguish(args) -> int:
    sc = load_scenario(args)
    wa, wb, library = _pair(sc)
    if sc.distinguisher != "all":
        if sc.distinguisher not in library:
            raise ConfigError(f"unknown distinguisher {sc.distinguisher!r} for {sc.pair}; have {sorted(library)}")
        library = {sc.distinguisher: library[sc.distinguisher]}
    out = _out_dir(args)
    records, rows = [], []
    for name, d in library.items():
        try:
            pa = exact_distribution(wa, d).get(0, 0.0)
            pb = exact_distribution(wb, d).get(0, 0.0)
            adv, ci, hoeff, method, trials = min(abs(pa - pb), 1.0), 0.0, 0.0, "exact", 0
        except EnumerationTooLarge:
            if sc.trials < 100:
                raise ConfigError("Monte Carlo fallback needs at least 100 trials")
            est = advantage_estimate(wa, wb, d, sc.trials, sc.seed)
            pa, pb, adv, ci, method, trials = est.p_a, est.p_b, est.estimate, est.ci95, "monte-carlo", sc.trials
            hoeff = hoeffding_two_sample(sc.trials)
        rec = {
            "pair": sc.pair,
            "distinguisher": name,
            "method": method,
            "advantage": adv,
            "ci95": ci,
            "hoeffding": hoeff,
            "p_a": pa,
            "p_b": pb,
            "trials": trials,
        }
        records.append(rec)
        rows.append([sc.pair, name, method, _fmt(adv), _fmt(ci), _fmt(hoeff), _fmt(pa), _fmt(pb), trials, sc.seed, BUILD])
        print(f"{sc.pair} / {name}: advantage={adv:.6g} ({method}{'' if method == 'exact' else f', ci95={ci:.3g}'})")
    _write_records(out, records)
    _write_table(
        out / "summary.csv",
        ["pair", "distinguisher", "method", "advantage", "ci95", "hoeffding", "p_a", "p_b", "trials", "seed", "build"],
        rows,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# multiround
# ---------------------------------------------------------------------------


def _multiround_trial(sc: Scenario, trial: int) -> dict:
    params = sc.params
    behavior, w = _world_cache(sc, "multi", lambda b: multiround_world(params, b, sc.world, sc.max_rounds))
    r = run_multiround(params, behavior, wiring=w, seed=trial_seed(sc.seed, trial))
    return {
        "trial": trial,
        "outcome": r.outcome.value,
        "rounds": r.rounds_elapsed,
        "b_out_history": list(r.verdicts),
        "_transcript": r.run.transcript,
    }


def predicted_shared(sc: Scenario, behavior: SourceBehavior) -> float | None:
    if behavior.is_honest:
        return 1.0
    if behavior.kind != "fixed":
        return None
    rho = behavior.states[0]
    r = analysis.exact_rejection_probability(rho) if sc.world == "concrete" else analysis.ideal_rejection_probability(rho)
    return analysis.multiround_absorption(sc.p, r)


def cmd_multiround(args) -> int:
    sc = load_scenario(args)
    behavior = sc.behavior()
    if sc.world not in ("concrete", "ideal", "ghz"):
        raise ConfigError(f"multiround world must be concrete, ideal or ghz, got {sc.world!r}")
    out = _out_dir(args)
    rows = _map_trials(_multiround_trial, sc, sc)
    records = []
    for r in rows:
        t = r.pop("_transcript")
        r["transcript"] = _transcript_ref(out, sc, r["trial"], t)
        records.append(r)
    _write_records(out, records)
    counts = {o.value: sum(r["outcome"] == o.value for r in records) for o in Outcome}
    if sum(counts.values()) != sc.trials:
        raise MevsimError("outcome counts do not add up to the number of trials")
    pr_shared, ci_shared = analysis.proportion_ci(counts["shared"], sc.trials)
    mean_rounds, ci_rounds = analysis.mean_ci([r["rounds"] for r in records])
    pred = predicted_shared(sc, behavior)
    if not math.isfinite(ci_rounds):
        ci_rounds = None
    header = [
        "world", "n", "p", "max_rounds", "source", "trials", "shared", "aborted", "budget",
        "pr_shared", "pr_shared_ci95", "mean_rounds", "mean_rounds_ci95", "predicted_shared", "seed", "build",
    ]
    row = [
        sc.world, sc.n, _fmt(sc.p), sc.max_rounds, sc.source_label(), sc.trials,
        counts["shared"], counts["aborted"], counts["budget"],
        _fmt(pr_shared), _fmt(ci_shared), _fmt(mean_rounds), _fmt(ci_rounds), _fmt(pred), sc.seed, BUILD,
    ]
    _write_table(out / "summary.csv", header, [row])
    print(
        f"multiround: shared={counts['shared']} aborted={counts['aborted']} budget={counts['budget']} "
        f"Pr[shared]={pr_shared:.4f}+/-{ci_shared:.4f} mean_rounds={mean_rounds:.3f} predicted={_fmt(pred) or 'n/a'}"
    )
    if sc.check and pred is not None and counts["budget"] == 0:
        if abs(pr_shared - pred) > max(ci_shared, analysis.binomial_band(pred, sc.trials, 1.96)) + 1e-12:
            print(f"check failed: Pr[shared] {pr_shared:.4f} vs predicted {pred:.4f}", file=sys.stderr)
            return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------------------
# params
# ---------------------------------------------------------------------------


def cmd_params(args) -> int:
    cfg: dict = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    vals = {}
    for key in ("epsilon", "n", "delta", "k"):
        flag = getattr(args, key)
        vals[key] = flag if flag is not None else cfg.get(key)
    if vals["epsilon"] is None or vals["n"] is None:
        raise ConfigError("params needs --epsilon and --n")
    if vals["delta"] is None and vals["k"] is None:
        raise ConfigError("params needs --delta (and/or --k)")
    try:
        eps, n = float(vals["epsilon"]), int(vals["n"])
        delta = float(vals["delta"]) if vals["delta"] is not None else 1.0
        k = int(vals["k"]) if vals["k"] is not None else 1
        sp = analysis.SecurityParams(eps, delta, n, k)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    rec: dict = {"epsilon": eps, "n": n, "k": k}
    if vals["delta"] is not None:
        p_choice, bound = analysis.usage_failure_bound(sp)
        rec.update(delta=delta, p_choice=p_choice, bound=bound)
        print(f"p_choice = eps^2/(4 n delta) = {p_choice:.6g}")
        print(f"bound    = 1/delta          = {bound:.6g}")
    ceiling = analysis.choice_probability_ceiling(sp)
    rec.update(ceiling=ceiling, ceiling_vacuous=ceiling > 1)
    print(f"4n/(k eps^2) = {ceiling:.6g}" + ("  (vacuous: exceeds 1)" if ceiling > 1 else ""))
    if args.out:
        out = _out_dir(args)
        _write_records(out, [rec])
        keys = ["epsilon", "n", "delta", "k", "p_choice", "bound", "ceiling", "ceiling_vacuous"]
        _write_table(out / "summary.csv", keys + ["build"], [[_fmt(rec.get(k)) for k in keys] + [BUILD]])
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mevsim", description="GHZ verification experiments")
    parser.add_argument("--version", action="version", version=BUILD)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=True):
        p.add_argument("--config", help="scenario config (JSON)")
        p.add_argument("--seed", type=int, help="master seed (required here or in the config)")
        if trials:
            p.add_argument("--trials", type=int, help="number of trials")
        p.add_argument("--out", help="output directory (default: current directory)")
        p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")

    p = sub.add_parser("verify-round", help="one-round trials of the verification protocol")
    common(p)
    p.add_argument("--world", choices=("concrete", "ideal"))
    p.add_argument("--check", action="store_true", help="exit 4 unless the rejection rate matches the oracle")
    p.set_defaults(fn=cmd_verify_round)

    p = sub.add_parser("distinguish", help="advantage of canned distinguishers on a pair of worlds")
    common(p)
    p.add_argument("--pair", choices=PAIRS)
    p.add_argument("--distinguisher")
    p.set_defaults(fn=cmd_distinguish)

    p = sub.add_parser("multiround", help="multi-round trials until the state is used or aborted")
    common(p)
    p.add_argument("--world", choices=("concrete", "ideal", "ghz"))
    p.add_argument("--check", action="store_true", help="exit 4 unless Pr[shared] matches the prediction")
    p.set_defaults(fn=cmd_multiround)

    p = sub.add_parser("params", help="security parameter helpers")
    p.add_argument("--config")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_params)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidStateError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MevsimError, ValueError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
