"""Command-line experiment runner.

    nfdp solve CONFIG        backward DP on the reachable belief states
    nfdp oracle CONFIG       exhaustive general and Markov searches
    nfdp simulate CONFIG     Monte Carlo of a scheme or optimized policy
    nfdp verify CONFIG       randomized property battery

A config is a JSON object (or a list of them). An optional ``grid`` section
maps field names to lists of values and expands into their cross product.
Every successful run appends one JSON line to ``<out>/<config-hash>.jsonl``;
nothing is written when a run fails.

Exit status: 0 success, 1 property failure, 2 invalid config or cap exceeded.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import itertools
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelPair, parse_kernel
from .errors import CapacityError, DomainError, NFDPError, ValidationError

COMMANDS = ("solve", "oracle", "simulate", "verify")
SCHEMES = ("repetition", "pms_noiseless", "pms_noisy", "dp_policy", "markov_best", "general_best")
ORACLES = ("both", "general", "markov")
MEMORY_UPDATES = ("constant", "last_feedback")
DEFAULT_CAPS = {"actions": 10**6, "states": 10**7, "strategies": 10**6, "paths": 10**7}
DEFAULT_VERIFY = {"belief_recursion": 100, "noiseless_collapse": 50, "dp_vs_oracle": 20}
CSV_COLUMNS = ("config_hash", "method", "pe", "stderr", "dp_value", "oracle_general", "oracle_markov",
               "consistent", "seconds")

EXIT_OK, EXIT_PROPERTY, EXIT_INVALID = 0, 1, 2


@dataclass
class ExperimentConfig:
    forward: object
    feedback: object
    message_count: int = 2
    horizon: int = 1
    memory_size: int = 1
    memory_update: object = "constant"
    initial_memory: int = 0
    scheme: str = "repetition"
    oracle: str = "both"
    trials: int = 100_000
    seed: int = 0
    traces: int = 0
    caps: dict = field(default_factory=lambda: dict(DEFAULT_CAPS))
    verify: dict = field(default_factory=lambda: dict(DEFAULT_VERIFY))

    @classmethod
    def from_dict(cls, raw) -> "ExperimentConfig":
        """Parse and validate; every problem found is reported in one ``ValidationError``."""
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        problems = [f"unknown field {k!r}" for k in sorted(set(raw) - names)]
        for k in ("forward", "feedback"):
            if k not in raw:
                problems.append(f"missing required field {k!r}")
        for k in ("caps", "verify"):
            if not isinstance(raw.get(k, {}), dict):
                problems.append(f"{k} must be an object")
        if problems:
            raise ValidationError("; ".join(problems), problems)
        raw = copy.deepcopy(raw)
        raw["caps"] = {**DEFAULT_CAPS, **raw.get("caps", {})}
        raw["verify"] = {**DEFAULT_VERIFY, **raw.get("verify", {})}
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def to_dict(self):
        return copy.deepcopy(asdict(self))

    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def validate(self):
        problems = []
        kernels = {}
        for name in ("forward", "feedback"):
            try:
                kernels[name] = parse_kernel(getattr(self, name))
            except (ValidationError, DomainError) as exc:
                problems.append(f"{name} kernel: {exc}")
        if len(kernels) == 2 and kernels["forward"].shape[1] != kernels["feedback"].shape[0]:
            problems.append(
                f"forward kernel has {kernels['forward'].shape[1]} outputs but feedback kernel takes "
                f"{kernels['feedback'].shape[0]} inputs"
            )
        for name, low in (("message_count", 2), ("horizon", 1), ("memory_size", 1), ("trials", 1)):
            v = getattr(self, name)
            if not _is_int(v) or v < low:
                problems.append(f"{name} must be an integer >= {low}, got {v!r}")
        if not _is_int(self.seed) or self.seed < 0:
            problems.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if not _is_int(self.traces) or self.traces < 0:
            problems.append(f"traces must be a non-negative integer, got {self.traces!r}")
        if _is_int(self.memory_size) and (not _is_int(self.initial_memory)
                                          or not 0 <= self.initial_memory < self.memory_size):
            problems.append(f"initial_memory {self.initial_memory!r} outside 0..{self.memory_size - 1}")
        if self.scheme not in SCHEMES:
            problems.append(f"scheme {self.scheme!r} not one of {SCHEMES}")
        if self.oracle not in ORACLES:
            problems.append(f"oracle {self.oracle!r} not one of {ORACLES}")
        for group in ("caps", "verify"):
            for k, v in getattr(self, group).items():
                known = DEFAULT_CAPS if group == "caps" else DEFAULT_VERIFY
                if k not in known:
                    problems.append(f"unknown {group} entry {k!r}")
                elif not _is_int(v) or v < (1 if group == "caps" else 0):
                    problems.append(f"{group}.{k} must be a positive integer, got {v!r}")
        if not problems:
            try:
                self.memory_rule(kernels["feedback"].shape[1])
            except (ValidationError, DomainError) as exc:
                problems.append(f"memory_update: {exc}")
        if problems:
            raise ValidationError("invalid config: " + "; ".join(problems), problems)

    def channels(self) -> ChannelPair:
        return ChannelPair(parse_kernel(self.forward), parse_kernel(self.feedback))

    def memory_rule(self, feedback_size=None):
        from .policy import MemoryUpdate

        Z = feedback_size if feedback_size is not None else self.channels().n_feedback
        choice = self.memory_update
        if choice == "constant":
            if self.memory_size != 1:
                raise ValidationError("'constant' needs memory_size 1")
            return MemoryUpdate.constant(Z, self.message_count)
        if choice == "last_feedback":
            if self.memory_size != Z:
                raise ValidationError(f"'last_feedback' needs memory_size equal to |Z| = {Z}")
            return MemoryUpdate.last_feedback(Z, self.message_count)
        if isinstance(choice, dict) and set(choice) == {"table"}:
            g = MemoryUpdate(choice["table"])
            if (g.memory_size, g.feedback_size, g.message_count) != (self.memory_size, Z, self.message_count):
                raise ValidationError(
                    f"table has (U, Z, W) = {(g.memory_size, g.feedback_size, g.message_count)}, expected "
                    f"{(self.memory_size, Z, self.message_count)}"
                )
            if g.stages not in (1, self.horizon):
                raise ValidationError(f"table has {g.stages} stages for horizon {self.horizon}")
            return g
        raise ValidationError(f"expected one of {MEMORY_UPDATES} or {{'table': ...}}, got {choice!r}")


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def expand_grid(raw):
    """A config with a ``grid`` section becomes one config per point of the cross product."""
    if isinstance(raw, list):
        return [c for item in raw for c in expand_grid(item)]
    if not isinstance(raw, dict) or "grid" not in raw:
        return [raw]
    base = {k: v for k, v in raw.items() if k != "grid"}
    grid = raw["grid"]
    if not isinstance(grid, dict) or not all(isinstance(v, list) and v for v in grid.values()):
        raise ValidationError("grid must map field names to non-empty lists")
    keys = sorted(grid)
    return [{**base, **dict(zip(keys, combo))} for combo in itertools.product(*(grid[k] for k in keys))]


def load_configs(path, seed_override=None):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    configs = []
    for item in expand_grid(raw):
        if seed_override is not None and isinstance(item, dict):
            item = {**item, "seed": seed_override}
        configs.append(ExperimentConfig.from_dict(item))
    return configs


def _record(cfg, command, method, pe=None, stderr=None, **extra):
    return {
        "version": __version__,
        "command": command,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "method": method,
        "pe": None if pe is None else float(pe),
        "stderr": None if stderr is None else float(stderr),
        **extra,
    }


def run_solve(cfg: ExperimentConfig, workers=1):
    from .dp_solver import solve

    ch = cfg.channels()
    report = solve(
        ch, cfg.horizon, cfg.message_count, cfg.memory_size, cfg.memory_rule(), cfg.initial_memory,
        cfg.caps["actions"], cfg.caps["states"],
    )
    details = report.to_dict()
    seconds = details.pop("seconds")
    # pe is what the extracted policy achieves; dp_value is the DP optimum, a lower bound when inconsistent
    return _record(cfg, "solve", "dp", report.policy_pe, dp_value=report.dp_value, solve=details, seconds=seconds)


def _oracle_values(cfg, which, workers):
    from .oracle import exhaustive_general, exhaustive_markov

    ch = cfg.channels()
    out = {}
    if which in ("both", "general"):
        out["general"], enc = exhaustive_general(ch, cfg.horizon, cfg.message_count, cfg.caps["strategies"],
                                                 workers=workers)
        out["general_encoder"] = enc.to_literal()
    if which in ("both", "markov"):
        out["markov"], pol = exhaustive_markov(
            ch, cfg.horizon, cfg.message_count, cfg.memory_size, cfg.memory_rule(), cfg.initial_memory,
            cfg.caps["strategies"], workers=workers,
        )
        out["markov_policy"] = pol.to_literal()
    if "general" in out and "markov" in out:
        out["gap"] = out["markov"] - out["general"]
    return out, (enc if "general" in out else None), (pol if "markov" in out else None)


def run_oracle(cfg: ExperimentConfig, workers=1):
    start = time.perf_counter()
    values, _, _ = _oracle_values(cfg, cfg.oracle, workers)
    pe = values.get("general", values.get("markov"))
    return _record(cfg, "oracle", f"exhaustive_{cfg.oracle}", pe, oracle=values,
                   seconds=time.perf_counter() - start)


def run_simulate(cfg: ExperimentConfig, workers=1):
    from .evaluate import exact_error_probability, monte_carlo_pe
    from .schemes import blahut_arimoto, pms_noiseless, pms_noisy_conjecture, repetition_scheme

    start = time.perf_counter()
    ch = cfg.channels()
    M, n, T, seed = cfg.message_count, cfg.horizon, cfg.trials, cfg.seed
    extra = {}
    if cfg.scheme in ("pms_noiseless", "pms_noisy"):
        fx, capacity = blahut_arimoto(ch.forward)
        extra["input_distribution"] = fx.probs.tolist()
        extra["capacity_bits"] = capacity
        make = pms_noiseless if cfg.scheme == "pms_noiseless" else pms_noisy_conjecture
        scheme = make(fx, n, M)
        result = scheme.monte_carlo(ch, T, seed)
        if cfg.scheme == "pms_noiseless":
            extra["exact_pe"] = scheme.exact_error_probability(ch).error_probability
        else:
            try:
                extra["reference"] = {"markov_best": _oracle_values(cfg, "markov", workers)[0]["markov"]}
            except CapacityError as exc:
                extra["reference"] = {"markov_best": None, "skipped": str(exc)}
        if cfg.traces:
            extra["traces"] = [scheme.trace(w % M, ch, seed + w).to_dict() for w in range(cfg.traces)]
    else:
        if cfg.scheme == "repetition":
            encoder = repetition_scheme(M, n, ch.n_inputs, ch.n_feedback)
        elif cfg.scheme == "dp_policy":
            rec = run_solve(cfg, workers)
            encoder = _policy_from_literal(rec["solve"]["policy"], cfg)
            extra["dp_value"] = rec["dp_value"]
            extra["consistent"] = rec["solve"]["consistent"]
        else:
            values, enc, pol = _oracle_values(cfg, "general" if cfg.scheme == "general_best" else "markov", workers)
            encoder = enc if cfg.scheme == "general_best" else pol
            extra["oracle"] = values
        result = monte_carlo_pe(encoder, ch, T, seed, path_cap=cfg.caps["paths"], workers=workers)
        extra["exact_pe"] = exact_error_probability(encoder, ch, path_cap=cfg.caps["paths"]).error_probability
    return _record(cfg, "simulate", cfg.scheme, result.error_probability, result.standard_error,
                   trials=T, **extra, seconds=time.perf_counter() - start)


def _policy_from_literal(lit, cfg):
    from .policy import EncoderMap, MarkovPolicy

    ch = cfg.channels()
    encoders = tuple(EncoderMap(np.array(t), ch.n_inputs) for t in lit["encoders"])
    return MarkovPolicy(encoders, cfg.memory_rule(), lit["initial_memory"])


def run_verify(cfg: ExperimentConfig, workers=1):
    from .verify import Instance, check_dp_against_oracles, run_battery
    from .policy import EncoderMap, MarkovPolicy

    start = time.perf_counter()
    tallies, failures = run_battery(cfg.seed, cfg.verify)
    ch = cfg.channels()
    g = cfg.memory_rule()
    zero = EncoderMap(np.zeros((cfg.message_count, cfg.memory_size), dtype=np.int64), ch.n_inputs)
    fixture = Instance(ch, MarkovPolicy((zero,) * cfg.horizon, g, cfg.initial_memory))
    detail = check_dp_against_oracles(fixture)
    tallies["config_instance"] = 1
    if detail is not None:
        from .verify import Failure

        failures.append(Failure("config_instance", cfg.seed, 0, detail, fixture.to_literal()))
    rec = _record(cfg, "verify", "property_battery", checks=tallies,
                  failures=[f.to_dict() for f in failures], seconds=time.perf_counter() - start)
    return rec, failures


def append_record(record, outdir):
    path = Path(outdir) / f"{record['config_hash']}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def csv_row(record):
    solve, oracle = record.get("solve") or {}, record.get("oracle") or {}
    return {
        "config_hash": record["config_hash"],
        "method": record["method"],
        "pe": record["pe"],
        "stderr": record["stderr"],
        "dp_value": record.get("dp_value"),
        "oracle_general": oracle.get("general"),
        "oracle_markov": oracle.get("markov"),
        "consistent": solve.get("consistent", record.get("consistent")),
        "seconds": record.get("seconds"),
    }


def append_csv(record, path):
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            writer.writeheader()
        writer.writerow(csv_row(record))


def build_parser():
    parser = argparse.ArgumentParser(prog="nfdp", description="Finite-horizon feedback coding experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--out", default="results", help="directory for <config-hash>.jsonl records")
        p.add_argument("--csv", default=None, help="append one summary row per run to this CSV file")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--quiet", action="store_true", help="do not echo records to stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    seed = args.seed
    if os.environ.get("NFDP_SEED"):
        try:
            seed = int(os.environ["NFDP_SEED"])
        except ValueError:
            print(f"error: NFDP_SEED={os.environ['NFDP_SEED']!r} is not an integer", file=sys.stderr)
            return EXIT_INVALID
    workers = max(1, args.workers)
    status = EXIT_OK
    try:
        configs = load_configs(args.config, seed)
        records = []
        for cfg in configs:
            if args.command == "verify":
                rec, failures = run_verify(cfg, workers)
                for f in failures:
                    status = EXIT_PROPERTY
                    print("property failure; reproduce with:", json.dumps(f.to_dict(), sort_keys=True),
                          file=sys.stderr)
            else:
                rec = {"solve": run_solve, "oracle": run_oracle, "simulate": run_simulate}[args.command](
                    cfg, workers
                )
            records.append(rec)
    except ValidationError as exc:
        for p in exc.problems:
            print(f"invalid config: {p}", file=sys.stderr)
        return EXIT_INVALID
    except CapacityError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NFDPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for rec in records:
        append_record(rec, args.out)
        if args.csv:
            append_csv(rec, args.csv)
        if not args.quiet:
            print(json.dumps(rec, sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
