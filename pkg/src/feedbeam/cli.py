"""Command-line front end: config loading, orchestration, serialization.

An experiment is described by a JSON document::

    {
      "command": "outage",
      "config": { "M": 2, "N": 200, "P": 100.0, "N_o": 1.0, "T_f": 50,
                  "k_o": 10.0, "epsilon_o": 0.05, "delta": 0.5,
                  "seed": 42, "estimation_mode": "perfect", "trials": 100000 },
      "sweep": [50, 100, 200],        # optional list of N values
      "output_path": "outage.csv",    # optional
      "format": "csv"                 # optional, "csv" or "json"
    }

Unknown keys are rejected. ``--command``, ``--out``, ``--format`` and
``--seed`` override the file. Results are written atomically (temp file +
rename) and reruns with the same spec produce byte-identical artifacts at
any worker count.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .bounds import epsilon_max, outage_bound
from .config import NetworkConfig
from .errors import ConfigError, FeedbeamError
from .markov import build_markov, gain_moments_exact, one_step_absorb_probability
from .outage import estimate_outage, interference_scaling_probe
from .protocol import compare_protocols, estimate_interference_power
from .rng import RandomStream
from .training import ensemble_gain_stats, run_convergence

__all__ = ["COMMANDS", "ExperimentSpec", "load_config", "loads_config", "serialize", "run", "main"]

COMMANDS = (
    "convergence",
    "markov-verify",
    "bounds",
    "outage",
    "interference-probe",
    "protocol-compare",
)

_DEFAULT_FORMAT = {
    "convergence": "csv",
    "markov-verify": "csv",
    "bounds": "json",
    "outage": "csv",
    "interference-probe": "csv",
    "protocol-compare": "json",
}

# Commands whose artifact schema has no N column cannot sweep N.
_SWEEPABLE = ("bounds", "outage", "interference-probe", "protocol-compare")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_UNKNOWN_COMMAND = 3
EXIT_UNWRITABLE = 4


class UnknownCommandError(FeedbeamError):
    pass


class UnwritablePathError(FeedbeamError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a command, its scenario, and output disposition."""

    command: str | None
    config: NetworkConfig
    sweep: tuple[int, ...] | None = None
    output_path: str | None = None
    format: str | None = None

    def resolved(self) -> "ExperimentSpec":
        """Fill per-command defaults for format and output path."""
        fmt = self.format or _DEFAULT_FORMAT.get(self.command or "", "csv")
        out = self.output_path or f"{self.command}.{fmt}"
        return dataclasses.replace(self, format=fmt, output_path=out)


_TOP_LEVEL_KEYS = ("command", "config", "sweep", "output_path", "format")


def loads_config(text: str) -> ExperimentSpec:
    """Parse and validate an experiment document from a JSON string."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config parse error at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(doc, dict):
        raise ConfigError("experiment document must be a JSON object")
    unknown = sorted(set(doc) - set(_TOP_LEVEL_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    if "config" not in doc:
        raise ConfigError("missing key: config")
    config = NetworkConfig.from_dict(doc["config"])

    sweep = doc.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, list) or not sweep:
            raise ConfigError("sweep must be a nonempty list of integers")
        for n in sweep:
            if not isinstance(n, int) or isinstance(n, bool) or n < 1:
                raise ConfigError(f"sweep entries must be integers >= 1, got {n!r}")
        sweep = tuple(sweep)

    fmt = doc.get("format")
    if fmt is not None and fmt not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {fmt!r}")
    out = doc.get("output_path")
    if out is not None and not isinstance(out, str):
        raise ConfigError(f"output_path must be a string, got {out!r}")

    spec = ExperimentSpec(
        command=doc.get("command"), config=config, sweep=sweep, output_path=out, format=fmt
    )
    if spec.command is not None:
        validate_spec(spec)
    return spec


def load_config(path: str) -> ExperimentSpec:
    """Load an experiment spec from a JSON file (strict schema)."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path!r}: {e}")
    return loads_config(text)


def serialize(spec: ExperimentSpec) -> str:
    """JSON text such that loads_config(serialize(spec)) == spec."""
    doc: dict[str, Any] = {"command": spec.command, "config": spec.config.to_dict()}
    if spec.sweep is not None:
        doc["sweep"] = list(spec.sweep)
    if spec.output_path is not None:
        doc["output_path"] = spec.output_path
    if spec.format is not None:
        doc["format"] = spec.format
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def validate_spec(spec: ExperimentSpec) -> None:
    if spec.command is None:
        raise ConfigError("no command given (set it in the config file or with --command)")
    if spec.command not in COMMANDS:
        raise UnknownCommandError(
            f"unknown command {spec.command!r}; expected one of: {', '.join(COMMANDS)}"
        )
    if spec.sweep is not None and spec.command not in _SWEEPABLE:
        raise ConfigError(f"command {spec.command!r} does not support an N sweep")
    if spec.command in ("bounds", "outage"):
        ceiling = epsilon_max()
        if not spec.config.epsilon_o < ceiling:
            raise ConfigError(
                f"epsilon_o={spec.config.epsilon_o} is infeasible for command "
                f"{spec.command!r}: it must be below the feasibility threshold "
                f"epsilon_max() = {ceiling:.5f}"
            )


# ---------------------------------------------------------------------------
# serialization helpers


def _fmt_cell(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _csv_text(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt_cell(c) for c in row) for row in rows)
    return "\n".join(lines) + "\n"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _json_text(doc: Any) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".feedbeam-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(text)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
    except OSError as e:
        raise UnwritablePathError(f"cannot write output file {path!r}: {e}")


# ---------------------------------------------------------------------------
# command runners: each returns (artifact text, summary lines)


def _cmd_convergence(spec: ExperimentSpec, workers: int) -> tuple[str, list[str]]:
    cfg = spec.config
    res = run_convergence(cfg, RandomStream(cfg.seed, "convergence"), workers=workers)
    ratio = res.gain[:, :, -1].mean() / res.abs_sum.mean()
    summary = [
        f"convergence N={cfg.N} M={cfg.M} trials={cfg.trials} "
        f"frames={res.frames[-1] + 1} final_gain_ratio={ratio:.4f}"
    ]
    columns = ("trial", "group", "t", "gain", "aligned_count", "accepted")
    if spec.format == "json":
        doc = [
            {
                "trial": trial,
                "group": group,
                "t": int(t),
                "gain": float(res.gain[trial, group, k]),
                "aligned_count": int(res.aligned_count[trial, group, k]),
                "accepted": bool(res.accepted[trial, group, k]),
            }
            for trial in range(cfg.trials)
            for group in range(cfg.M)
            for k, t in enumerate(res.frames)
        ]
        return _json_text(doc), summary
    rows = (
        (
            trial,
            group,
            int(t),
            res.gain[trial, group, k],
            res.aligned_count[trial, group, k],
            bool(res.accepted[trial, group, k]),
        )
        for trial in range(cfg.trials)
        for group in range(cfg.M)
        for k, t in enumerate(res.frames)
    )
    return _csv_text(columns, list(rows)), summary


def _cmd_markov_verify(
    spec: ExperimentSpec, workers: int, channel: np.ndarray | None
) -> tuple[str, list[str]]:
    cfg = spec.config
    if channel is not None:
        h = np.asarray(channel, dtype=float)
        if h.size != cfg.N:
            raise ConfigError(f"--channel has {h.size} entries but config N={cfg.N}")
    else:
        h = RandomStream(cfg.seed, "markov/h").generator().standard_normal(cfg.N)
    model = build_markov(h)
    p_abs = one_step_absorb_probability(model)

    t_checks = [1, 10, 50]
    moments = [gain_moments_exact(model, t) for t in t_checks]
    exact = np.array([m[0] for m in moments])
    # True (chain-induced) Monte Carlo standard error: sample variance
    # degenerates once every trajectory is absorbed.
    errs = np.array([m[1] for m in moments]) / math.sqrt(cfg.trials)
    sim_mean, _ = ensemble_gain_stats(
        h, t_checks, cfg.trials, cfg, RandomStream(cfg.seed, "markov/sim"), workers=workers
    )
    worst = float(np.max(np.abs(sim_mean - exact) / np.maximum(errs, 1e-300)))
    summary = [
        f"markov-verify N={cfg.N} states={model.n_states} "
        f"absorbing_code={model.absorbing_index} max_dev={worst:.2f} stderr units "
        f"over t={t_checks} ({cfg.trials} trajectories)"
    ]
    if spec.format == "json":
        doc = {
            "N": cfg.N,
            "h": h,
            "absorbing_code": model.absorbing_index,
            "start_code": model.start_index,
            "states": [
                {"state_code": s, "gain": model.gains[s], "p_to_absorbing": p_abs[s]}
                for s in range(model.n_states)
            ],
            "expected_gain": [
                {"t": t, "exact": exact[k], "simulated": sim_mean[k], "stderr": errs[k]}
                for k, t in enumerate(t_checks)
            ],
        }
        return _json_text(doc), summary
    columns = ("state_code", "gain", "p_to_absorbing")
    rows = [(s, model.gains[s], p_abs[s]) for s in range(model.n_states)]
    return _csv_text(columns, rows), summary


def _cmd_bounds(spec: ExperimentSpec, workers: int) -> tuple[str, list[str]]:
    cfg = spec.config
    n_values = list(spec.sweep) if spec.sweep else [cfg.N]
    reports = [outage_bound(n, cfg) for n in n_values]
    summary = [
        f"bounds N={r.N} M={r.M} rate={r.rate:.4f} bound_finite={r.bound_finite:.4g} "
        f"bound_asymptotic={r.bound_asymptotic:.4g}"
        for r in reports
    ]
    if spec.format == "json":
        doc = reports[0].to_dict() if spec.sweep is None else [r.to_dict() for r in reports]
        return _json_text(doc), summary
    columns = (
        "N", "M", "epsilon_o", "delta", "k1", "k2", "k3", "c_1", "rate",
        "term1", "term2", "term3", "bound_finite", "bound_asymptotic",
    )
    rows = [tuple(r.to_dict()[c] for c in columns) for r in reports]
    return _csv_text(columns, rows), summary


def _cmd_outage(spec: ExperimentSpec, workers: int, mode: str) -> tuple[str, list[str]]:
    cfg = spec.config
    n_values = list(spec.sweep) if spec.sweep else [cfg.N]
    results = []
    for n in n_values:
        cfg_n = cfg.replace(N=n)
        rate = outage_bound(n, cfg_n).rate
        results.append(
            estimate_outage(
                cfg_n, rate, mode, RandomStream(cfg.seed, f"outage/N/{n}"), workers=workers
            )
        )
    summary = [
        f"outage N={r.N} rate={r.rate:.4f} empirical={r.outage_empirical:.6f} "
        f"(+-{r.stderr:.6f}) bound_finite={r.bound_finite:.4g} mode={r.weights_mode}"
        for r in results
    ]
    if spec.format == "json":
        doc = results[0].to_dict() if spec.sweep is None else [r.to_dict() for r in results]
        return _json_text(doc), summary
    columns = (
        "N", "M", "epsilon_o", "delta", "rate", "trials", "outage_empirical",
        "stderr", "bound_finite", "bound_asymptotic", "mode",
    )
    rows = [tuple(r.to_dict()[c] for c in columns) for r in results]
    return _csv_text(columns, rows), summary


def _cmd_interference_probe(spec: ExperimentSpec, workers: int) -> tuple[str, list[str]]:
    cfg = spec.config
    n_values = list(spec.sweep) if spec.sweep else [cfg.N]
    probe = interference_scaling_probe(
        cfg, n_values, RandomStream(cfg.seed, "probe"), workers=workers
    )
    summary = [
        f"interference-probe N={r.N} trials={r.trials} mean_sq={r.mean_sq:.3f} "
        f"control_sq={r.control_sq:.3f}"
        for r in probe.rows
    ]
    summary.append(f"interference-probe slope={probe.slope:.4f} over N={n_values}")
    if spec.format == "json":
        doc = {
            "rows": [dataclasses.asdict(r) for r in probe.rows],
            "slope": probe.slope,
        }
        return _json_text(doc), summary
    columns = ("N", "trials", "mean_sq", "control_sq", "sample_mean", "slope")
    rows = [
        (r.N, r.trials, r.mean_sq, r.control_sq, r.sample_mean, probe.slope) for r in probe.rows
    ]
    return _csv_text(columns, rows), summary


def _cmd_protocol_compare(
    spec: ExperimentSpec, workers: int, sigma_source: str
) -> tuple[str, list[str]]:
    cfg = spec.config
    if cfg.M < 2:
        raise ConfigError("protocol-compare requires M >= 2")
    n_values = list(spec.sweep) if spec.sweep else [cfg.N]
    rate_assumed = 1.0  # the ordering of the two protocols does not depend on R
    docs, summary = [], []
    for n in n_values:
        cfg_n = cfg.replace(N=n)
        if sigma_source == "monte-carlo":
            est = estimate_interference_power(
                cfg_n, RandomStream(cfg.seed, f"protocol/N/{n}"), workers=workers
            )
            per_link = est.per_link
            sigma = est.mean_active
        else:
            per_link = np.array([i * cfg_n.P for i in range(cfg_n.M)])
            sigma = float(per_link[1:].mean())
        report = compare_protocols(sigma, cfg_n, rate_assumed)
        docs.append(
            {
                **report.to_dict(),
                "N": n,
                "M": cfg_n.M,
                "sigma_source": sigma_source,
                "sigma_per_link": per_link,
                "rate_assumed": rate_assumed,
            }
        )
        summary.append(
            f"protocol-compare N={n} M={cfg_n.M} sigma_I2={report.sigma_I2:.4f} "
            f"lhs={report.condition_lhs:.4f} rhs={report.condition_rhs:.4f} "
            f"modified_better={report.modified_better}"
        )
    if spec.format == "json":
        doc = docs[0] if spec.sweep is None else docs
        return _json_text(doc), summary
    columns = (
        "N", "M", "sigma_I2", "frame_ratio", "condition_lhs", "condition_rhs",
        "modified_better", "bits_modified", "bits_original", "sigma_source", "rate_assumed",
    )
    rows = [tuple(d[c] for c in columns) for d in docs]
    return _csv_text(columns, rows), summary


def run(
    spec: ExperimentSpec,
    workers: int = 1,
    mode: str = "idealized",
    sigma_source: str = "monte-carlo",
    channel: np.ndarray | None = None,
) -> list[str]:
    """Execute a validated spec, write its artifact, return the summary lines."""
    validate_spec(spec)
    spec = spec.resolved()
    if spec.command == "convergence":
        text, summary = _cmd_convergence(spec, workers)
    elif spec.command == "markov-verify":
        text, summary = _cmd_markov_verify(spec, workers, channel)
    elif spec.command == "bounds":
        text, summary = _cmd_bounds(spec, workers)
    elif spec.command == "outage":
        text, summary = _cmd_outage(spec, workers, mode)
    elif spec.command == "interference-probe":
        text, summary = _cmd_interference_probe(spec, workers)
    else:
        text, summary = _cmd_protocol_compare(spec, workers, sigma_source)
    _atomic_write(spec.output_path, text)
    return summary


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="feedbeam",
        description="Simulate and analyze 1-bit-feedback distributed beamforming networks.",
    )
    p.add_argument("--config", required=True, help="path to the experiment JSON file")
    p.add_argument("--command", help=f"override the command ({', '.join(COMMANDS)})")
    p.add_argument("--out", help="override the output path")
    p.add_argument("--format", choices=("csv", "json"), help="override the output format")
    p.add_argument("--workers", type=int, default=1, help="max parallel workers (default 1)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument(
        "--mode",
        choices=("idealized", "trained"),
        default="idealized",
        help="weights mode for the outage command (default idealized)",
    )
    p.add_argument(
        "--sigma-source",
        choices=("monte-carlo", "analytic"),
        default="monte-carlo",
        help="sigma_I^2 source for protocol-compare (default monte-carlo)",
    )
    p.add_argument(
        "--channel",
        help="comma-separated channel vector for markov-verify (length must equal N)",
    )
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = load_config(args.config)
        if args.command is not None:
            spec = dataclasses.replace(spec, command=args.command)
        if args.seed is not None:
            spec = dataclasses.replace(spec, config=spec.config.replace(seed=args.seed))
        if args.out is not None:
            spec = dataclasses.replace(spec, output_path=args.out)
        if args.format is not None:
            spec = dataclasses.replace(spec, format=args.format)
        channel = None
        if args.channel is not None:
            try:
                channel = np.array([float(x) for x in args.channel.split(",")])
            except ValueError:
                raise ConfigError(f"cannot parse --channel {args.channel!r}")
        summary = run(
            spec,
            workers=args.workers,
            mode=args.mode,
            sigma_source=args.sigma_source,
            channel=channel,
        )
    except UnknownCommandError as e:
        print(json.dumps({"error": "unknown-command", "message": str(e)}), file=sys.stderr)
        return EXIT_UNKNOWN_COMMAND
    except UnwritablePathError as e:
        print(json.dumps({"error": "unwritable-path", "message": str(e)}), file=sys.stderr)
        return EXIT_UNWRITABLE
    except FeedbeamError as e:
        print(json.dumps({"error": "invalid-config", "message": str(e)}), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # pragma: no cover - defensive
        print(json.dumps({"error": "internal", "message": str(e)}), file=sys.stderr)
        return EXIT_INTERNAL
    for line in summary:
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
