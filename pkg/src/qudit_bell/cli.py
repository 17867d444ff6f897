"""Command-line entry point.

Subcommands::

    qudit-bell gate ns|csign|cswap|cshift [--backend B] [--n K] [--d D] [--input SPEC]
                                          [--exact | --sample T] [--seed S] [--dump-state PATH]
    qudit-bell analyze --d D [--parties N] [--backend B] [--n K] [--network generic|searched]
                       [--sample T --seed S] [--report PATH] [--csv PATH]
    qudit-bell network search --d D --max-swaps K
    qudit-bell decompose --unitary PATH

Any option may also come from ``--config FILE`` (``key = value`` lines, keys
named like the long options with dashes or underscores). Command-line flags
win over the file. The exit status is 0 only when every invariant checked
by the command holds.
"""

from __future__ import annotations

import argparse
import math
import sys
from itertools import product
from pathlib import Path

import numpy as np

from qudit_bell.analyzer import AnalyzerConfig, analyze_all, trial_rng
from qudit_bell.branching import BudgetExceeded, ConditionalResult
from qudit_bell.fock import SparseState, dump_state, fidelity
from qudit_bell.interferometer import recompose, reck_decompose, to_netlist
from qudit_bell.klm import NS_SUCCESS, apply_ns, ideal_csign, ideal_ns
from qudit_bell.qudit import (
    Backend,
    QuditRegister,
    apply_cshift,
    cshift_network,
    cswap,
    ideal_cshift,
    ideal_cswap,
    search_minimal_network,
)

FIDELITY_TOL = 1e-9
PROBABILITY_TOL = 1e-9

DEFAULTS = {
    "backend": "basic",
    "n": 1,
    "d": 2,
    "parties": 2,
    "network": "generic",
    "sample": None,
    "seed": 0,
    "input": None,
    "dump_state": None,
    "report": None,
    "csv": None,
    "max_swaps": 4,
    "unitary": None,
}
_INT_KEYS = {"n", "d", "parties", "sample", "seed", "max_swaps"}


def read_config(path: str | None) -> dict:
    if path is None:
        return {}
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = int(value) if key in _INT_KEYS else value
    return values


def parse_state_spec(text: str) -> SparseState:
    """``occ:amp;occ:amp`` with comma-separated occupations, normalized.

    Amplitudes use Python complex syntax (``1``, ``-0.5j``, ``1+1j``) and
    default to 1 when omitted.
    """
    terms = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        occ, _, amp = part.partition(":")
        key = tuple(int(v) for v in occ.split(","))
        terms[key] = terms.get(key, 0j) + complex(amp.replace(" ", "") or "1")
    modes = {len(k) for k in terms}
    if len(modes) != 1:
        raise ValueError("all occupations in --input must have the same length")
    return SparseState(modes.pop(), terms).normalized()


def _uniform(keys) -> SparseState:
    keys = list(keys)
    return SparseState(len(keys[0]), {k: 1.0 for k in keys}).normalized()


def _emit(lines: list[str], path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if path:
        Path(path).write_text(text)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def gate_setup(name: str, backend: Backend, d: int):
    """Default input, runner, ideal action and expected success for a gate."""
    if name == "ns":
        default = _uniform([(0,), (1,), (2,)])
        return default, 1, lambda s: apply_ns(s, 0), lambda s: ideal_ns(s, 0), NS_SUCCESS
    if name == "csign":
        default = _uniform(product((0, 1), repeat=2))
        return default, 2, lambda s: backend.csign(s, 0, 1), lambda s: ideal_csign(s, 0, 1), backend.success_probability
    if name == "cswap":
        default = _uniform((c, *t) for c in (0, 1) for t in ((0, 0), (1, 0), (0, 1)))
        return (
            default,
            3,
            lambda s: cswap(s, 0, 1, 2, backend),
            lambda s: ideal_cswap(s, 0, 1, 2),
            backend.success_probability,
        )
    if name == "cshift":
        x, y = QuditRegister.contiguous(d, 0), QuditRegister.contiguous(d, d)
        onehot = [tuple(1 if i == j else 0 for i in range(d)) for j in range(d)]
        default = _uniform(a + b for a in onehot for b in onehot)
        network = cshift_network(d)
        return (
            default,
            2 * d,
            lambda s: apply_cshift(s, x, y, backend, network),
            lambda s: ideal_cshift(s, x, y),
            backend.success_probability**network.count,
        )
    raise ValueError(f"unknown gate {name!r}")


def cmd_gate(opts: dict) -> int:
    backend = _backend(opts)
    default, modes, run, ideal, expected = gate_setup(opts["gate"], backend, opts["d"])
    state = parse_state_spec(opts["input"]) if opts["input"] else default
    if state.mode_count != modes:
        raise SystemExit(f"--input needs {modes} modes for gate {opts['gate']}")
    result: ConditionalResult = run(state)
    target = ideal(state)
    successes = result.successes()
    min_fid = min((fidelity(b.state, target) for b in successes), default=0.0)
    head = {
        "record": "gate",
        "gate": opts["gate"],
        "backend": "ns" if opts["gate"] == "ns" else str(backend),
        "expected_success": _fmt(expected),
        "branches": len(result.branches),
        "success_branches": len(successes),
        "total_probability": _fmt(result.total_probability),
        "min_success_fidelity": _fmt(min_fid),
    }
    ok = abs(result.total_probability - 1) < PROBABILITY_TOL and min_fid >= 1 - FIDELITY_TOL
    if opts["sample"] is None:
        head["mode"] = "exact"
        head["success_probability"] = _fmt(result.success_probability)
        ok &= abs(result.success_probability - expected) < PROBABILITY_TOL
    else:
        trials = opts["sample"]
        probs = np.cumsum([b.probability for b in result.branches])
        hits = 0
        for t in range(trials):
            u = trial_rng(opts["seed"], t).random() * probs[-1]
            pick = min(int(np.searchsorted(probs, u, side="right")), len(probs) - 1)
            hits += result.branches[pick].success
        sigma = math.sqrt(expected * (1 - expected) / trials)
        freq = hits / trials
        head.update(mode="sample", trials=trials, seed=opts["seed"], successes=hits, success_frequency=_fmt(freq))
        head["z_score"] = _fmt((freq - expected) / sigma) if sigma > 0 else "0"
        ok &= abs(freq - expected) <= 5 * sigma + 1e-12
    head["invariants_ok"] = str(ok).lower()
    lines = [" ".join(f"{k}={v}" for k, v in head.items())]
    for b in result.branches:
        outcome = str(b.outcome).replace(" ", "")
        note = b.correction.replace(" ", "_") or "none"
        lines.append(f"record=branch outcome={outcome} probability={_fmt(b.probability)} success={str(b.success).lower()} correction={note}")
    _emit(lines, opts["report"])
    if opts["dump_state"] and successes:
        Path(opts["dump_state"]).write_text(dump_state(successes[0].state))
    return 0 if ok else 1


def _backend(opts: dict) -> Backend:
    text = str(opts["backend"])
    if text == "teleported":
        return Backend("teleported", int(opts["n"]))
    return Backend.parse(text)


def cmd_analyze(opts: dict) -> int:
    config = AnalyzerConfig(
        d=opts["d"],
        parties=opts["parties"],
        backend=_backend(opts),
        network=opts["network"],
        trials=opts["sample"],
        seed=opts["seed"],
    )
    report = analyze_all(config)
    text = report.to_text()
    sys.stdout.write(text)
    if opts["report"]:
        Path(opts["report"]).write_text(text)
    if opts["csv"]:
        Path(opts["csv"]).write_text(report.confusion_csv())
    if config.trials is None:
        ok = report.zero_confusion and report.max_success_deviation < PROBABILITY_TOL
    else:
        p = report.theory
        sigma = math.sqrt(p * (1 - p) / config.trials)
        ok = report.zero_confusion and all(abs(r.success_probability - p) <= 5 * sigma + 1e-12 for r in report.rows)
    return 0 if ok else 1


def cmd_network(opts: dict) -> int:
    d, limit = opts["d"], opts["max_swaps"]
    found = search_minimal_network(d, limit)
    generic = cshift_network(d)
    lines = [
        f"record=search d={d} max_swaps={limit} found={str(found is not None).lower()} "
        f"swaps={found.count if found else 'none'} generic_swaps={generic.count}"
    ]
    if found is not None:
        lines += found.to_text().splitlines()
    _emit(lines, opts["report"])
    return 0 if found is None or found.is_cshift() else 1


def cmd_decompose(opts: dict) -> int:
    if not opts["unitary"]:
        raise SystemExit("decompose needs --unitary PATH")
    rows = [ln.split() for ln in Path(opts["unitary"]).read_text().splitlines() if ln.strip()]
    matrix = np.array([[complex(v) for v in row] for row in rows])
    elements = reck_decompose(matrix)
    error = float(np.max(np.abs(recompose(elements, len(matrix)) - matrix)))
    splitters = sum(e.kind == "BS" for e in elements)
    d = len(matrix)
    header = f"# d={d} splitters={splitters} phases={len(elements) - splitters} recomposition_error={error:.3e}"
    _emit([header, to_netlist(elements).rstrip("\n")] if elements else [header], opts["report"])
    return 0 if error < 1e-10 and splitters <= d * (d - 1) // 2 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qudit-bell", description="Exact linear-optics gate and Bell-analyzer simulator")
    parser.add_argument("--config", help="key = value file supplying option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *names):
        if "backend" in names:
            p.add_argument("--backend", help="ideal | basic | teleported (with --n) | teleported:N")
            p.add_argument("--n", type=int, help="boost order of the teleported backend")
        if "d" in names:
            p.add_argument("--d", type=int, help="qudit dimension")
        if "sample" in names:
            grp = p.add_mutually_exclusive_group()
            grp.add_argument("--exact", action="store_const", const=True, help="exact branch enumeration (default)")
            grp.add_argument("--sample", type=int, metavar="T", help="Monte Carlo with T trials")
            p.add_argument("--seed", type=int)
        p.add_argument("--report", help="also write the report to this path")

    g = sub.add_parser("gate", help="run one heralded gate")
    g.add_argument("gate", choices=["ns", "csign", "cswap", "cshift"])
    g.add_argument("--input", help="state spec 'occ:amp;occ:amp', e.g. '1,0:1;0,1:1j'")
    g.add_argument("--dump-state", dest="dump_state", help="write the first success-branch state here")
    common(g, "backend", "d", "sample")

    a = sub.add_parser("analyze", help="run the Bell-state analyzer on every basis label")
    a.add_argument("--parties", type=int)
    a.add_argument("--network", choices=["generic", "searched"])
    a.add_argument("--csv", help="write the confusion matrix as CSV")
    common(a, "backend", "d", "sample")

    n = sub.add_parser("network", help="C-SHIFT network tools")
    n.add_argument("action", choices=["search"])
    n.add_argument("--max-swaps", dest="max_swaps", type=int)
    common(n, "d")

    dcmp = sub.add_parser("decompose", help="decompose a unitary into splitters and phases")
    dcmp.add_argument("--unitary", help="text file, one matrix row per line, complex entries")
    common(dcmp)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge command-line flags over the config file over built-in defaults."""
    config = read_config(args.config)
    opts = dict(DEFAULTS)
    opts.update(config)
    for key, value in vars(args).items():
        if value is not None:
            opts[key] = value
    if opts.get("exact"):
        opts["sample"] = None
    return opts


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    opts = resolve(args)
    handlers = {"gate": cmd_gate, "analyze": cmd_analyze, "network": cmd_network, "decompose": cmd_decompose}
    try:
        return handlers[args.command](opts)
    except (BudgetExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
