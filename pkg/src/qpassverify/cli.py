"""Command-line entry point: ``compile``, ``verify``, ``check-rules`` and
``validate``.

Exit codes are a stable contract: 0 success, 1 usage or configuration error,
2 verification or validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .circuit import Circuit, CircuitError, CouplingMap, Layout, ibm16
from .passes import DEMO_MUTANTS, ConfigError, PassConfig, make_pass, pass_names
from .passes.base import DEFAULT_SEED
from .qasm import emit_qasm, parse_qasm
from .semantics import RegisterTooLargeError
from .soundness import certify_catalog, mutation_corpus
from .symbolic.rules import builtin_rules
from .verifier import validate_translation, verify_pass

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2
VALIDATION_MODES = {"off": (), "symbolic": ("symbolic",), "oracle": ("oracle",),
                    "both": ("symbolic", "oracle")}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_coupling(spec: str | None) -> CouplingMap | None:
    """A coupling-map JSON path, or a built-in name: ``ibm16``, ``line-N``."""
    if spec is None:
        return None
    if spec == "ibm16":
        return ibm16()
    if spec.startswith("line-") and spec[5:].isdigit():
        return CouplingMap.line(int(spec[5:]))
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"coupling map {spec!r} not found")
    return CouplingMap.load(path)


@dataclass
class PipelineSpec:
    passes: list[str]
    config: PassConfig = field(default_factory=PassConfig)
    validation: str = "off"
    demo_bugs: bool = False
    checked: bool = False

    def __post_init__(self):
        known = set(pass_names(self.demo_bugs))
        for name in self.passes:
            if name not in known:
                hint = " (demo mutant; pass --demo-bugs)" if name in DEMO_MUTANTS else ""
                raise UsageError(f"unknown pass {name!r}{hint}")
        if self.validation not in VALIDATION_MODES:
            raise UsageError(f"unknown validation mode {self.validation!r}")

    def build(self):
        out = []
        for name in self.passes:
            p = make_pass(name, self.config, self.demo_bugs)
            if self.checked and "checked" in p.get_params():
                p.set_params(checked=True)
            out.append(p)
        return out


def run_pipeline(c: Circuit, spec: PipelineSpec) -> tuple[Circuit, dict]:
    """Run the passes in order over one shared property set. Returns the
    compiled circuit and a report with per-pass timings and, if requested,
    the translation-validation outcome."""
    passes = spec.build()
    props: dict = {}
    timings = []
    cur = c
    initial = where = None  # physical position of each input qubit before / after
    t_all = time.perf_counter()
    for p in passes:
        before = len(cur)
        t0 = time.perf_counter()
        cur = p.run(cur, props)
        millis = (time.perf_counter() - t0) * 1000
        if p.pass_name == "apply_layout":
            base = where if where is not None else Layout.identity(c.nqreg)
            initial = where = base.compose(props["layout"])
        elif "final_layout" in props:
            routed = props.pop("final_layout")
            base = list(where) if where is not None else list(range(c.nqreg))
            base += [q for q in range(len(routed)) if q not in set(base)]
            where = Layout(base).compose(routed)
        timings.append({"pass": p.pass_name, "millis": round(millis, 3),
                        "gates_in": before, "gates_out": len(cur)})
    report: dict = {"passes": timings, "total_millis": round((time.perf_counter() - t_all) * 1000, 3),
                    "gates_in": len(c), "gates_out": len(cur), "nqreg_out": cur.nqreg}
    for key in ("depth", "size", "width", "count_ops"):
        if key in props:
            report.setdefault("properties", {})[key] = props[key]
    pad = lambda lay: None if lay is None else \
        list(lay) + [q for q in range(cur.nqreg) if q not in set(lay)]
    initial, final = pad(initial), pad(where)
    report["initial_layout"], report["final_layout"] = initial, final
    if spec.validation != "off":
        full = Circuit(cur.nqreg, c.gates, c.ncreg)
        res = validate_translation(full, cur, final, initial, VALIDATION_MODES[spec.validation])
        report["validation"] = res.to_dict()
    return cur, report


# --------------------------------------------------------------------------
# subcommands


def _write_report(args, doc):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if getattr(args, "report", None):
        Path(args.report).write_text(text + "\n")
    else:
        print(text)


def _config(args) -> PassConfig:
    layout = Layout.parse(args.layout) if getattr(args, "layout", None) else None
    basis = tuple(b.strip().upper() for b in args.basis.split(",")) if getattr(args, "basis", None) else None
    return PassConfig(coupling_map=load_coupling(getattr(args, "coupling", None)), layout=layout,
                      basis=basis, seed=args.seed)


def cmd_compile(args) -> int:
    names = [n.strip() for n in args.passes.split(",") if n.strip()] if args.passes else []
    spec = PipelineSpec(names, _config(args), args.validate, args.demo_bugs, args.checked)
    c = parse_qasm(Path(args.input).read_text())
    out, report = run_pipeline(c, spec)
    text = emit_qasm(out)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    report["input"] = str(args.input)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
    val = report.get("validation")
    if val is not None and not val["equivalent"]:
        print(f"validation failed ({val['tier']}): {val['reason']}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def _verify_one(name: str, config: PassConfig, demo_bugs: bool, timings: bool) -> dict:
    p = make_pass(name, config, demo_bugs, require_map=False)
    return verify_pass(p, seed=config.seed).to_dict(timings)


def cmd_verify(args) -> int:
    if not args.all and not args.pass_name:
        raise UsageError("give --pass NAME or --all")
    names = pass_names(args.demo_bugs) if args.all else [args.pass_name]
    known = set(pass_names(args.demo_bugs))
    for n in names:
        if n not in known:
            hint = " (demo mutant; pass --demo-bugs)" if n in DEMO_MUTANTS else ""
            raise UsageError(f"unknown pass {n!r}{hint}")
    config = _config(args)
    timings = not args.no_timings
    if args.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            docs = list(ex.map(_verify_one, names, [config] * len(names),
                               [args.demo_bugs] * len(names), [timings] * len(names)))
    else:
        docs = [_verify_one(n, config, args.demo_bugs, timings) for n in names]
    _write_report(args, docs if args.all else docs[0])
    for d in docs:
        print(f"{d['pass']}: {d['verdict']} ({d['subgoals']} subgoals)", file=sys.stderr)
    return EXIT_OK if all(d["verified"] for d in docs) else EXIT_FAILED


def cmd_check_rules(args) -> int:
    rules = builtin_rules()
    if args.inject_bogus:
        rules = rules + mutation_corpus()[: args.inject_bogus]
    t0 = time.perf_counter()
    certs = certify_catalog(rules, param_samples=args.samples, trials=args.trials, seed=args.seed)
    failed = [c for c in certs if not c.certified]
    doc = {"rules": len(certs), "certified": len(certs) - len(failed),
           "failed": [c.rule for c in failed], "seed": args.seed,
           "millis": round((time.perf_counter() - t0) * 1000, 3),
           "certificates": [c.to_dict() for c in certs]}
    _write_report(args, doc)
    for c in failed:
        print(f"FAILED {c.rule}: worst input {json.dumps(c.worst, default=str)}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_validate(args) -> int:
    a = parse_qasm(Path(args.a).read_text())
    b = parse_qasm(Path(args.b).read_text())
    if a.nqreg != b.nqreg:
        raise UsageError(f"register mismatch: {a.nqreg} vs {b.nqreg} qubits")
    perm = list(Layout.parse(args.perm)) if args.perm else None
    initial = list(Layout.parse(args.initial)) if args.initial else None
    res = validate_translation(a, b, perm, initial, VALIDATION_MODES[args.mode])
    dev = "n/a" if res.deviation is None else f"{res.deviation:.3e}"
    print(f"equivalent={str(res.equivalent).lower()} tier={res.tier} deviation={dev}")
    if args.report:
        Path(args.report).write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if res.equivalent else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpassverify", description="Run and verify quantum-circuit compiler passes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, coupling=True):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--report", help="write the JSON report here")
        if coupling:
            p.add_argument("--coupling", help="coupling-map JSON path, 'ibm16' or 'line-N'")
        return p

    p = common(sub.add_parser("compile", help="run a pass pipeline over a QASM file"))
    p.add_argument("input")
    p.add_argument("-o", "--output", help="output QASM (default: stdout)")
    p.add_argument("--passes", default="", help="comma-separated pass names, in order")
    p.add_argument("--layout", help="initial layout for apply_layout, e.g. 2,0,1")
    p.add_argument("--basis", help="target basis for unroll_to_basis, e.g. u1,u2,u3,cx")
    p.add_argument("--validate", choices=list(VALIDATION_MODES), default="off")
    p.add_argument("--demo-bugs", action="store_true", help="allow the demo mutant passes")
    p.add_argument("--checked", action="store_true", help="run loops with per-step invariant checks")
    p.set_defaults(func=cmd_compile)

    p = common(sub.add_parser("verify", help="verify passes against their contracts"))
    p.add_argument("--pass", dest="pass_name")
    p.add_argument("--all", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--demo-bugs", action="store_true")
    p.add_argument("--no-timings", action="store_true", help="omit timings (byte-stable output)")
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("check-rules", help="certify the rewrite-rule catalog"), coupling=False)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--inject-bogus", type=int, default=0, metavar="K",
                   help="append K deliberately unsound rules (test fixture)")
    p.set_defaults(func=cmd_check_rules)

    p = sub.add_parser("validate", help="check two QASM circuits for equivalence")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--perm", help="final position of each qubit of A in B, e.g. 2,0,1")
    p.add_argument("--initial", help="initial position of each qubit of A in B")
    p.add_argument("--mode", choices=["symbolic", "oracle", "both"], default="both")
    p.add_argument("--report")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, RegisterTooLargeError, CircuitError, OSError) as exc:
        print(f"qpassverify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
