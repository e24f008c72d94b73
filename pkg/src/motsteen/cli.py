"""Command line front end.

Commands: profile, check, resolve, selftest, corpus.  Exit codes:
0 success; 1 mathematical verdict (NotFree, violations, failed line
check) on an otherwise successful run; 2 input error; 3 internal
invariant breach.  Outputs embed the tool version and the run
configuration, and identical configurations (seed included) produce
byte-identical JSON artifacts.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import InternalError, MotsteenError, ParseError
from .corpus import generate_corpus, search_counterexamples
from .modules import (
    freeness_check,
    is_free_oracle,
    lift_free_basis,
    margolis,
    op_label,
    parse_module_file,
    reduce_mod_tau,
    validate,
    write_module_file,
)
from .profiles import (
    a_profile,
    check_classical_condition,
    check_cond1,
    check_cond2,
    classical_correspondence,
    enumerate_basis,
    is_free_profile,
    is_minimal,
    minimize,
    parse_profile,
    profile_name,
)
from .resolutions import (
    bockstein_E1,
    chart_to_json,
    chart_to_svg,
    les_check,
    resolve_mod_tau,
    resolve_over_M2,
    vanishing_check,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _tool_meta(args, seed=None):
    meta = {"tool": "motsteen", "version": __version__}
    if getattr(args, "caps", None):
        meta["caps"] = args.caps
    if seed is not None:
        meta["seed"] = seed
    return meta


def _parse_caps(text):
    try:
        p, q = text.split(",")
        return int(p), int(q)
    except ValueError as exc:
        raise ParseError(f"bad caps {text!r}; expected P,Q") from exc


def _emit(args, payload_text: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(payload_text)
    else:
        sys.stdout.write(payload_text)


def cmd_profile(args) -> int:
    p = parse_profile(args.literal)
    ok1, w1 = check_cond1(p)
    ok2, w2 = check_cond2(p)
    minimal = is_minimal(p)
    free = is_free_profile(p)
    info = {
        "profile": profile_name(p),
        "cond1": ok1, "cond1_witness": list(w1) if w1 else None,
        "cond2": ok2, "cond2_witness": list(w2) if w2 else None,
        "minimal": minimal,
        "minimized": profile_name(minimize(p)),
        "free": free,
    }
    if free and ok1 and ok2:
        h_cl, tail = classical_correspondence(p)
        info["classical_h"] = list(h_cl)
        info["classical_condition"] = check_classical_condition(h_cl, tail)
    cap = args.cap
    if cap is None and p.is_finite():
        basis = enumerate_basis(p)
        info["basis_rank"] = len(basis)
    elif cap is not None:
        basis = enumerate_basis(p, topdeg_cap=cap)
        info["basis_rank_capped"] = len(basis)
        info["cap"] = cap
    if args.format == "json":
        info.update(_tool_meta(args))
        _emit(args, json.dumps(info, sort_keys=True, separators=(",", ":")) + "\n")
    else:
        lines = [f"profile {info['profile']}"]
        lines.append(f"  cond1: {'yes' if ok1 else 'no'}"
                     + (f" (violated at {tuple(w1)})" if w1 else ""))
        lines.append(f"  cond2: {'yes' if ok2 else 'no'}"
                     + (f" (violated at {tuple(w2)})" if w2 else ""))
        lines.append(f"  minimal: {'yes' if minimal else 'no: ' + info['minimized']}")
        lines.append(f"  free: {'yes' if free else 'no'}")
        if "classical_h" in info:
            lines.append(f"  classical h_cl: {info['classical_h']}")
        if "basis_rank" in info:
            lines.append(f"  basis rank: {info['basis_rank']}")
        if "basis_rank_capped" in info:
            lines.append(f"  basis rank (topdeg <= {cap}): {info['basis_rank_capped']}")
        _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    text = Path(args.module).read_text()
    m = parse_module_file(text)
    violations = validate(m)
    report_lines = [f"module {args.module}: {len(m.gens)} generators over "
                    f"B({profile_name(m.profile)})"]
    if violations:
        for v in violations:
            report_lines.append(f"  VIOLATION {v}")
        _emit(args, "\n".join(report_lines) + "\n")
        return EXIT_VERDICT
    verdict = freeness_check(m)
    report_lines.append("  module axioms: ok")
    for rep in verdict.reports:
        status = "0" if rep.vanishes() else f"nonzero (total dim {rep.total})"
        report_lines.append(f"  H(M/tau; {rep.label}) = {status}")
    n = reduce_mod_tau(m)
    oracle = is_free_oracle(n, m.profile)
    report_lines.append(f"  minimal-cover oracle: {'free' if oracle else 'not free'}")
    if verdict.free != oracle:
        raise InternalError("freeness check and oracle disagree")
    if verdict.free:
        cert = lift_free_basis(m)
        report_lines.append(f"  verdict: Free (basis certificate, rank {cert.rank}: "
                            + "; ".join(g[2] for g in cert.generators) + ")")
        _emit(args, "\n".join(report_lines) + "\n")
        return EXIT_OK
    report_lines.append(f"  verdict: NotFree (witness {op_label(verdict.witness)})")
    _emit(args, "\n".join(report_lines) + "\n")
    return EXIT_VERDICT


def cmd_resolve(args) -> int:
    text = Path(args.module).read_text()
    m = parse_module_file(text)
    violations = validate(m)
    if violations:
        sys.stderr.write(f"invalid module: {violations[0]}\n")
        return EXIT_VERDICT
    p_max, q_max = args.caps
    if args.mod_tau:
        chart = resolve_mod_tau(reduce_mod_tau(m), p_max=p_max, q_max=q_max).chart()
    else:
        chart = resolve_over_M2(m, p_max=p_max, q_max=q_max).chart()
    rc = EXIT_OK
    verdict_info = None
    if args.check_line:
        v = vanishing_check(chart, args.check_line)
        verdict_info = {
            "d": v.d, "c": v.c, "stable": v.stable,
            "holds_in_window": v.holds_in_window,
            "first_attained_p": v.first_attained_p,
            "line_exits_window": v.line_exits_window,
            "complete": v.complete,
        }
        if not v.passed:
            rc = EXIT_VERDICT
    if args.format == "json":
        meta = _tool_meta(args)
        if verdict_info:
            meta["vanishing"] = verdict_info
        _emit(args, chart_to_json(chart, meta))
    elif args.format == "svg":
        _emit(args, chart_to_svg(chart))
    else:
        lines = [f"chart ({chart.kind}) window p<={p_max} q<={q_max}"
                 f"{'' if chart.complete else ' [truncated]'}"]
        for (p, q, w), e in chart.nonzero():
            tors = "" if not e.torsion else " torsion " + ",".join(map(str, e.torsion))
            lines.append(f"  p={p} q={q} w={w}: free {e.free_rank}{tors}")
        if verdict_info:
            lines.append(f"  vanishing d={verdict_info['d']}: c={verdict_info['c']} "
                         f"{'pass' if rc == EXIT_OK else 'FAIL'}")
        _emit(args, "\n".join(lines) + "\n")
    return rc


def cmd_corpus(args) -> int:
    if args.action != "gen":
        raise ParseError(f"unknown corpus action {args.action!r}")
    entries = generate_corpus(a_profile(1), seed=args.seed, count=args.count)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": args.seed, "count": args.count, "modules": []}
    manifest.update(_tool_meta(args, seed=args.seed))
    for i, entry in enumerate(entries):
        fname = f"corpus_{i:03d}.mod"
        (outdir / fname).write_text(
            write_module_file(entry.module, header=f"corpus {entry.name} seed {args.seed}"))
        manifest["modules"].append({"file": fname, "name": entry.name,
                                    "generators": len(entry.module.gens)})
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    sys.stdout.write(f"wrote {len(entries)} modules to {outdir}\n")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from . import milnor
    from .profiles import Profile

    seed = args.seed
    results = {}
    failures = []

    def record(name, ok, detail=None):
        results[name] = {"ok": bool(ok)}
        if detail is not None:
            results[name]["detail"] = detail
        if not ok:
            failures.append(name)

    # Adem expansions against products, small window
    bad = 0
    for b in range(1, 7):
        for a in range(1, min(2 * b, 13 - b)):
            lhs = milnor.product(milnor.sq(a), milnor.sq(b))
            rhs = milnor.zero(a + b, a // 2 + b // 2)
            for w in milnor.adem_expand(a, b):
                rhs = rhs + milnor.sqword_to_milnor(w)
            if lhs != rhs:
                bad += 1
    record("adem_vs_product", bad == 0, {"pairs_failed": bad})

    record("commutator_recursion", milnor.commutator_check(2))

    corpus = generate_corpus(a_profile(1), seed=seed, count=args.size)
    agree = True
    margolis_cmp = True
    for entry in corpus:
        m = entry.module
        fc = freeness_check(m)
        orc = is_free_oracle(reduce_mod_tau(m), m.profile)
        if fc.free != orc:
            agree = False
        if fc.free:
            try:
                lift_free_basis(m)
            except InternalError:
                agree = False
        from .modules import margolis_m2_vanishes, margolis_over_M2
        n = reduce_mod_tau(m)
        for op in [("Q", 0), ("Q", 1), ("P", 1, 1)]:
            act = m.op_action(op)
            if not act.compose(act).is_zero():
                continue
            if margolis_m2_vanishes(margolis_over_M2(m, op)) != (margolis(n, op).total == 0):
                margolis_cmp = False
    record("freeness_triple_agreement", agree, {"modules": len(corpus)})
    record("margolis_comparison", margolis_cmp)

    found = search_counterexamples(limit=1)
    record("counterexample_search", bool(found))

    from .corpus import corrupted_module
    record("validator_negative_control", bool(validate(corrupted_module())))

    payload = {"seed": seed, "size": args.size, "results": results,
               "pass": not failures}
    payload.update(_tool_meta(args, seed=seed))
    text = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "selftest.json").write_text(text)
        if failures:
            (outdir / "failures.json").write_text(
                json.dumps({"failures": failures}, sort_keys=True) + "\n")
    sys.stdout.write(text)
    return EXIT_OK if not failures else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="motsteen",
        description="Exact computations in the C-motivic Steenrod algebra at p=2.")
    ap.add_argument("--version", action="version", version=f"motsteen {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p_prof = sub.add_parser("profile", help="analyze a profile function")
    p_prof.add_argument("literal", help="e.g. 'A(1)' or 'h=[1,0] k=[2,1,0]'")
    p_prof.add_argument("--cap", type=int, default=None, help="topdeg cap for the basis count")
    p_prof.add_argument("--format", choices=["text", "json"], default="text")
    p_prof.add_argument("--out", default=None)
    p_prof.set_defaults(func=cmd_profile)

    p_check = sub.add_parser("check", help="validate a module file and decide freeness")
    p_check.add_argument("module")
    p_check.add_argument("--out", default=None)
    p_check.set_defaults(func=cmd_check)

    p_res = sub.add_parser("resolve", help="minimal resolution and Ext chart")
    p_res.add_argument("module")
    group = p_res.add_mutually_exclusive_group()
    group.add_argument("--mod-tau", action="store_true", dest="mod_tau")
    group.add_argument("--over-M2", action="store_false", dest="mod_tau")
    p_res.set_defaults(mod_tau=False)
    p_res.add_argument("--caps", type=_parse_caps, default=(8, 40),
                       help="P,Q window caps (default 8,40)")
    p_res.add_argument("--check-line", type=int, default=None, metavar="D")
    p_res.add_argument("--format", choices=["text", "json", "svg"], default="text")
    p_res.add_argument("--out", default=None)
    p_res.set_defaults(func=cmd_resolve)

    p_corp = sub.add_parser("corpus", help="corpus utilities")
    p_corp.add_argument("action", choices=["gen"])
    p_corp.add_argument("--seed", type=int, default=0)
    p_corp.add_argument("--count", type=int, default=40)
    p_corp.add_argument("--out", required=True)
    p_corp.set_defaults(func=cmd_corpus)

    p_self = sub.add_parser("selftest", help="run the invariant suites end to end")
    p_self.add_argument("--seed", type=int, default=0)
    p_self.add_argument("--size", type=int, default=20)
    p_self.add_argument("--out", default=None)
    p_self.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except InternalError as exc:
        sys.stderr.write(f"internal invariant breach: {exc}\n")
        return EXIT_INTERNAL
    except MotsteenError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
