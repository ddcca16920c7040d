"""Command-line front end.

Subcommands: evolve, enumerate, verify, extend-check, normal-form.
Global flags: --arith {float,rational}, --out DIR, --seed N, --tol X,
--step X, --config FILE (JSON defaults, overridden by explicit flags).

Exit codes: 0 success; 1 a verification/classification check failed
(worst offender reported); 2 invalid input or an aborted constraint
(non-solution initial data, domain errors).

Rational values are accepted as "p/q" strings to avoid float parsing
loss; every output embeds the run parameters (and seed), never a
timestamp, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from esasaki import boundary, evolution, geometry, moduli, structures

__all__ = ["main", "build_parser", "RunConfig"]


@dataclass(frozen=True)
class RunConfig:
    """Global run options shared by every subcommand."""

    arith: str = "float"
    out: str = "."
    seed: int = 0
    tol: float = 1e-4
    step: float = 1e-3

    def __post_init__(self):
        if self.tol <= 0 or self.step <= 0:
            raise ValueError("tolerances and step must be positive")
        if self.arith not in ("float", "rational"):
            raise ValueError(f"unknown arithmetic mode {self.arith!r}")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(arith=args.arith, out=args.out, seed=args.seed, tol=args.tol, step=args.step)

    def meta(self, **extra) -> dict:
        data = {"seed": self.seed, "arith": self.arith, "tol": self.tol, "step": self.step}
        data.update(extra)
        return data


def _parse_number(text, arith: str = "float"):
    if isinstance(text, (int, float, Fraction)):
        return text
    if "/" in text or arith == "rational":
        return Fraction(text)
    return float(text)


def _global_flags(parser, suppress: bool) -> None:
    # registered on the main parser with real defaults and on every
    # subparser with suppressed defaults, so the flags work in either
    # position without clobbering each other
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--arith", choices=("float", "rational"), default=d("float"))
    parser.add_argument("--out", default=d("."), help="output directory")
    parser.add_argument("--seed", type=int, default=d(0))
    parser.add_argument("--tol", type=float, default=d(1e-4))
    parser.add_argument("--step", type=float, default=d(1e-3))
    parser.add_argument("--config", default=d(None), help="JSON file with flag defaults")


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esasaki",
        description="Construct, classify and verify cohomogeneity-one Einstein-Sasaki 5-metrics.",
    )
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = []
    _original_add = sub.add_parser

    def add_parser(*args, **kwargs):
        p = _original_add(*args, **kwargs)
        subparsers.append(p)
        return p

    sub.add_parser = add_parser

    p_evolve = sub.add_parser("evolve", help="integrate one of the invariant flows", parents=[common])
    p_evolve.add_argument("--case", choices=("i", "ii", "iii", "general"), required=True)
    p_evolve.add_argument("--k", default=None, help="case i amplitude / case iii k0")
    p_evolve.add_argument("--m", type=int, default=0)
    p_evolve.add_argument("--h0", default=None)
    p_evolve.add_argument("--a0", default=None)
    p_evolve.add_argument("--A", default=None, help="conserved level; alternative to --a0")
    p_evolve.add_argument("--C", default="0")
    p_evolve.add_argument("--b0", default="0")
    p_evolve.add_argument("--c0", default="0")
    p_evolve.add_argument("--t0", type=float, default=0.0)
    p_evolve.add_argument("--t1", type=float, default=1.0)
    p_evolve.add_argument("--input", default=None, help="coframe JSON for --case general")
    p_evolve.add_argument("--record-every", type=int, default=10)

    p_enum = sub.add_parser("enumerate", help="tabulate quasi-regular compact families", parents=[common])
    p_enum.add_argument("--bound", type=int, default=None)
    p_enum.add_argument("--m", type=int, default=0)

    p_verify = sub.add_parser("verify", help="finite-difference Einstein verification", parents=[common])
    p_verify.add_argument("--A", required=True)
    p_verify.add_argument("--C", default="0")
    p_verify.add_argument("--points", type=int, default=10)
    p_verify.add_argument("--fd-step", type=float, default=1e-3)

    p_ext = sub.add_parser("extend-check", help="full compact-extension verdict", parents=[common])
    p_ext.add_argument("--A", default=None)
    p_ext.add_argument("--C", default="0")
    p_ext.add_argument("--m", type=int, default=0)
    p_ext.add_argument("--case-iii", action="store_true", help="test a non-conformal flow instead")
    p_ext.add_argument("--h0", default="0.4")
    p_ext.add_argument("--k0", default="0.3")
    p_ext.add_argument("--b0", default="0")
    p_ext.add_argument("--c0", default="0.1")
    p_ext.add_argument("--a0", default="0.2")

    p_norm = sub.add_parser("normal-form", help="canonical parameters of a solution", parents=[common])
    p_norm.add_argument("--input", required=True, help="coframe JSON file")
    p_norm.add_argument("--output", default=None)

    if config:
        defaults = {k.replace("-", "_"): v for k, v in config.items()}
        parser.set_defaults(**defaults)
        for p in subparsers:
            p.set_defaults(**defaults)
    return parser


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)


def _meta(args, **extra) -> dict:
    return RunConfig.from_args(args).meta(**extra)


def cmd_evolve(args) -> int:
    out = _outdir(args)
    m = args.m
    t_span = (args.t0, args.t1)
    try:
        if args.case == "i":
            k = float(_parse_number(args.k or "1", args.arith))
            times = np.linspace(args.t0, args.t1, max(2, int(round((args.t1 - args.t0) / max(args.step, 1e-6))) + 1))
            states = [evolution.closed_form_case_i(k, m, float(t)) for t in times]
            residuals = np.array([structures.residual_hypo(s) for s in states])
            flow = evolution.FlowResult(
                times=times,
                states=states,
                residuals=residuals,
                drift={},
                meta=_meta(args, family="case_i", k=k, m=m),
            )
        elif args.case == "ii":
            h0 = float(_parse_number(args.h0, args.arith))
            C = float(_parse_number(args.C, args.arith))
            if args.a0 is not None:
                state0 = evolution.CaseIIState(h0, float(_parse_number(args.a0, args.arith)), C, m)
            elif args.A is not None:
                state0 = evolution.CaseIIState.from_A(h0, float(_parse_number(args.A, args.arith)), C, m)
            else:
                raise ValueError("case ii needs --a0 or --A")
            flow = evolution.evolve_case_ii(state0, t_span, args.step, record_every=args.record_every)
            flow.meta.update(_meta(args))
        elif args.case == "iii":
            state0 = evolution.CaseIIIState(
                float(_parse_number(args.h0, args.arith)),
                float(_parse_number(args.k or "0.3", args.arith)),
                float(_parse_number(args.b0, args.arith)),
                float(_parse_number(args.c0, args.arith)),
                float(_parse_number(args.a0, args.arith)),
            )
            flow = evolution.evolve_case_iii(state0, t_span, args.step, record_every=args.record_every, m=m or 1)
            flow.meta.update(_meta(args))
        else:
            if not args.input:
                raise ValueError("--case general requires --input")
            with open(args.input) as fh:
                eta0 = structures.IdStructure.from_json_dict(json.load(fh))
            flow = evolution.evolve_general(eta0, t_span, args.step, record_every=args.record_every)
            flow.meta.update(_meta(args))
    except (evolution.ConstraintError, structures.NotASolutionError, structures.DegenerateCoframeError) as exc:
        print(f"constraint abort: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    m_embed = m if (m or args.case != "iii") else 1
    flow.to_csv(out / "flow.csv", m=m_embed)
    flow.to_json(out / "flow.json", m=m_embed)
    print(f"wrote {out / 'flow.csv'} ({len(flow.times)} samples)")
    return 0


def cmd_enumerate(args) -> int:
    if args.bound is None:
        print("error: need --bound (flag or config file)", file=sys.stderr)
        return 2
    out = _outdir(args)
    families = moduli.enumerate_rational_families(args.bound, m=args.m)
    with open(out / "families.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(moduli.YpqFamily.CSV_HEADER)
        for fam in families:
            writer.writerow(fam.csv_row())
    _write_json(
        out / "families.json",
        {"meta": _meta(args, bound=args.bound, m=args.m), "families": [f.to_json_dict() for f in families]},
    )
    print(f"wrote {out / 'families.csv'} ({len(families)} families)")
    return 0


def cmd_verify(args) -> int:
    out = _outdir(args)
    A = _parse_number(args.A, args.arith)
    a_float = float(A)
    if not (-1.0 / 108.0 < a_float <= 0.0):
        print(f"error: A={a_float} outside (-1/108, 0]", file=sys.stderr)
        return 2
    C = float(_parse_number(args.C, args.arith))
    chart = geometry.ypq_chart(a_float, C)
    points = geometry.sample_interior_points(chart, args.points, seed=args.seed)
    reports = [geometry.ricci_fd(chart, p, fd_step=args.fd_step) for p in points]

    with open(out / "curvature.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "phi", "y", "beta", "psi", "einstein_residual", "sectional_spread"])
        for rep in reports:
            writer.writerow([repr(v) for v in rep.point] + [repr(rep.einstein_residual), repr(rep.sectional_spread)])
    _write_json(
        out / "curvature.json",
        {"meta": _meta(args, A=a_float, C=C, fd_step=args.fd_step), "reports": [r.to_json_dict() for r in reports]},
    )

    worst = max(reports, key=lambda r: r.einstein_residual)
    print(f"wrote {out / 'curvature.csv'}; worst residual {worst.einstein_residual:.3e} at {worst.point}")
    if worst.einstein_residual > args.tol:
        print(
            f"FAIL: Einstein residual {worst.einstein_residual:.3e} > {args.tol:.1e} at {worst.point}",
            file=sys.stderr,
        )
        return 1
    return 0


def cmd_extend_check(args) -> int:
    out = _outdir(args)
    if args.case_iii:
        state0 = evolution.CaseIIIState(
            float(_parse_number(args.h0, args.arith)),
            float(_parse_number(args.k0, args.arith)),
            float(_parse_number(args.b0, args.arith)),
            float(_parse_number(args.c0, args.arith)),
            float(_parse_number(args.a0, args.arith)),
        )
        flow = evolution.evolve_case_iii(state0, (0.0, 1.0), args.step, m=args.m or 1)
        report = boundary.reject_case_iii(flow)
        verdict = {
            "branch": "Reject",
            "reason": report.notes,
            "report": report.to_json_dict(),
            "meta": _meta(args),
        }
        _write_json(out / "verdict.json", verdict)
        print(f"Reject: {report.notes}")
        return 1

    if args.A is None:
        print("error: need --A (or --case-iii)", file=sys.stderr)
        return 2
    A = _parse_number(args.A, args.arith)
    C = _parse_number(args.C, args.arith)
    verdict = moduli.classify_A(A, C, args.m)
    payload = {"verdict": verdict.to_json_dict(), "meta": _meta(args)}

    if verdict.family is not None:
        try:
            diagram = moduli.build_diagram(verdict.family)
            payload["diagram"] = diagram.to_json_dict()
            _write_json(out / "diagram.json", diagram.to_json_dict())
        except ValueError as exc:
            payload["diagram_error"] = str(exc)

        a_float = float(A)
        ends = {}
        if verdict.branch == moduli.YPQ_BRANCH:
            for tag, end, which in (
                ("lower", verdict.family.minus, "lower"),
                ("upper", verdict.family.plus, "upper"),
            ):
                profile = evolution.case_ii_endpoint_profile(a_float, which)
                rep = boundary.check_circle_branch(
                    profile, end.q, end.sigma_signed, float(C), args.m
                )
                ends[tag] = rep.to_json_dict()
        else:
            profile = evolution.case_ii_endpoint_profile(a_float, "round") if a_float == 0 else None
            if profile is not None:
                ends["lower"] = boundary.check_round_branch(profile).to_json_dict()
                prof_up = evolution.case_ii_endpoint_profile(a_float, "upper")
                rep = boundary.check_circle_branch(
                    prof_up, verdict.family.plus.q, verdict.family.plus.sigma_signed, float(C), args.m
                )
                ends["upper"] = rep.to_json_dict()
        payload["end_reports"] = ends

    _write_json(out / "verdict.json", payload)
    print(f"{verdict.branch}: {verdict.reason}")
    if verdict.branch == moduli.NO_COMPACT_EXTENSION:
        print(f"FAIL: {verdict.reason}", file=sys.stderr)
        return 1
    return 0


def cmd_normal_form(args) -> int:
    out = _outdir(args)
    try:
        with open(args.input) as fh:
            eta = structures.IdStructure.from_json_dict(json.load(fh))
        tag, transform = structures.normal_form(eta)
    except (structures.NotASolutionError, structures.DegenerateCoframeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = {
        "tag": tag.to_json_dict(),
        "transform": {
            "so3": [list(row) for row in transform.so3],
            "u1_angle": transform.u1_angle,
            "eta1_sign": transform.eta1_sign,
        },
        "meta": _meta(args),
    }
    target = Path(args.output) if args.output else _outdir(args) / "normal_form.json"
    _write_json(target, payload)
    print(f"{tag.variant}: wrote {target}")
    return 0


_COMMANDS = {
    "evolve": cmd_evolve,
    "enumerate": cmd_enumerate,
    "verify": cmd_verify,
    "extend-check": cmd_extend_check,
    "normal-form": cmd_normal_form,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # first pass: pick up --config so its values become parser defaults
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    config = None
    if known.config:
        with open(known.config) as fh:
            config = json.load(fh)
    parser = build_parser(config)
    args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
