"""Command-line entry point: ``hecke-trace <command> [options]``.

Every command prints one ``#`` header line with the error-control
parameters and the slice radius it relied on, followed by CSV (or JSON)
tables. Exit status is 0 on success, 1 for invalid data or arguments and 2
for numerical failures; errors go to stderr as ``ERROR: <message>``.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, NoReturn, Optional, Sequence

import pandas as pd

from .config import settings
from .conjugacy import reduce_classes
from .correspondence import UnitaryRep, audit_decomposition, check_assumptions, decompose, load_rep
from .errors import DataValidationError, DatasetInvalidError, NumericalFailure
from .groupdata import (GroupSlice, bundled_path, check_anisotropy, dump_slice, enumerate_order, load_order_config,
                        load_slice, validate_cocompact_consistency)
from .huber import compare_spectra, corollary_check, load_package, resolvent_identity_residual
from .io import format_table
from .trace import (elliptic_number, geometric_side, heat_asymptotic_check, load_spectral, norm_gap,
                    spectral_side)
from .transforms import HEAT, RESOLVENT, ClosedFormPair, closed_form_pair, fourier_g

log = logging.getLogger(__name__)

Tables = list[pd.DataFrame]


def _data_path(value: str) -> Path:
    """A file path, or the name of a bundled data file."""
    path = Path(value)
    if path.exists():
        return path
    try:
        return bundled_path(value)
    except FileNotFoundError:
        raise DataValidationError(f"no such file: {value}") from None


def _slice(args: argparse.Namespace) -> GroupSlice:
    s = load_slice(_data_path(args.slice))
    args.radius_used = s.radius
    return s


def _pair(args: argparse.Namespace) -> ClosedFormPair:
    if args.pair == HEAT:
        return ClosedFormPair.heat(args.t)
    return ClosedFormPair.resolvent(args.s, args.B)


def _cmd_transform(args: argparse.Namespace) -> Tables:
    pair = _pair(args)
    h, g = closed_form_pair(pair)
    rows = [{"quantity": "g", "argument": args.x, "value": complex(g(args.x))}]
    if args.check:
        rows[0]["numerical"] = complex(fourier_g(h, args.x))
    if args.lam is not None:
        rows.append({"quantity": "h", "argument": args.lam, "value": complex(h(args.lam))})
    return [pd.DataFrame(rows)]


def _cmd_factory(args: argparse.Namespace) -> Tables:
    cfg = load_order_config(_data_path(args.config))
    s = enumerate_order(cfg, args.radius)
    args.radius_used = s.radius
    if args.out:
        dump_slice(s, args.out)
    aniso = check_anisotropy(cfg)
    return [pd.DataFrame([{
        "gamma": len(s.gamma),
        "double_coset": len(s.double_coset),
        "plumbing": s.plumbing,
        "anisotropic_at": " ".join(str(p) for p in aniso.anisotropic_at),
        "anisotropy_passed": aniso.passed,
        "kleinian": aniso.kleinian,
    }])]


def _rep(args: argparse.Namespace, s: GroupSlice) -> UnitaryRep:
    return load_rep(_data_path(args.rep), s) if args.rep else UnitaryRep.trivial()


def _cmd_decompose(args: argparse.Namespace) -> Tables:
    s = _slice(args)
    chi = _rep(args, s)
    cd = decompose(s, chi)
    audit = audit_decomposition(s, cd)
    report = check_assumptions(s, cd, chi)
    cosets = pd.DataFrame({
        "i": range(len(cd.epsilon)),
        "epsilon": [repr(e) for e in cd.epsilon],
        "size": cd.coset_sizes,
    })
    summary = pd.DataFrame([
        {"check": "degree", "value": cd.degree},
        {"check": "overlaps", "value": audit.overlaps},
        {"check": "uncovered", "value": audit.uncovered},
        {"check": "assumption1", "value": report.assumption1},
        {"check": "layer_symmetric", "value": report.layer_symmetric},
        {"check": "chi_alpha_inverse_adjoint", "value": report.chi_alpha_inverse_adjoint},
        {"check": "assumption2", "value": report.assumption2},
        {"check": "caveat", "value": report.caveat},
    ])
    return [cosets, summary]


def _cmd_classes(args: argparse.Namespace) -> Tables:
    s = _slice(args)
    rows = []
    for c in reduce_classes(s):
        cent = c.centralizer
        rows.append({
            "kind": c.kind,
            "trace": c.trace if c.trace is not None else math.nan,
            "N": c.norm if c.norm is not None else math.nan,
            "a": c.a_of_T if c.a_of_T is not None else complex(math.nan, math.nan),
            "N_T0": cent.N_T0 if cent else math.nan,
            "m": cent.elliptic_order if cent else 0,
            "members_found": c.members_found,
            "resolved": c.resolved,
        })
    columns = ["kind", "trace", "N", "a", "N_T0", "m", "members_found", "resolved"]
    return [pd.DataFrame(rows, columns=columns)]


def _cmd_trace(args: argparse.Namespace) -> Tables:
    s = _slice(args)
    chi = _rep(args, s)
    cd = decompose(s, chi) if not chi.is_trivial else None
    classes = reduce_classes(s)
    h, g = closed_form_pair(_pair(args))
    side = geometric_side(s, classes, (h, g), chi, cd)
    terms = [
        {"class": i, "kind": classes[i].kind, "N": classes[i].norm or math.nan, "value": complex(v)}
        for i, v in sorted(side.elliptic_terms + side.loxodromic_terms)
    ]
    totals = [
        {"quantity": "elliptic", "value": side.elliptic_total},
        {"quantity": "loxodromic", "value": side.loxodromic_total},
        {"quantity": "total", "value": side.total},
        {"quantity": "elliptic_number", "value": complex(side.elliptic_number)},
        {"quantity": "tail_bound", "value": complex(side.tail_bound)},
    ]
    if args.spectral:
        spec = spectral_side(load_spectral(_data_path(args.spectral)), h)
        totals.append({"quantity": "spectral", "value": spec})
        totals.append({"quantity": "residual", "value": complex(spec - side.total)})
    return [pd.DataFrame(terms, columns=["class", "kind", "N", "value"]), pd.DataFrame(totals)]


def _cmd_heat(args: argparse.Namespace) -> Tables:
    s = _slice(args)
    classes = reduce_classes(s)
    grid = [float(t) for t in args.tgrid.split(",") if t.strip()]
    E = elliptic_number(classes) if args.E is None else args.E
    report = heat_asymptotic_check(classes, E, grid)
    gap = norm_gap(classes) if any(c.kind == "loxodromic" for c in classes) else math.nan
    summary = pd.DataFrame([{"E": E, "norm_gap": gap, "slope": report.slope, "passed": report.passed}])
    return [report.to_frame(), summary]


def _cmd_resolvent(args: argparse.Namespace) -> Tables:
    p = load_package(_data_path(args.package))
    residual = resolvent_identity_residual(p, args.s, args.B)
    return [pd.DataFrame([{"label": p.label, "s": args.s, "B": args.B, "residual": residual}])]


def _cmd_huber(args: argparse.Namespace) -> Tables:
    left, right = load_package(_data_path(args.left)), load_package(_data_path(args.right))
    if args.corollary:
        cor = corollary_check(left, right)
        return [pd.DataFrame([{"passed": cor.passed, "differing": len(cor.differing),
                               "contradiction": cor.contradiction}])]
    rep = compare_spectra(left, right, args.mode)
    return [pd.DataFrame([{
        "mode": rep.mode,
        "status": rep.status,
        "difference": rep.difference,
        "contradiction": rep.contradiction,
        "E_equal": rep.E_equal,
    }])]


def _cmd_validate(args: argparse.Namespace) -> Tables:
    s = _slice(args)
    report = validate_cocompact_consistency(s)
    if report.parabolics:
        where, i = report.parabolics[0]
        raise DatasetInvalidError(f"parabolic element {where}[{i}] — dataset invalid")
    classes = reduce_classes(s, with_centralizers=False)
    rows = [{"kind": k, "count": n} for k, n in sorted(report.kinds.items())]
    rows.append({"kind": "unstable", "count": len(report.unstable)})
    rows.append({"kind": "layer_classes", "count": len(classes)})
    return [pd.DataFrame(rows), pd.DataFrame([{"min_displacement": report.min_displacement}])]


_COMMANDS: dict[str, Callable[[argparse.Namespace], Tables]] = {
    "transform": _cmd_transform,
    "factory": _cmd_factory,
    "decompose": _cmd_decompose,
    "classes": _cmd_classes,
    "trace": _cmd_trace,
    "heat": _cmd_heat,
    "resolvent": _cmd_resolvent,
    "huber": _cmd_huber,
    "validate": _cmd_validate,
}


def _add_pair_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pair", choices=[HEAT, RESOLVENT], default=HEAT)
    p.add_argument("--t", type=float, default=1.0, help="heat time")
    p.add_argument("--s", type=complex, default=1.5, help="resolvent parameter s")
    p.add_argument("--B", type=complex, default=2.5, help="resolvent parameter B")


class _Parser(argparse.ArgumentParser):
    """Reports usage errors with exit status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"ERROR: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hecke-trace", description=__doc__.splitlines()[0])
    parser.add_argument("--format", choices=["csv", "json"], default=None, help="output format (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="closed-form h and g values")
    _add_pair_options(p)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--check", action="store_true", help="also compute g from h by quadrature")

    p = sub.add_parser("factory", help="enumerate a slice of a quaternion order")
    p.add_argument("--config", required=True)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("decompose", help="coset decomposition and assumption checks")
    p.add_argument("--slice", required=True)
    p.add_argument("--rep", default=None)

    p = sub.add_parser("classes", help="conjugacy classes of the Hecke layer")
    p.add_argument("--slice", required=True)

    p = sub.add_parser("trace", help="geometric side of the trace formula")
    p.add_argument("--slice", required=True)
    p.add_argument("--rep", default=None)
    p.add_argument("--spectral", default=None, help="CSV of lambda,omega_re,omega_im")
    _add_pair_options(p)

    p = sub.add_parser("heat", help="small-t heat trace asymptotics")
    p.add_argument("--slice", required=True)
    p.add_argument("--tgrid", default="0.2,0.1,0.05")
    p.add_argument("--E", type=float, default=None, help="claimed elliptic number (default: computed)")

    p = sub.add_parser("resolvent", help="resolvent identity residual of a spectrum package")
    p.add_argument("--package", required=True)
    p.add_argument("--s", type=complex, default=1.5)
    p.add_argument("--B", type=complex, default=2.5)

    p = sub.add_parser("huber", help="compare two spectrum packages")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--mode", choices=["S", "L"], default="L")
    p.add_argument("--corollary", action="store_true", help="same group, two correspondences")

    p = sub.add_parser("validate", help="audit a slice for parabolics and unstable elements")
    p.add_argument("--slice", required=True)
    return parser


def _header(args: argparse.Namespace) -> str:
    q, tol = settings.quadrature, settings.tolerances
    radius = getattr(args, "radius_used", None)
    return (
        f"# command={args.command} radius={'none' if radius is None else f'{radius:.12g}'}"
        f" epsrel={q.epsrel:g} epsabs={q.epsabs:g} limit={q.limit} disagreement={q.disagreement:g}"
        f" approx_tol={tol.approx:g} threads={settings.threads()}"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        tables = _COMMANDS[args.command](args)
    except (DataValidationError, FileNotFoundError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 1
    except NumericalFailure as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 2
    out = [_header(args)]
    out.extend(format_table(t, args.format).rstrip("\n") for t in tables)
    print("\n".join(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
