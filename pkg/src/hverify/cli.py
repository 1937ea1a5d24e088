"""Command-line front end.

    hverify run --suite fixedpoint --alpha 2 --tol 1e-3 --format text
    hverify derive-c0 --alpha 1

Exit codes: 0 all checks passed, 2 some check failed, 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional

from .hgroup import HPoint
from .kernel import HLSParams, KernelParams
from .quad import CylFunc, QuadConfig
from .solutions import (ConstancyError, StandardSolutionParams, derive_C0,
                        standard_solution)
from . import verify as V

SUITES = ("group", "identity", "fixedpoint", "reflection", "split", "inversion",
          "sublaplacian", "grushin", "hls", "picard")

FIXED_POINTS = ((0.0, 0.0), (0.0, 0.5), (0.7, 0.0), (1.5, -1.0), (0.3, 2.0), (2.0, 3.0))
CSV_COLUMNS = ("check", "param-hash", "point", "lhs", "rhs", "residual", "tol", "passed")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    suite: str = "all"
    n: int = 1
    alpha: float = 2.0
    p: Optional[float] = None  # None: critical exponent
    quad: QuadConfig = field(default_factory=QuadConfig)
    samples: int = 10_000
    iterations: int = 2
    output_path: Optional[str] = None
    format: str = "json"
    jobs: int = 1
    include_runtime: bool = True

    def kernel(self) -> KernelParams:
        Q = 2 * self.n + 2
        if not 0 < self.alpha < Q:
            raise UsageError(f"alpha must lie in (0, Q={Q}), got {self.alpha}")
        try:
            if self.p is None:
                return KernelParams.critical(self.n, self.alpha)
            return KernelParams(self.n, self.alpha, self.p)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


# -- suites ------------------------------------------------------------------

def _critical_C0(rc: RunConfig) -> float:
    return derive_C0(KernelParams.critical(1, rc.alpha), rc.quad)


def _u0(rc: RunConfig, alpha=None, s=1.0, t0=0.0, C0=None):
    kp = KernelParams.critical(1, rc.alpha if alpha is None else alpha)
    C0 = _critical_C0(rc) if C0 is None else C0
    return standard_solution(StandardSolutionParams(C0, s, HPoint(0.0, 0.0, t0)), kp)


def _need_n1(rc: RunConfig, suite: str):
    if rc.n != 1:
        raise UsageError(f"suite '{suite}' is implemented for n = 1 only")


def suite_group(rc: RunConfig) -> List[V.VerifyReport]:
    seed = rc.quad.seed
    reps = [V.check_group_axioms(n, rc.samples, seed) for n in (1, 2, 3)]
    reps.append(V.check_kernel_invariance(rc.kernel(), rc.samples, seed))
    return reps


def suite_identity(rc: RunConfig) -> List[V.VerifyReport]:
    seed = rc.quad.seed
    reps = [V.check_heisenberg_identity(n, rc.samples, seed) for n in (1, 2, 3)]
    reps.append(V.check_cr_inversion(1, rc.samples, seed, kp=KernelParams.critical(1, rc.alpha)))
    return reps


def suite_fixedpoint(rc: RunConfig) -> List[V.VerifyReport]:
    _need_n1(rc, "fixedpoint")
    kp = rc.kernel()
    kpc = KernelParams.critical(1, rc.alpha)
    C0, cert = derive_C0(kpc, rc.quad, full_output=True)
    cert_rep = V.VerifyReport(
        "C0_constancy", {"n": 1, "alpha": rc.alpha, "C0": C0, "tol": rc.quad.tol},
        [(f"zeta=(r={r:g}, t={t:g})", v, C0, abs(v - C0) / C0) for (r, t), v in zip(cert.points, cert.values)],
        cert.spread, cert.tolerance, cert.spread <= cert.tolerance)
    u = _u0(rc, C0=C0)
    reps = [cert_rep, V.check_fixed_point(kp, u, FIXED_POINTS, rc.quad)]
    if kp.is_critical:
        pts = ((0.0, 0.0), (1.0, 1.0), (0.5, -2.0))
        reps.append(V.check_scaling_invariance(kp, u, (0.5, 2.0), pts, rc.quad))
        reps.append(V.check_translation_invariance(kp, u, (1.5, -0.75), pts, rc.quad))
    else:
        reps.append(V.check_subcritical(kp, u, rc.quad))
    return reps


def suite_reflection(rc: RunConfig) -> List[V.VerifyReport]:
    _need_n1(rc, "reflection")
    kp = rc.kernel()
    u = _u0(rc)
    return [V.check_reflection_difference(kp, u, -1.0, ((0.0, 0.0), (1.0, 0.5), (0.5, -0.5)), rc.quad),
            # u0 is even in t, so both sides vanish for the plane t = 0
            V.check_reflection_difference(kp, u, 0.0, ((1.0, 0.5), (0.0, 2.0)), rc.quad)]


def suite_split(rc: RunConfig) -> List[V.VerifyReport]:
    _need_n1(rc, "split")
    kp = KernelParams.critical(1, rc.alpha)
    u = _u0(rc)
    return [V.check_split_identity(kp, u, 1.0, ((0.0, 0.5), (1.0, 1.0), (0.5, -2.0)), rc.quad),
            V.check_split_identity(kp, u, 2.0, ((0.0, 1.0), (1.0, 1.0), (0.5, -2.0)), rc.quad)]


def suite_inversion(rc: RunConfig) -> List[V.VerifyReport]:
    kp = KernelParams.critical(1, rc.alpha)
    C0 = 1.0  # the identity is homogeneous in C0
    reps = []
    for s, t0 in ((1.0, 0.0), (0.5, 0.0), (2.0, 0.0), (2.0, 1.5)):
        reps.append(V.check_inversion_symmetry(kp, _u0(rc, s=s, t0=t0, C0=C0)))
    return reps


def suite_sublaplacian(rc: RunConfig) -> List[V.VerifyReport]:
    # the local equation -Delta_H u0 = c u0^3 is specific to alpha = 2, n = 1
    kp = KernelParams.critical(1, 2.0)
    C0 = derive_C0(kp, rc.quad)
    return V.check_sublaplacian(kp, C0, seed=rc.quad.seed, cfg=rc.quad)


def suite_grushin(rc: RunConfig) -> List[V.VerifyReport]:
    import numpy as np
    u = _u0(rc, alpha=2.0, C0=1.0).f
    bump = CylFunc(lambda r, t: np.exp(-((r * r - 1) ** 2 + t * t)), 8.0, 1.0, 2.0, name="ring_bump")
    return [V.check_grushin(u, seed=rc.quad.seed), V.check_grushin(bump, seed=rc.quad.seed)]


def suite_hls(rc: RunConfig) -> List[V.VerifyReport]:
    _need_n1(rc, "hls")
    return [V.check_hls(HLSParams(1, 4 - rc.alpha), rc.quad)]


def suite_picard(rc: RunConfig) -> List[V.VerifyReport]:
    _need_n1(rc, "picard")
    kp = rc.kernel()
    u = _u0(rc)
    return [V.check_picard(kp, u.f, rc.iterations, ((0.0, 0.0), (1.0, 1.0)), rc.quad)]


SUITE_FUNCS = {name: globals()[f"suite_{name}"] for name in SUITES}


def _run_suite(args):
    name, rc = args
    return SUITE_FUNCS[name](rc)


def run_suites(rc: RunConfig) -> List[V.VerifyReport]:
    names = list(SUITES) if rc.suite == "all" else [rc.suite]
    rc.kernel()  # validate before any work
    jobs = [(name, rc) for name in names]
    if rc.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=rc.jobs) as pool:
            results = list(pool.map(_run_suite, jobs))
    else:
        results = [_run_suite(j) for j in jobs]
    return [rep for reps in results for rep in reps]


# -- output ----------------------------------------------------------------------

def render_json(reports: List[V.VerifyReport], include_runtime=True) -> str:
    doc = {"passed": all(r.passed for r in reports),
           "reports": [r.to_dict(include_runtime) for r in reports]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_csv(reports: List[V.VerifyReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        h = rep.param_hash()
        for d, lhs, rhs, res in rep.samples:
            w.writerow([rep.check_name, h, d, repr(lhs), repr(rhs), repr(res),
                        repr(rep.tolerance), rep.passed])
    return buf.getvalue()


def _g(x: float) -> str:
    return f"{x:.6g}" if x == 0 or 1e-3 <= abs(x) < 1e6 else f"{x:.5e}"


def render_text(reports: List[V.VerifyReport]) -> str:
    lines = []
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        lines.append(f"[{status}] {rep.check_name}  max_residual={rep.max_residual:.5e}  "
                     f"tol={rep.tolerance:.5e}")
        rows = [(d, f"{lhs:.5e}", f"{rhs:.5e}", f"{res:.5e}") for d, lhs, rhs, res in rep.samples]
        header = ("sample", "lhs", "rhs", "residual")
        widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(4)]
        lines.append("  " + "  ".join(h.ljust(w) for h, w in zip(header, widths)))
        for r in rows:
            lines.append("  " + "  ".join(c.ljust(w) for c, w in zip(r, widths)))
        lines.append("")
    n_fail = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    return "\n".join(lines) + "\n"


def render(reports, fmt, include_runtime=True) -> str:
    if fmt == "json":
        return render_json(reports, include_runtime)
    if fmt == "csv":
        return render_csv(reports)
    return render_text(reports)


# -- argument handling -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("expected an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with flat dotted keys (kernel.alpha, quad.delta, ...)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=float, help="nonlinearity exponent (default: critical sigma)")
    p.add_argument("--n", type=int)
    p.add_argument("--delta", type=float, help="singularity split radius")
    p.add_argument("--radius", type=float, help="truncation radius R_trunc")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=_u64, help="RNG seed (fallback: $HVERIFY_SEED, then 0)")
    p.add_argument("--samples", type=_u64,
                   help="Monte Carlo samples (hls) and random cases (group, identity)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hverify", description=__doc__.splitlines()[0] or None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run verification suites")
    run.add_argument("--suite", choices=SUITES + ("all",), required=True)
    _common(run)
    run.add_argument("--iterations", type=int, help="Picard iterations (<= 10)")
    run.add_argument("--output", help="write the report here instead of stdout")
    run.add_argument("--format", choices=("json", "csv", "text"))
    run.add_argument("--jobs", type=int, help="run suites in parallel worker processes")
    run.add_argument("--no-runtime", action="store_true",
                     help="omit runtime_ms so identical runs give byte-identical JSON")
    c0 = sub.add_parser("derive-c0", help="derive C0 with its constancy certificate")
    _common(c0)
    return parser


KEYMAP = {
    "kernel.n": "n", "kernel.alpha": "alpha", "kernel.p": "p",
    "run.samples": "samples", "run.iterations": "iterations", "run.jobs": "jobs",
    "output": "output_path", "output_path": "output_path", "format": "format", "suite": "suite",
}


def load_config(path: str) -> Dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object of dotted keys")
    return data


def make_run_config(args: argparse.Namespace, env=None) -> RunConfig:
    env = os.environ if env is None else env
    rc = RunConfig()
    quad_fields = {f.name for f in fields(QuadConfig)}
    quad_kw = {}
    if getattr(args, "config", None):
        for key, val in load_config(args.config).items():
            if key.startswith("quad."):
                name = key[5:]
                if name not in quad_fields:
                    raise UsageError(f"unknown config key {key}")
                quad_kw[name] = val
            elif key in KEYMAP:
                setattr(rc, KEYMAP[key], val)
            else:
                raise UsageError(f"unknown config key {key}")
    for flag, attr in (("alpha", "alpha"), ("p", "p"), ("n", "n"), ("iterations", "iterations"),
                       ("jobs", "jobs"), ("format", "format"), ("output", "output_path"),
                       ("suite", "suite")):
        v = getattr(args, flag, None)
        if v is not None:
            setattr(rc, attr, v)
    for flag, name in (("delta", "delta"), ("radius", "R_trunc"), ("tol", "tol")):
        v = getattr(args, flag, None)
        if v is not None:
            quad_kw[name] = v
    if getattr(args, "samples", None) is not None:
        rc.samples = args.samples
        quad_kw["mc_samples"] = args.samples
    if getattr(args, "seed", None) is not None:
        quad_kw["seed"] = args.seed
    elif "seed" not in quad_kw and env.get("HVERIFY_SEED"):
        try:
            quad_kw["seed"] = _u64(env["HVERIFY_SEED"])
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad HVERIFY_SEED: {exc}") from exc
    try:
        rc.quad = replace(rc.quad, **quad_kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid quadrature configuration: {exc}") from exc
    if rc.format not in ("json", "csv", "text"):
        raise UsageError(f"unknown format {rc.format}")
    if rc.suite not in SUITES + ("all",):
        raise UsageError(f"unknown suite {rc.suite}")
    if not 0 <= rc.iterations <= 10:
        raise UsageError("iterations must lie in [0, 10]")
    rc.include_runtime = not getattr(args, "no_runtime", False)
    rc.kernel()
    return rc


def _write(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def cmd_run(args) -> int:
    rc = make_run_config(args)
    if rc.output_path is not None:
        # fail before hours of work if the destination is unwritable
        _write("", rc.output_path)
    reports = run_suites(rc)
    _write(render(reports, rc.format, rc.include_runtime), rc.output_path)
    return 0 if all(r.passed for r in reports) else 2


def cmd_derive_c0(args) -> int:
    rc = make_run_config(args)
    kp = rc.kernel()
    if rc.n != 1:
        raise UsageError("derive-c0 is implemented for n = 1 only")
    kp = KernelParams.critical(1, kp.alpha)
    try:
        C0, cert = derive_C0(kp, rc.quad, full_output=True)
    except ConstancyError as exc:
        print(f"constancy certificate failed: {exc}", file=sys.stderr)
        return 2
    print(f"C0 = {C0:.10g}   (n=1, alpha={kp.alpha:g}, sigma={kp.sigma:.6g})")
    print(f"spread = {cert.spread:.3e}  <=  2*tol = {cert.tolerance:.3e}")
    for (r, t), v in zip(cert.points, cert.values):
        print(f"  zeta=(r={r:g}, t={t:g})  C0={v:.10g}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_derive_c0(args)
    except UsageError as exc:
        print(f"hverify: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
