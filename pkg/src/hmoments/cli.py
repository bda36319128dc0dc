"""``hmoments`` command line.

Exit status: 0 on success, 2 for configuration or contract problems
(including too few moments for the chosen method), 3 for numerical or
estimator failures, 4 when measured expectations do not cover an operator.
"""
from __future__ import annotations

import argparse
import sys
import warnings

from .config import GridSpec, ScanConfig
from .errors import ConfigError, CoverageError, HMomentsError, NumericalError
from .estimators import METHODS, required_order
from .grouping import POLICIES, greedy_qwc_grouping
from .moments import MomentTable
from . import pipeline

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_COVERAGE = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config; defaults reproduce the four-site study")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--u", metavar="A,B,STEPS", help="U grid, or a single value")
    p.add_argument("--j", metavar="A,B,STEPS", help="J grid, or a single value")
    p.add_argument("--b", type=float, metavar="X")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--order", type=int, metavar="N", help="ITE/Taylor order, Krylov r, Lanczos depth, CMX n or PDS K")
    p.add_argument("--tau", metavar="X|auto")
    p.add_argument("--source", choices=("exact", "sampled"))
    p.add_argument("--shots", type=int, metavar="N", help="shots per measurement group")
    p.add_argument("--noise", metavar="p01,p10", help="readout flip probabilities")
    p.add_argument("--calibrate", action="store_true", default=None)
    p.add_argument("--repeats", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmoments", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("moments", "write the moment table m_0..m_N"),
        ("estimate", "run one estimator at a single (U, J) point"),
        ("scan", "sweep the (U, J) grid and report MSE against exact diagonalization"),
        ("calibrate-demo", "raw versus calibrated expectation values"),
        ("group", "print the qubitwise-commuting measurement groups"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _common(p)
        if name == "estimate":
            p.add_argument("--moments-file", metavar="PATH", help="read moments from a CSV written by 'moments'")
        if name == "group":
            p.add_argument("--policy", choices=POLICIES)
    return parser


def _parse_tau(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"--tau expects a number or 'auto', got {text!r}") from None


def _parse_noise(text: str) -> tuple[float, float]:
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"--noise expects p01,p10, got {text!r}") from None
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2:
        raise ConfigError(f"--noise expects p01,p10, got {text!r}")
    return parts[0], parts[1]


def resolve_config(args: argparse.Namespace) -> ScanConfig:
    cfg = ScanConfig.load(args.config) if args.config else ScanConfig()
    ch: dict = {}
    for key in ("seed", "workers", "method", "order", "source", "shots", "calibrate", "repeats", "out"):
        val = getattr(args, key, None)
        if val is not None:
            ch[key] = val
    if args.b is not None:
        ch["B"] = args.b
    if args.u is not None:
        ch["U"] = GridSpec.parse(args.u)
    if args.j is not None:
        ch["J"] = GridSpec.parse(args.j)
    if args.tau is not None:
        ch["tau"] = _parse_tau(args.tau)
    if args.noise is not None:
        ch["p01"], ch["p10"] = _parse_noise(args.noise)
    if getattr(args, "policy", None):
        ch["grouping_policy"] = args.policy
    return cfg.updated(**ch)


def cmd_moments(cfg: ScanConfig) -> str:
    U, J = cfg.single_point()
    N = pipeline.moment_order(cfg)
    m = pipeline.compute_moments(cfg, U, J, N)
    header = {"U": pipeline.fmt(U), "J": pipeline.fmt(J), "B": pipeline.fmt(cfg.B), "source": cfg.source}
    if cfg.source == "sampled":
        header.update(seed=cfg.seed, shots_per_group=cfg.shots, groups=m.meta["groups"],
                      measured_strings=m.meta["measured_strings"])
    else:
        header["measured_strings"] = len(pipeline.measured_strings(pipeline.hamiltonian(cfg, U, J), None, N))
    header["basis_strings"] = header["measured_strings"] + 1
    return m.to_csv(header)


def cmd_estimate(cfg: ScanConfig, moments_file: str | None = None) -> str:
    need = required_order(cfg.method, cfg.order)
    if moments_file:
        try:
            with open(moments_file, encoding="utf-8") as fh:
                m = MomentTable.from_csv(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read moments {moments_file}: {exc}") from None
        m.require(need)
    else:
        U, J = cfg.single_point()
        m = pipeline.compute_moments(cfg, U, J, need)
    res = pipeline.run_estimate(cfg, m)
    row = res.row()
    return "method,params,estimate,diagnostics\n" + ",".join(
        [row["method"], row["params"], row["estimate"], row["diagnostics"]]) + "\n"


def cmd_scan(cfg: ScanConfig) -> str:
    return pipeline.scan_csv(cfg, pipeline.run_scan(cfg))


def cmd_calibrate_demo(cfg: ScanConfig) -> str:
    if cfg.source != "sampled":
        cfg = cfg.updated(source="sampled")
    return pipeline.calibrate_demo(cfg)[0]


def cmd_group(cfg: ScanConfig) -> str:
    U, J = cfg.single_point()
    H = pipeline.hamiltonian(cfg, U, J)
    strings = pipeline.measured_strings(H, None, pipeline.moment_order(cfg))
    plan = greedy_qwc_grouping(strings, cfg.grouping_policy)
    plan.validate()
    return (f"# basis_strings={len(strings) + 1} measured_strings={len(strings)} groups={len(plan)} "
            f"policy={plan.policy}\n" + plan.to_text())


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.filterwarnings("ignore", message="moments beyond order", category=RuntimeWarning)
    try:
        cfg = resolve_config(args)
        if args.command == "moments":
            text = cmd_moments(cfg)
        elif args.command == "estimate":
            text = cmd_estimate(cfg, args.moments_file)
        elif args.command == "scan":
            text = cmd_scan(cfg)
        elif args.command == "calibrate-demo":
            text = cmd_calibrate_demo(cfg)
        else:
            text = cmd_group(cfg)
    except CoverageError as exc:
        print(f"hmoments: coverage error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except NumericalError as exc:
        print(f"hmoments: numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (HMomentsError, ValueError) as exc:
        print(f"hmoments: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
