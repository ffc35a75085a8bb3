"""``rectinit`` command-line runner.

Subcommands::

    rectinit init-report --spec vgg-b --scheme he-bwd
    rectinit probe       --spec probe-relu-20 --scheme xavier --trials 50
    rectinit train       --spec mlp-30 --data synth:10,300,64,4 --scheme he-fwd
    rectinit gradcheck   --spec gradcheck-small

Every command writes CSV (to ``--out`` or stdout) whose leading ``#`` lines
echo the fully resolved configuration. Exit codes: 0 success, 1 check
failure, 2 usage or input error, 3 training ended diverged or stalled.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .analysis import attenuation_vs_he, monte_carlo_probe, predict_gains
from .data import IdxFormatError, load_idx, synth_gaussian_classes
from .init import FixedStd, init_std, parse_scheme, scheme_name
from .model.spec import Activation, SpecError, load_spec
from .optim import OptimConfig, parse_lr_steps
from .train import TrainConfig, grad_check, train

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_activation(text: str) -> Activation:
    """``relu``, ``identity``, ``lrelu:<a>``, ``prelu:<a>`` or ``prelu-shared:<a>``."""
    kind, _, arg = text.partition(":")
    kind = kind.replace("-", "_")
    if kind in ("relu", "identity") and not arg:
        return Activation(kind)
    if kind in ("lrelu", "prelu", "prelu_shared"):
        try:
            return Activation(kind, float(arg) if arg else 0.25)
        except ValueError:
            pass
    raise UsageError(f"bad --act value {text!r}")


def parse_data(text: str, seed: int):
    source, _, rest = text.partition(":")
    if source == "synth":
        parts = rest.split(",")
        if len(parts) != 4:
            raise UsageError("--data synth:<classes>,<per_class>,<dims>,<separation>")
        classes, per, dims = (int(v) for v in parts[:3])
        return synth_gaussian_classes(classes, per, dims, float(parts[3]), seed)
    if source == "idx":
        parts = rest.split(",")
        if len(parts) != 2:
            raise UsageError("--data idx:<images>,<labels>")
        for path in parts:
            if not Path(path).is_file():
                raise UsageError(f"data file not found: {path}")
        return load_idx(parts[0], parts[1], normalize=True)
    raise UsageError(f"unknown data source {text!r}")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _header(args, **extra) -> dict:
    head = {"rectinit": __version__, "command": args.command, "spec": args.spec,
            "scheme": args.scheme, "seed": args.seed}
    head.update(extra)
    return head


def cmd_init_report(args) -> int:
    spec = load_spec(args.spec)
    scheme = parse_scheme(args.scheme)
    report = predict_gains(spec, scheme, args.a)
    summary = [f"{spec.depth} weighted layers, scheme {scheme_name(scheme)}",
               f"forward product (layers 2..L)  = {report.forward_product:.6g}",
               f"backward product (layers 2..L) = {report.backward_product:.6g}"]
    if isinstance(scheme, FixedStd) and scheme.sigma > 0:
        ratio = attenuation_vs_he(spec, scheme.sigma, "bwd")
        report.notes.append(f"attenuation_bwd_std_ratio={ratio!r}")
        report.notes.append(f"attenuation_bwd_reciprocal={1.0 / ratio!r}")
        summary.append(f"backward std vs he-bwd (layers 2..L): {ratio:.4g} = 1/{1.0 / ratio:.4g}")
    stds = ", ".join(f"{init_std(scheme, layer):.3f}" for layer in spec.weighted_layers())
    summary.append(f"per-layer std: {stds}")
    _emit(report.to_csv(_header(args, a="spec" if args.a is None else args.a)), args.out)
    print("\n".join(summary), file=sys.stderr)
    return EXIT_OK


def cmd_probe(args) -> int:
    spec = load_spec(args.spec)
    scheme = parse_scheme(args.scheme)
    report = monte_carlo_probe(spec, scheme, args.trials, args.batch, args.seed)
    report.notes.append(f"empirical_cum_fwd={report.empirical_cum_fwd!r}")
    report.notes.append(f"empirical_cum_bwd={report.empirical_cum_bwd!r}")
    _emit(report.to_csv(_header(args, trials=args.trials, batch=args.batch)), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    spec = load_spec(args.spec)
    scheme = parse_scheme(args.scheme)
    act = parse_activation(args.act) if args.act else None
    optim = OptimConfig(args.lr, args.momentum, args.weight_decay,
                        parse_lr_steps(args.lr_steps) if args.lr_steps else [])
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch, optim=optim, scheme=scheme,
                         activation=act, seed=args.seed, freeze_slopes=args.freeze_slopes)
    data = parse_data(args.data, args.seed)
    val = parse_data(args.val_data, args.seed + 1) if args.val_data else None
    run = train(spec, data, val, config)
    header = _header(args, data=args.data, val_data=args.val_data or "", epochs=args.epochs,
                     batch=args.batch, lr=args.lr, momentum=args.momentum,
                     weight_decay=args.weight_decay, lr_steps=args.lr_steps or "",
                     act=args.act or "spec", freeze_slopes=args.freeze_slopes)
    _emit(run.to_csv(header), args.out)
    print(f"status={run.status} final train loss={run.final.loss:.6g} "
          f"top1={run.final.top1:.4f}" if run.records else f"status={run.status}", file=sys.stderr)
    return EXIT_OK if run.status == "completed" else EXIT_DEGENERATE


def cmd_gradcheck(args) -> int:
    spec = load_spec(args.spec)
    report = grad_check(spec, args.seed, args.step, args.tolerance,
                        corrupt_slopes=args.corrupt_slope_grad)
    lines = [f"# {k}={v}" for k, v in _header(args, step=args.step, tolerance=args.tolerance,
                                               corrupt_slope_grad=args.corrupt_slope_grad).items()]
    lines.append("parameter,max_rel_err,status")
    for key, err in report.errors.items():
        lines.append(f"{key},{err!r},{'ok' if err <= report.tolerance else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out)
    print(report.format(), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rectinit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheme="he-fwd"):
        p.add_argument("--spec", required=True, help="spec file, or a bundled name such as vgg-b")
        p.add_argument("--scheme", default=scheme,
                       help="he-fwd | he-bwd | xavier | fixed:<sigma> | prelu:<a>:fwd|bwd")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write CSV here instead of stdout")

    p = sub.add_parser("init-report", help="analytic per-layer std and variance gains")
    common(p, "he-bwd")
    p.add_argument("--a", type=float, default=None,
                   help="rectifier slope used for every layer (default: the spec's activations)")
    p.set_defaults(func=cmd_init_report)

    p = sub.add_parser("probe", help="Monte-Carlo variance ratios at initialization")
    common(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("train", help="train a network and write per-epoch metrics")
    common(p)
    p.add_argument("--data", required=True, help="idx:<images>,<labels> | synth:<classes>,<per>,<dims>,<sep>")
    p.add_argument("--val-data", help="validation data, same syntax as --data")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0005)
    p.add_argument("--lr-steps", help="comma list of epoch:lr switch points")
    p.add_argument("--act", help="relu | lrelu:<a> | prelu:<a> | prelu-shared:<a> | identity")
    p.add_argument("--freeze-slopes", action="store_true", help="never update PReLU slopes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="compare backprop with finite differences")
    common(p)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--corrupt-slope-grad", action="store_true",
                   help="debug: double the analytic slope gradients")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, UsageError, IdxFormatError, OSError, ValueError) as exc:
        print(f"rectinit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
