"""Command line front end.

Exit codes: 0 ok, 2 configuration error, 3 geometry error, 4 chain-design
error. `generate` runs the geometry pipeline as painted; `optimize`
additionally folds a contact source into a new density map and resamples.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ChainDesignError, ConfigError, GeometryError
from .mesh import load_mesh
from .pipeline import characterize, load_config, run_pipeline
from .snr import (Protocol, aggregate_trials, pairwise_min_snr, read_trace,
                  report_text, segment_trace)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="TOML pipeline config")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--scale", type=float, default=None,
                   help="override the mesh scale factor")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--allow-broken", action="store_true",
                   help="export even if the shell self-intersects")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skinforge",
        description="Generate printable tactile-skin shells for robot links")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("generate", help="mesh + heat maps -> skin unit")
    _add_run_flags(gen)

    opt = sub.add_parser("optimize",
                         help="generate, then rebuild density from contacts")
    _add_run_flags(opt)

    cha = sub.add_parser("characterize", help="table of unit properties")
    cha.add_argument("--manifest", required=True)
    cha.add_argument("--body", required=True, help="exported body STL")
    cha.add_argument("--json", default=None, help="also write JSON here")

    snr_p = sub.add_parser("snr", help="SNR report from capture traces")
    snr_p.add_argument("--trial", action="append", required=True,
                       metavar="DIR", help="directory of .trace files; repeat "
                       "for repeated trials")
    snr_p.add_argument("--guard", type=float, default=0.25)
    snr_p.add_argument("--phases", type=float, nargs=3, default=(3.0, 3.0, 3.0),
                       metavar=("REST", "PRESS", "RELEASE"))
    snr_p.add_argument("--unit", default="unit")
    snr_p.add_argument("--json", default=None)

    srv = sub.add_parser("serve", help="run the local HTTP service")
    srv.add_argument("--port", type=int, default=8765)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--assets", default=None,
                     help="directory meshes may be loaded from")
    return parser


def _cmd_run(args: argparse.Namespace, require_contacts: bool) -> int:
    config = load_config(args.config, seed=args.seed, scale=args.scale,
                         out_dir=args.out, allow_broken=args.allow_broken)
    if require_contacts and not config.has_contacts:
        raise ConfigError("optimize needs [contacts] with a log or trajectory")
    if not require_contacts:
        config = replace(config, contact_log=None, trajectory=None)
    result = run_pipeline(config)
    r = result.report
    print(f"{r['name']}: {r['nodule_count']} nodules, "
          f"{r['shell_volume_cm3']:.2f} cm^3 shell, "
          f"{r['total_resistance_kohm']:.1f} kOhm chain, "
          f"self-intersections: {r['self_intersection_pairs']}")
    for kind, path in result.outputs.items():
        print(f"  {kind}: {path}")
    return 0


def _cmd_characterize(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        raise ConfigError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="ascii"))
    body = load_mesh(args.body)
    row = characterize(manifest, body, body_path=Path(args.body))
    print(row.text())
    if args.json:
        Path(args.json).write_text(
            json.dumps(row.as_dict(), sort_keys=True, indent=2) + "\n",
            encoding="ascii")
    return 0


def _cmd_snr(args: argparse.Namespace) -> int:
    protocol = Protocol(phases=tuple(args.phases), guard=args.guard)
    reports = []
    for trial_dir in args.trial:
        trial = Path(trial_dir)
        files = sorted(trial.glob("*.trace"))
        if not files:
            raise ConfigError(f"no .trace files in {trial}")
        stats = [segment_trace(read_trace(f), protocol) for f in files]
        reports.append(pairwise_min_snr(stats))
    print(report_text(reports, unit=args.unit))
    if args.json:
        agg = aggregate_trials([r.min_snr for r in reports])
        payload = {
            "unit": args.unit,
            "trials": [r.as_dict() for r in reports],
            "aggregate": {"mean": agg.mean, "half_range": agg.half_range,
                          "std": agg.std},
        }
        Path(args.json).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n",
            encoding="ascii")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "generate":
            return _cmd_run(args, require_contacts=False)
        if args.verb == "optimize":
            return _cmd_run(args, require_contacts=True)
        if args.verb == "characterize":
            return _cmd_characterize(args)
        if args.verb == "snr":
            return _cmd_snr(args)
        if args.verb == "serve":
            from .service import serve
            serve(port=args.port, asset_root=args.assets, host=args.host)
            return 0
        raise ConfigError(f"unknown verb {args.verb}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    except ChainDesignError as exc:
        print(f"chain design error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
