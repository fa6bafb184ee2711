"""``gfperc`` command line: ``sample``, ``experiment`` and ``verify``.

Exit codes: 0 success, 1 a gate failed (outputs are still written), 2 usage
or configuration error (nothing written), 3 input/output failure.
"""
from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys

from . import __version__
from .field import required_padding, sample_noise, synthesize
from .formats import json_text, write_gfield2, write_pgm
from .grid import GridSpec
from .kernel import CutoffSpec, KernelSpec, load_qtab
from .parallel import default_threads
from .topology import largest_component

EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
MANIFEST_SCHEMA = "gfperc.manifest/1"


class UsageError(Exception):
    pass


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def content_hash(obj):
    """sha256 of the canonical JSON form of ``obj``."""
    text = json.dumps(json.loads(json_text(obj)), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()


# ------------------------------------------------------------------ sample

def _kernel(args):
    fam = args.kernel
    if fam in ("bf", "bargmann_fock"):
        return KernelSpec.bargmann_fock()
    if fam in ("rq", "rational_quadratic"):
        if args.beta is None:
            raise UsageError("--kernel rq needs --beta")
        try:
            return KernelSpec.rational_quadratic(args.beta)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if fam == "qtab":
        if not args.table:
            raise UsageError("--kernel qtab needs --table PATH")
        try:
            return load_qtab(args.table)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown kernel {fam!r}")


def _extent(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        return (0.0, parts[0], 0.0, parts[0])
    if len(parts) == 4:
        return tuple(parts)
    raise UsageError("--extent takes L or x0,x1,y0,y1")


def _out_stem(path):
    root, ext = os.path.splitext(path)
    return root if ext else path


def cmd_sample(args):
    if not args.eps > 0:
        raise UsageError("--eps must be positive")
    kernel = _kernel(args)
    cut = CutoffSpec(args.truncation) if args.truncation is not None else None
    try:
        grid = GridSpec(args.eps, _extent(args.extent))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    grid = grid.with_padding(required_padding(kernel, cut, args.eps))
    f = synthesize(kernel, cut, (0, 0), sample_noise(grid, args.seed), grid).values
    x0, _, y0, _ = grid.extent
    write_gfield2(args.out, f, grid.eps, x0, y0)
    written = [args.out]
    if args.render:
        stem = _out_stem(args.out)
        mask = f >= -args.level
        big = largest_component(mask, 4)
        write_pgm(stem + "_mask.pgm", mask)
        write_pgm(stem + "_largest.pgm", big)
        written += [stem + "_mask.pgm", stem + "_largest.pgm"]
        if args.png:
            from .plotting import plot_mask
            plot_mask(stem + ".png", mask, highlight=big, extent=grid.extent,
                      title=f"level {args.level:g}")
            written.append(stem + ".png")
    for p in written:
        print(p)
    return EXIT_OK


# -------------------------------------------------------------- experiment

def load_config_file(path):
    """Experiment config from a JSON file; a run manifest is accepted too and
    replays its resolved config."""
    from .experiments import ConfigError, ExperimentConfig
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if isinstance(d, dict) and d.get("schema") == MANIFEST_SCHEMA:
        d = d.get("config")
    return ExperimentConfig.from_dict(d)


def build_manifest(config_path, cfg, outdir, started, finished, outputs, runtime_s=None,
                   threads=None):
    resolved = cfg.to_dict()
    return {"schema": MANIFEST_SCHEMA, "config_path": os.path.abspath(config_path),
            "config": resolved, "outdir": os.path.abspath(outdir),
            "input_hash": content_hash({"config": resolved, "version": __version__}),
            "version": __version__, "started": started, "finished": finished,
            "runtime_s": runtime_s, "threads": threads,
            "outputs": {k: os.path.basename(v) for k, v in outputs.items()}}


def cmd_experiment(args):
    from .experiments import ConfigError, run_experiment, write_report
    try:
        cfg = load_config_file(args.config)
        if args.trials is not None:
            if args.trials < 1:
                raise UsageError("--trials must be positive")
            cfg = cfg.replace(n_trials=args.trials)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        raise UsageError(f"{exc}{key}") from exc
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise UsageError("--threads must be positive")
    started = _now()
    try:
        rep = run_experiment(cfg, threads=threads)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        raise UsageError(f"{exc}{key}") from exc
    paths = write_report(rep, args.out)
    manifest = build_manifest(args.config, cfg, args.out, started, _now(), paths,
                              round(rep.runtime_s, 3), threads)
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        fh.write(json_text(manifest))
    for g in rep.gates:
        print(f"{'PASS' if g.passed else 'FAIL'} {g.name} {g.value:.6g} {g.relation} "
              f"{g.threshold:.6g}")
    return EXIT_OK if rep.passed else EXIT_GATE


# ------------------------------------------------------------------ verify

def cmd_verify(args):
    from . import acceptance
    numbers = None
    if args.criteria:
        try:
            numbers = [int(v) for v in args.criteria.split(",")]
        except ValueError as exc:
            raise UsageError("--criteria takes comma-separated numbers") from exc
        bad = [k for k in numbers if k not in acceptance.CRITERIA]
        if bad:
            raise UsageError(f"unknown criteria {bad}")
    results = acceptance.run_criteria(args.profile, numbers,
                                      echo=lambda s: print(s, file=sys.stderr))
    text = json_text(acceptance.verify_summary(results, args.profile))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_GATE


# ------------------------------------------------------------------ parser

def build_parser():
    p = argparse.ArgumentParser(prog="gfperc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="synthesise one field and dump it")
    s.add_argument("--kernel", default="bf", choices=("bf", "rq", "qtab"))
    s.add_argument("--beta", type=float)
    s.add_argument("--table", help="qtab file for --kernel qtab")
    s.add_argument("--eps", type=float, default=0.25)
    s.add_argument("--extent", default="16", help="side L, or x0,x1,y0,y1 (length units)")
    s.add_argument("--truncation", type=float, help="cutoff radius r (default: untruncated)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--level", type=float, default=0.0)
    s.add_argument("--out", required=True, help="GFIELD2 output path")
    s.add_argument("--render", action="store_true",
                   help="also write the excursion mask and its largest component as PGM")
    s.add_argument("--png", action="store_true", help="with --render, also a PNG preview")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("experiment", help="run one experiment from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--threads", type=int)
    e.add_argument("--trials", type=int, help="override n_trials")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--profile", choices=("quick", "full"), default="quick")
    v.add_argument("--criteria", help="comma-separated subset, e.g. 3,4,7")
    v.add_argument("--out", help="JSON output path (default: stdout)")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gfperc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gfperc {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
