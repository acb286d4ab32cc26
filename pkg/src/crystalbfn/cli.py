"""Command-line entry point: ingest, train, sample, eval, roundtrip.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  Every run writes
a run_metadata.json record (command, effective configuration, seed, code
version, timestamps) into its artifact directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import __version__, cifio, metrics
from .sampling import SampleConfig, generate_from_checkpoint
from .sitesym import ReconstructionError, extract_asymmetric_unit, reconstruct_unit_cell
from .training import DatasetManifest, TrainConfig, ingest, train


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_metadata(directory, command: str, config: dict, seed: int, started: float):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()},
        "seed": seed,
        "code_version": __version__,
        "started_at": started,
        "finished_at": time.time(),
    }
    with open(directory / "run_metadata.json", "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)


def _build_parser() -> Parser:
    parser = Parser(prog="crystalbfn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a dataset manifest from CIFs or the bundled corpus")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="directory of CIF files with sg tags")
    src.add_argument("--prototypes", action="store_true", help="use the bundled prototype corpus")
    p.add_argument("--output", type=Path, required=True, help="manifest path (JSON lines)")
    p.add_argument("--tol", type=float, default=1e-3, help="symmetry consistency tolerance")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model on a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--config", type=Path, help="key = value file, one TrainConfig field per line")
    p.add_argument("--output", type=Path, required=True, help="artifact directory")
    for f in dataclasses.fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool" or isinstance(f.default, bool):
            p.add_argument(flag, type=_parse_bool, default=None, metavar="BOOL")
        else:
            p.add_argument(flag, type=type(f.default), default=None)

    p = sub.add_parser("sample", help="generate structures from a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True, help="artifact directory")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--sg", type=int, default=None, help="fix the space group")
    p.add_argument("--target", type=float, default=None, help="property target (conditioned models)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("eval", help="score a directory of generated CIFs against a manifest")
    p.add_argument("--generated", type=Path, required=True, help="directory of generated CIFs")
    p.add_argument("--reference", type=Path, required=True, help="reference manifest")
    p.add_argument("--report", type=Path, required=True, help="report output path (JSON)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("roundtrip", help="symmetry-reduce and rebuild one CIF")
    p.add_argument("--cif", type=Path, required=True)
    p.add_argument("--sg", type=int, required=True)
    p.add_argument("--output", type=Path, default=None, help="optional artifact directory")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def read_train_config(path) -> dict:
    """Parse the key = value config format; unknown keys are usage errors."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = (s.strip() for s in line.partition("="))
            if key not in fields:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            default = fields[key].default
            if isinstance(default, bool):
                values[key] = _parse_bool(value)
            else:
                values[key] = type(default)(value)
    return values


def _cmd_ingest(args) -> int:
    started = time.time()
    reports = []
    if args.prototypes:
        manifest = ingest(use_prototypes=True, tol=args.tol, report=reports.append)
    else:
        if not args.input.is_dir():
            raise FileNotFoundError(f"input directory {args.input} does not exist")
        paths = sorted(args.input.glob("*.cif"))
        manifest = ingest(cif_paths=paths, tol=args.tol, report=reports.append)
    for msg in reports:
        print(f"skipped: {msg}", file=sys.stderr)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    manifest.save(args.output)
    _write_metadata(args.output.parent, "ingest", vars(args), args.seed, started)
    print(f"wrote manifest with {len(manifest.entries)} entries "
          f"(K={manifest.k_classes}) to {args.output}")
    return 0


def _cmd_train(args) -> int:
    started = time.time()
    values = read_train_config(args.config) if args.config else {}
    for f in dataclasses.fields(TrainConfig):
        override = getattr(args, f.name)
        if override is not None:
            values[f.name] = override
    cfg = TrainConfig(**values)
    manifest = DatasetManifest.load(args.manifest)
    result = train(cfg, manifest, out_dir=args.output, log=print)
    _write_metadata(args.output, "train", {**vars(args), **dataclasses.asdict(cfg)},
                    cfg.seed, started)
    print(f"final loss {result.loss_curve[-1][1]:.6g}; artifacts in {args.output}")
    return 0


def _cmd_sample(args) -> int:
    started = time.time()
    cfg = SampleConfig(n_steps=args.steps, count=args.count, sg=args.sg,
                       target=args.target, seed=args.seed, threads=args.threads)
    records = generate_from_checkpoint(args.checkpoint, cfg)
    args.output.mkdir(parents=True, exist_ok=True)
    n_ok = 0
    for rec in records:
        if rec.crystal is not None:
            text = cifio.write_cif(rec.crystal, sg=rec.sg, name=f"sample_{rec.index:05d}")
            (args.output / f"sample_{rec.index:05d}.cif").write_text(text)
            n_ok += 1
    cifio.write_records(args.output / "diagnostics.jsonl",
                        {"format_version": 1, "n_samples": len(records)},
                        [rec.diagnostics() for rec in records])
    _write_metadata(args.output, "sample", vars(args), args.seed, started)
    print(f"{n_ok}/{len(records)} samples reconstructed; artifacts in {args.output}")
    return 0


def _cmd_eval(args) -> int:
    started = time.time()
    cif_paths = sorted(args.generated.glob("*.cif")) if args.generated.is_dir() else []
    if not cif_paths:
        raise FileNotFoundError(f"no CIF files in {args.generated}")
    generated, generated_sgs = [], []
    for path in cif_paths:
        crystal, sg = cifio.parse_cif(path.read_text())
        if sg is None:
            raise ValueError(f"{path}: missing space-group tag")
        generated.append(crystal)
        generated_sgs.append(sg)
    manifest = DatasetManifest.load(args.reference)
    reference = [reconstruct_unit_cell(e) for e in manifest.entries]
    reference_sgs = [e.sg for e in manifest.entries]
    report = metrics.evaluate_set(generated, generated_sgs, reference, reference_sgs)
    args.report.parent.mkdir(parents=True, exist_ok=True)
    with open(args.report, "w") as fh:
        json.dump({"kind": "metrics_report", **report.to_dict()}, fh, indent=1, sort_keys=True)
    _write_metadata(args.report.parent, "eval", vars(args), args.seed, started)
    print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    return 0


def _cmd_roundtrip(args) -> int:
    started = time.time()
    crystal, tag_sg = cifio.parse_cif(args.cif.read_text())
    sg = args.sg if args.sg is not None else tag_sg
    au = extract_asymmetric_unit(crystal, sg)
    rebuilt = reconstruct_unit_cell(au)
    match = metrics.structure_match(crystal, rebuilt)
    print(f"match: {'true' if match else 'false'}")
    if args.output is not None:
        _write_metadata(args.output, "roundtrip", vars(args), args.seed, started)
    return 0 if match else 2


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "sample": _cmd_sample,
    "eval": _cmd_eval,
    "roundtrip": _cmd_roundtrip,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, ReconstructionError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
