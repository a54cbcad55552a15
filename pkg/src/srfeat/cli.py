"""Command-line entrypoint wiring all subsystems.

Subcommands: prepare-data, train, super-resolve, evaluate, mos-serve,
mos-report. Every artifact directory receives a run manifest (command, config
snapshot, seed, inputs, outputs, wall clock) before heavy work starts. Exit
codes: 0 ok, 1 runtime failure, 2 usage. Logs are JSON lines on stderr.

Config files are flat ``key = value`` text (a flat TOML subset): one
assignment per line, ``#`` comments, values parsed as JSON where possible
(numbers, booleans, strings, lists), bare words kept as strings. Flags
override file values.
"""

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, Optional

from . import __version__
from .errors import SrfeatError


class JsonLineHandler(logging.StreamHandler):
    def emit(self, record: logging.LogRecord) -> None:
        payload = {
            "ts": round(record.created, 3),
            "level": record.levelname.lower(),
            "logger": record.name,
            "msg": record.getMessage(),
        }
        self.stream.write(json.dumps(payload) + "\n")
        self.flush()


def _setup_logging(verbose: bool = False) -> None:
    root = logging.getLogger()
    root.handlers = [JsonLineHandler(sys.stderr)]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def parse_config_file(path) -> Dict[str, object]:
    """Parse a flat key=value config file."""
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SrfeatError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            values[key] = json.loads(value)
        except json.JSONDecodeError:
            values[key] = value.strip("\"'")
    return values


def _describe_input(path: str) -> dict:
    entry: dict = {"path": path}
    p = Path(path)
    if p.is_file():
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        entry.update({"sha256": digest, "bytes": p.stat().st_size})
    return entry


def write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                   inputs: Dict[str, str], outputs: Dict[str, str]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "srfeat",
        "version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seed": seed,
        "inputs": {name: _describe_input(path)
                   for name, path in inputs.items() if path},
        "outputs": outputs,
        "started_at": time.time(),
        "wall_clock_s": None,
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def finalize_manifest(path: Path) -> None:
    manifest = json.loads(path.read_text())
    manifest["wall_clock_s"] = round(time.time() - manifest["started_at"], 3)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))


# -- subcommands -----------------------------------------------------------


def cmd_prepare_data(args) -> int:
    from .data import ingest_dataset

    index = ingest_dataset(args.root, split=args.split)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    index.save(out)
    logging.info("indexed %d images (split=%s) -> %s", len(index), args.split, out)
    if index.channel_mean:
        logging.info("channel mean: %s",
                     [f"{m:.6g}" for m in index.channel_mean])
    return 0


def _build_train_config(args):
    from .training import TrainConfig, tiny_config

    file_values = parse_config_file(args.config) if args.config else {}
    base = tiny_config() if args.tiny else TrainConfig()
    values = {}
    field_names = {f.name for f in dataclasses.fields(TrainConfig)}
    for key, value in file_values.items():
        if key not in field_names:
            raise SrfeatError(f"unknown config key {key!r}")
        values[key] = value
    for key in ("preset", "batch", "seed", "total_updates", "epoch_len"):
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            values[key] = flag
    if "adam_betas" in values:
        values["adam_betas"] = tuple(values["adam_betas"])
    return dataclasses.replace(base, **values)


def cmd_train(args) -> int:
    from .data import DatasetIndex
    from .training import run_training

    config = _build_train_config(args)
    index = DatasetIndex.load(args.data)
    out_dir = Path(args.out)
    manifest = write_manifest(
        out_dir, "train", config.to_dict(), config.seed,
        inputs={"data_index": str(args.data),
                "config_file": str(args.config) if args.config else ""},
        outputs={"checkpoint": str(out_dir / "checkpoint.srz"),
                 "loss_log": str(out_dir / "loss_log.jsonl")},
    )
    state = run_training(config, index, out_dir, updates=args.updates,
                         resume_from=args.resume)
    finalize_manifest(manifest)
    logging.info("trained to update %d (preset %s)", state.update, config.preset)
    return 0


def cmd_super_resolve(args) -> int:
    from .data import load_image, save_image
    from .training import load_checkpoint, super_resolve

    state = load_checkpoint(args.ckpt)
    img = load_image(args.input)
    sr = super_resolve(state, img)
    save_image(args.output, sr)
    logging.info("wrote %s (%dx%d)", args.output, sr.shape[1], sr.shape[0])
    return 0


def cmd_evaluate(args) -> int:
    from .metrics import EvalConvention, evaluate_benchmark

    convention = EvalConvention(channel=args.channel, border_crop=args.crop)
    if bool(args.ckpt) == bool(args.sr_dir):
        raise SrfeatError("evaluate needs exactly one of --sr-dir or --ckpt")
    if args.ckpt:
        from .training import load_checkpoint, super_resolve

        state = load_checkpoint(args.ckpt)
        sr_source = lambda lr: super_resolve(state, lr)
    else:
        sr_source = args.sr_dir
    report = evaluate_benchmark(sr_source, args.hr_dir,
                                dataset=args.dataset, convention=convention)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest = write_manifest(
        out.parent if out.parent != Path(".") else Path("."),
        "evaluate", convention.header(), 0,
        inputs={"sr_dir": str(args.sr_dir or ""), "ckpt": str(args.ckpt or ""),
                "hr_dir": str(args.hr_dir)},
        outputs={"report": str(out)},
    )
    report.save_json(out)
    report.save_csv(out.with_suffix(".csv"))
    finalize_manifest(manifest)
    mean = report.summary()["mean"]
    logging.info("%s: PSNR %.2f dB / SSIM %.4f / VIF %.4f over %d images",
                 report.dataset, mean["psnr_db"], mean["ssim"], mean["vif"],
                 len(report.rows))
    return 0


def cmd_mos_serve(args) -> int:
    import uvicorn

    from .mos.api import build_app
    from .mos.study import Study, StudyPlan

    plan = StudyPlan.from_dict(json.loads(Path(args.plan).read_text()))
    store = Path(args.store)
    store.mkdir(parents=True, exist_ok=True)
    study = Study(plan, log_path=store / "events.jsonl")
    app = build_app(study, images_root=Path(args.images))
    if args.frontend:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=args.frontend, html=True),
                  name="frontend")
    logging.info("serving MOS study on %s:%d (%d sessions max)",
                 args.host, args.port, plan.total_sessions)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_mos_report(args) -> int:
    import csv

    from .mos.study import Study, StudyPlan

    store = Path(args.store)
    plan = StudyPlan.from_dict(json.loads(Path(args.plan).read_text()))
    study = Study(plan, log_path=store / "events.jsonl")
    rows = study.aggregate()
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["version", "mos", "n", "ci95_low", "ci95_high"])
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        logging.info("%-10s MOS %.3f (n=%d, CI [%.3f, %.3f])", row["version"],
                     row["mos"], row["n"], row["ci95_low"], row["ci95_high"])
    logging.info("wrote %s", args.out)
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srfeat",
        description="4x super-resolution training, evaluation, and MOS study toolkit",
    )
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="index an HR image corpus")
    p.add_argument("--root", action="append", required=True,
                   help="corpus root (repeatable)")
    p.add_argument("--split", default="train", choices=["train", "test"])
    p.add_argument("--out", required=True, help="output index JSON path")
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", help="train a generator (and discriminator)")
    p.add_argument("--preset", default=None,
                   help="M_p | M_pva | M_pca | M_pcsa | M_pcsva")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--data", required=True, help="dataset index JSON")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--updates", type=int, default=None,
                   help="stop after this many updates (default: config value)")
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epoch-len", dest="epoch_len", type=int, default=None)
    p.add_argument("--total-updates", dest="total_updates", type=int, default=None)
    p.add_argument("--tiny", action="store_true",
                   help="desk-scale model widths for smoke runs")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("super-resolve", help="4x upscale one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_super_resolve)

    p = sub.add_parser("evaluate", help="PSNR/SSIM/VIF over an SR/HR dir pair")
    p.add_argument("--sr-dir", default=None,
                   help="directory of precomputed SR images")
    p.add_argument("--ckpt", default=None,
                   help="checkpoint to super-resolve synthesized LR inputs with")
    p.add_argument("--hr-dir", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--dataset", default="")
    p.add_argument("--channel", default="luma601", choices=["luma601", "rgb"])
    p.add_argument("--crop", type=int, default=4)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mos-serve", help="run the MOS study HTTP service")
    p.add_argument("--images", required=True,
                   help="stimuli root: <root>/<version>/<image>.png")
    p.add_argument("--plan", required=True, help="study plan JSON")
    p.add_argument("--store", required=True, help="record store directory")
    p.add_argument("--frontend", default=None,
                   help="static directory with the rater UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_mos_serve)

    p = sub.add_parser("mos-report", help="aggregate recorded scores")
    p.add_argument("--store", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_mos_report)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except SrfeatError as exc:
        logging.error("%s", exc)
        return 1
    except Exception:
        logging.exception("unhandled failure")
        return 1


def main() -> None:
    sys.exit(dispatch())
