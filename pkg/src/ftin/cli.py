"""Command-line entry point: ``ftin {synth,train,eval,ablate,plot}``.

Configuration precedence, lowest to highest: built-in defaults, the JSON file
given with ``--config``, then command-line flags. Every command writes its
outputs under ``--out`` together with ``manifest.json``.

Exit codes: 0 success, 2 usage or validation error, 3 runtime/numeric failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import torch

from .errors import FtinError, NumericError, PreconditionError, SchemaError, ShapeError, SizeError
from .evaluation import MetricsReport, evaluate_sequences, write_trajectory_csv
from .imu_data import load_dataset_dir, make_windows, rotate_to_world, split_dataset, windows_to_arrays
from .model import FtinConfig, build_model, desk_config, load_checkpoint
from .model.config import VARIANTS
from .synth_world import DEFAULT_CORPUS_SIZE, DEFAULT_CORPUS_SPEC, TrajectorySpec, write_corpus
from .training import TrainConfig, train

CONFIG_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("ftin")


class UsageError(FtinError):
    """Bad arguments or inputs; maps to exit code 2."""


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class DataConfig:
    train_stride: int = 10
    val_stride: int = 10
    eval_stride: int = 10
    split_seed: int = 0

    def __post_init__(self):
        for name in ("train_stride", "val_stride", "eval_stride"):
            if getattr(self, name) < 1:
                raise PreconditionError(f"data.{name} must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    model: FtinConfig = field(default_factory=FtinConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    synth: TrajectorySpec = DEFAULT_CORPUS_SPEC
    synth_n: int = DEFAULT_CORPUS_SIZE

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "data": asdict(self.data),
            "synth": {"n": self.synth_n, "spec": self.synth.to_dict()},
        }


def _model_from_section(sec: dict) -> FtinConfig:
    sec = dict(sec)
    preset = sec.pop("preset", "default")
    variant = sec.pop("variant", None)
    if preset == "desk":
        base = desk_config()
    elif preset == "default":
        base = FtinConfig()
    else:
        raise PreconditionError(f"model.preset must be 'default' or 'desk', got {preset!r}")
    merged = {**base.to_dict(), **sec}
    cfg = FtinConfig.from_dict(merged)
    return cfg.variant(variant) if variant else cfg


def load_run_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}") from e
    if raw.get("version") != CONFIG_VERSION:
        raise UsageError(f"config version must be {CONFIG_VERSION}, got {raw.get('version')!r}")
    unknown = set(raw) - {"version", "model", "train", "data", "synth"}
    if unknown:
        raise UsageError(f"unknown config section(s): {sorted(unknown)}")
    synth = dict(raw.get("synth", {}))
    n = synth.pop("n", DEFAULT_CORPUS_SIZE)
    spec = synth.pop("spec", {})
    if synth:
        raise UsageError(f"unknown synth key(s): {sorted(synth)}")
    data = raw.get("data", {})
    bad = set(data) - set(DataConfig.__dataclass_fields__)
    if bad:
        raise UsageError(f"unknown data key(s): {sorted(bad)}")
    return RunConfig(
        model=_model_from_section(raw.get("model", {})),
        train=TrainConfig.from_dict(raw.get("train", {})),
        data=DataConfig(**data),
        synth=TrajectorySpec.from_dict({**DEFAULT_CORPUS_SPEC.to_dict(), **spec}),
        synth_n=int(n),
    )


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    model, tr, data = cfg.model, cfg.train, cfg.data
    if getattr(args, "variant", None):
        model = model.variant(args.variant)
    tr_over = {k: v for k, v in (("seed", args.seed), ("max_epochs", getattr(args, "epochs", None)),
                                 ("batch_size", getattr(args, "batch_size", None)), ("lr_init", getattr(args, "lr", None)))
               if v is not None}
    if tr_over:
        tr = replace(tr, **tr_over)
    data_over = {k: v for k, v in (("train_stride", getattr(args, "train_stride", None)),
                                   ("eval_stride", getattr(args, "eval_stride", None))) if v is not None}
    if data_over:
        data = replace(data, **data_over)
    synth, n = cfg.synth, cfg.synth_n
    if getattr(args, "n", None) is not None:
        n = args.n
    return RunConfig(model=model, train=tr, data=data, synth=synth, synth_n=n)


# ---------------------------------------------------------------- manifest


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    inputs: list[str]
    outputs: list[str]
    checkpoint_sha256: str | None = None
    started: str = field(default_factory=_now)
    finished: str | None = None

    def write(self, out_dir: Path) -> Path:
        missing = [p for p in self.outputs if not (out_dir / p).exists()]
        if missing:
            raise FtinError(f"declared outputs missing: {missing}")
        self.finished = _now()
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


# ---------------------------------------------------------------- commands


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(path):
    if path is None:
        raise UsageError("--data is required")
    if not Path(path).is_dir():
        raise UsageError(f"data directory not found: {path}")
    return load_dataset_dir(path)


def _split(seqs, seed):
    return split_dataset(seqs, seed=seed)


def _arrays(part, L, stride):
    wins = [w for _, s in part for w in make_windows(rotate_to_world(s) if s.frame == "body" else s, L, stride)]
    return windows_to_arrays(wins)


def cmd_synth(args) -> int:
    cfg = load_run_config(args.config)
    spec = cfg.synth
    n = cfg.synth_n if args.n is None else args.n
    if args.spec:
        p = Path(args.spec)
        if not p.is_file():
            raise UsageError(f"spec file not found: {p}")
        raw = json.loads(p.read_text(encoding="utf-8"))
        n = raw.pop("n", n)
        spec = TrajectorySpec.from_dict({**spec.to_dict(), **raw})
    if n < 1:
        raise PreconditionError("n must be >= 1")
    seed = 0 if args.seed is None else args.seed
    out = _out_dir(args)
    write_corpus(out, spec, n, seed)
    names = [f"seq_{i:03d}" for i in range(n)]
    snapshot = {"version": CONFIG_VERSION, "synth": {"n": n, "spec": spec.to_dict()}}
    RunManifest("synth", snapshot, seed, [args.spec] if args.spec else [], ["corpus.json"] + names).write(out)
    print(f"wrote {n} sequences to {out}")
    return EXIT_OK


def run_training(cfg: RunConfig, data_dir, out: Path, resume: bool = False):
    seqs = _load_data(data_dir)
    tr, va, te = _split(seqs, cfg.data.split_seed)
    L = cfg.model.L
    train_set = _arrays(tr, L, cfg.data.train_stride)
    val_set = _arrays(va, L, cfg.data.val_stride)
    (out / "split.json").write_text(
        json.dumps({"seed": cfg.data.split_seed, "train": [n for n, _ in tr], "val": [n for n, _ in va],
                    "test": [n for n, _ in te]}, indent=2) + "\n",
        encoding="utf-8",
    )
    handler = logging.FileHandler(out / "train.log", mode="a" if resume else "w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    tlog = logging.getLogger("ftin.training")
    tlog.addHandler(handler)
    tlog.setLevel(logging.INFO)
    try:
        tlog.info("train %d windows, val %d windows, model %s (%s)", len(train_set[0]), len(val_set[0]),
                  cfg.model.variant_name, cfg.model.hash())
        model, history = train(cfg.model, cfg.train, train_set, val_set, out_dir=out, resume=resume)
    finally:
        tlog.removeHandler(handler)
        handler.close()
    return model, history


def cmd_train(args) -> int:
    cfg = apply_overrides(load_run_config(args.config), args)
    out = _out_dir(args)
    _, history = run_training(cfg, args.data, out, resume=args.resume)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    outputs = ["best.ckpt", "last.ckpt", "history.json", "train.log", "split.json", "config.json"]
    RunManifest("train", cfg.to_dict(), cfg.train.seed, [str(args.data)], outputs,
                checkpoint_sha256=sha256_file(out / "best.ckpt")).write(out)
    print(f"trained {len(history.epoch)} epochs; best epoch {history.best_epoch}; checkpoint {out / 'best.ckpt'}")
    return EXIT_OK


def _eval_sequences(seqs, which: str, split_seed: int):
    if which == "all":
        return seqs
    tr, va, te = _split(seqs, split_seed)
    return {"train": tr, "val": va, "test": te}[which]


def run_eval(ckpt, data_dir, out: Path, stride: int, which: str = "test", split_seed: int = 0):
    ckpt = Path(ckpt)
    if not ckpt.is_file():
        raise UsageError(f"checkpoint not found: {ckpt}")
    model_cfg, params, _, _ = load_checkpoint(ckpt)
    model = build_model(model_cfg)
    model.load_state_dict(params)
    model.eval()
    seqs = _eval_sequences(_load_data(data_dir), which, split_seed)
    report, trajs = evaluate_sequences(model, seqs, model_cfg.L, stride)
    report.write(out / "metrics.json")
    files = ["metrics.json"]
    for name, (pred, gt) in trajs.items():
        write_trajectory_csv(out / f"trajectory_{name}.csv", pred, gt)
        files.append(f"trajectory_{name}.csv")
    return report, model_cfg, files


def cmd_eval(args) -> int:
    cfg = apply_overrides(load_run_config(args.config), args)
    out = _out_dir(args)
    if args.checkpoint is None:
        raise UsageError("--checkpoint is required")
    report, _, files = run_eval(args.checkpoint, args.data, out, cfg.data.eval_stride, args.split, cfg.data.split_seed)
    RunManifest("eval", cfg.to_dict(), cfg.train.seed, [str(args.checkpoint), str(args.data)], files,
                checkpoint_sha256=sha256_file(args.checkpoint)).write(out)
    print(f"ATE {report.ate:.4f} m  RTE {report.rte:.4f} m  PDE {report.pde:.4f}  ({len(report.per_sequence)} sequences)")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = apply_overrides(load_run_config(args.config), args)
    out = _out_dir(args)
    rows = []
    for name, (fdl, tdl) in VARIANTS.items():
        run_cfg = replace(cfg, model=cfg.model.variant(name))
        vdir = out / name
        vdir.mkdir(exist_ok=True)
        _, history = run_training(run_cfg, args.data, vdir)
        report, _, _ = run_eval(vdir / "best.ckpt", args.data, vdir, cfg.data.eval_stride, "test", cfg.data.split_seed)
        rows.append({
            "variant": name, "fdl": fdl, "tdl": tdl,
            "ate": report.ate, "rte": report.rte, "pde": report.pde,
            "epochs": len(history.epoch), "config_hash": run_cfg.model.hash(),
        })
        print(f"{name:>3}  ATE {report.ate:.4f}  RTE {report.rte:.4f}")
    (out / "ablation.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    lines = ["| model | FDL | TDL | ATE (m) | RTE (m) | PDE | config |", "|---|---|---|---|---|---|---|"]
    for r in rows:
        mark = lambda b: "x" if b else ""  # noqa: E731
        lines.append(f"| {r['variant']} | {mark(r['fdl'])} | {mark(r['tdl'])} | {r['ate']:.4f} | {r['rte']:.4f} "
                     f"| {r['pde']:.4f} | {r['config_hash']} |")
    (out / "ablation.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    RunManifest("ablate", cfg.to_dict(), cfg.train.seed, [str(args.data)], ["ablation.json", "ablation.md"]
                + [f"{v}/best.ckpt" for v in VARIANTS]).write(out)
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import plots

    paths = [Path(p) for p in args.inputs]
    for p in paths:
        if not p.is_file():
            raise UsageError(f"input file not found: {p}")
    out = _out_dir(args)
    written, reports = [], {}
    for p in paths:
        if p.suffix == ".csv":
            written.append(plots.plot_overlay(p, out / f"overlay_{p.stem}.png").name)
        elif p.suffix == ".json":
            label = p.parent.name or p.stem
            while label in reports:
                label += "'"
            reports[label] = MetricsReport.read(p)
        else:
            raise UsageError(f"cannot plot {p}: expected a trajectory .csv or metrics .json")
    if reports:
        written.append(plots.plot_cdf(reports, out / "cdf.png").name)
        written.append(plots.plot_pde(reports, out / "pde.png").name)
    RunManifest("plot", {}, args.seed, [str(p) for p in paths], written).write(out)
    print("\n".join(str(out / w) for w in written))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="training / corpus seed")
    p.add_argument("--config", default=d, help="JSON run configuration")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="torch intra-op threads (default 1, needed for byte-identical reruns)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftin", description="Inertial odometry with the FTIN network.")
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    _globals(p, True)
    p.add_argument("--spec", help="JSON trajectory spec (fields of TrajectorySpec, optional 'n')")
    p.add_argument("--n", type=int, help="number of trajectories")
    p.set_defaults(func=cmd_synth)

    def train_flags(q):
        q.add_argument("--data", help="dataset directory")
        q.add_argument("--variant", choices=sorted(VARIANTS), help="ablation variant")
        q.add_argument("--epochs", type=int)
        q.add_argument("--batch-size", type=int)
        q.add_argument("--lr", type=float)
        q.add_argument("--train-stride", type=int)
        q.add_argument("--eval-stride", type=int)

    p = sub.add_parser("train", help="train a model")
    _globals(p, True)
    train_flags(p)
    p.add_argument("--resume", action="store_true", help="continue from --out/last.ckpt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _globals(p, True)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--eval-stride", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate models i-iv")
    _globals(p, True)
    train_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", help="render trajectory / metrics figures")
    _globals(p, True)
    p.add_argument("inputs", nargs="+", help="trajectory_<id>.csv and/or metrics.json files")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    torch.set_num_threads(max(1, args.threads))
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, SchemaError, PreconditionError, ShapeError, SizeError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, FtinError, FloatingPointError) as e:
        print(f"failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
