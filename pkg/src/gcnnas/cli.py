"""Command-line pipeline: gen-data, search, derive-arch, train, eval, fuse."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import data as data_mod
from . import pipeline
from .config import RunConfig
from .errors import ConfigError, GcnnasError
from .graph import build_skeleton_adjacency
from .modules import NUM_MODULES
from .supernet import (
    SupernetConfig,
    architecture_from_json,
    architecture_table,
    architecture_to_json,
    derive_architecture,
    desk_config,
    finalize_network,
    full_config,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--out", help="override run.out")
    parser.add_argument("--data", help="override data.path")
    parser.add_argument("--threads", type=int, help="override run.threads")


def _resolve(args) -> RunConfig:
    cfg = RunConfig.load(args.config, args.set)
    if args.seed is not None:
        cfg.set_override(f"run.seed={args.seed}")
    if args.out is not None:
        cfg.set_override(f"run.out={args.out}")
    if getattr(args, "data", None) is not None:
        cfg.set_override(f"data.path={args.data}")
    if args.threads is not None:
        cfg.set_override(f"run.threads={args.threads}")
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.get("run", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_path(cfg: RunConfig, out: Path) -> str:
    path = cfg.get("data", "path")
    return path if path else str(out / "dataset.skel")


def _net_config(cfg: RunConfig, split: data_mod.DatasetSplit) -> SupernetConfig:
    c, t, v, _ = split.dims()
    preset = cfg.get("net", "preset")
    if preset == "desk":
        base = desk_config
    elif preset == "full":
        base = full_config
    else:
        raise ConfigError(f"unknown net preset {preset!r}")
    return base(in_channels=c, frames=t, num_joints=v, classes=split.classes)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[col]) for col in header))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- commands --


def cmd_gen_data(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(cfg)
    gen_cfg = data_mod.GeneratorConfig(
        classes=cfg.get_int("data", "classes"),
        samples_per_class=cfg.get_int("data", "samples_per_class"),
        joints=cfg.get_int("data", "joints"),
        frames=cfg.get_int("data", "frames"),
        channels=cfg.get_int("data", "channels"),
        noise=cfg.get_float("data", "noise"),
    )
    seed = cfg.get_int("run", "seed")
    split = data_mod.generate_synthetic(gen_cfg, seed)
    frames = gen_cfg.frames
    for bucket in (split.train, split.validation, split.test):
        bucket[:] = [data_mod.preprocess(s, frames, max_bodies=2) for s in bucket]
    path = _data_path(cfg, out)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    data_mod.save_dataset(path, split)
    cfg.set_override(f"data.path={path}")
    cfg.write_resolved(out / "config.resolved")
    c, t, v, m = split.dims()
    print(f"dataset path={path} classes={split.classes} "
          f"train={len(split.train)} validation={len(split.validation)} "
          f"test={len(split.test)} shape=C{c}xT{t}xV{v}xM{m}")
    return 0


def _load_split(cfg: RunConfig, out: Path) -> data_mod.DatasetSplit:
    return data_mod.load_dataset(_data_path(cfg, out))


def cmd_search(args) -> int:
    cfg = _resolve(args)
    if args.mode is not None:
        cfg.set_override(f"search.mode={args.mode}")
    out = _out_dir(cfg)
    split = _load_split(cfg, out)
    net_cfg = _net_config(cfg, split)
    adjacency = build_skeleton_adjacency(split.edges, net_cfg.num_joints)
    seed = cfg.get_int("run", "seed")
    from .supernet import Network

    net = Network(net_cfg, adjacency, seed=seed)
    settings = pipeline.ArchSearchSettings(
        epochs=cfg.get_int("search", "epochs"),
        warmup=cfg.get_int("search", "warmup"),
        population=cfg.get_int("search", "population"),
        epsilon=cfg.get_float("search", "epsilon"),
        mode=cfg.get("search", "mode"),
        fitness=cfg.get("search", "fitness"),
        lr=cfg.get_float("search", "lr"),
        weight_decay=cfg.get_float("search", "weight_decay"),
        batch_size=cfg.get_int("search", "batch_size"),
        seed=seed,
        threads=cfg.get_int("run", "threads"),
    )
    log_path = out / "search.log"
    with open(log_path, "w", encoding="utf-8") as log_fh:
        result = pipeline.run_architecture_search(
            net, split, settings,
            log_fn=lambda rec: log_fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n"),
        )
    alpha = result.best_alpha.reshape(net_cfg.blocks, NUM_MODULES)
    complementary = cfg.get_bool("net", "complementary")
    meta = {"net": net_cfg.to_dict(), "complementary": complementary}
    ckpt.write_container(out / "alpha.bin", {
        "alpha": alpha,
        "mu": result.mu,
        "sigma2": result.sigma2,
        "meta.net_json": ckpt.encode_text(json.dumps(meta, sort_keys=True)),
    })
    selection = derive_architecture(alpha)
    (out / "arch.txt").write_text(architecture_table(selection), encoding="utf-8")
    (out / "arch.json").write_text(
        architecture_to_json(selection, net_cfg, complementary=complementary),
        encoding="utf-8",
    )
    cfg.write_resolved(out / "config.resolved")
    print(f"search best_fitness={_fmt(result.best_fitness)} "
          f"selected={'/'.join(str(len(layer)) for layer in selection)} out={out}")
    return 0


def cmd_derive_arch(args) -> int:
    entries = ckpt.read_container(args.alpha)
    if "alpha" not in entries or "meta.net_json" not in entries:
        raise ConfigError(f"{args.alpha}: missing alpha or network metadata")
    meta = json.loads(ckpt.decode_text(entries["meta.net_json"]))
    net_cfg = SupernetConfig.from_dict(meta["net"])
    selection = derive_architecture(entries["alpha"], threshold=args.threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "arch.txt").write_text(architecture_table(selection), encoding="utf-8")
    (out / "arch.json").write_text(
        architecture_to_json(selection, net_cfg,
                             complementary=bool(meta.get("complementary", True)),
                             threshold=args.threshold),
        encoding="utf-8",
    )
    print(f"derived arch -> {out / 'arch.txt'}")
    return 0


def _save_checkpoint(path: Path, net, optimizer, arch_json: str, stream: str) -> None:
    entries = net.state_entries()
    entries.update(optimizer.state_entries())
    entries["meta.arch_json"] = ckpt.encode_text(arch_json)
    entries["meta.stream"] = ckpt.encode_text(stream)
    ckpt.write_container(path, entries)


def _load_checkpoint(path, split: data_mod.DatasetSplit):
    entries = ckpt.read_container(path)
    arch_json = ckpt.decode_text(entries["meta.arch_json"])
    stream = ckpt.decode_text(entries["meta.stream"])
    selection, net_cfg, complementary = architecture_from_json(arch_json)
    adjacency = build_skeleton_adjacency(split.edges, net_cfg.num_joints)
    net = finalize_network(selection, net_cfg, adjacency, complementary=complementary)
    net.load_state_entries(entries)
    return net, stream


def cmd_train(args) -> int:
    cfg = _resolve(args)
    if args.stream is not None:
        cfg.set_override(f"train.stream={args.stream}")
    out = _out_dir(cfg)
    split = _load_split(cfg, out)
    arch_text = Path(args.arch).read_text(encoding="utf-8")
    selection, net_cfg, complementary = architecture_from_json(arch_text)
    stream = cfg.get("train", "stream")
    streamed = data_mod.DatasetSplit(
        train=data_mod.apply_stream(split.train, stream, split.edges, split.root),
        validation=data_mod.apply_stream(split.validation, stream, split.edges, split.root),
        test=data_mod.apply_stream(split.test, stream, split.edges, split.root),
        classes=split.classes, edges=split.edges, root=split.root,
    )
    adjacency = build_skeleton_adjacency(split.edges, net_cfg.num_joints)
    seed = cfg.get_int("run", "seed")
    net = finalize_network(selection, net_cfg, adjacency, seed=seed,
                           complementary=complementary)
    settings = pipeline.TrainSettings(
        epochs=cfg.get_int("train", "epochs"),
        lr=cfg.get_float("train", "lr"),
        momentum=cfg.get_float("train", "momentum"),
        weight_decay=cfg.get_float("train", "weight_decay"),
        batch_size=cfg.get_int("train", "batch_size"),
        seed=seed,
    )
    optimizer, rows = pipeline.train_network(net, streamed, settings)
    _write_csv(out / "metrics.csv", ["epoch", "train_loss", "val_top1", "val_top5"], rows)
    _save_checkpoint(out / "checkpoint.bin", net, optimizer, arch_text, stream)
    cfg.write_resolved(out / "config.resolved")
    last = rows[-1]
    print(f"train stream={stream} epochs={len(rows)} "
          f"final_val_top1={_fmt(last['val_top1'])} out={out}")
    return 0


def cmd_eval(args) -> int:
    split = data_mod.load_dataset(args.data)
    net, stream = _load_checkpoint(args.checkpoint, split)
    samples = data_mod.apply_stream(split.split_named(args.split), stream,
                                    split.edges, split.root)
    k_eff = pipeline.topk_for(net.config.classes)
    accs = data_mod.evaluate(net, samples, k_list=(1, k_eff))
    row = {"split": args.split, "stream": stream,
           "top1": accs[1], "top5": accs[k_eff]}
    print(f"eval split={args.split} stream={stream} "
          f"top1={_fmt(accs[1])} top5={_fmt(accs[k_eff])}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "metrics.csv", ["split", "stream", "top1", "top5"], [row])
    return 0


def cmd_fuse(args) -> int:
    split = data_mod.load_dataset(args.data)
    labels = np.asarray([s.label for s in split.split_named(args.split)], dtype=np.int64)
    rows = []
    logit_stack = []
    k_eff = None
    for path in args.checkpoints:
        net, stream = _load_checkpoint(path, split)
        samples = data_mod.apply_stream(split.split_named(args.split), stream,
                                        split.edges, split.root)
        logits = data_mod.predict_logits(net, samples)
        k_eff = pipeline.topk_for(net.config.classes)
        accs = data_mod.topk_accuracies(logits, labels, k_list=(1, k_eff))
        rows.append({"source": stream, "top1": accs[1], "top5": accs[k_eff]})
        logit_stack.append(logits)
    fused = data_mod.fuse_scores(logit_stack[0], logit_stack[1])
    accs = data_mod.topk_accuracies(fused, labels, k_list=(1, k_eff))
    rows.append({"source": "fused", "top1": accs[1], "top5": accs[k_eff]})
    for row in rows:
        print(f"fuse source={row['source']} top1={_fmt(row['top1'])} "
              f"top5={_fmt(row['top5'])}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "metrics.csv", ["source", "top1", "top5"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcnnas",
        description="Architecture search pipeline for skeleton-action GCNs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic dataset")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("search", help="run the architecture search")
    _add_common(p)
    p.add_argument("--mode", choices=("continuous", "sampled"),
                   help="override search.mode")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("derive-arch", help="threshold an architecture export")
    p.add_argument("--alpha", required=True, help="alpha.bin from a search run")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.1)
    p.set_defaults(func=cmd_derive_arch)

    p = sub.add_parser("train", help="train a derived architecture")
    _add_common(p)
    p.add_argument("--arch", required=True, help="arch.json from search/derive-arch")
    p.add_argument("--stream", choices=("joint", "bone"), help="override train.stream")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse", help="score-level fusion of two checkpoints")
    p.add_argument("--checkpoints", nargs=2, required=True, metavar="CKPT")
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fuse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GcnnasError as exc:
        print(f"error category={exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error category=io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
