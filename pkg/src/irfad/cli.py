"""Command-line front end.

Subcommands: gen | train | score | eval | toy | bench. Flags --config,
--seed, --t, --scorer, --out override config-file values (see config.py
for precedence). Every run writes a `manifest` with the fully resolved
configuration next to its artifacts, and all files are written atomically
(write to a temp name, then rename).

Exit codes: 0 success, 2 config error, 3 data/artifact error,
4 numeric or training error. Failures print one machine-parsable line:
`irfad: error: <kind>: <message>`.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np

from . import baselines
from .config import RunConfig, resolve_config
from .data import Dataset, gen_blobs, gen_toy, load_dataset, save_dataset, BlobParams
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    IrfadError,
    NumericError,
    ParameterError,
)
from .irf import DEFAULT_T_INFER_FEATURES, DEFAULT_T_INFER_TOY
from .metrics import EvalReport, auroc, average_precision, f1_max, throughput
from .net import NoisePredictor, load_checkpoint, save_checkpoint
from .pipeline import (
    DDIM,
    IRF_MEAN,
    IRF_NOISY,
    RECON,
    SCORER_KINDS,
    Scorer,
    evaluate_scorer,
    normalized_scores,
    pixel_maps,
)
from .schedule import linear_schedule
from .trainer import TrainConfig, train


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _atomic_write_text(path: str, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _write_manifest(out_dir: str, command: str, cfg: RunConfig) -> None:
    lines = [f"command={command}"]
    lines.extend(f"{key}={value}" for key, value in cfg.items())
    _atomic_write_text(os.path.join(out_dir, "manifest"), "\n".join(lines) + "\n")


def _csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip decimal form
    return str(value)


def _resolve_t(cfg: RunConfig, toy: bool) -> int:
    if cfg.t_infer > 0:
        return cfg.t_infer
    default = DEFAULT_T_INFER_TOY if toy else DEFAULT_T_INFER_FEATURES
    return min(default, cfg.T)


def _load_run_dataset(path: str) -> Dataset:
    if not path:
        raise ConfigError("this command needs data=<dataset dir>")
    if not os.path.isdir(path):
        raise DataError(f"dataset directory not found: {path}")
    return load_dataset(path)


def _load_net(cfg: RunConfig):
    if not cfg.checkpoint:
        raise ConfigError("this command needs checkpoint=<file>")
    schedule = linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    return load_checkpoint(cfg.checkpoint, schedule), schedule


def _train_config(cfg: RunConfig, dataset_id: str) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        beta1=cfg.adam_beta1,
        beta2=cfg.adam_beta2,
        eps=cfg.adam_eps,
        seed=cfg.seed,
        dataset_id=dataset_id,
    )


def _make_scorer(cfg: RunConfig, net, schedule, t_infer: int) -> Scorer:
    return Scorer(
        cfg.scorer,
        net,
        schedule,
        t_infer=t_infer,
        batch_size=cfg.infer_batch,
        noise_seed=cfg.seed,
        recon_t_start=cfg.recon_t_start,
        recon_steps=cfg.recon_steps,
        ddim_steps=cfg.ddim_steps,
    )


def _scores_rows(table) -> list[list]:
    rows = []
    for i in range(table.s.size):
        if table.s_diff is not None:
            rows.append([i, _fmt(table.s[i]), _fmt(table.s_diff[i]), _fmt(table.s_nll[i])])
        else:
            rows.append([i, _fmt(table.s[i]), "", ""])
    return rows


def _write_score_maps(out_dir: str, maps: np.ndarray) -> None:
    """One raw little-endian float64 file per sample plus a sidecar header."""
    maps_dir = os.path.join(out_dir, "maps")
    os.makedirs(maps_dir, exist_ok=True)
    n, H, W = maps.shape
    _atomic_write_text(
        os.path.join(maps_dir, "maps.header"),
        f"dtype=float64-le rows={H} cols={W} count={n}\n",
    )
    for i in range(n):
        _atomic_write_bytes(
            os.path.join(maps_dir, f"map_{i:05d}.bin"),
            np.ascontiguousarray(maps[i], "<f8").tobytes(),
        )


def _print_report(report: EvalReport) -> None:
    width = max(len(name) for name, _ in report.rows())
    for name, value in report.rows():
        print(f"{name.ljust(width)}  {value}")


# -- subcommands -------------------------------------------------------------


def cmd_gen(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.data == "toy":
        train_ds, test_ds = gen_toy(cfg.seed)
    elif cfg.data == "blobs":
        train_ds, test_ds = gen_blobs(
            cfg.n_train,
            cfg.n_test,
            dims=(cfg.channels, cfg.height, cfg.width),
            anomaly=BlobParams(cfg.blob_amplitude, cfg.blob_rows, cfg.blob_cols),
            seed=cfg.seed,
            upsample_to=(cfg.up_height, cfg.up_width),
        )
    else:
        raise ConfigError(f"gen needs data=toy or data=blobs, got {cfg.data!r}")
    save_dataset(train_ds, os.path.join(cfg.out, "train"))
    save_dataset(test_ds, os.path.join(cfg.out, "test"))
    _write_manifest(cfg.out, "gen", cfg)
    print(f"wrote {len(train_ds)} train / {len(test_ds)} test samples to {cfg.out}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    train_ds = _load_run_dataset(cfg.data)
    schedule = linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    d = int(np.prod(train_ds.sample_shape))
    net = NoisePredictor.create(d, cfg.hidden, cfg.embed_dim, schedule, cfg.seed)
    net, log = train(net, train_ds, schedule, _train_config(cfg, cfg.data))
    ckpt_path = os.path.join(cfg.out, "checkpoint.bin")
    save_checkpoint(net, ckpt_path)
    rows = [
        [epoch + 1, _fmt(loss), _fmt(secs)]
        for epoch, (loss, secs) in enumerate(zip(log.epoch_losses, log.epoch_seconds))
    ]
    _atomic_write_bytes(
        os.path.join(cfg.out, "trainlog.csv"),
        _csv_bytes(["epoch", "mean_loss", "seconds"], rows),
    )
    _write_manifest(cfg.out, "train", cfg)
    print(f"final loss {log.final_loss:.6f}; checkpoint at {ckpt_path}")
    return 0


def cmd_score(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    net, schedule = _load_net(cfg)
    dataset = _load_run_dataset(cfg.data)
    t_infer = _resolve_t(cfg, toy=len(dataset.sample_shape) == 1)
    scorer = _make_scorer(cfg, net, schedule, t_infer)
    table = scorer(dataset.samples)
    if cfg.normalize_scores:
        normal = dataset.labels == 0
        calib = scorer(dataset.samples[normal])
        table.s = normalized_scores(table, calib)
    _atomic_write_bytes(
        os.path.join(cfg.out, "scores.csv"),
        _csv_bytes(["id", "s", "s_diff", "s_nll"], _scores_rows(table)),
    )
    if cfg.save_maps and table.deltas is not None:
        maps = pixel_maps(table, (cfg.up_height, cfg.up_width))
        _write_score_maps(cfg.out, maps)
    _write_manifest(cfg.out, "score", cfg)
    print(f"scored {table.s.size} samples with {cfg.scorer} at t={t_infer}")
    return 0


def _read_scores_csv(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise DataError(f"scores csv not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "s" not in reader.fieldnames:
            raise DataError(f"{path}: missing 's' column")
        try:
            return np.array([float(row["s"]) for row in reader])
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad score value ({exc})") from exc


def cmd_eval(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    dataset = _load_run_dataset(cfg.data)
    if cfg.scores_csv:
        scores = _read_scores_csv(cfg.scores_csv)
        if scores.size != len(dataset):
            raise DataError(
                f"{cfg.scores_csv} has {scores.size} rows, dataset has {len(dataset)}"
            )
        report = EvalReport(
            image_auroc=auroc(scores, dataset.labels),
            image_ap=average_precision(scores, dataset.labels),
            image_f1=f1_max(scores, dataset.labels),
        )
    else:
        net, schedule = _load_net(cfg)
        t_infer = _resolve_t(cfg, toy=len(dataset.sample_shape) == 1)
        scorer = _make_scorer(cfg, net, schedule, t_infer)
        report, _ = evaluate_scorer(
            scorer,
            dataset,
            fpr_limit=cfg.fpr_limit,
            upsample_to=(cfg.up_height, cfg.up_width) if dataset.masks is not None else None,
        )
    _atomic_write_bytes(
        os.path.join(cfg.out, "eval.csv"),
        _csv_bytes(["metric", "value"], [[k, v] for k, v in report.rows()]),
    )
    _write_manifest(cfg.out, "eval", cfg)
    _print_report(report)
    return 0


def cmd_toy(cfg: RunConfig) -> int:
    """End-to-end 1-D pipeline: generate, train, score, report."""
    os.makedirs(cfg.out, exist_ok=True)
    train_ds, test_ds = gen_toy(cfg.seed)
    schedule = linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    net = NoisePredictor.create(1, cfg.hidden, cfg.embed_dim, schedule, cfg.seed)
    net, log = train(net, train_ds, schedule, _train_config(cfg, "toy"))
    save_checkpoint(net, os.path.join(cfg.out, "checkpoint.bin"))
    rows = [
        [epoch + 1, _fmt(loss), _fmt(secs)]
        for epoch, (loss, secs) in enumerate(zip(log.epoch_losses, log.epoch_seconds))
    ]
    _atomic_write_bytes(
        os.path.join(cfg.out, "trainlog.csv"),
        _csv_bytes(["epoch", "mean_loss", "seconds"], rows),
    )

    t_infer = _resolve_t(cfg, toy=True)
    mean_scorer = Scorer(
        IRF_MEAN, net, schedule, t_infer=t_infer, batch_size=cfg.infer_batch
    )
    noisy_scorer = Scorer(
        IRF_NOISY,
        net,
        schedule,
        t_infer=t_infer,
        batch_size=cfg.infer_batch,
        noise_seed=cfg.seed,
    )
    report, mean_table = evaluate_scorer(mean_scorer, test_ds)
    noisy_table = noisy_scorer(test_ds.samples)

    _atomic_write_bytes(
        os.path.join(cfg.out, "scores.csv"),
        _csv_bytes(["id", "s", "s_diff", "s_nll"], _scores_rows(mean_table)),
    )
    x0s = test_ds.samples.reshape(-1)
    lines = ["x0\tabs_delta\tlabel\tinput_kind"]
    for table, kind in ((mean_table, "mean_path"), (noisy_table, "noisy_state")):
        amps = np.abs(table.deltas.reshape(-1))
        for i in range(x0s.size):
            lines.append(
                f"{_fmt(x0s[i])}\t{_fmt(amps[i])}\t{int(test_ds.labels[i])}\t{kind}"
            )
    _atomic_write_text(
        os.path.join(cfg.out, "trajectories.tsv"), "\n".join(lines) + "\n"
    )
    _atomic_write_bytes(
        os.path.join(cfg.out, "eval.csv"),
        _csv_bytes(["metric", "value"], [[k, v] for k, v in report.rows()]),
    )
    _write_manifest(cfg.out, "toy", cfg)
    _print_report(report)
    return 0


def cmd_bench(cfg: RunConfig) -> int:
    """Compare scorer accuracy and speed on one dataset."""
    os.makedirs(cfg.out, exist_ok=True)
    net, schedule = _load_net(cfg)
    dataset = _load_run_dataset(cfg.data)
    t_infer = _resolve_t(cfg, toy=len(dataset.sample_shape) == 1)
    rows = []
    for kind in (IRF_MEAN, RECON, DDIM):
        scorer = Scorer(
            kind,
            net,
            schedule,
            t_infer=t_infer,
            batch_size=cfg.infer_batch,
            noise_seed=cfg.seed,
            recon_t_start=cfg.recon_t_start,
            recon_steps=cfg.recon_steps,
            ddim_steps=cfg.ddim_steps,
        )
        table = scorer(dataset.samples)
        rate, nfe = throughput(scorer, dataset.samples, repeats=cfg.bench_repeats)
        rows.append(
            [
                kind,
                _fmt(auroc(table.s, dataset.labels)),
                _fmt(average_precision(table.s, dataset.labels)),
                _fmt(f1_max(table.s, dataset.labels)),
                nfe,
                _fmt(rate),
            ]
        )
        print(f"{kind}: nfe={nfe} rate={rate:.1f}/s")
    _atomic_write_bytes(
        os.path.join(cfg.out, "bench.csv"),
        _csv_bytes(["scorer", "auroc", "ap", "f1_max", "nfe", "samples_per_sec"], rows),
    )
    _write_manifest(cfg.out, "bench", cfg)
    return 0


# -- entry point --------------------------------------------------------------

_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "toy": cmd_toy,
    "bench": cmd_bench,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irfad",
        description="One-step diffusion anomaly detection via inverse residual fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="key=value config file")
        cmd.add_argument("--seed", default=None, help="root RNG seed")
        cmd.add_argument("--t", default=None, help="inference step index")
        cmd.add_argument("--scorer", default=None, choices=SCORER_KINDS)
        cmd.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = resolve_config(
            args.config,
            {"seed": args.seed, "t_infer": args.t, "scorer": args.scorer, "out": args.out},
        )
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"irfad: error: config: {exc}", file=sys.stderr)
        return 2
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"irfad: error: data: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"irfad: error: numeric: {exc}", file=sys.stderr)
        return 4
    except IrfadError as exc:
        print(f"irfad: error: usage: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
