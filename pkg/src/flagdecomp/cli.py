"""Command-line interface.

Subcommands: decompose, reconstruct, simulate, distmat, mds, knn, fewshot.
All outputs are plot-ready CSV/JSON files. Every run writes a
``run_manifest.json`` next to its outputs recording the resolved
configuration, seed, tool version, input digests, and wall-clock duration.

Exit codes: 0 success, 1 input/parse error, 2 domain violation
(hierarchy/flag type), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    EXTRACTION_METHODS,
    METRIC_NAMES,
    classical_mds,
    distance_matrix,
    knn_classify,
    stratified_split,
)
from .decompose import (
    ROBUST_CONFIG,
    SolverConfig,
    flag_bmgs,
    irls_svd_flag,
    load_decomposition,
    projection_reconstruction,
    reconstruct,
    save_decomposition,
    svd_flag,
)
from .errors import DegenerateBlock, FlagTypeError, HierarchyViolation, NumericalFailure
from .fewshot import METHODS as FEWSHOT_METHODS
from .fewshot import classify_episode, load_feature_manifest, sample_episodes
from .flags import FlagType, flag_chordal
from .hierarchy import load_hierarchy_json, save_hierarchy_json
from .linalg import load_matrix_csv, save_matrix_csv
from .metrics import format_metric, lrse_db, snr_db
from .synthgen import (
    NoiseSpec,
    derive_seed,
    gen_cluster_sim,
    gen_noise_instance,
    gen_outlier_instance,
)

SIM_METHODS = ("fd", "rfd", "svd", "irls_svd")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_run_manifest(outdir, command, config, seed, inputs, started) -> None:
    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "input_digests": {str(p): _sha256(p) for p in inputs},
        "duration_seconds": time.time() - started,
        "created_unix": started,
    }
    with open(Path(outdir) / "run_manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_labels(path) -> np.ndarray:
    mat = load_matrix_csv(path)
    if mat.shape[1] != 1:
        raise ValueError(f"{path}: labels must be a single column of integers")
    labels = mat[:, 0]
    if not np.all(labels == np.round(labels)):
        raise ValueError(f"{path}: labels must be integers")
    return labels.astype(int)


def _save_labels(path, labels) -> None:
    with open(path, "w") as fh:
        for value in np.asarray(labels, dtype=int):
            fh.write(f"{value}\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_metric(float(value))


# -- decompose / reconstruct -------------------------------------------------

def cmd_decompose(args) -> int:
    started = time.time()
    data = load_matrix_csv(args.data)
    hierarchy = load_hierarchy_json(args.hierarchy)
    flag_type = FlagType.parse(args.flag_type, ambient=data.shape[0])
    config = ROBUST_CONFIG if args.robust else SolverConfig()
    result = flag_bmgs(
        data, hierarchy, flag_type, config, validate_ranks=args.validate_ranks
    )
    out = _outdir(args)
    save_decomposition(result, out)
    _write_run_manifest(
        out,
        "decompose",
        {
            "data": str(args.data),
            "hierarchy": str(args.hierarchy),
            "flag_type": list(flag_type.signature),
            "robust": bool(args.robust),
            "validate_ranks": bool(args.validate_ranks),
        },
        None,
        [args.data, args.hierarchy],
        started,
    )
    return 0


def cmd_reconstruct(args) -> int:
    started = time.time()
    result = load_decomposition(args.decomposition)
    out = _outdir(args)
    save_matrix_csv(out / "reconstruction.csv", reconstruct(result))
    inputs = [Path(args.decomposition) / name for name in ("Q.csv", "R.csv", "P.csv", "meta.json")]
    _write_run_manifest(
        out, "reconstruct", {"decomposition": str(args.decomposition)}, None, inputs, started
    )
    return 0


# -- simulate ----------------------------------------------------------------

def _load_sim_config(path) -> dict:
    with open(path) as fh:
        config = json.load(fh)
    if config.get("schema") != 1:
        raise ValueError(f"{path}: unsupported config schema {config.get('schema')!r}")
    model = config.get("model")
    if model not in ("noise", "outliers", "cluster"):
        raise ValueError(f"{path}: model must be noise|outliers|cluster, got {model!r}")
    for key in ("flag_type", "ambient"):
        if key not in config:
            raise ValueError(f"{path}: config missing {key!r}")
    return config


def _as_levels(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _sim_flag_type(config) -> FlagType:
    return FlagType(tuple(config["flag_type"]), int(config["ambient"]))


def _method_rows(instance, flag_type, trial, level):
    """Paired evaluation of all recovery methods on one instance."""
    inliers = list(instance.inlier_indices())
    snr = snr_db(instance.clean, instance.observed - instance.clean)
    estimates = {}
    res_fd = flag_bmgs(instance.observed, instance.hierarchy, flag_type)
    estimates["fd"] = (res_fd.flag, reconstruct(res_fd))
    res_rfd = flag_bmgs(instance.observed, instance.hierarchy, flag_type, ROBUST_CONFIG)
    estimates["rfd"] = (res_rfd.flag, reconstruct(res_rfd))
    f_svd = svd_flag(instance.observed, flag_type)
    estimates["svd"] = (f_svd, projection_reconstruction(f_svd, instance.observed))
    f_irls = irls_svd_flag(instance.observed, flag_type)
    estimates["irls_svd"] = (f_irls, projection_reconstruction(f_irls, instance.observed))

    rows = []
    for method in SIM_METHODS:
        est_flag, recon = estimates[method]
        chordal = flag_chordal(instance.truth_flag, est_flag)
        lrse = lrse_db(instance.clean[:, inliers], recon[:, inliers])
        rows.append(
            [_fmt(trial), method, _fmt(level), _fmt(chordal), _fmt(lrse), _fmt(snr)]
        )
    return rows


def _run_jobs(jobs, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda f: f(), jobs))
    return [job() for job in jobs]


def cmd_simulate(args) -> int:
    started = time.time()
    config = _load_sim_config(args.config)
    out = _outdir(args)
    model = config["model"]
    flag_type = _sim_flag_type(config)
    block_sizes = tuple(config.get("block_sizes", (20, 20)))
    seed = int(config.get("seed", 0))
    header = ["trial", "method", "level", "chordal", "lrse", "snr"]

    if model == "cluster":
        noise_cfg = config.get("noise", {})
        instances, labels = gen_cluster_sim(
            centers=int(config.get("centers", 3)),
            per_cluster=int(config.get("per_cluster", 20)),
            noise_sigma=float(noise_cfg.get("scale", 0.95)),
            seed=seed,
            flag_type=flag_type,
            block_sizes=block_sizes,
        )
        sigma = float(noise_cfg.get("scale", 0.95))
        jobs = [
            (lambda inst=inst, i=i: _method_rows(inst, flag_type, i, sigma))
            for i, inst in enumerate(instances)
        ]
        groups = _run_jobs(jobs, args.threads)
        rows = [row for group in groups for row in group]
        matrices_dir = out / "matrices"
        matrices_dir.mkdir(exist_ok=True)
        for i, inst in enumerate(instances):
            save_matrix_csv(matrices_dir / f"matrix_{i:04d}.csv", inst.observed)
        _save_labels(out / "labels.csv", labels)
        save_hierarchy_json(out / "hierarchy.json", instances[0].hierarchy)
        snrs = [
            snr_db(inst.clean, inst.observed - inst.clean) for inst in instances
        ]
        _write_csv(
            out / "summary.csv",
            ["metric", "value"],
            [["mean_snr_db", _fmt(float(np.mean(snrs)))]],
        )
    else:
        trials = int(config.get("trials", 100))
        if model == "noise":
            noise_cfg = config.get("noise", {"dist": "gaussian", "scale": 0.5})
            dist = noise_cfg.get("dist", "gaussian")
            levels = [float(v) for v in _as_levels(noise_cfg.get("scale", 0.5))]

            def make_job(level_ix, level, trial):
                def job():
                    spec = NoiseSpec(dist, level, derive_seed(seed, level_ix, trial))
                    inst = gen_noise_instance(flag_type, block_sizes, spec)
                    return _method_rows(inst, flag_type, trial, level)

                return job

        else:
            default_sweep = list(range(0, 17, 2))
            levels = [int(v) for v in _as_levels(config.get("outliers", default_sweep))]

            def make_job(level_ix, level, trial):
                def job():
                    inst = gen_outlier_instance(
                        flag_type, block_sizes, level, derive_seed(seed, level_ix, trial)
                    )
                    return _method_rows(inst, flag_type, trial, level)

                return job

        jobs = [
            make_job(level_ix, level, trial)
            for level_ix, level in enumerate(levels)
            for trial in range(trials)
        ]
        groups = _run_jobs(jobs, args.threads)
        rows = [row for group in groups for row in group]

    _write_csv(out / "results.csv", header, rows)
    _write_run_manifest(out, "simulate", config, seed, [args.config], started)
    return 0


# -- distance matrix / MDS / kNN ---------------------------------------------

def cmd_distmat(args) -> int:
    started = time.time()
    items_dir = Path(args.items)
    paths = sorted(items_dir.glob("*.csv"))
    if not paths:
        raise ValueError(f"{items_dir}: no CSV matrices found")
    items = [load_matrix_csv(p) for p in paths]
    inputs = list(paths)
    if args.metric == "euclidean_flat":
        dist = distance_matrix(items, args.metric)
        config = {"items": str(items_dir), "metric": args.metric}
    else:
        if not args.hierarchy or not args.flag_type:
            raise ValueError("flag metrics need --hierarchy and --flag-type")
        hierarchy = load_hierarchy_json(args.hierarchy)
        flag_type = FlagType.parse(args.flag_type, ambient=items[0].shape[0])
        dist = distance_matrix(
            items,
            args.metric,
            hierarchy=hierarchy,
            flag_type=flag_type,
            method=args.method,
        )
        inputs.append(Path(args.hierarchy))
        config = {
            "items": str(items_dir),
            "metric": args.metric,
            "method": args.method,
            "flag_type": list(flag_type.signature),
        }
    out = _outdir(args)
    save_matrix_csv(out / "dist.csv", dist.values)
    _write_run_manifest(out, "distmat", config, None, inputs, started)
    return 0


def cmd_mds(args) -> int:
    started = time.time()
    dist = load_matrix_csv(args.dist)
    coords = classical_mds(dist, args.dim)
    out = _outdir(args)
    save_matrix_csv(out / "coords.csv", coords)
    _write_run_manifest(
        out, "mds", {"dist": str(args.dist), "dim": args.dim}, None, [args.dist], started
    )
    return 0


def cmd_knn(args) -> int:
    started = time.time()
    dist = load_matrix_csv(args.dist)
    labels = _load_labels(args.labels)
    if args.k_min < 1 or args.k_max < args.k_min:
        raise ValueError("need 1 <= k-min <= k-max")
    rows = []
    for trial in range(args.trials):
        rng = np.random.default_rng(derive_seed(args.seed, trial))
        mask = stratified_split(labels, args.train_frac, rng)
        for k in range(args.k_min, args.k_max + 1):
            result = knn_classify(dist, labels, k, mask)
            rows.append([_fmt(trial), _fmt(k), _fmt(result.accuracy)])
    out = _outdir(args)
    _write_csv(out / "accuracy.csv", ["trial", "k", "accuracy"], rows)
    _write_run_manifest(
        out,
        "knn",
        {
            "dist": str(args.dist),
            "labels": str(args.labels),
            "k_min": args.k_min,
            "k_max": args.k_max,
            "trials": args.trials,
            "train_frac": args.train_frac,
        },
        args.seed,
        [args.dist, args.labels],
        started,
    )
    return 0


# -- few-shot ----------------------------------------------------------------

def cmd_fewshot(args) -> int:
    started = time.time()
    pools, manifest = load_feature_manifest(args.manifest)
    ways = int(manifest["ways"])
    shots = int(manifest["shots"])
    queries_per_task = int(manifest.get("queries_per_task", 10))
    tasks = int(manifest.get("tasks_per_trial", 100))
    if shots < 2:
        raise FlagTypeError(
            f"flag and subspace prototypes need shots >= 2, got {shots}"
        )
    methods = list(FEWSHOT_METHODS) if args.method == "all" else [args.method]

    trial_episodes = []
    for trial in range(args.trials):
        rng = np.random.default_rng(derive_seed(args.seed, trial))
        trial_episodes.append(
            sample_episodes(pools, ways, shots, queries_per_task, tasks, rng)
        )

    detail_rows = []
    summary_rows = []
    for method in methods:
        per_trial = []
        for trial, episodes in enumerate(trial_episodes):
            accs = [classify_episode(ep, method) for ep in episodes]
            acc = float(np.mean(accs))
            per_trial.append(acc)
            detail_rows.append([method, _fmt(trial), _fmt(acc)])
        values = np.asarray(per_trial)
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        summary_rows.append([method, _fmt(float(values.mean())), _fmt(std)])

    out = _outdir(args)
    _write_csv(out / "accuracy.csv", ["method", "mean", "std"], summary_rows)
    _write_csv(out / "trials.csv", ["method", "trial", "accuracy"], detail_rows)
    class_files = [
        Path(args.manifest).parent / entry[key]
        for entry in manifest["classes"]
        for key in ("level1", "final")
    ]
    _write_run_manifest(
        out,
        "fewshot",
        {
            "manifest": str(args.manifest),
            "method": args.method,
            "trials": args.trials,
            "ways": ways,
            "shots": shots,
            "queries_per_task": queries_per_task,
            "tasks_per_trial": tasks,
        },
        args.seed,
        [args.manifest, *class_files],
        started,
    )
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flagdecomp",
        description="Hierarchy-preserving flag decomposition and analysis tools",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="factor a data matrix into Q R P^T")
    p.add_argument("--data", required=True, help="matrix CSV (rows x columns)")
    p.add_argument("--hierarchy", required=True, help="hierarchy JSON")
    p.add_argument(
        "--flag-type",
        required=True,
        help="comma-separated signature, e.g. 2,4 (ambient from data rows)",
    )
    p.add_argument("--robust", action="store_true", help="use the IRLS-SVD block solver")
    p.add_argument(
        "--validate-ranks",
        action="store_true",
        help="enforce strictly increasing submatrix ranks before decomposing",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="rebuild Q R P^T from a saved decomposition")
    p.add_argument("--decomposition", required=True, help="directory with Q/R/P/meta")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("simulate", help="run a seeded synthetic recovery experiment")
    p.add_argument("--config", required=True, help="simulation config JSON")
    p.add_argument("--threads", type=int, default=1, help="parallel trials")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distmat", help="pairwise distances over a matrix collection")
    p.add_argument("--items", required=True, help="directory of matrix CSVs")
    p.add_argument("--metric", default="flag_chordal", choices=METRIC_NAMES)
    p.add_argument("--method", default="fd", choices=EXTRACTION_METHODS)
    p.add_argument("--hierarchy", help="hierarchy JSON (flag metrics)")
    p.add_argument("--flag-type", help="signature, e.g. 2,4 (flag metrics)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("mds", help="classical MDS embedding of a distance matrix")
    p.add_argument("--dist", required=True, help="distance matrix CSV")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("knn", help="k-nearest-neighbor accuracy over seeded splits")
    p.add_argument("--dist", required=True, help="distance matrix CSV")
    p.add_argument("--labels", required=True, help="single-column label CSV")
    p.add_argument("--k-min", type=int, default=6)
    p.add_argument("--k-max", type=int, default=24)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_knn)

    p = sub.add_parser("fewshot", help="episodic few-shot evaluation from feature files")
    p.add_argument("--manifest", required=True, help="feature manifest JSON")
    p.add_argument("--method", default="all", choices=("all",) + FEWSHOT_METHODS)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fewshot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HierarchyViolation, DegenerateBlock, FlagTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
