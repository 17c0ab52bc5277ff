"""Command line pipeline: ingest -> eigen -> fit -> evaluate/serve.

Every command resolves its configuration from built-in defaults, an
optional ``--config`` key=value file, and flags (highest precedence),
then writes a manifest with the resolved config and its hash beside each
output so results stay reproducible.  Exit codes: 0 success, 1 pipeline
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, config_hash, parse_config_file, resolve
from .data import (
    build_matrix,
    group_events,
    items_to_vector,
    filter_activity,
    load_interactions,
    rebuild_split,
    split_users,
)
from .evaluation import evaluate_filter, evaluate_online, spectrum_profile
from .filters import Prediction, fit as fit_model, reconstruct, recommend_topn
from .graphs import covariance_laplacian, hypergraph_laplacian, save_matrix_market
from .kernels import KernelSpec
from .online import NoiseConfig, UserState, estimate_p0, init_state, update as state_update
from .spectral import exact_eigs, load_basis, nystrom_eigs, save_basis
from . import bounds, plotting, synthetic


def _fail(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(primary_output, command: str, cfg: RunConfig) -> None:
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_sha256": config_hash(cfg),
        "versions": {
            "package": __version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
            "numpy": np.__version__,
        },
    }
    _write_json(f"{primary_output}.manifest.json", manifest)


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _load_log(cfg: RunConfig):
    _require_file(cfg.dataset, "dataset file")
    log = load_interactions(cfg.dataset)
    log, stats = filter_activity(log, cfg.min_user_events, cfg.min_item_raters)
    return log, stats


def _load_split(log, split_path):
    _require_file(split_path, "split file")
    with open(split_path, "r", encoding="utf-8") as fh:
        return rebuild_split(log, json.load(fh))


def _laplacian(cfg: RunConfig, matrix):
    if cfg.graph == "covariance":
        return covariance_laplacian(matrix.matrix)
    return hypergraph_laplacian(matrix.matrix)


def _items_sidecar(basis_path) -> str:
    return f"{basis_path}.items.json"


def _load_model(model_path):
    """Rehydrate (model, item_rows) from a fit output."""
    p = _require_file(model_path, "model file")
    with open(p, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    basis_path = Path(spec["basis"])
    if not basis_path.is_absolute():
        basis_path = p.parent / basis_path
    basis = load_basis(_require_file(basis_path, "basis file"))
    with open(_require_file(_items_sidecar(basis_path), "item sidecar"), "r", encoding="utf-8") as fh:
        items = json.load(fh)
    item_rows = {item: i for i, item in enumerate(items)}
    kspec = spec["kernel"]
    kernel = KernelSpec(kspec["family"], kspec["gamma"], kspec["a"], kspec.get("omega"))
    model = fit_model(basis, kernel, spec["phi"])
    return model, item_rows


def _kernel_from_cfg(cfg: RunConfig) -> KernelSpec:
    return KernelSpec(cfg.kernel, cfg.gamma, cfg.a, cfg.omega)


# ---------------------------------------------------------------- commands


def cmd_ingest(cfg: RunConfig, args) -> int:
    log, fstats = _load_log(cfg)
    split = split_users(log, cfg.ratios, cfg.seed)
    out = Path(cfg.out) / "split.json"
    payload = split.to_json_dict()
    payload["filter_stats"] = fstats
    payload["counts"] = {
        "events": len(log),
        "train_users": len(split.train_users),
        "val_users": len(split.val_users),
        "test_users": len(split.test_users),
        "items": len(split.item_index),
    }
    _write_json(out, payload)
    _write_manifest(out, "ingest", cfg)
    print(f"split {len(split.train_users)}/{len(split.val_users)}/{len(split.test_users)} users, "
          f"{len(split.item_index)} items -> {out}")
    return 0


def cmd_eigen(cfg: RunConfig, args) -> int:
    log, _ = _load_log(cfg)
    split = _load_split(log, args.split)
    matrix = build_matrix(log, split)
    lap = _laplacian(cfg, matrix)
    n = lap.n

    k = cfg.k
    if k > n:
        print(f"note: k={k} clamped to n={n}", file=sys.stderr)
        k = n
    if cfg.method == "nystrom":
        l = cfg.l if cfg.l > 0 else min(n, 4 * k)
        if l > n:
            print(f"note: l={l} clamped to n={n}", file=sys.stderr)
            l = n
        if k + cfg.p > l:
            raise ConfigError(f"k + p = {k + cfg.p} exceeds sample size l = {l}")
        basis = nystrom_eigs(lap, k, l, cfg.p, cfg.q, cfg.seed)
    else:
        basis = exact_eigs(lap, k)

    out = Path(cfg.out) / "basis.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_basis(basis, out)
    items = sorted(matrix.item_rows, key=matrix.item_rows.get)
    _write_json(_items_sidecar(out), items)
    if args.dump_laplacian:
        save_matrix_market(lap, args.dump_laplacian)
    _write_manifest(out, "eigen", cfg)
    print(f"{cfg.method} basis k={basis.k} on n={n} ({cfg.graph}), "
          f"lambda in [{basis.eigenvalues[0]:.4g}, {basis.eigenvalues[-1]:.4g}] -> {out}")
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    basis_path = _require_file(args.basis, "basis file")
    basis = load_basis(basis_path)
    kernel = _kernel_from_cfg(cfg)
    model = fit_model(basis, kernel, cfg.phi)
    out = Path(cfg.out) / "model.json"
    # stored relative to the model file so the directory can move as a unit
    basis_ref = os.path.relpath(Path(basis_path).resolve(), out.resolve().parent)
    _write_json(out, {
        "version": 1,
        "basis": basis_ref,
        "kernel": {"family": kernel.family, "gamma": kernel.gamma, "a": kernel.a, "omega": kernel.omega},
        "phi": cfg.phi,
        "n": model.n,
        "k": model.k,
        "laplacian_hash": basis.laplacian_hash,
    })
    _write_manifest(out, "fit", cfg)
    print(f"{kernel.family} filter (phi={cfg.phi:g}) over k={model.k} frequencies -> {out}")
    return 0


def cmd_recommend(cfg: RunConfig, args) -> int:
    model, item_rows = _load_model(args.model)
    tokens = sys.stdin.read().split()
    s, unknown = items_to_vector(item_rows, model.n, tokens)
    if unknown:
        print(f"note: {len(unknown)} item id(s) not in the training graph, ignored", file=sys.stderr)
    pred = reconstruct(model, s)
    rows = recommend_topn(pred, args.topn)
    items = sorted(item_rows, key=item_rows.get)
    for r in rows:
        print(items[r])
    return 0


def _state_to_json(state: UserState, items, user: str) -> dict:
    row_items = sorted(state.observed)
    return {
        "version": 1,
        "user": user,
        "k": int(state.x_hat.size),
        "x_hat": [float(v) for v in state.x_hat],
        "p_diag": [float(v) for v in state.p_diag],
        "items": [items[r] for r in row_items],
    }


def cmd_update(cfg: RunConfig, args) -> int:
    model, item_rows = _load_model(args.model)
    items = sorted(item_rows, key=item_rows.get)
    noise = NoiseConfig(cfg.sigma_eta, cfg.sigma_nu)

    if args.init:
        tokens = sys.stdin.read().split()
        s_rows = {item_rows[t] for t in tokens if t in item_rows}
        skipped = len([t for t in tokens if t not in item_rows])
        if skipped:
            print(f"note: {skipped} item id(s) not in the training graph, ignored", file=sys.stderr)
        state = init_state(model, s_rows, args.p0)
        scores = model.basis.vectors @ state.x_hat
        pred = Prediction(scores, frozenset(s_rows))
    else:
        if not args.state or not args.item:
            raise ConfigError("update needs --state and --item (or --init with items on stdin)")
        with open(_require_file(args.state, "state file"), "r", encoding="utf-8") as fh:
            blob = json.load(fh)
        if blob.get("version") != 1 or blob.get("k") != model.k:
            raise ConfigError("state file version/k does not match the model")
        rows = {item_rows[i] for i in blob["items"] if i in item_rows}
        state = UserState(np.asarray(blob["x_hat"]), np.asarray(blob["p_diag"]), frozenset(rows))
        new_row = item_rows.get(args.item)
        if new_row is None:
            print(f"note: item {args.item!r} not in the training graph; pure rebalance step", file=sys.stderr)
            delta = frozenset()
        elif new_row in state.observed:
            delta = frozenset()
        else:
            delta = frozenset([new_row])
        state, pred = state_update(model, state, delta, noise)

    out = Path(args.state_out or args.state or Path(cfg.out) / "state.json")
    _write_json(out, _state_to_json(state, items, args.user or ""))
    _write_manifest(out, "update", cfg)
    for r in recommend_topn(pred, args.topn):
        print(items[r])
    return 0


def _cohort(log, split, which: str):
    users = {"train": split.train_users, "val": split.val_users, "test": split.test_users}[which]
    groups = group_events(log)
    return {u: groups[u] for u in users if u in groups}


def cmd_evaluate(cfg: RunConfig, args) -> int:
    model, item_rows = _load_model(args.model)
    log, _ = _load_log(cfg)
    split = _load_split(log, args.split)
    cohort = _cohort(log, split, args.which)

    if args.estimator == "online":
        noise = NoiseConfig(cfg.sigma_eta, cfg.sigma_nu)
        p0 = estimate_p0(model, _cohort(log, split, "val"), item_rows)
        report = evaluate_online(model, item_rows, cohort, noise, p0, cfg.cutoffs, cfg.threads)
    else:
        report = evaluate_filter(model, item_rows, cohort, cfg.cutoffs, cfg.threads)

    out = Path(cfg.out) / f"report_{args.estimator}_{args.which}.json"
    payload = {
        "estimator": args.estimator,
        "which": args.which,
        "kernel": model.kernel.family,
        "phi": model.phi,
    }
    payload.update(report.to_dict())
    _write_json(out, payload)
    _write_manifest(out, "evaluate", cfg)
    head = min(report.cutoffs)
    stats = report.stats[head]
    print(f"{args.estimator} on {args.which}: HR@{head}={stats['hr']:.5f} "
          f"NDCG@{head}={stats['ndcg']:.5f} over {report.counts['users']} users -> {out}")
    return 0


def cmd_spectrum(cfg: RunConfig, args) -> int:
    model, item_rows = _load_model(args.model)
    log, _ = _load_log(cfg)
    split = _load_split(log, args.split)
    cohort = _cohort(log, split, args.which)

    def signal_vectors(kind):
        if kind == "online":
            p0 = estimate_p0(model, _cohort(log, split, "val"), item_rows)
            noise = NoiseConfig(cfg.sigma_eta, cfg.sigma_nu)
        for events in cohort.values():
            ordered = sorted(events, key=lambda ev: ev.t)
            rows = {item_rows[ev.item] for ev in ordered if ev.item in item_rows}
            if not rows:
                continue
            s, _ = items_to_vector(item_rows, model.n, [ev.item for ev in ordered])
            if kind == "raw":
                yield s
            elif kind == "filtered":
                yield reconstruct(model, s).scores
            else:
                prior = {item_rows[ev.item] for ev in ordered[:-1] if ev.item in item_rows}
                last = item_rows.get(ordered[-1].item)
                delta = frozenset() if last is None or last in prior else frozenset([last])
                state = init_state(model, prior, p0)
                _, pred = state_update(model, state, delta, noise)
                yield pred.scores

    profile = spectrum_profile(model.basis, signal_vectors(args.signal))
    out = Path(cfg.out) / f"spectrum_{args.signal}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_index", "eigenvalue", "mean_energy"])
        for i, (lam, e) in enumerate(zip(model.basis.eigenvalues, profile.energy)):
            w.writerow([i, f"{lam:.12g}", f"{e:.12g}"])

    series = {args.signal: profile.energy}
    if args.signal != "raw":
        series["raw"] = spectrum_profile(model.basis, signal_vectors("raw")).energy
    fig_path = plotting.save_spectrum_figure(model.basis.eigenvalues, series, out.with_suffix(".png"))
    _write_manifest(out, "spectrum", cfg)
    print(f"profiled {profile.count} {args.which} users ({args.signal}), "
          f"{profile.skipped} skipped -> {out}, {fig_path}")
    return 0


def _synthetic_full_basis(cfg: RunConfig, n_items: int, n_users: int):
    log = synthetic.window_log(n_items=n_items, n_users=n_users, seed=cfg.seed)
    split = split_users(log, cfg.ratios, cfg.seed)
    matrix = build_matrix(log, split)
    lap = hypergraph_laplacian(matrix.matrix)
    basis = exact_eigs(lap, lap.n)
    return lap, basis


def cmd_verify(cfg: RunConfig, args) -> int:
    out = Path(cfg.out) / f"verify_{args.check}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    all_passed = True

    if args.check == "noise-bound":
        lap, basis = _synthetic_full_basis(cfg, args.n, args.users)
        rows = []
        for family in args.families.split(","):
            family = family.strip()
            kernel = KernelSpec(family, cfg.gamma, cfg.a, cfg.omega)
            report = bounds.verify_mse_bound(
                basis, kernel,
                [float(r) for r in args.rhos.split(",")],
                [float(p) for p in args.phis.split(",")],
                trials=args.trials, seed=cfg.seed,
            )
            rows.extend(report.rows)
            print(f"{family}: effective band {report.omega_effective:.4f} "
                  f"(draw {report.omega_draw:.4f}, leak {report.band_residual:.3f}), "
                  f"support {report.support_size}")
            fig = plotting.save_mse_bound_figure(report.rows, out.with_suffix(f".{family}.png"))
            print(f"figure -> {fig}")
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["family", "rho", "phi", "empirical_mse", "bound", "margin", "pass"])
            for r in rows:
                w.writerow([r.family, f"{r.rho:g}", f"{r.phi:g}", f"{r.empirical:.6e}",
                            f"{r.bound:.6e}", f"{r.margin:.6e}", int(r.passed)])
        all_passed = all(r.passed for r in rows)

    else:  # interpolation
        lap, basis = _synthetic_full_basis(cfg, args.n, args.users)
        kernel = _kernel_from_cfg(cfg)
        # hide the vertex whose Laplacian column has the largest norm: it
        # yields the smallest Poincare constant among single-vertex choices
        col_norms = np.linalg.norm(lap.matrix.toarray(), axis=0)
        hidden = [int(np.argmax(col_norms))]
        omega = float(basis.eigenvalues[args.omega_index])
        report = bounds.verify_interpolation_bound(lap, basis, kernel, omega, hidden, seed=cfg.seed)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "error", "bound", "pass"])
            for r in report.rows:
                w.writerow([r.k, f"{r.error:.6e}", f"{r.bound:.6e}", int(r.passed)])
        fig = plotting.save_interpolation_figure(report, out.with_suffix(".png"))
        print(f"contraction {report.contraction:.4f} "
              f"({'applicable' if report.applicable else 'NOT applicable'}), figure -> {fig}")
        all_passed = report.applicable and all(r.passed for r in report.rows)

    _write_manifest(out, "verify", cfg)
    print(f"table -> {out}")
    if not all_passed:
        _fail("one or more checks failed (see table)")
        return 1
    return 0


# ---------------------------------------------------------------- parser


def _add_config_flags(sub, *names):
    flag_map = {
        "dataset": dict(type=str, help="interaction log (user item timestamp per line)"),
        "out": dict(type=str, help="output directory for default artifact names"),
        "graph": dict(type=str, choices=["hypergraph", "covariance"], help="Laplacian construction"),
        "k": dict(type=int, help="number of frequencies"),
        "method": dict(type=str, choices=["exact", "nystrom"], help="eigensolver"),
        "l": dict(type=int, help="column sample size (nystrom)"),
        "p": dict(type=int, help="oversampling columns (nystrom)"),
        "q": dict(type=int, help="power iterations (nystrom)"),
        "kernel": dict(type=str, choices=["tikhonov", "diffusion", "random-walk", "inverse-cosine", "cutoff"]),
        "gamma": dict(type=float, help="tikhonov/diffusion scale"),
        "a": dict(type=float, help="random-walk origin"),
        "omega": dict(type=str, help="cutoff band edge"),
        "phi": dict(type=float, help="regularization magnitude"),
        "sigma_eta": dict(type=float, help="process noise variance"),
        "sigma_nu": dict(type=float, help="measurement noise variance"),
        "cutoffs": dict(type=str, help="comma-separated ranking cutoffs"),
        "min_user_events": dict(type=int, help="drop users with fewer events"),
        "min_item_raters": dict(type=int, help="drop items with fewer distinct raters"),
        "ratios": dict(type=str, help="train,val,test user ratios"),
    }
    for name in names:
        kw = flag_map[name]
        sub.add_argument(f"--{name.replace('_', '-')}", default=None, dest=name, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specrec",
        description="spectral filtering pipeline for one-bit interaction data",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for evaluation")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sp = sub.add_parser("ingest", help="split users and index items")
    _add_config_flags(sp, "dataset", "out", "ratios", "min_user_events", "min_item_raters")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("eigen", help="build the item graph and its spectral basis")
    _add_config_flags(sp, "dataset", "out", "graph", "k", "method", "l", "p", "q",
                      "min_user_events", "min_item_raters")
    sp.add_argument("--split", required=True, help="split.json from ingest")
    sp.add_argument("--dump-laplacian", default=None, help="also write the operator as MatrixMarket")
    sp.set_defaults(func=cmd_eigen)

    sp = sub.add_parser("fit", help="attach a kernel to a basis")
    _add_config_flags(sp, "out", "kernel", "gamma", "a", "omega", "phi")
    sp.add_argument("--basis", required=True, help="basis.npz from eigen")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("recommend", help="rank items for the item list on stdin")
    sp.add_argument("--model", required=True, help="model.json from fit")
    sp.add_argument("--topn", type=int, default=10)
    sp.set_defaults(func=cmd_recommend)

    sp = sub.add_parser("update", help="advance a user state with one new item")
    _add_config_flags(sp, "out", "sigma_eta", "sigma_nu")
    sp.add_argument("--model", required=True)
    sp.add_argument("--state", default=None, help="existing state.json")
    sp.add_argument("--item", default=None, help="new item id")
    sp.add_argument("--init", action="store_true", help="create a state from items on stdin")
    sp.add_argument("--p0", type=float, default=1e-4, help="initial variance when using --init")
    sp.add_argument("--user", default=None, help="user id recorded in the state file")
    sp.add_argument("--topn", type=int, default=10)
    sp.add_argument("--state-out", default=None, help="where to write the new state (default: in place)")
    sp.set_defaults(func=cmd_update)

    sp = sub.add_parser("evaluate", help="inductive top-N metrics on held-out users")
    _add_config_flags(sp, "dataset", "out", "cutoffs", "sigma_eta", "sigma_nu",
                      "min_user_events", "min_item_raters")
    sp.add_argument("--model", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--which", choices=["val", "test"], default="test")
    sp.add_argument("--estimator", choices=["filter", "online"], default="filter")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("spectrum", help="average spectral energy profile of a cohort")
    _add_config_flags(sp, "dataset", "out", "sigma_eta", "sigma_nu",
                      "min_user_events", "min_item_raters")
    sp.add_argument("--model", required=True)
    sp.add_argument("--split", required=True)
    sp.add_argument("--which", choices=["train", "val", "test"], default="test")
    sp.add_argument("--signal", choices=["raw", "filtered", "online"], default="filtered")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("verify", help="check analytic error bounds on synthetic graphs")
    _add_config_flags(sp, "out", "kernel", "gamma", "a", "omega", "phi")
    sp.add_argument("--check", choices=["noise-bound", "interpolation"], required=True)
    sp.add_argument("--n", type=int, default=200, help="synthetic item count")
    sp.add_argument("--users", type=int, default=600, help="synthetic user count")
    sp.add_argument("--families", default="tikhonov,random-walk")
    sp.add_argument("--rhos", default="0,0.05,0.125,0.3")
    sp.add_argument("--phis", default="1,10,100")
    sp.add_argument("--trials", type=int, default=2000)
    sp.add_argument("--omega-index", type=int, default=1, help="band edge eigenvalue index (interpolation)")
    sp.set_defaults(func=cmd_verify)

    return parser


_CONFIG_KEYS = (
    "dataset", "out", "seed", "ratios", "min_user_events", "min_item_raters",
    "graph", "k", "method", "l", "p", "q", "kernel", "gamma", "a", "omega",
    "phi", "sigma_eta", "sigma_nu", "cutoffs", "threads",
)


def _resolve_config(args) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {}
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return resolve(file_values, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
        return 2
    try:
        return args.func(cfg, args)
    except ConfigError as exc:
        _fail(str(exc))
        return 2
    except Exception as exc:  # pipeline failures: bad data, numeric trouble, IO
        _fail(f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
