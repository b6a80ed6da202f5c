"""Command-line interface: ``lazykrr <command> ...``.

Commands: gen, fit, predict, error-map, select, ot-loss, train, bench.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import os
import sys

import numpy as np

from . import _accel, bench, datasets
from .archive import load_archive, save_model
from .continuous import BlendedModel, HierModel, fit_hierarchical
from .dense import DEFAULT_LAMBDA, DenseModel, fit_dense
from .errors import ArchiveError, InputError, NumericalError, ParseError, TrainingError
from .kernels import KernelSpec
from .learn import HybridConfig, HybridModel, ReadoutConfig, TrainState, init_hybrid, one_hot, train_hybrid, train_readout
from .selection import gromov_monge, greedy_select, monge_assign
from .sparse import SparseModel
from .tables import load_table, save_table

RUNTIME_ERRORS = (ArchiveError, InputError, NumericalError, ParseError, TrainingError, OSError, ValueError)


def _workers():
    return max(1, int(os.environ.get("LAZYKRR_NUM_THREADS", "1")))


def _table_opts(p):
    p.add_argument("--delimiter", default=",", help="field delimiter (default ',')")
    p.add_argument("--no-header", action="store_true", help="input has no header row")


def _model_opts(p):
    p.add_argument("--sparse", action="store_true", help="use the lazy M-NN sparse model")
    p.add_argument("--bandwidth", "-M", type=int, default=100, help="neighborhood size M (default 100)")
    p.add_argument("--continuous", choices=("blended", "hierarchical"), help="continuous sparse variant")
    p.add_argument("--blend", type=int, default=4, help="anchors J for --continuous blended (default 4)")
    p.add_argument("--blend-scale", default="auto",
                   help="length scale of the blend weights: 'auto' (mean point spacing) or a positive number")
    p.add_argument("--coarse", type=int, default=1000, help="coarse size N0 for --continuous hierarchical")


def _read(args, path, label_col=None):
    return load_table(path, delimiter=args.delimiter, header=not args.no_header, label_column=label_col)


def build_parser():
    ap = argparse.ArgumentParser(prog="lazykrr", description="Lazy localized kernel ridge regression.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("--kind", choices=datasets.KINDS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit a kernel model and write an archive")
    p.add_argument("--input", required=True)
    p.add_argument("--label-col", required=True, help="target column name(s), comma separated")
    p.add_argument("--kernel", default="exp", choices=("exp", "exponential", "gaussian"))
    p.add_argument("--metric", default="l2", choices=("l2", "l1", "euclidean", "manhattan"))
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--no-normalize", action="store_true", help="skip feature standardization")
    p.add_argument("--one-hot", action="store_true", help="treat the label column as classes")
    p.add_argument("--out", required=True)
    _model_opts(p)
    _table_opts(p)

    p = sub.add_parser("predict", help="predict with an archived model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--with-error", action="store_true", help="append the error indicator column")
    _model_opts(p)
    _table_opts(p)

    p = sub.add_parser("error-map", help="error indicator of a model at query points")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _model_opts(p)
    _table_opts(p)

    p = sub.add_parser("select", help="greedy farthest-point subset")
    p.add_argument("--input", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--metric", default="l2", choices=("l2", "l1", "euclidean", "manhattan"))
    p.add_argument("--exclude-col", help="columns to ignore (e.g. labels), comma separated")
    p.add_argument("--prefix-rule", action="store_true", help="restrict step n to indices >= n")
    p.add_argument("--out", required=True)
    _table_opts(p)

    p = sub.add_parser("ot-loss", help="Monge assignment cost and Gromov-Monge value")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--kind", choices=("monge", "gm", "both"), default="both")
    p.add_argument("--cost", choices=("sqeuclidean", "euclidean"), default="sqeuclidean")
    p.add_argument("--out", help="write the optimal permutation as a table")
    _table_opts(p)

    p = sub.add_parser("train", help="train a kernel readout or the hybrid network")
    p.add_argument("--mode", choices=("readout", "hybrid"), default="readout")
    p.add_argument("--input", required=True)
    p.add_argument("--label-col", required=True)
    p.add_argument("--loss", choices=("cross_entropy", "mse", "smooth_l1"))
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--learn-targets", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--learn-centers", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--n-centers", type=int)
    p.add_argument("--gm-weight", type=float, default=0.0)
    p.add_argument("--hidden", type=int, default=64, help="hybrid latent size L")
    p.add_argument("--kernel-centers", type=int, default=64, help="hybrid kernel centers B")
    p.add_argument("--freeze-kernel", action="store_true", help="hybrid: train the plain MLP only")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model archive")
    p.add_argument("--curve", help="loss curve table (epoch, loss)")
    _table_opts(p)

    p = sub.add_parser("bench", help="benchmark tables")
    p.add_argument("--suite", choices=("readout-comparison", "lazy-scaling", "backends"), required=True)
    p.add_argument("--sizes", default="100,1000,10000")
    p.add_argument("--bandwidth", "-M", type=int, default=100)
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the table here instead of stdout")
    return ap


def _feature_matrix(table, names):
    if names is None:
        return table.features
    missing = [n for n in names if n not in table.columns]
    if missing:
        raise ParseError(f"input lacks feature column(s) {missing}")
    return np.column_stack([table.column(n) for n in names])


def _blend_scale(args):
    if args.blend_scale == "auto":
        return "auto"
    try:
        return float(args.blend_scale)
    except ValueError:
        raise InputError(f"--blend-scale must be 'auto' or a number, got {args.blend_scale!r}") from None


def _derive(model, args):
    """Apply --sparse / --continuous overrides to a loaded model."""
    if not (args.sparse or args.continuous):
        return model
    if isinstance(model, HybridModel):
        raise InputError("sparse variants do not apply to hybrid models")
    if isinstance(model, (DenseModel, SparseModel)):
        spec, X, Y, lam = model.spec, model.X, model.Y, model.lam
    elif isinstance(model, BlendedModel):
        spec, X, Y, lam = model.sparse.spec, model.sparse.X, model.sparse.Y, model.sparse.lam
    else:
        spec, X, Y, lam = model.residual.spec, model.residual.X, model.Y, model.residual.lam
    M = min(args.bandwidth, len(X))
    if args.continuous == "hierarchical":
        return fit_hierarchical(spec, X, Y, M, min(args.coarse, len(X)), lam)
    sp = SparseModel(spec, X, Y, M, lam)
    if args.continuous == "blended":
        return BlendedModel(sp, J=min(args.blend, len(X)), weight_scale=_blend_scale(args))
    return sp


def _error(model, Z):
    if isinstance(model, DenseModel):
        return model.power_function(Z)
    if isinstance(model, SparseModel):
        return model.local_error(Z)
    if isinstance(model, HierModel):
        return model.residual.local_error(Z)
    if isinstance(model, BlendedModel):
        return model.sparse.local_error(Z)
    raise InputError("no error indicator for this model kind")


def _predict_rows(model, Z):
    if isinstance(model, SparseModel):
        return model.predict_batch(Z, workers=_workers())[0]
    return model.predict(Z)


def _fit_model(args, spec, X, Y):
    if args.continuous == "hierarchical":
        return fit_hierarchical(spec, X, Y, args.bandwidth, min(args.coarse, len(X)), args.lam)
    if args.sparse or args.continuous:
        sp = SparseModel(spec, X, Y, args.bandwidth, args.lam)
        if args.continuous == "blended":
            return BlendedModel(sp, J=min(args.blend, len(X)), weight_scale=_blend_scale(args))
        return sp
    return fit_dense(spec, X, Y, args.lam)


def cmd_gen(args):
    cols, data = datasets.generate(args.kind, args.n, seed=args.seed, dim=args.dim)
    save_table(args.out, cols, data)


def cmd_fit(args):
    t = _read(args, args.input, args.label_col)
    X = t.features
    if args.one_hot:
        Y = one_hot(t.int_labels())
        target_names = [f"class_{c}" for c in range(Y.shape[1])]
    else:
        Y = t.labels
        target_names = t.label_columns
    spec = KernelSpec(args.metric, args.kernel)
    if not args.no_normalize and len(X) >= 2:
        spec = spec.fitted(X)
    model = _fit_model(args, spec, X, Y)
    save_model(model, args.out, feature_names=t.feature_columns, meta={"targets": "\n".join(target_names), "one_hot": int(args.one_hot)})
    print(f"wrote {type(model).__name__} ({len(X)} points, {X.shape[1]} features) to {args.out}")


def _target_names(arch, n):
    names = arch.meta.get("targets")
    names = names.split("\n") if isinstance(names, str) and names else []
    return names if len(names) == n else [f"pred_{i}" for i in range(n)]


def cmd_predict(args):
    arch = load_archive(args.model)
    model = _derive(arch.model, args)
    t = _read(args, args.input)
    Z = _feature_matrix(t, arch.feature_names)
    pred = _predict_rows(model, Z)
    cols = _target_names(arch, pred.shape[1])
    out = [pred]
    if int(np.asarray(arch.meta.get("one_hot", 0))):
        cols = cols + ["class"]
        out.append(np.argmax(pred, axis=1)[:, None])
    if args.with_error:
        cols = cols + ["error"]
        out.append(_error(model, Z)[:, None])
    save_table(args.out, cols, np.hstack(out), delimiter=args.delimiter)


def cmd_error_map(args):
    arch = load_archive(args.model)
    model = _derive(arch.model, args)
    t = _read(args, args.input)
    Z = _feature_matrix(t, arch.feature_names)
    names = arch.feature_names or [f"x{i}" for i in range(Z.shape[1])]
    save_table(args.out, names + ["error"], np.column_stack([Z, _error(model, Z)]), delimiter=args.delimiter)


def cmd_select(args):
    t = _read(args, args.input, args.exclude_col)
    sel = greedy_select(
        t.features,
        args.count,
        metric=args.metric,
        start_index=args.start,
        candidates="prefix" if args.prefix_rule else "unselected",
    )
    save_table(args.out, ["index"], sel.indices[:, None], delimiter=args.delimiter)


def cmd_ot_loss(args):
    X = _read(args, args.x).data
    Y = _read(args, args.y).data
    if args.kind in ("monge", "both"):
        a = monge_assign(X, Y, cost=args.cost)
        print(f"monge_cost\t{a.cost:.17g}")
        if args.out:
            save_table(args.out, ["source", "target"], np.column_stack([np.arange(len(a.perm)), a.perm]))
    if args.kind in ("gm", "both"):
        print(f"gromov_monge\t{gromov_monge(X, Y)[0]:.17g}")


def cmd_train(args):
    t = _read(args, args.input, args.label_col)
    X = t.features
    if args.mode == "readout":
        spec = KernelSpec()
        if not args.no_normalize and len(X) >= 2:
            spec = spec.fitted(X)
        cfg = ReadoutConfig(
            epochs=args.epochs,
            batch=args.batch,
            lr=args.lr,
            weight_decay=args.weight_decay,
            learn_targets=args.learn_targets,
            learn_centers=args.learn_centers,
            n_centers=args.n_centers,
            loss=args.loss or "cross_entropy",
            gm_weight=args.gm_weight,
            lam=args.lam,
            seed=args.seed,
        )
        res = train_readout(spec, X, t.int_labels(), cfg)
        C = res.model.Y.shape[1]
        save_model(res.model, args.out, feature_names=t.feature_columns,
                   meta={"targets": "\n".join(f"class_{c}" for c in range(C)), "one_hot": 1})
        curve = res.curve
    else:
        Y = t.labels
        params = init_hybrid(X.shape[1], args.hidden, Y.shape[1], min(args.kernel_centers, len(X)), states=X, seed=args.seed)
        state = TrainState(params=params)
        cfg = HybridConfig(epochs=args.epochs, batch=args.batch, lr=args.lr, weight_decay=args.weight_decay,
                           loss=args.loss or "smooth_l1", lam=args.lam, seed=args.seed, freeze_kernel=args.freeze_kernel)
        state, curve = train_hybrid(state, X, Y, cfg)
        save_model(HybridModel(params=state.params, lam=args.lam), args.out, feature_names=t.feature_columns,
                   meta={"targets": "\n".join(t.label_columns), "one_hot": 0})
    if args.curve:
        save_table(args.curve, ["epoch", "loss"], curve)
    print(f"final loss {curve[-1, 1]:.6g} after {int(curve[-1, 0])} epochs; model written to {args.out}")


def _emit(rows, columns, out):
    data = [[r[c] for c in columns] for r in rows]
    if out:
        with open(out, "w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in data:
                fh.write(",".join(str(v) for v in row) + "\n")
    else:
        print("\t".join(columns))
        for row in data:
            print("\t".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if args.suite == "readout-comparison":
        rows = bench.readout_comparison(sizes, seed=args.seed, M=args.bandwidth)
        _emit(rows, ["size", "method", "accuracy", "seconds"], args.out)
    elif args.suite == "lazy-scaling":
        rows = bench.lazy_scaling(sizes, M=args.bandwidth, queries=args.queries, seed=args.seed)
        _emit(rows, ["size", "build_seconds", "per_query_seconds"], args.out)
    else:
        rows = bench.backend_comparison(seed=args.seed)
        _emit(rows, ["kernel", "backend", "seconds", "max_abs_diff"], args.out)


COMMANDS = {
    "gen": cmd_gen,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "error-map": cmd_error_map,
    "select": cmd_select,
    "ot-loss": cmd_ot_loss,
    "train": cmd_train,
    "bench": cmd_bench,
}


def run_cli(argv=None):
    """Run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except RUNTIME_ERRORS as exc:
        print(f"lazykrr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
