"""Command line interface.

Subcommands: ``fit`` (estimate a model from a grid), ``simulate`` (sample
a lattice from a model), ``bootstrap`` (replicate intervals for the
fitted laws), ``oracle`` (cross-check the pruning argmin by exhaustive
enumeration), ``inspect`` (summarize saved artifacts) and ``replay``
(re-run a recorded manifest).

Exit codes: 0 on success, 2 for usage or precondition failures, 3 for
internal errors.  Failures print one JSON line ``{"error": CODE,
"message": ...}`` on stderr.  Every run that writes outputs also writes
``<out>.manifest.json`` recording the command, resolved options
(including the seed), input digests and version; ``pcn replay`` checks
the digests and reproduces the outputs byte-for-byte.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import time

from . import __version__
from .bootstrap import BootConfig, bootstrap_ci
from .counting import build_count_tree, count_tree_from_json, count_tree_to_json
from .errors import ParseError, PcnError
from .geometry import Mode
from .grid import Alphabet, BoundaryPolicy, Grid, load_grid, save_grid
from .manifest import RunManifest, sha256_file
from .model import FORMAT_MODEL, Pcn
from .sampler import (
    InitMode,
    ScanOrder,
    SimConfig,
    UpdateRule,
    simulate,
    stabilized,
)
from .selection import compute_scores, exhaustive_pic_oracle, pic, prune

_PATH_KEYS = ("grid", "model", "init_grid", "start_grid", "artifact", "outer_grid", "out", "manifest")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pcn", description="Context-neighborhood models on 2D lattices")
    p.add_argument("--version", action="version", version=f"pcn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_grid_opts(sp):
        sp.add_argument("--grid", required=True, help="whitespace-separated label grid")
        sp.add_argument("--alphabet", required=True, help="comma-separated symbol labels")
        sp.add_argument("--mask-token", default="NA")
        sp.add_argument("--mode", default="count", choices=["count", "position"])
        sp.add_argument("--boundary", default="interior", choices=["interior", "mirror", "buffer"])
        sp.add_argument("--outer-grid", default=None, help="outer grid file for --boundary buffer")
        sp.add_argument("--core-origin", default=None, help="'r,c' of the core inside the outer grid")
        sp.add_argument("--substitute", default=None, help="label read in place of masked neighbors")
        sp.add_argument("--penalty", default="centers", choices=["centers", "sites"])

    f = sub.add_parser("fit", help="estimate a model from a grid")
    add_grid_opts(f)
    f.add_argument("--depth", type=int, default=None, help="max context depth (default from sample size)")
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--out", required=True, help="output path prefix")
    f.add_argument("--dot", action="store_true", help="also write a graphviz rendering")
    f.add_argument("--save-counts", action="store_true", help="also write the count tree")

    s = sub.add_parser("simulate", help="sample a lattice from a model")
    s.add_argument("--model", required=True, help="model JSON file")
    s.add_argument("--size", type=int, default=None, help="shorthand for square --rows/--cols")
    s.add_argument("--rows", type=int, default=None)
    s.add_argument("--cols", type=int, default=None)
    s.add_argument("--sweeps", type=int, required=True)
    s.add_argument("--seed", type=int, default=None, help="generated and recorded when omitted")
    s.add_argument("--update", default="heat-bath", choices=["heat-bath", "metropolis"])
    s.add_argument("--scan", default="raster", choices=["raster", "random"])
    s.add_argument("--init-grid", default=None, help="start from this grid instead of iid uniform")
    s.add_argument("--mask-token", default="NA")
    s.add_argument("--no-freeze-mask", dest="freeze_mask", action="store_false")
    s.add_argument("--substitute", default=None)
    s.add_argument("--trace-every", type=int, default=1)
    s.add_argument("--stab-threshold", type=float, default=1e-3)
    s.add_argument("--snapshot-every", type=int, default=0)
    s.add_argument("--out", required=True)

    b = sub.add_parser("bootstrap", help="bootstrap intervals for the fitted laws")
    b.add_argument("--model", required=True)
    b.add_argument("--b", type=int, required=True, help="number of replicates")
    b.add_argument("--delta", type=int, required=True, help="simulated ring width (> model depth)")
    b.add_argument("--base-size", type=int, default=None)
    b.add_argument("--base-rows", type=int, default=None)
    b.add_argument("--base-cols", type=int, default=None)
    b.add_argument("--sweeps", type=int, default=400)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--update", default="heat-bath", choices=["heat-bath", "metropolis"])
    b.add_argument("--scan", default="raster", choices=["raster", "random"])
    b.add_argument("--refit", action="store_true", help="keep only structure-matching replicates")
    b.add_argument("--start-grid", default=None, help="mirror-extended start state for every replicate")
    b.add_argument("--mask-token", default="NA")
    b.add_argument("--substitute", default=None)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", required=True)

    o = sub.add_parser("oracle", help="cross-check pruning against exhaustive enumeration")
    add_grid_opts(o)
    o.add_argument("--depth", type=int, required=True)
    o.add_argument("--bound", type=int, default=10**7, help="abort above this many candidates")
    o.add_argument("--tolerance", type=float, default=1e-9)
    o.add_argument("--out", default=None)

    i = sub.add_parser("inspect", help="summarize a saved artifact")
    i.add_argument("--artifact", required=True, help="model or count tree JSON")
    i.add_argument("--format", default="table", choices=["table", "json", "dot"])
    i.add_argument("--limit", type=int, default=20, help="max table rows per section")
    i.add_argument("--out", default=None)

    r = sub.add_parser("replay", help="re-run a recorded manifest")
    r.add_argument("manifest", help="manifest JSON written by a previous run")
    r.add_argument("--out", default=None, help="override the recorded output prefix")
    return p


def _fresh_seed() -> int:
    return int.from_bytes(os.urandom(6), "big")


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _write_manifest(command: str, opts: dict, inputs: list, t0: float) -> str | None:
    out = opts.get("out")
    if not out:
        return None
    man = RunManifest(
        command=command,
        options=opts,
        seed=opts.get("seed"),
        inputs={p: sha256_file(p) for p in inputs},
        version=__version__,
        duration_s=round(time.time() - t0, 3),
        created_utc=_utc_now(),
    )
    path = f"{out}.manifest.json"
    man.write(path)
    return path


def _write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _substitute_index(alphabet: Alphabet, label: str | None) -> int:
    return 0 if label is None else alphabet.index(label)


def _policy_from_opts(opts: dict, alphabet: Alphabet):
    kind = opts.get("boundary", "interior")
    inputs = []
    if kind == "interior":
        return BoundaryPolicy.interior_only(), inputs
    if kind == "mirror":
        return BoundaryPolicy.mirror(), inputs
    path = opts.get("outer_grid")
    if not path:
        raise ParseError("--boundary buffer requires --outer-grid")
    outer = load_grid(path, alphabet, opts.get("mask_token", "NA"))
    inputs.append(path)
    origin = None
    if opts.get("core_origin"):
        try:
            r0, c0 = (int(v) for v in opts["core_origin"].split(","))
        except ValueError:
            raise ParseError(f"bad --core-origin {opts['core_origin']!r}; expected 'r,c'") from None
        origin = (r0, c0)
    return BoundaryPolicy.buffer(outer, origin), inputs


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _load_model(path: str) -> Pcn:
    return Pcn.from_json(_read_text(path))


def cmd_fit(opts: dict) -> int:
    t0 = time.time()
    alphabet = Alphabet.from_spec(opts["alphabet"])
    grid = load_grid(opts["grid"], alphabet, opts.get("mask_token", "NA"))
    policy, extra_inputs = _policy_from_opts(opts, alphabet)
    mode = Mode.parse(opts.get("mode", "count"))
    substitute = _substitute_index(alphabet, opts.get("substitute"))
    depth = opts.get("depth")
    if depth is None:
        from .selection import default_depth

        depth = default_depth(grid.n_unmasked)
    tree = build_count_tree(
        grid, depth, mode, policy=policy, workers=opts.get("workers", 1), substitute=substitute
    )
    penalty_count = tree.n_total if opts.get("penalty", "centers") == "centers" else grid.rows * grid.cols
    scores = compute_scores(tree, penalty_count)
    model = prune(tree, scores, penalty_count)
    report = pic(tree, model.leaf_keys(), penalty_count)

    out = opts["out"]
    written = [_write_text(f"{out}.pcn.json", model.to_json() + "\n")]
    report_doc = {
        "pic": report.pic,
        "log_mpl": report.log_mpl,
        "penalty": report.penalty,
        "leaf_count": report.leaf_count,
        "penalty_count": report.penalty_count,
        "depth": model.depth,
        "mode": mode.value,
        "n_total": tree.n_total,
    }
    written.append(_write_text(f"{out}.pic.json", json.dumps(report_doc, indent=1, sort_keys=True) + "\n"))
    if opts.get("dot"):
        written.append(_write_text(f"{out}.tree.dot", model.to_dot()))
    if opts.get("save_counts"):
        written.append(_write_text(f"{out}.counts.json", count_tree_to_json(tree) + "\n"))
    written.append(_write_manifest("fit", opts, [opts["grid"]] + extra_inputs, t0))
    print(
        f"fitted {mode.value} model at depth {model.depth}: "
        f"{report.leaf_count} leaves, PIC {report.pic:.6f} (n={tree.n_total})"
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_simulate(opts: dict) -> int:
    t0 = time.time()
    model = _load_model(opts["model"])
    inputs = [opts["model"]]
    rows = opts.get("rows") or opts.get("size")
    cols = opts.get("cols") or opts.get("size")
    if rows is None or cols is None:
        raise ParseError("simulate needs --size or both --rows and --cols")
    if opts.get("seed") is None:
        opts["seed"] = _fresh_seed()
    init_grid = None
    init = InitMode.RANDOM_UNIFORM
    if opts.get("init_grid"):
        init_grid = load_grid(opts["init_grid"], model.alphabet, opts.get("mask_token", "NA"))
        init = InitMode.GRID
        inputs.append(opts["init_grid"])
    config = SimConfig(
        rows=rows,
        cols=cols,
        sweeps=opts["sweeps"],
        seed=opts["seed"],
        update=UpdateRule(opts.get("update", "heat-bath")),
        scan=ScanOrder(opts.get("scan", "raster")),
        init=init,
        init_grid=init_grid,
        freeze_mask=opts.get("freeze_mask", True),
        substitute=_substitute_index(model.alphabet, opts.get("substitute")),
        trace_every=opts.get("trace_every", 1),
    )
    out = opts["out"]
    written = []
    every = opts.get("snapshot_every", 0)
    mask_token = opts.get("mask_token", "NA")

    def snapshot_cb(sweep: int, g: Grid) -> None:
        if every > 0 and sweep % every == 0:
            path = f"{out}.sweep{sweep:05d}.grid.txt"
            save_grid(g, path, mask_token)
            written.append(path)

    grid, trace = simulate(model, config, snapshot_cb=snapshot_cb if every > 0 else None)
    save_grid(grid, f"{out}.grid.txt", mask_token)
    written.append(f"{out}.grid.txt")
    written.append(_write_text(f"{out}.trace.csv", trace.to_csv()))
    written.append(_write_manifest("simulate", opts, inputs, t0))
    print(f"simulated {rows}x{cols} lattice: {opts['sweeps']} sweeps, seed {opts['seed']}")
    threshold = opts.get("stab_threshold", 1e-3)
    if trace.n_rows >= 2:
        sweep = stabilized(trace, threshold)
        if sweep is None:
            print(f"not stabilized within {opts['sweeps']} sweeps (threshold {threshold})")
        else:
            print(f"stabilized at sweep {sweep} (threshold {threshold})")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_bootstrap(opts: dict) -> int:
    t0 = time.time()
    model = _load_model(opts["model"])
    inputs = [opts["model"]]
    base_rows = opts.get("base_rows") or opts.get("base_size")
    base_cols = opts.get("base_cols") or opts.get("base_size")
    if base_rows is None or base_cols is None:
        raise ParseError("bootstrap needs --base-size or both --base-rows and --base-cols")
    if opts.get("seed") is None:
        opts["seed"] = _fresh_seed()
    start = None
    if opts.get("start_grid"):
        start = load_grid(opts["start_grid"], model.alphabet, opts.get("mask_token", "NA"))
        inputs.append(opts["start_grid"])
    config = BootConfig(
        b=opts["b"],
        delta=opts["delta"],
        base_rows=base_rows,
        base_cols=base_cols,
        sweeps=opts.get("sweeps", 400),
        seed=opts["seed"],
        update=UpdateRule(opts.get("update", "heat-bath")),
        scan=ScanOrder(opts.get("scan", "raster")),
        refit=opts.get("refit", False),
        start=start,
        substitute=_substitute_index(model.alphabet, opts.get("substitute")),
        workers=opts.get("workers", 1),
    )
    table = bootstrap_ci(model, config)
    out = opts["out"]
    written = [_write_text(f"{out}.ci.csv", table.to_csv())]
    meta = {
        "b_requested": table.b_requested,
        "b_included": table.b_included,
        "b_excluded": table.b_excluded,
        "delta": config.delta,
        "base_rows": base_rows,
        "base_cols": base_cols,
        "sweeps": config.sweeps,
        "seed": config.seed,
        "refit": config.refit,
    }
    written.append(_write_text(f"{out}.boot.json", json.dumps(meta, indent=1, sort_keys=True) + "\n"))
    written.append(_write_manifest("bootstrap", opts, inputs, t0))
    print(
        f"bootstrap: {table.b_included} of {table.b_requested} replicates included "
        f"({table.b_excluded} excluded)"
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_oracle(opts: dict) -> int:
    t0 = time.time()
    alphabet = Alphabet.from_spec(opts["alphabet"])
    grid = load_grid(opts["grid"], alphabet, opts.get("mask_token", "NA"))
    policy, extra_inputs = _policy_from_opts(opts, alphabet)
    mode = Mode.parse(opts.get("mode", "count"))
    substitute = _substitute_index(alphabet, opts.get("substitute"))
    tree = build_count_tree(grid, opts["depth"], mode, policy=policy, substitute=substitute)
    penalty_count = tree.n_total if opts.get("penalty", "centers") == "centers" else grid.rows * grid.cols
    scores = compute_scores(tree, penalty_count)
    model = prune(tree, scores, penalty_count)
    dp_report = pic(tree, model.leaf_keys(), penalty_count)
    oracle = exhaustive_pic_oracle(tree, penalty_count, bound=opts.get("bound", 10**7))
    tol = opts.get("tolerance", 1e-9)
    pic_match = abs(dp_report.pic - oracle.report.pic) <= tol
    gap = None if oracle.runner_up_pic is None else oracle.runner_up_pic - oracle.report.pic
    structures_equal = [str(k) for k in model.leaf_keys()] == [str(k) for k in oracle.leaf_keys]
    match = pic_match and (structures_equal or (gap is not None and gap <= tol))
    print(f"pruned PIC   {dp_report.pic:.9f}  ({dp_report.leaf_count} leaves)")
    print(f"oracle PIC   {oracle.report.pic:.9f}  ({oracle.report.leaf_count} leaves, "
          f"{oracle.n_candidates} candidates)")
    if gap is not None:
        print(f"runner-up gap {gap:.9f}")
    print("MATCH" if match else "MISMATCH")
    if opts.get("out"):
        doc = {
            "pruned": {"pic": dp_report.pic, "leaves": [str(k) for k in model.leaf_keys()]},
            "oracle": {"pic": oracle.report.pic, "leaves": [str(k) for k in oracle.leaf_keys]},
            "n_candidates": oracle.n_candidates,
            "runner_up_gap": gap,
            "match": match,
        }
        path = _write_text(f"{opts['out']}.oracle.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
        print(f"wrote {path}")
        man = _write_manifest("oracle", opts, [opts["grid"]] + extra_inputs, t0)
        print(f"wrote {man}")
    if not match:
        raise RuntimeError("pruning disagrees with the exhaustive oracle")
    return 0


def _inspect_model(model: Pcn, limit: int) -> list:
    lines = [
        f"model: |A|={model.alphabet.size} ({','.join(model.alphabet.symbols)}), "
        f"mode={model.mode.value}, depth={model.depth}, "
        f"leaves={len(model.leaves)}, internals={len(model.internals)}"
    ]
    per_order: dict[int, int] = {}
    for key in model.leaves:
        per_order[key.order] = per_order.get(key.order, 0) + 1
    for order in sorted(per_order):
        lines.append(f"  leaves at order {order}: {per_order[order]}")
    lines.append("")
    lines.append(f"{'key':<40} {'n_occ':>8}  probs")
    for key in model.leaf_keys()[:limit]:
        d = model.leaves[key]
        probs = ",".join(f"{p:.4f}" for p in d.probs)
        n = "-" if d.n_occ is None else str(d.n_occ)
        lines.append(f"{str(key):<40} {n:>8}  [{probs}]")
    hidden = len(model.leaves) - limit
    if hidden > 0:
        lines.append(f"... {hidden} more leaves")
    return lines


def _inspect_tree(tree, limit: int) -> list:
    per_order: dict[int, list] = {}
    for node in tree.iter_nodes():
        per_order.setdefault(node.key.order, []).append(node)
    lines = [
        f"count tree: |A|={tree.alphabet.size} ({','.join(tree.alphabet.symbols)}), "
        f"mode={tree.mode.value}, depth={tree.depth}, n_total={tree.n_total}"
    ]
    for order in sorted(per_order):
        nodes = per_order[order]
        occs = sorted(n.n_occ for n in nodes)
        lines.append(
            f"  order {order}: {len(nodes)} classes, n_occ min={occs[0]} "
            f"median={occs[len(occs) // 2]} max={occs[-1]}"
        )
    lines.append("")
    lines.append(f"{'key':<40} {'n_occ':>8}  center_counts")
    shown = 0
    for node in tree.iter_nodes():
        if shown >= limit:
            lines.append("... truncated")
            break
        lines.append(f"{str(node.key):<40} {node.n_occ:>8}  {node.center_counts}")
        shown += 1
    return lines


def cmd_inspect(opts: dict) -> int:
    t0 = time.time()
    text = _read_text(opts["artifact"])
    try:
        doc = json.loads(text)
        fmt = doc.get("format") if isinstance(doc, dict) else None
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad artifact JSON: {exc}") from None
    want = opts.get("format", "table")
    if fmt == FORMAT_MODEL:
        model = Pcn.from_json(text)
        if want == "dot":
            body = model.to_dot()
        elif want == "json":
            body = model.to_json() + "\n"
        else:
            body = "\n".join(_inspect_model(model, opts.get("limit", 20))) + "\n"
    else:
        tree = count_tree_from_json(text)
        if want == "dot":
            raise ParseError("dot output is only available for model artifacts")
        if want == "json":
            body = count_tree_to_json(tree) + "\n"
        else:
            body = "\n".join(_inspect_tree(tree, opts.get("limit", 20))) + "\n"
    if opts.get("out"):
        path = _write_text(f"{opts['out']}.inspect.txt", body)
        man = _write_manifest("inspect", opts, [opts["artifact"]], t0)
        print(f"wrote {path}")
        print(f"wrote {man}")
    else:
        sys.stdout.write(body)
    return 0


def cmd_replay(opts: dict) -> int:
    man = RunManifest.load(opts["manifest"])
    if man.command == "replay":
        raise ParseError("refusing to replay a replay manifest")
    for path, digest in man.inputs.items():
        if not os.path.exists(path):
            raise ParseError(f"recorded input {path} no longer exists")
        actual = sha256_file(path)
        if actual != digest:
            raise ParseError(f"input {path} changed since the recorded run (digest mismatch)")
    replay_opts = dict(man.options)
    if opts.get("out"):
        replay_opts["out"] = opts["out"]
    print(f"replaying {man.command} (recorded {man.created_utc}, version {man.version})")
    return _DISPATCH[man.command](replay_opts)


_DISPATCH = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "bootstrap": cmd_bootstrap,
    "oracle": cmd_oracle,
    "inspect": cmd_inspect,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = {k: v for k, v in vars(args).items() if k != "command"}
        for key in _PATH_KEYS:
            if opts.get(key):
                opts[key] = os.path.abspath(opts[key])
        return _DISPATCH[args.command](opts)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except PcnError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": exc.message}) + "\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort guard for exit code 3
        sys.stderr.write(json.dumps({"error": "INTERNAL", "message": str(exc)}) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
