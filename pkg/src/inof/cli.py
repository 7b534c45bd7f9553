"""Command-line interface: ``inof gen | run | hist | oracle``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import COLOR_NAMES, SeedAssignment, SimConfig, run_ensemble
from .graph import VoteMode, read_graph, write_edge_list
from .netgen import GenModel, GenSpec, generate
from .oracle import exact_distribution, exact_marginals
from .stats import (color_polarization_table, error_estimates, fraction_table, histogram1d,
                    histogram2d, polarization_table, theoretical_eta_error)

MANIFEST_FORMAT = 1


class CliError(Exception):
    pass


def _num(x) -> str:
    """Stable text for CSV/JSON numbers; empty for undefined."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _OutputSet:
    """Write files to temporaries and publish them only if all succeed."""

    def __init__(self):
        self._pending: list[tuple[str, Path]] = []

    def open(self, path) -> io.TextIOBase:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        self._pending.append((tmp, path))
        return os.fdopen(fd, "w", encoding="utf-8", newline="")

    def commit(self) -> None:
        for tmp, path in self._pending:
            os.replace(tmp, path)
        self._pending.clear()

    def abort(self) -> None:
        for tmp, _ in self._pending:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
        self._pending.clear()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.abort()
        return False


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    model = GenModel(args.model)
    spec = GenSpec(model, n=args.nodes or 0, p=args.p, m=args.m, leaves=args.leaves,
                   seed=args.gen_seed)
    try:
        spec.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from None
    g = generate(spec)
    with _OutputSet() as out:
        with out.open(args.out) as fh:
            write_edge_list(g, fh)
    print(f"N={g.node_count} N_l={g.edge_count}")
    return 0


# ---------------------------------------------------------------------------
# run


def _split(text: str | None) -> list[str]:
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _resolve_seeds(graph, lists: dict[str, list[str]]) -> tuple[SeedAssignment, dict]:
    groups = []
    echo = {}
    owner: dict[int, str] = {}
    unknown = set(lists) - {"red", "blue", "green"}
    if unknown:
        raise CliError(f"unknown seed colors: {sorted(unknown)}")
    # fixed color order: manifests are stored with sorted keys
    for name in [c for c in ("red", "blue", "green") if c in lists]:
        tokens = lists[name]
        if not tokens:
            raise CliError(f"--{name} needs at least one node")
        idx = []
        for tok in tokens:
            try:
                i = graph.index_of(tok)
            except KeyError as exc:
                raise CliError(f"--{name}: {exc.args[0]}") from None
            if i in owner:
                raise CliError(f"overlapping seeds: node {tok!r} is in --{owner[i]} and --{name}")
            owner[i] = name
            idx.append(i)
        groups.append(idx)
        echo[name] = [{"token": graph.tokens[i], "index": i, "label": graph.label(i)} for i in idx]
    return SeedAssignment(*groups), echo


def _manifest_from_args(args) -> dict:
    lists = {"red": _split(args.red), "blue": _split(args.blue)}
    if args.green:
        lists["green"] = _split(args.green)
    return {
        "format": MANIFEST_FORMAT,
        "artifact": "inof",
        "version": __version__,
        "edges": {"path": args.edges, "sha256": None},
        "labels": {"path": args.labels, "sha256": None} if args.labels else None,
        "seed_tokens": lists,
        "config": {
            "mode": VoteMode.parse(args.mode).value,
            "colors": len(lists),
            "tau_max": args.tau,
            "n_realizations": args.realizations,
            "temperature": args.temp,
            "master_seed": args.seed,
            "white_threshold": args.white_threshold,
        },
        "subsamples": args.subsamples,
        "trace": bool(args.trace),
    }


def _locate(path: str, base: Path | None) -> str:
    if os.path.exists(path) or base is None:
        return path
    alt = base / path
    return str(alt) if alt.exists() else path


def _load_manifest(path) -> tuple[dict, Path]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "manifest" in data and "config" not in data:
        data = data["manifest"]
    if data.get("format") != MANIFEST_FORMAT:
        raise CliError(f"unsupported manifest format in {path}")
    return data, Path(path).resolve().parent


def execute_run(manifest: dict, out_prefix: str, threads: int | None = None,
                base: Path | None = None) -> dict:
    """Run a contest described by ``manifest`` and write all outputs."""
    edges_path = _locate(manifest["edges"]["path"], base)
    labels_path = _locate(manifest["labels"]["path"], base) if manifest.get("labels") else None
    for key, path in (("edges", edges_path), ("labels", labels_path)):
        if path is None:
            continue
        if not os.path.exists(path):
            raise CliError(f"{key} file not found: {path}")
        digest = _sha256(path)
        want = manifest[key]["sha256"]
        if want is not None and want != digest:
            raise CliError(f"{key} file {path} does not match the manifest digest")
        manifest[key]["sha256"] = digest

    graph = read_graph(edges_path, labels_path)
    seeds, seed_echo = _resolve_seeds(graph, manifest["seed_tokens"])
    c = manifest["config"]
    if c["colors"] == 3 and c["temperature"] > 0:
        raise CliError("--green cannot be combined with --temp > 0 (two colors only)")
    try:
        config = SimConfig(mode=c["mode"], colors=c["colors"], tau_max=c["tau_max"],
                           n_realizations=c["n_realizations"], temperature=c["temperature"],
                           master_seed=c["master_seed"], white_threshold=c["white_threshold"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    manifest["seeds"] = seed_echo

    n_s = manifest.get("subsamples") or 1
    if n_s > 1 and config.n_realizations % n_s:
        raise CliError(
            f"--realizations {config.n_realizations} cannot be split into {n_s} equal subsamples; "
            f"use a multiple of {n_s} or --subsamples 1 to skip the subdivision error")
    subdivide = n_s > 1
    res = run_ensemble(graph, seeds, config, threads=threads, n_batches=n_s if subdivide else 1,
                       trace=manifest.get("trace", False))

    summary = _summarize(graph, res, config, n_s, subdivide)
    summary["manifest"] = manifest
    with _OutputSet() as out:
        with out.open(f"{out_prefix}_nodes.csv") as fh:
            _write_nodes(fh, graph, res, config, summary.pop("_node_extra"))
        with out.open(f"{out_prefix}_realizations.csv") as fh:
            _write_realizations(fh, res, config)
        if res.trace is not None:
            with out.open(f"{out_prefix}_trace.csv") as fh:
                _write_trace(fh, res)
        with out.open(f"{out_prefix}_summary.json") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with out.open(f"{out_prefix}_manifest.json") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary


def _summarize(graph, res, config: SimConfig, n_s: int, subdivide: bool) -> dict:
    agg = res.aggregate
    n = graph.node_count
    fr = fraction_table(res.color_counts)
    defined = ~np.isnan(fr[:, 0])
    switches = res.switches / n
    s = {
        "format": MANIFEST_FORMAT,
        "colors": config.colors,
        "node_count": n,
        "edge_count": graph.edge_count,
        "n_realizations": config.n_realizations,
        "seed_nodes_included": True,
        "undefined_realizations": int((~defined).sum()),
        "final_switch_mean": _json_num(switches[:, -1].mean()),
        "switch_trajectory": [_json_num(v) for v in switches.mean(axis=0)],
        "subdivision_samples": n_s if subdivide else None,
    }
    extra: dict = {}
    if config.colors == 2:
        table = polarization_table(agg, config.white_threshold)
        est = error_estimates(agg, table, res.batch_counts if subdivide else None)
        s.update({
            "classified_count": table.classified_count,
            "white_fraction": 1.0 - table.classified_count / n,
            "mu0": table.mu0,
            "mu0_error_theory": est.mu0_theory,
            "mu0_error_subdivision": _json_num(est.mu0_subdiv),
            "mean_f_r": _json_num(fr[defined, 0].mean()) if defined.any() else None,
        })
        extra = {"table": table, "est": est}
    else:
        table = color_polarization_table(agg, config.white_threshold)
        names = COLOR_NAMES[1:4]
        s.update({
            "classified_count": int(table.classified.sum()),
            "white_fraction": 1.0 - int(table.classified.sum()) / n,
            "eta0": {nm: float(v) for nm, v in zip(names, table.eta0)},
            "mean_fractions": {nm: _json_num(fr[defined, k].mean()) if defined.any() else None
                               for k, nm in enumerate(names)},
        })
        extra = {"table": table}
    s["_node_extra"] = extra
    return s


def _write_nodes(fh, graph, res, config, extra) -> None:
    w = csv.writer(fh, lineterminator="\n")
    counts = res.aggregate.counts
    n_r = res.aggregate.n_realizations
    table = extra["table"]
    if config.colors == 2:
        est = extra["est"]
        w.writerow(["node_id", "label", "n_white", "n_red", "n_blue", "classified", "mu",
                    "delta_mu", "mu_err_theory", "delta_mu_err_subdiv"])
        sub = est.delta_mu_subdiv
        for i in range(graph.node_count):
            cl = bool(table.classified[i])
            w.writerow([graph.tokens[i], graph.label(i), *map(int, counts[i]), int(cl),
                        _num(table.mu[i]), _num(table.delta[i]),
                        _num(est.mu_theory[i]) if cl else "",
                        _num(sub[i]) if cl and sub is not None else ""])
    else:
        w.writerow(["node_id", "label", "n_white", "n_red", "n_blue", "n_green", "classified",
                    "eta_red", "eta_blue", "eta_green", "delta_eta_red", "delta_eta_blue",
                    "delta_eta_green", "eta_err_theory_red", "eta_err_theory_blue",
                    "eta_err_theory_green"])
        for i in range(graph.node_count):
            cl = bool(table.classified[i])
            err = theoretical_eta_error(table.eta[i], n_r) if cl else [None] * 3
            w.writerow([graph.tokens[i], graph.label(i), *map(int, counts[i]), int(cl),
                        *map(_num, table.eta[i]), *map(_num, table.delta[i]),
                        *map(_num, err)])


def _write_realizations(fh, res, config) -> None:
    w = csv.writer(fh, lineterminator="\n")
    names = COLOR_NAMES[: config.colors + 1]
    frac_cols = ["f_r"] if config.colors == 2 else [f"frac_{c}" for c in names[1:]]
    w.writerow(["realization", *(f"n_{c}" for c in names), *frac_cols,
                *(f"switch_{t + 1}" for t in range(config.tau_max))])
    fr = fraction_table(res.color_counts)
    if config.colors == 2:
        fr = fr[:, :1]
    for r in range(res.n_realizations):
        w.writerow([r, *map(int, res.color_counts[r]), *map(_num, fr[r]),
                    *map(int, res.switches[r])])


def _write_trace(fh, res) -> None:
    w = csv.writer(fh, lineterminator="\n")
    k = res.trace.shape[2]
    names = COLOR_NAMES[:k]
    w.writerow(["realization", "pass", *(f"n_{c}" for c in names), "f_r"])
    for r in range(res.trace.shape[0]):
        for t in range(res.trace.shape[1]):
            row = res.trace[r, t]
            colored = int(row[1:].sum())
            w.writerow([r, t + 1, *map(int, row), _num(row[1] / colored) if colored else ""])


def cmd_run(args) -> int:
    if args.manifest:
        manifest, base = _load_manifest(args.manifest)
    else:
        missing = [f for f in ("edges", "red", "blue") if not getattr(args, f)]
        if missing:
            raise CliError("missing required flags: " + ", ".join(f"--{m}" for m in missing))
        if args.green and args.temp > 0:
            raise CliError("--green cannot be combined with --temp > 0 (two colors only)")
        manifest, base = _manifest_from_args(args), None
    if not args.out:
        raise CliError("--out PREFIX is required")
    summary = execute_run(manifest, args.out, threads=args.threads, base=base)
    key = "mu0" if summary["colors"] == 2 else "eta0"
    print(f"{key}={summary[key]} classified={summary['classified_count']}/{summary['node_count']}")
    return 0


# ---------------------------------------------------------------------------
# hist


def _read_column(spec: str) -> list[str]:
    if ":" not in spec:
        raise CliError(f"--input expects FILE:COLUMN, got {spec!r}")
    path, col = spec.rsplit(":", 1)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or col not in reader.fieldnames:
            raise CliError(f"column {col!r} not found in {path}")
        return [row[col] for row in reader]


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise CliError(f"--range expects lo,hi, got {text!r}") from None
    return lo, hi


def cmd_hist(args) -> int:
    xs = _read_column(args.input)
    lo, hi = _parse_range(args.range)
    if args.input2 is None:
        vals = [float(v) for v in xs if v.strip()]
        if not vals:
            raise CliError(f"column {args.input} has no values")
        try:
            h = histogram1d(vals, lo, hi, args.bins)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        with _OutputSet() as out:
            with out.open(args.out) as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["bin_center", "density"])
                for c, d in zip(h.centers, h.density):
                    w.writerow([_num(c), _num(d)])
        return 0
    ys = _read_column(args.input2)
    if len(xs) != len(ys):
        raise CliError("--input and --input2 have different row counts")
    pts = [(float(a), float(b)) for a, b in zip(xs, ys) if a.strip() and b.strip()]
    if not pts:
        raise CliError("no rows with both columns defined")
    lo2, hi2 = _parse_range(args.range2) if args.range2 else (lo, hi)
    try:
        h2 = histogram2d(pts, ((lo, hi), (lo2, hi2)), (args.bins, args.bins2 or args.bins))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    cx, cy = h2.centers()
    with _OutputSet() as out:
        with out.open(args.out) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x_center", "y_center", "density"])
            for a, x in enumerate(cx):
                for b, y in enumerate(cy):
                    w.writerow([_num(x), _num(y), _num(h2.density[a, b])])
    return 0


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    graph = read_graph(args.edges, args.labels)
    lists = {"red": _split(args.red), "blue": _split(args.blue)}
    if args.green:
        lists["green"] = _split(args.green)
    seeds, _ = _resolve_seeds(graph, lists)
    try:
        dist = exact_distribution(graph, seeds, VoteMode.parse(args.mode), colors=len(lists),
                                  tau=args.tau)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    marg = exact_marginals(dist)
    names = COLOR_NAMES[: len(lists) + 1]
    doc = {
        "free_nodes": [graph.tokens[i] for i in dist.free_nodes],
        "states": [
            {"colors": [names[c] for c in state], "probability": str(p), "value": float(p)}
            for state, p in sorted(dist.probs.items())
        ],
        "marginals": [
            {"node_id": graph.tokens[i],
             **{f"p_{nm}": str(marg.prob[i][c]) for c, nm in enumerate(names)},
             "mu": None if marg.mu[i] is None else str(marg.mu[i])}
            for i in range(graph.node_count)
        ],
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with _OutputSet() as out:
            with out.open(args.out) as fh:
                fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inof", description="Ising network opinion formation")
    p.add_argument("--version", action="version", version=f"inof {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic network")
    g.add_argument("--model", required=True, choices=[m.value for m in GenModel])
    g.add_argument("--nodes", type=int)
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--p", type=float, default=0.0)
    g.add_argument("--leaves", type=int, default=1)
    g.add_argument("--gen-seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a seeded opinion contest")
    r.add_argument("--edges")
    r.add_argument("--labels")
    r.add_argument("--red")
    r.add_argument("--blue")
    r.add_argument("--green")
    r.add_argument("--mode", choices=["opa", "ops"], default="ops")
    r.add_argument("--realizations", type=int, default=1000)
    r.add_argument("--tau", type=int, default=20)
    r.add_argument("--temp", type=float, default=0.0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--white-threshold", type=float, default=0.5)
    r.add_argument("--subsamples", type=int, default=100,
                   help="batches for the subdivision error (needs N_r divisible by it)")
    r.add_argument("--trace", action="store_true", help="also write per-pass color tallies")
    r.add_argument("--threads", type=int, help="worker threads (default: $INOF_THREADS or CPUs)")
    r.add_argument("--manifest", help="rerun exactly from a manifest or summary JSON")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    h = sub.add_parser("hist", help="normalized histogram of a CSV column")
    h.add_argument("--input", required=True, help="FILE:COLUMN")
    h.add_argument("--input2", help="FILE:COLUMN for a 2D histogram")
    h.add_argument("--bins", type=int, required=True)
    h.add_argument("--bins2", type=int)
    h.add_argument("--range", required=True, help="lo,hi")
    h.add_argument("--range2", help="lo,hi for the second axis")
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_hist)

    o = sub.add_parser("oracle", help="exact outcome distribution of a tiny graph (T = 0)")
    o.add_argument("--edges", required=True)
    o.add_argument("--labels")
    o.add_argument("--red", required=True)
    o.add_argument("--blue", required=True)
    o.add_argument("--green")
    o.add_argument("--mode", choices=["opa", "ops"], default="ops")
    o.add_argument("--tau", type=int, default=20)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def _join_ranges(argv: list[str]) -> list[str]:
    # "--range -1,1" would otherwise be read as an unknown option
    out = []
    it = iter(argv)
    for a in it:
        if a in ("--range", "--range2"):
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_ranges(sys.argv[1:] if argv is None else list(argv)))
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"inof {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
