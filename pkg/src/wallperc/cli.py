"""Command-line front end.

Exit codes: 0 success (possibly with warnings), 1 a ``verify`` check
failed, 2 usage, 3 resource cap, 4 malformed input, 5 mathematical
infeasibility.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import compression, percolation
from .cuts import CutFamily, cut_family_to_dict, read_cut_family, wall_kernel
from .errors import InputError, TooManyWalls, UsageError, WallpercError, ZeroTwoPoint
from .graph import (
    FAMILIES,
    build_graph,
    distance_matrix,
    format_distance_csv,
    format_edge_list,
    gen_graph,
    read_edge_list,
)
from .kernel import (
    PointCloud,
    cut_cone_membership,
    format_kernel_csv,
    format_points_csv,
    hilbert_embedding,
    is_cond_negative_definite,
    is_positive_definite,
    parse_points_csv,
    read_kernel_csv,
    schoenberg_transform,
)
from .walls import radial_walls, walls_from_hilbert_embedding, walls_from_l1_embedding

DEFAULT_SAMPLES = 100_000


# ------------------------------------------------------------ output helpers


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


# ------------------------------------------------------------ experiment inputs


def load_graph(spec: str):
    """A family descriptor such as ``path6`` / ``grid:2,4``, or an edge-list file."""
    if os.path.exists(spec):
        return read_edge_list(spec)
    return gen_graph(spec)


def load_walls(spec: str, g, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> tuple[CutFamily, dict]:
    """Wall family from ``radial:ROOT``, ``identity``, ``l1:FILE``, ``hilbert:FILE`` or ``cuts:FILE``.

    ``identity`` uses the one-coordinate embedding ``f(u) = u``. ``hilbert``
    reads a CND kernel, embeds it and samples half-space walls, whose kernel
    approximates the square root of the input. Returns the family and a
    description; for ``hilbert`` the description keeps the input kernel.
    """
    kind, _, arg = spec.partition(":")
    info = {"spec": spec}
    if kind == "radial":
        try:
            root = int(arg or 0)
        except ValueError:
            raise UsageError(f"radial walls need an integer root, got {arg!r}") from None
        w = radial_walls(g, root)
    elif kind == "identity":
        w = walls_from_l1_embedding(PointCloud(np.arange(g.n, dtype=float), "l1"), g)
    elif kind == "l1":
        cloud = parse_points_csv(_read_text(arg), metric="l1")
        w = walls_from_l1_embedding(cloud, g)
    elif kind == "hilbert":
        k = read_kernel_csv(arg)
        if k.shape[0] != g.n:
            raise InputError(f"kernel on {k.shape[0]} vertices, graph has {g.n}")
        w = walls_from_hilbert_embedding(hilbert_embedding(k), samples, seed)
        info["kernel"] = k
    elif kind == "cuts":
        w = read_cut_family(arg)
        if w.n != g.n:
            raise InputError(f"cut family on {w.n} vertices, graph has {g.n}")
    else:
        raise UsageError(f"unknown wall source {spec!r}; use radial:ROOT, identity, l1:FILE, hilbert:FILE or cuts:FILE")
    return w, info


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


@dataclass
class ExperimentConfig:
    graph: str
    walls: str
    ts: list
    mode: str = "exact"
    replicas: int = 100_000
    seed: int = 0
    samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if not self.ts:
            raise UsageError("the t-grid is empty")
        if any(not t >= 0 for t in self.ts) or any(b <= a for a, b in zip(self.ts, self.ts[1:])):
            raise UsageError(f"t-grid must be nonnegative and strictly increasing, got {self.ts}")
        if self.mode not in ("exact", "mc"):
            raise UsageError(f"mode must be exact or mc, got {self.mode!r}")
        if self.mode == "mc" and self.replicas < 1:
            raise UsageError("replicas must be >= 1 in mc mode")
        if self.seed < 0:
            raise UsageError("seed must be nonnegative")


def decay_curve(tau: np.ndarray, dist: np.ndarray) -> list[list[float]]:
    """Rows ``[r, sup{tau(u, v) : d(u, v) > r}]`` for ``r = 0 .. diameter - 1``."""
    out = []
    for r in range(int(dist.max())):
        out.append([r, float(tau[dist > r].max())])
    return out


def run_sweep(cfg: ExperimentConfig) -> dict:
    g = load_graph(cfg.graph)
    w, info = load_walls(cfg.walls, g, cfg.samples, cfg.seed)
    dist = distance_matrix(g)
    k = wall_kernel(w)
    if cfg.mode == "exact" and len(w) > percolation.MAX_EXACT_CUTS:
        raise TooManyWalls(f"exact mode limited to {percolation.MAX_EXACT_CUTS} cuts, family has {len(w)}")
    rows = []
    if cfg.mode == "exact":
        for t in cfg.ts:
            d = percolation.distribution_from_walls(w, g, t)
            tau = percolation.two_point_exact(d)
            rows.append(_sweep_row(t, tau, None, k, dist, info, marginals=percolation.marginal_report(d, w, t)))
    else:
        ests = percolation.two_point_mc_sweep(w, g, cfg.ts, cfg.replicas, cfg.seed)
        for est in ests:
            rows.append(_sweep_row(est.t, est.tau, est, k, dist, info))
    return {
        "graph": g.name,
        "n": g.n,
        "edges": [list(e) for e in g.edges],
        "distances": dist.tolist(),
        "walls": {"spec": cfg.walls, "cuts": len(w), "total_weight": w.total_weight,
                  "metadata": w.metadata},
        "mode": cfg.mode,
        "seed": cfg.seed,
        "replicas": cfg.replicas if cfg.mode == "mc" else None,
        "rows": rows,
    }


def _sweep_row(t, tau, est, k, dist, info, marginals=None) -> dict:
    target = est if est is not None else tau
    plain = percolation.verify_sandwich(target, k, dist, t, "plain")
    row = {
        "t": t,
        "tau": tau.tolist(),
        "marginals": marginals,
        "sandwich": _sandwich_dict(plain),
        "decay": decay_curve(tau, dist),
    }
    if est is not None:
        row["estimate"] = est.to_dict()
    if "kernel" in info:
        row["sandwich_sqrt"] = _sandwich_dict(percolation.verify_sandwich(target, info["kernel"], dist, t, "sqrt"))
    return row


def _sandwich_dict(rep) -> dict:
    return {
        "delta": rep.delta,
        "lower_slack": rep.lower_slack,
        "upper_slack": rep.upper_slack,
        "passed": rep.passed,
        "lower_passed": rep.lower_passed,
        "upper_passed": rep.upper_passed,
        "tolerance": rep.tolerance,
    }


def decay_csv(result: dict) -> str:
    ts = [row["t"] for row in result["rows"]]
    curves = [dict((int(r), v) for r, v in row["decay"]) for row in result["rows"]]
    radii = sorted({r for c in curves for r in c})
    lines = ["r," + ",".join(f"t={t!r}" for t in ts)]
    for r in radii:
        lines.append(f"{r}," + ",".join(repr(c.get(r, "")) for c in curves))
    return "\n".join(lines) + "\n"


def _row_tau(row: dict):
    if "estimate" in row:
        est = row["estimate"]
        return percolation.TwoPointEstimate(row["t"], np.array(est["hits"], dtype=np.int64),
                                            int(est["trials"]), int(est["seed"]))
    return np.array(row["tau"], dtype=float)


# ------------------------------------------------------------ commands


def cmd_graph(args) -> int:
    fam = args.family
    needs = {
        "path": ("n",), "cycle": ("n",), "hypercube": ("d",), "grid": ("d", "side"),
        "tree": ("arity", "depth"), "complete_bipartite": ("a", "b"),
    }[fam]
    params = []
    for name in needs:
        value = getattr(args, name)
        if value is None:
            raise UsageError(f"--{name} is required for family {fam}")
        params.append(value)
    g = gen_graph(fam, *params)
    if args.out:
        write_atomic(f"{args.out}.edges", format_edge_list(g))
        write_atomic(f"{args.out}.dist.csv", format_distance_csv(distance_matrix(g)))
    else:
        sys.stdout.write(format_edge_list(g))
    return 0


def cmd_kernel(args) -> int:
    k = read_kernel_csv(args.input)
    if args.action == "check":
        report = {"n": int(k.shape[0])}
        if args.pd or not args.cnd:
            pd = is_positive_definite(k, args.tol)
            report.update({"pd": pd.ok, "min_eig": pd.min_eigenvalue})
        if args.cnd:
            cnd = is_cond_negative_definite(k, args.tol)
            report.update({"cnd": cnd.ok, "cnd_min_eig": cnd.min_eigenvalue})
            if cnd.witness is not None:
                report.update({"witness": [float(x) for x in cnd.witness], "form_value": cnd.form_value})
        _emit(_json_text(report), args.out)
    elif args.action == "cutcone":
        res = cut_cone_membership(k)
        report = {"status": res.status, "iterations": res.iterations}
        if res.feasible:
            report["residual"] = res.residual
            report["family"] = cut_family_to_dict(res.family)
        else:
            report["certificate"] = res.certificate
        _emit(_json_text(report), args.out)
    elif args.action == "schoenberg":
        if args.lam is None:
            raise UsageError("--lambda is required")
        _emit(format_kernel_csv(schoenberg_transform(k, args.lam)), args.out)
    elif args.action == "embed":
        _emit(format_points_csv(hilbert_embedding(k)), args.out)
    return 0


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(args.graph, args.walls, _floats(args.t, "--t"), args.mode,
                            args.replicas, args.seed, args.samples)


def cmd_perc(args) -> int:
    if args.action == "sweep":
        result = run_sweep(_config(args))
        _emit(_json_text(result), args.out)
        if args.csv:
            write_atomic(args.csv, decay_csv(result))
        return 0
    # dist
    g = load_graph(args.graph)
    if args.bernoulli is not None:
        d = percolation.exhaustive_bernoulli(g, args.bernoulli)
    else:
        ts = _floats(args.t, "--t")
        if len(ts) != 1:
            raise UsageError("perc dist takes a single time")
        w, _ = load_walls(args.walls, g, args.samples, args.seed)
        d = percolation.distribution_from_walls(w, g, ts[0])
    _emit(_json_text({"graph": g.name, "n": g.n, "edges": [list(e) for e in g.edges],
                      "atoms": d.to_list()}), args.out)
    return 0


def cmd_compress(args) -> int:
    if args.action == "dual":
        return _cmd_dual(args)
    sweep = _read_json(args.input)
    try:
        dist = np.array(sweep["distances"], dtype=float)
        rows = sweep["rows"]
        taus = [(row["t"], _row_tau(row)) for row in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed sweep file: {exc}") from None
    grid = _floats(args.grid, "--grid") if args.grid else compression.DEFAULT_GRID
    est = compression.estimate_alpha(taus, dist, args.cap, grid)
    report = {"alpha": est.to_dict(), "cap": args.cap, "fits": [], "dual": None}
    if est.status == "no_decay":
        zero = [s for s in est.skipped if s["error"] == "ZeroTwoPoint"]
        if zero and len(zero) == len(est.skipped):
            raise ZeroTwoPoint(f"two-point function vanishes at finite distance: {zero[0]['pairs']}",
                               zero[0]["pairs"])
    if est.degenerate:
        report["warning"] = est.diagnostic
    else:
        fits = []
        for t, tau in taus:
            if any(s["t"] == t for s in est.skipped):
                continue
            fits.append((tau, compression.fit_stretched_exponential(tau, dist, est.alpha, t=t)))
        report["fits"] = [f.to_dict() for _, f in fits]
        # smaller gamma last, as the dual-kernel construction expects
        fits.sort(key=lambda p: -p[1].gamma)
        exact = sweep.get("mode") == "exact"
        mats = [tau.tau if isinstance(tau, percolation.TwoPointEstimate) else tau for tau, _ in fits]
        dual = compression.dual_kernel(mats, [f.gamma for _, f in fits], dist, est.alpha,
                                       max(f.C for _, f in fits), cut_cone=exact)
        report["dual"] = dual.to_dict()
    _emit(_json_text(report), args.out)
    return 0


def _cmd_dual(args) -> int:
    g = load_graph(args.graph)
    dist = distance_matrix(g).astype(float)
    gammas = _floats(args.gammas, "--gammas")
    if args.walls:
        w, _ = load_walls(args.walls, g, args.samples, args.seed)
        taus = [percolation.two_point_exact(percolation.distribution_from_walls(w, g, gm)) for gm in gammas]
    else:
        taus = [np.exp(-gm * dist) for gm in gammas]
    rep = compression.dual_kernel(taus, gammas, dist, args.alpha, args.C)
    _emit(_json_text(rep.to_dict()), args.out)
    return 0


def _distribution_from_file(data, graph_spec):
    if isinstance(data, dict):
        try:
            g = build_graph(int(data["n"]), data["edges"], data.get("graph", ""))
            atoms = data["atoms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed distribution file: {exc}") from None
    else:
        if not graph_spec:
            raise UsageError("--graph is required for a bare atom list")
        g, atoms = load_graph(graph_spec), data
    return percolation.PercolationDistribution.from_list(atoms, g)


def _order(text):
    if text is None:
        return None
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--order must list vertices, got {text!r}") from None


def cmd_decompose(args) -> int:
    d = _distribution_from_file(_read_json(args.input), args.graph)
    order = _order(args.order)
    layers = percolation.cut_decomposition_layers(d, order)
    fam = percolation.cut_decomposition(d, order)
    tau = percolation.two_point_exact(d)
    err = float(np.max(np.abs(wall_kernel(fam) - (1.0 - tau))))
    report = {
        "family": cut_family_to_dict(fam),
        "layers": [cut_family_to_dict(l) for l in layers],
        "identity": {"max_error": err, "passed": err <= 1e-12},
    }
    _emit(_json_text(report), args.out)
    return 0


def verify_model(g, w, t: float, seeds: int = 100) -> list[tuple[str, bool, str]]:
    """Run the invariant suite on one wall model; returns (check, passed, detail) rows."""
    dist = distance_matrix(g)
    k = wall_kernel(w)
    d = percolation.distribution_from_walls(w, g, t)
    tau = percolation.two_point_exact(d)
    rows = []
    marg = percolation.marginal_report(d, w, t)
    rows.append(("marginals", marg["passed"], f"max error {marg['max_error']:.3g}"))
    sw = percolation.verify_sandwich(tau, k, dist, t, "plain")
    rows.append(("sandwich", sw.passed, f"slacks {sw.lower_slack:.3g} / {sw.upper_slack:.3g}"))
    pd = is_positive_definite(tau)
    rows.append(("psd", pd.ok, f"min eigenvalue {pd.min_eigenvalue:.3g}"))
    fkg = percolation.fkg_check_exact(d) if g.m <= percolation.MAX_EXACT_EDGES else None
    rows.append(("fkg", fkg is None or fkg >= -1e-12,
                 "skipped (too many edges)" if fkg is None else f"min covariance {fkg:.3g}"))
    fam = percolation.cut_decomposition(d)
    err = float(np.max(np.abs(wall_kernel(fam) - (1.0 - tau))))
    rows.append(("decomposition", err <= 1e-12, f"max error {err:.3g}"))
    violations = 0
    if len(w):
        grid = np.linspace(0.0, 2.0 * max(t, 1e-9), 20)
        for s in range(seeds):
            conf = percolation.configurations_at(percolation.sample_activation_times(w, s), grid, w, g)
            violations += int(np.sum(conf[1:] & ~conf[:-1]))
    rows.append(("coupling", violations == 0, f"{violations} violations over {seeds} seeds"))
    return rows


def cmd_verify(args) -> int:
    g = load_graph(args.graph)
    w, _ = load_walls(args.walls, g, args.samples, args.seed)
    if len(w) > percolation.MAX_EXACT_CUTS:
        raise TooManyWalls(f"verify needs exact enumeration (<= {percolation.MAX_EXACT_CUTS} cuts), family has {len(w)}")
    rows = verify_model(g, w, args.t)
    if args.json:
        text = _json_text([{"check": c, "passed": ok, "detail": det} for c, ok, det in rows])
    else:
        width = max(len(c) for c, _, _ in rows)
        text = "".join(f"{c:<{width}}  {'PASS' if ok else 'FAIL'}  {det}\n" for c, ok, det in rows)
    _emit(text, args.out)
    return 0 if all(ok for _, ok, _ in rows) else 1


# ------------------------------------------------------------ parser


def _add_walls(p, required=True):
    p.add_argument("--graph", required=True, help="family descriptor (path6, grid:2,4) or edge-list file")
    p.add_argument("--walls", required=required,
                   help="radial:ROOT | identity | l1:FILE | hilbert:FILE | cuts:FILE")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="half-space samples for hilbert walls")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wallperc", description="Wall percolation on finite graphs.")
    sub = ap.add_subparsers(dest="command", required=True)

    gp = sub.add_parser("graph", help="generate graph families")
    gsub = gp.add_subparsers(dest="action", required=True)
    gen = gsub.add_parser("gen", help="write an edge list and distance CSV")
    gen.add_argument("--family", required=True, choices=sorted(FAMILIES))
    for name in ("n", "d", "side", "arity", "depth", "a", "b"):
        gen.add_argument(f"--{name}", type=int)
    gen.add_argument("--out", help="output prefix; writes PREFIX.edges and PREFIX.dist.csv")
    gen.set_defaults(func=cmd_graph)

    kp = sub.add_parser("kernel", help="kernel tests and transforms")
    kp.add_argument("action", choices=["check", "cutcone", "schoenberg", "embed"])
    kp.add_argument("--in", dest="input", required=True, help="kernel CSV")
    kp.add_argument("--pd", action="store_true")
    kp.add_argument("--cnd", action="store_true")
    kp.add_argument("--tol", type=float, default=1e-9)
    kp.add_argument("--lambda", dest="lam", type=float)
    kp.add_argument("--out")
    kp.set_defaults(func=cmd_kernel)

    pp = sub.add_parser("perc", help="percolation sweeps and exact laws")
    psub = pp.add_subparsers(dest="action", required=True)
    sw = psub.add_parser("sweep", help="two-point functions over a t-grid")
    _add_walls(sw)
    sw.add_argument("--t", required=True, help="comma-separated, strictly increasing")
    sw.add_argument("--mode", choices=["exact", "mc"], default="exact")
    sw.add_argument("--replicas", type=int, default=100_000)
    sw.add_argument("--out")
    sw.add_argument("--csv", help="write decay curves (r, sup tau beyond r per t)")
    sw.set_defaults(func=cmd_perc)
    dp = psub.add_parser("dist", help="exact law as a list of atoms")
    _add_walls(dp, required=False)
    dp.add_argument("--t", default="1")
    dp.add_argument("--bernoulli", type=float, help="independent edges open with this probability")
    dp.add_argument("--out")
    dp.set_defaults(func=cmd_perc)

    cp = sub.add_parser("compress", help="decay fits and dual kernels")
    csub = cp.add_subparsers(dest="action", required=True)
    fit = csub.add_parser("fit", help="fit a sweep and estimate the exponent")
    fit.add_argument("--in", dest="input", required=True, help="sweep JSON")
    fit.add_argument("--cap", type=float, default=compression.DEFAULT_CAP)
    fit.add_argument("--grid", help="alpha candidates, comma-separated")
    fit.add_argument("--out")
    fit.set_defaults(func=cmd_compress)
    dual = csub.add_parser("dual", help="dual kernels (1 - tau_n) / gamma_n")
    _add_walls(dual, required=False)
    dual.add_argument("--gammas", required=True)
    dual.add_argument("--alpha", type=float, default=1.0)
    dual.add_argument("--C", type=float, default=1.0)
    dual.add_argument("--out")
    dual.set_defaults(func=cmd_compress)

    dc = sub.add_parser("decompose", help="cut family of 1 - tau for an exact law")
    dc.add_argument("--in", dest="input", required=True, help="distribution JSON from perc dist")
    dc.add_argument("--graph", help="needed when the file is a bare atom list")
    dc.add_argument("--order", help="vertex order, comma-separated")
    dc.add_argument("--out")
    dc.set_defaults(func=cmd_decompose)

    vp = sub.add_parser("verify", help="run the invariant suite on one model")
    _add_walls(vp)
    vp.add_argument("--t", type=float, default=1.0)
    vp.add_argument("--json", action="store_true")
    vp.add_argument("--out")
    vp.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "perc" and args.action == "dist":
        if args.bernoulli is None and not args.walls:
            print("error: perc dist needs --walls or --bernoulli", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except WallpercError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
