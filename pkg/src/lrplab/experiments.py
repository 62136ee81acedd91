"""Experiment orchestration: config parsing, dispatch, persistence.

An experiment spec is a flat JSON-compatible key-value mapping (dotted
keys).  Runs are deterministic functions of (spec, seed): the worker
count never changes an emitted byte.  Every estimator experiment emits a
CSV with columns x,p_hat,ci_lo,ci_hi,trials,undecided,bias_bound (17
significant digits, LF line endings) plus a JSON summary (schema
``lrp-result/1``) echoing the spec, seeds, fitted slopes, the expected
theoretical exponent for its regime, and pass/fail against optional
tolerance bands.  Audit subcommands emit their own tabular schemas,
documented per handler.
"""

from __future__ import annotations

import json
import math
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import blocks as blk
from . import isoperimetry as iso
from .clusters import (EstimateSeries, FitError, cluster_tail_estimate,
                       exponent_fit, giant_fraction_estimate,
                       set_escape_estimate, truncated_one_arm_estimate)
from .graphs import GraphModel, Lattice, growth_fit, model_from_config
from .kernel import KernelSpec, degree_profile
from .oracle import (MicroWindow, enumerate_exact, ev_all_finite,
                     ev_cluster_tail_and_finite, ev_giant,
                     ev_one_arm_and_finite)
from .sampler import ESCAPING, FINITE, PairTable, UNDECIDED, sample_configuration
from .window import Window, external_masses

SCHEMA = "lrp-result/1"

KINDS = ("one-arm", "cluster-tail", "set-escape", "giant", "iso-audit",
         "iso-dim", "blocks-audit", "peierls", "ftrees", "oracle-verify",
         "kernel-audit")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


@dataclass
class ExperimentSpec:
    kind: str
    config: dict
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")

    @classmethod
    def from_file(cls, kind: str, path: str, seed=None, workers=None):
        with open(path) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ValueError("config must be a flat JSON object")
        return cls(kind=kind, config=cfg,
                   seed=int(cfg.get("run.seed", 0) if seed is None else seed),
                   workers=int(cfg.get("run.workers", 1) if workers is None else workers))

    def serialize(self) -> str:
        return json.dumps({"kind": self.kind, "config": self.config,
                           "seed": self.seed, "workers": self.workers},
                          sort_keys=True)

    @classmethod
    def parse(cls, text: str) -> "ExperimentSpec":
        d = json.loads(text)
        return cls(kind=d["kind"], config=d["config"], seed=d["seed"],
                   workers=d["workers"])


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    csv_header: list
    csv_rows: list
    summary: dict
    passed: bool
    wall_clock: float

    def csv_text(self) -> str:
        lines = [",".join(self.csv_header)]
        for row in self.csv_rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def expected_exponent(kind: str, d: int, alpha: float) -> float | None:
    """Theoretical exponent attached to each scaling experiment.

    One-arm estimates decay like r^{d(1-alpha)}; the finite-cluster tail
    is stretched-exponential exp(-c k^zeta) with driving exponent
    zeta = max(2 - alpha, (d-1)/d), which switches branch at
    alpha = 1 + 1/d.
    """
    if kind == "one-arm":
        return d * (1.0 - alpha)
    if kind == "cluster-tail":
        return max(2.0 - alpha, (d - 1) / d)
    return None


def _build(config):
    model = model_from_config(config)
    table = None
    if "kernel.table" in config:
        table = {}
        with open(config["kernel.table"]) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                dist, val = line.split()
                table[int(dist)] = float(val)
    spec = KernelSpec(model, alpha=float(config["kernel.alpha"]),
                      beta=float(config["kernel.beta"]),
                      r_j=int(config.get("kernel.rj", 1)),
                      c_j=float(config.get("kernel.cj", 1.0)),
                      C_j=float(config.get("kernel.Cj", 1.0)),
                      table=table)
    return model, spec


def _build_window(model, config):
    return Window.ball(model, r_in=int(config["window.r_in"]),
                       r_out=int(config["window.r_out"]) if "window.r_out" in config else None,
                       guard=int(config["window.guard"]) if "window.guard" in config else None)


ESTIMATE_HEADER = ["x", "p_hat", "ci_lo", "ci_hi", "trials", "undecided", "bias_bound"]


def _series_rows(series: EstimateSeries):
    rows = []
    for i in range(len(series.x)):
        rows.append([series.x[i], series.p_hat[i], series.ci_lo[i], series.ci_hi[i],
                     int(series.trials[i]), int(series.undecided[i]),
                     series.bias_bound[i]])
    return rows


def _fit_summary(series, transform):
    try:
        fit = exponent_fit(series, transform=transform)
        return {"slope": fit.slope, "stderr": fit.stderr,
                "n_points": fit.n_points, "transform": transform, "error": None}
    except FitError as exc:
        return {"slope": None, "stderr": None, "n_points": 0,
                "transform": transform, "error": str(exc)}


def _band_check(summary, config):
    band = config.get("fit.band")
    if band is None:
        return True
    slope = summary.get("slope")
    return slope is not None and band[0] <= slope <= band[1]


def run(spec: ExperimentSpec) -> ExperimentResult:
    t0 = time.perf_counter()
    handler = _HANDLERS[spec.kind]
    header, rows, summary, passed = handler(spec)
    wall = time.perf_counter() - t0
    summary = {"schema": SCHEMA, "kind": spec.kind, "seed": spec.seed,
               "workers": spec.workers, "spec": spec.config, **summary}
    return ExperimentResult(spec=spec, csv_header=header, csv_rows=rows,
                            summary=summary, passed=passed, wall_clock=wall)


def emit(result: ExperimentResult, out_dir: str) -> dict:
    """Write <kind>.csv and summary.json; returns the file paths."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{result.spec.kind}.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(result.csv_text())
    summary = dict(result.summary)
    summary["passed"] = result.passed
    summary["wall_clock_seconds"] = result.wall_clock
    summary["environment"] = {"python": platform.python_version(),
                              "numpy": np.__version__,
                              "machine": platform.machine()}
    json_path = os.path.join(out_dir, "summary.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1, default=float)
        fh.write("\n")
    return {"csv": csv_path, "summary": json_path}


# -- estimator kinds -----------------------------------------------------------

def _h_one_arm(spec: ExperimentSpec):
    cfg = spec.config
    model, kspec = _build(cfg)
    window = _build_window(model, cfg)
    r_list = [int(r) for r in cfg["one_arm.r_list"]]
    series = truncated_one_arm_estimate(kspec, window, r_list,
                                        int(cfg["run.trials"]), spec.seed,
                                        workers=spec.workers)
    fit = _fit_summary(series, "LOGLOG")
    summary = {"fit": fit, "expected_exponent": expected_exponent("one-arm", model.d, kspec.alpha)}
    return ESTIMATE_HEADER, _series_rows(series), summary, _band_check(fit, cfg)


def _h_cluster_tail(spec: ExperimentSpec):
    cfg = spec.config
    model, kspec = _build(cfg)
    k_list = [int(k) for k in cfg["cluster_tail.k_list"]]
    if "window.r_in" in cfg:
        window = _build_window(model, cfg)
    else:
        r_out = max(8, math.ceil(4.0 * max(k_list) ** (1.0 / model.d)))
        window = Window.ball(model, r_in=r_out // 2, r_out=r_out)
    series = cluster_tail_estimate(kspec, window, k_list,
                                   int(cfg["run.trials"]), spec.seed,
                                   workers=spec.workers)
    fit = _fit_summary(series, "LOGLOGLOG")
    summary = {"fit": fit,
               "expected_exponent": expected_exponent("cluster-tail", model.d, kspec.alpha)}
    return ESTIMATE_HEADER, _series_rows(series), summary, _band_check(fit, cfg)


def _h_set_escape(spec: ExperimentSpec):
    cfg = spec.config
    model, kspec = _build(cfg)
    window = _build_window(model, cfg)
    S = [tuple(v) for v in cfg["set_escape.set"]]
    est = set_escape_estimate(kspec, window, S, int(cfg["run.trials"]), spec.seed)
    summary = {"n_components": est.n_components, "set_size": est.set_size,
               "surface_term": est.surface_term}
    return ESTIMATE_HEADER, _series_rows(est.series), summary, True


def _h_giant(spec: ExperimentSpec):
    cfg = spec.config
    model, kspec = _build(cfg)
    series = giant_fraction_estimate(kspec, int(cfg["giant.r"]),
                                     float(cfg["giant.rho"]),
                                     int(cfg["run.trials"]), spec.seed,
                                     workers=spec.workers)
    return ESTIMATE_HEADER, _series_rows(series), {"rho": cfg["giant.rho"]}, True


# -- audit kinds ----------------------------------------------------------------

def _h_iso_audit(spec: ExperimentSpec):
    cfg = spec.config
    model, _ = _build(cfg)
    max_cells = int(cfg.get("iso.max_cells", 8))
    r_max = int(cfg.get("iso.r_max", 4))
    sets = iso.connected_sets_up_to_translation(max_cells)
    rows = []
    violations = 0
    for sid, A in enumerate(sorted(sets, key=lambda s: (len(s), sorted(s)))):
        bnd = len(iso.inner_boundary(A, model))
        ratio = bnd / len(A) ** ((model.d - 1) / model.d)
        rows.append([sid, len(A), bnd, ratio])
        for r in range(1, r_max + 1):
            rep = iso.pair_count(A, r, model)
            violations += rep.varopoulos_violated
    fit = iso.iso_constant_fit(sets, model)
    summary = {"c_iso_hat": fit.c_hat, "n_sets": len(sets),
               "varopoulos_violations": violations, "r_max": r_max}
    return ["set_id", "size", "boundary", "ratio"], rows, summary, violations == 0


def _h_iso_dim(spec: ExperimentSpec):
    cfg = spec.config
    model, kspec = _build(cfg)
    window = _build_window(model, cfg)
    masses = external_masses(window, kspec)
    radii = cfg.get("iso.radii") or [r for r in (2, 3, 4, 6, 8, 12, 16, 24, 32)
                                     if r <= window.r_in]
    from .sampler import finiteness_verdict, origin_cluster_indices, _sample_sweep
    table = PairTable(window, kspec)
    trial = 0
    while True:
        opens = _sample_sweep(table, spec.seed, trial)
        K = origin_cluster_indices(table, opens)
        v = finiteness_verdict(window, kspec, K, masses, spec.seed, trial)
        if v.kind == ESCAPING:
            break
        trial += 1
        if trial > 1000:
            raise RuntimeError("no escaping cluster found in 1000 trials")
    config = sample_configuration(table, seed=spec.seed, trial=trial)
    est = iso.anchored_dimension_estimate(config, radii)
    rows = [[int(r), int(s), int(b), 0.0]
            for r, s, b in zip(radii, est.sizes, est.boundaries)]
    summary = {"d_hat": est.d_hat, "slope": est.slope, "stderr": est.stderr,
               "trial_used": trial}
    return ["r", "set_size", "edge_boundary", "pad"], rows, summary, True


def _h_blocks_audit(spec: ExperimentSpec):
    """Decomposition invariants over sampled finite clusters.

    For every FINITE-verdict trial: blocks pairwise at distance >= 2 and
    closed, block graph connected, decomposition isolated inside the
    window, and the boundary-nesting inequality
    sum #boundary(blocks) <= sum #boundary(components).
    """
    cfg = spec.config
    model, kspec = _build(cfg)
    window = _build_window(model, cfg)
    masses = external_masses(window, kspec)
    table = PairTable(window, kspec)
    trials = int(cfg["run.trials"])
    from .sampler import finiteness_verdict, origin_cluster_indices
    n_finite = n_checked = n_failures = 0
    for t in range(trials):
        config = sample_configuration(table, seed=spec.seed, trial=t, method="shell")
        K = origin_cluster_indices(table, config.open_pairs)
        v = finiteness_verdict(window, kspec, K, masses, spec.seed, t)
        if v.kind != FINITE:
            continue
        n_finite += 1
        K_verts = frozenset(window.vertices[i] for i in K)
        try:
            dec = blk.block_decomposition(K_verts, window, origin=window.origin)
            H, _ = blk.block_graph(config, dec)
            ok = blk.block_graph_connected(dec, H) and blk.is_isolated(config, dec)
            comps = blk.one_connected_components(K_verts, model)
            comp_bnd = sum(len(iso.inner_boundary(c, model)) for c in comps)
            blk_bnd = sum(dec.boundary_sizes())
            ok = ok and blk_bnd <= comp_bnd
            for a in range(dec.b):
                for b in range(a + 1, dec.b):
                    dmin = min(model.distance(x, y)
                               for x in dec.blocks[a] for y in dec.blocks[b])
                    ok = ok and dmin >= 2
        except Exception:
            ok = False
        n_checked += 1
        if not ok:
            n_failures += 1
    rows = [[trials, n_finite, n_checked, n_failures]]
    summary = {"trials": trials, "finite_clusters": n_finite,
               "failures": n_failures}
    return ["trials", "finite", "checked", "failures"], rows, summary, n_failures == 0


def _h_peierls(spec: ExperimentSpec):
    cfg = spec.config
    m_cap = int(cfg.get("peierls.m_cap", 10))
    counts, violations = blk.peierls_census(m_cap)
    rows = []
    for m in range(1, m_cap + 1):
        c = int(counts[m])
        rows.append([m, c, math.log(c) / m if c > 0 else 0.0])
    summary = {"m_cap": m_cap, "boundary_2conn_violations": violations,
               "counts": [int(c) for c in counts[1:]]}
    return ["m", "count", "log_count_over_m"], rows, summary, violations == 0


def _h_ftrees(spec: ExperimentSpec):
    cfg = spec.config
    b_max = int(cfg.get("ftrees.b_max", 6))
    rows = []
    from math import comb
    for b in range(1, b_max + 1):
        F = blk.forward_degree_vectors(b)
        R = blk.realizable_f_trees(b)
        rows.append([b, len(F), len(R), comb(2 * b - 2, b - 1)])
    summary = {"b_max": b_max}
    return ["b", "n_vectors", "n_realizable", "binomial_bound"], rows, summary, True


def _h_oracle_verify(spec: ExperimentSpec):
    """Monte Carlo estimators against exhaustive enumeration (3 sigma)."""
    cfg = spec.config
    model, kspec = _build(cfg)
    nx, ny = int(cfg.get("oracle.nx", 3)), int(cfg.get("oracle.ny", 2))
    trials = int(cfg.get("run.trials", 100000))
    micro = MicroWindow.rectangle(model, nx, ny, kspec)
    window = micro.window
    rows = []
    ok = True

    def check(name, exact, series, i=0):
        nonlocal ok
        sig = max(series.sigma()[i], 1e-12)
        dev = abs(series.p_hat[i] - exact) / sig
        rows.append([name, exact, series.p_hat[i], dev])
        ok = ok and dev <= 3.0

    r_vals = sorted({int(d) for d in window.dist0 if 0 < d < max(window.dist0)})
    arm = truncated_one_arm_estimate(kspec, window, r_vals, trials, spec.seed)
    for i, r in enumerate(r_vals):
        check(f"one_arm_r{r}", enumerate_exact(micro, ev_one_arm_and_finite(r)), arm, i)
    k_vals = list(range(1, 6))
    tail = cluster_tail_estimate(kspec, window, k_vals, trials, spec.seed)
    for i, k in enumerate(k_vals):
        check(f"tail_k{k}", enumerate_exact(micro, ev_cluster_tail_and_finite(k)), tail, i)
    S = [window.vertices[0], window.vertices[-1]]
    esc = set_escape_estimate(kspec, window, S, trials, spec.seed)
    idxS = [window.index[v] for v in S]
    check("set_escape", enumerate_exact(micro, ev_all_finite(idxS)), esc.series)
    rho = float(cfg.get("giant.rho", 0.5))
    thr = math.ceil(rho * window.n)
    from .clusters import EstimateSeries as ES
    import numpy as _np
    num = 0
    from .sampler import _sample_sweep, origin_cluster_indices
    table = PairTable(window, kspec)
    for t in range(trials):
        opens = _sample_sweep(table, spec.seed, t)
        num += len(origin_cluster_indices(table, opens)) >= thr
    giant_series = ES.from_counts([window.n], [num], trials, 0, 0.0)
    check("giant", enumerate_exact(micro, ev_giant(thr)), giant_series)
    summary = {"trials": trials, "all_within_3_sigma": ok}
    return ["event", "exact", "estimate", "deviation_sigmas"], rows, summary, ok


def _h_kernel_audit(spec: ExperimentSpec):
    """Tail-degree sandwich variation and total-length divergence flags."""
    cfg = spec.config
    model, kspec = _build(cfg)
    horizon = int(cfg.get("kernel.audit_horizon", 512))
    prof = degree_profile(kspec, horizon)
    rows = []
    products = []
    for r in (8, 16, 32, 64):
        if r > horizon:
            continue
        tail = prof.tail_degree(r)
        prod = tail.exact * r ** (model.d * (kspec.alpha - 1.0))
        products.append(prod)
        rows.append([r, tail.exact, tail.remainder, prod])
    variation = max(products) / min(products) if products else math.inf
    summary = {"variation_factor": variation,
               "length_divergent": prof.length_divergent,
               "length_partial_sums": [float(v) for v in prof.length_partial]}
    return ["r", "tail_exact", "tail_remainder", "sandwich_product"], rows, summary, variation < 2.0


_HANDLERS = {
    "one-arm": _h_one_arm,
    "cluster-tail": _h_cluster_tail,
    "set-escape": _h_set_escape,
    "giant": _h_giant,
    "iso-audit": _h_iso_audit,
    "iso-dim": _h_iso_dim,
    "blocks-audit": _h_blocks_audit,
    "peierls": _h_peierls,
    "ftrees": _h_ftrees,
    "oracle-verify": _h_oracle_verify,
    "kernel-audit": _h_kernel_audit,
}
