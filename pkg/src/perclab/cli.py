"""Command-line front end: ``perclab <group> <command> [flags]``.

Every report is a JSON document (or CSV with ``#`` header lines) holding the
tool version, the effective run specification and the result.  Wall time and
worker count live in a separate ``meta`` block so that replaying a run
specification reproduces everything else bit for bit.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ParameterError, PerclabError
from .exact import Surd, to_json_number

__all__ = ["RunSpec", "dispatch", "load_runspec", "main", "read_config", "runspec_to_config"]

FAMILY_KEYS = ("family", "n1", "n2", "b", "degree", "k", "n", "d", "colored", "base")
COMMON_KEYS = ("seed", "trials", "workers", "format", "out", "config")

# option name -> (type, help)
OPTIONS = {
    "family": (str, "graph family, e.g. oriented-tree"),
    "n1": (int, "forward edges per vertex"),
    "n2": (int, "backward edges per vertex"),
    "b": (int, "children per vertex"),
    "degree": (int, "vertex degree"),
    "k": (int, "first tree branching (Diestel-Leader) or slab levels"),
    "n": (int, "second tree branching (Diestel-Leader) or slab levels"),
    "d": (int, "dimension"),
    "colored": (int, "two-colour the lattice (0/1)"),
    "base": (str, "base family of a product, as JSON"),
    "radius": (int, "ball radius"),
    "n_levels": (int, "number of extra levels in a slab"),
    "depth": (int, "BFS depth"),
    "transport": (str, "transport name or 'all'"),
    "weights": (str, "orbit weights: mu, uniform or comma-separated rationals"),
    "conductance": (str, "edge conductance: unit or sqrt_m"),
    "p": (float, "edge probability"),
    "distance": (int, "target distance from the origin"),
    "max_distance": (int, "largest target distance"),
    "margin": (int, "extra window radius beyond the target"),
    "radii": (str, "comma-separated radii"),
    "kind": (str, "kernel: sqrt_biased, delayed_srw or plain_srw"),
    "reverse": (int, "use the time-reversed kernel (0/1)"),
    "steps": (int, "steps per direction"),
    "steps_forward": (int, "forward steps"),
    "steps_backward": (int, "backward steps"),
    "process": (str, "bernoulli or ray-decoration"),
    "n_max": (int, "largest slab size in a scan"),
    "tol": (float, "relative tolerance"),
    "validate_depth": (int, "BFS depth for the state-graph self-test"),
    "seed": (int, "64-bit seed"),
    "trials": (int, "Monte Carlo trials"),
    "workers": (int, "parallel workers"),
    "format": (str, "json or csv"),
    "out": (str, "output path (stdout if omitted)"),
}

# (group, command) -> (uses family, stochastic, required, defaults)
COMMANDS = {
    ("graph", "info"): (True, False, (), {}),
    ("graph", "ball"): (True, False, ("radius",), {}),
    ("graph", "slab"): (True, False, ("n_levels", "depth"), {}),
    ("tmtp", "verify"): (True, False, (), {"transport": "all", "weights": "mu"}),
    ("tmtp", "mu"): (True, False, (), {}),
    ("tmtp", "harmonic"): (True, False, (), {"radius": 4, "weights": "mu", "conductance": "unit"}),
    ("tmtp", "cocycle"): (True, True, (), {"trials": 1000, "radius": 4, "weights": "mu"}),
    ("perc", "sample"): (True, True, ("radius", "p"), {}),
    ("perc", "clusters"): (True, True, ("radius", "p"), {}),
    ("perc", "connect"): (True, True, ("p", "distance"), {"trials": 10000, "margin": 1}),
    ("perc", "decay"): (True, True, ("p", "max_distance"), {"trials": 10000, "margin": 1}),
    ("perc", "mass"): (True, True, ("p", "radii"), {}),
    ("perc", "ray-decoration"): (True, True, ("radius",), {"degree": 3}),
    ("walk", "kernel"): (True, True, ("p",), {"radius": 2, "kind": "sqrt_biased", "reverse": 0}),
    ("walk", "simulate"): (True, True, ("p",), {"steps_forward": 100, "steps_backward": 100, "kind": "sqrt_biased"}),
    ("walk", "stationarity"): (True, True, ("p",), {"radius": 4, "kind": "sqrt_biased"}),
    ("walk", "frequency"): (True, True, ("p", "steps"), {"kind": "plain_srw"}),
    ("walk", "conductance"): (True, True, ("radii",), {"process": "bernoulli", "p": 1.0, "conductance": "unit"}),
    ("threshold", "ph"): (False, False, ("n1", "n2"), {}),
    ("threshold", "slab-spectral"): (False, False, ("n1", "n2", "n"), {"tol": 1e-12}),
    ("threshold", "scan"): (False, False, ("n1", "n2", "n_max"), {"tol": 1e-12}),
    ("threshold", "pu-bound"): (False, False, ("b",), {}),
}

OP_KEYS = {
    ("graph", "ball"): ("radius",),
    ("graph", "slab"): ("n_levels", "depth"),
    ("tmtp", "verify"): ("transport", "weights"),
    ("tmtp", "harmonic"): ("radius", "weights", "conductance"),
    ("tmtp", "cocycle"): ("radius", "weights"),
    ("perc", "sample"): ("radius", "p"),
    ("perc", "clusters"): ("radius", "p"),
    ("perc", "connect"): ("p", "distance", "margin"),
    ("perc", "decay"): ("p", "max_distance", "margin"),
    ("perc", "mass"): ("p", "radii", "radius"),
    ("perc", "ray-decoration"): ("radius",),
    ("walk", "kernel"): ("p", "radius", "kind", "reverse"),
    ("walk", "simulate"): ("p", "radius", "kind", "steps_forward", "steps_backward"),
    ("walk", "stationarity"): ("p", "radius", "kind"),
    ("walk", "frequency"): ("p", "steps", "kind"),
    ("walk", "conductance"): ("radii", "process", "p", "conductance"),
    ("threshold", "ph"): ("n1", "n2"),
    ("threshold", "slab-spectral"): ("n1", "n2", "n", "tol", "validate_depth"),
    ("threshold", "scan"): ("n1", "n2", "n_max", "tol"),
    ("threshold", "pu-bound"): ("b",),
}


class UsageError(Exception):
    pass


@dataclass
class RunSpec:
    subcommand: str
    family: dict | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None
    trials: int | None = None
    output_path: str | None = None
    format: str = "json"

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------


def read_config(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", line=lineno)
        if key not in OPTIONS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        typ = OPTIONS[key][0]
        try:
            out[key] = typ(value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key}", line=lineno) from None
    return out


def load_runspec(path, overrides: dict, command: tuple = ("threshold", "ph")) -> RunSpec:
    """Merge command defaults, the config file at ``path`` and flag ``overrides`` (in that order)."""
    uses_family, stochastic, required, defaults = COMMANDS[command]
    values = dict(defaults)
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(read_config(text))
    values.update({k: v for k, v in overrides.items() if v is not None})
    missing = [k for k in required if values.get(k) is None]
    if uses_family and values.get("family") is None:
        missing.insert(0, "family")
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    family = None
    if uses_family:
        family = {"family": values["family"].replace("-", "_"), "params": _family_params(values)}
    if stochastic and values.get("seed") is None:
        values["seed"] = secrets.randbits(63)
    params = {k: values[k] for k in OP_KEYS.get(command, ()) if values.get(k) is not None}
    fmt = values.get("format") or "json"
    if fmt not in ("json", "csv"):
        raise UsageError(f"unknown format {fmt!r}")
    return RunSpec(
        subcommand=" ".join(command),
        family=family,
        params=params,
        seed=values.get("seed"),
        trials=values.get("trials"),
        output_path=values.get("out"),
        format=fmt,
    )


def runspec_to_config(runspec: dict) -> str:
    """Render an emitted run specification as a config file that replays it."""
    lines = []
    fam = runspec.get("family")
    if fam:
        lines.append(f"family={fam['family']}")
        for k, v in fam["params"].items():
            lines.append(f"{k}={json.dumps(v) if isinstance(v, dict) else int(v)}")
    for k, v in runspec.get("params", {}).items():
        lines.append(f"{k}={v}")
    for k in ("seed", "trials"):
        if runspec.get(k) is not None:
            lines.append(f"{k}={runspec[k]}")
    lines.append(f"format={runspec.get('format', 'json')}")
    return "\n".join(lines) + "\n"


_FAMILY_PARAMS = {
    "fixed_end_tree": ("degree",),
    "grandparent": ("b",),
    "oriented_tree": ("n1", "n2"),
    "diestel_leader": ("k", "n"),
    "subdivided_fixed_end_tree": ("degree",),
    "euclidean_lattice": ("d", "colored"),
    "product_with_Z": ("base", "d"),
}


def _family_params(values) -> dict:
    kind = values["family"].replace("-", "_")
    if kind not in _FAMILY_PARAMS:
        raise UsageError(f"unknown family {values['family']!r}; choose from {sorted(_FAMILY_PARAMS)}")
    out = {}
    for key in _FAMILY_PARAMS[kind]:
        v = values.get(key)
        if v is None:
            if key == "colored":
                continue
            if key == "d" and kind == "product_with_Z":
                continue
            raise UsageError(f"family {kind} needs --{key}")
        if key == "base":
            v = json.loads(v) if isinstance(v, str) else v
        elif key == "colored":
            v = bool(v)
        out[key] = v
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, (Fraction, Surd)):
        return to_json_number(x)
    if isinstance(x, bool) or x is None or isinstance(x, (str, int)):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    raise TypeError(f"cannot serialize {type(x).__name__}")


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _family(run: RunSpec):
    from .graphs import family_from_dict

    return family_from_dict(run.family)


def _weights(g, text):
    from .graphs import OrbitWeights
    from .tmtp import solve_mu

    if text == "mu":
        return solve_mu(g)
    if text == "uniform":
        return OrbitWeights.for_family(g)
    return OrbitWeights.for_family(g, [Fraction(t) for t in text.split(",")])


def _radii(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def _vertex_at_distance(g, d):
    from .graphs import ball

    win = ball(g, g.origin, d)
    return win.vertices[int(np.flatnonzero(win.dist == d)[0])]


def cmd_graph_info(run, workers):
    g = _family(run)
    return {
        "family": g.kind,
        "params": g.params(),
        "orbit_count": g.orbit_count,
        "orbit_degrees": list(g.orbit_degrees),
        "orbit_m": list(g.orbit_m),
        "modular_base": g.modular_base,
        "unimodular": g.unimodular,
        "origin": g.vertex_to_json(g.origin),
        "slot_pattern": [list(map(list, g.slot_pattern(o))) for o in range(g.orbit_count)],
    }


def _window_summary(win):
    from .graphs import window_to_dict

    doc = window_to_dict(win)
    sizes = np.bincount(win.dist).tolist()
    return {"n_vertices": len(win), "n_edges": win.n_edges, "n_boundary": len(win.boundary), "sphere_sizes": sizes, "window": doc}


def cmd_graph_ball(run, workers):
    from .graphs import ball

    g = _family(run)
    return _window_summary(ball(g, g.origin, run.params["radius"]))


def cmd_graph_slab(run, workers):
    from .graphs import slab_component

    g = _family(run)
    return _window_summary(slab_component(g, g.origin, run.params["n_levels"], run.params["depth"]))


def cmd_tmtp_verify(run, workers):
    from .errors import ParameterError
    from .tmtp import transport_suite, verify_tmtp

    g = _family(run)
    w = _weights(g, run.params["weights"])
    suite = transport_suite(g)
    name = run.params["transport"]
    if name != "all":
        suite = [f for f in suite if f.name == name]
        if not suite:
            raise ParameterError(f"unknown transport {name!r} for {g.kind}")
    rows = []
    for f in suite:
        lhs, rhs = verify_tmtp(g, w, f)
        rows.append({"transport": f.name, "lhs": lhs, "rhs": rhs, "equal": lhs == rhs})
    return {"weights": list(w.a), "rows": rows, "all_equal": all(r["equal"] for r in rows)}


def cmd_tmtp_mu(run, workers):
    from .tmtp import harmonic_system_residuals, lazy_orbit_chain, solve_mu, solve_mu_linear

    g = _family(run)
    chain = lazy_orbit_chain(g)
    mu = solve_mu(g)
    return {
        "transition": [list(r) for r in chain.transition],
        "stationary": list(chain.stationary),
        "mu": list(mu.a),
        "mu_linear": list(solve_mu_linear(g)),
        "residuals": list(harmonic_system_residuals(g, mu.a)),
    }


def cmd_tmtp_harmonic(run, workers):
    from .exact import sqrt_rational
    from .graphs import ball
    from .tmtp import harmonicity_residual

    g = _family(run)
    w = _weights(g, run.params["weights"])
    win = ball(g, g.origin, run.params["radius"])
    c = None
    if run.params["conductance"] == "sqrt_m":
        c = lambda x, y: sqrt_rational(g.m(x) * g.m(y))  # noqa: E731
    res = harmonicity_residual(g, w, g.origin, win, c)
    return {"weights": list(w.a), "conductance": run.params["conductance"], "residual": res, "zero": not res}


def cmd_tmtp_cocycle(run, workers):
    from .tmtp import cocycle_check

    g = _family(run)
    w = _weights(g, run.params["weights"])
    dev = cocycle_check(g, w, run.trials, run.seed, run.params["radius"])
    return {"max_deviation": dev, "trials": run.trials}


def _config(run):
    from .graphs import ball
    from .percolation import sample_config

    g = _family(run)
    return sample_config(ball(g, g.origin, run.params["radius"]), run.params["p"], run.seed)


def cmd_perc_sample(run, workers):
    from .percolation import config_to_dict

    cfg = _config(run)
    return {"n_edges": cfg.window.n_edges, "n_open": cfg.n_open, "config": config_to_dict(cfg)}


def cmd_perc_clusters(run, workers):
    from .percolation import clusters

    cfg = _config(run)
    dec = clusters(cfg)
    sizes = sorted((s.size for s in dec.stats.values()), reverse=True)
    origin = dec.stats[dec.root(cfg.window.center)]
    return {
        "n_clusters": dec.n_clusters,
        "largest": sizes[:10],
        "origin_cluster": asdict(origin),
        "boundary_touching": sum(s.boundary_touch for s in dec.stats.values()),
    }


def cmd_perc_connect(run, workers):
    from .percolation import connectivity_estimate

    g = _family(run)
    y = _vertex_at_distance(g, run.params["distance"])
    ph, se = connectivity_estimate(
        g, run.params["p"], g.origin, y, run.trials, run.seed, run.params["margin"], workers
    )
    return {"target": g.vertex_to_json(y), "distance": run.params["distance"], "p_hat": ph, "se": se, "n_trials": run.trials}


def cmd_perc_decay(run, workers):
    from .percolation import decay_curve

    g = _family(run)
    targets = [_vertex_at_distance(g, d) for d in range(1, run.params["max_distance"] + 1)]
    rows = decay_curve(g, run.params["p"], g.origin, targets, run.trials, run.seed, run.params["margin"], workers)
    return {
        "rows": [
            {"distance": r.distance, "p_hat": r.p_hat, "se": r.se, "n_trials": r.n_trials, "running_min": r.running_min}
            for r in rows
        ]
    }


def cmd_perc_mass(run, workers):
    from .graphs import ball
    from .percolation import LazyConfig, sample_config, tilted_mass

    g = _family(run)
    radii = _radii(run.params["radii"])
    if g.is_tree and "radius" not in run.params:
        cfg = LazyConfig(g, run.params["p"], run.seed)
    else:
        R = run.params.get("radius", radii[-1])
        cfg = sample_config(ball(g, g.origin, R), run.params["p"], run.seed)
    masses = tilted_mass(cfg, g.origin, radii)
    return {"rows": [{"R": r, "mass": m} for r, m in zip(radii, masses)]}


def cmd_perc_ray_decoration(run, workers):
    from .graphs import ball
    from .percolation import ray_decoration_sample

    g = _family(run)
    win = ball(g, g.origin, run.params["radius"])
    s = ray_decoration_sample(win, run.seed)
    rows = []
    for n in range(int(s.height.max()) + 1 if (s.height >= 0).any() else 0):
        sel = s.height == n
        rows.append({"n": n, "edges": int(sel.sum()), "inserted": int(s.omega2.open[sel].sum())})
    return {
        "n_edges": win.n_edges,
        "omega1_open": s.omega1.n_open,
        "omega2_open": s.omega2.n_open,
        "censored": int(s.censored.sum()),
        "insertion_by_height": rows,
    }


def _walk_config(run):
    from .graphs import ball
    from .percolation import LazyConfig, sample_config

    g = _family(run)
    if "radius" in run.params:
        return sample_config(ball(g, g.origin, run.params["radius"]), run.params["p"], run.seed)
    return LazyConfig(g, run.params["p"], run.seed)


def cmd_walk_kernel(run, workers):
    from .walks import Kernel

    cfg = _walk_config(run)
    g = cfg.graph
    k = Kernel(run.params["kind"], g, None if run.params["kind"] == "plain_srw" else cfg, bool(run.params["reverse"]))
    dist = k.evaluate(g.origin)
    return {"vertex": g.vertex_to_json(g.origin), "rows": [{"to": g.vertex_to_json(v), "prob": q} for v, q in dist.items()]}


def cmd_walk_simulate(run, workers):
    from .walks import simulate_two_sided

    cfg = _walk_config(run)
    g = cfg.graph
    tr = simulate_two_sided(cfg, g.origin, run.params["steps_forward"], run.params["steps_backward"], run.seed, run.params["kind"])
    return {
        "truncated": tr.truncated,
        "range": [tr.lo, tr.hi],
        "csv": tr.to_csv(g),
    }


def cmd_walk_stationarity(run, workers):
    from .walks import stationarity_check

    cfg = _walk_config(run)
    rep = stationarity_check(cfg, run.params["kind"])
    return {"stationarity": rep.stationarity, "detailed_balance": rep.detailed_balance, "n_vertices": rep.n_vertices}


def cmd_walk_frequency(run, workers):
    from .percolation import LazyConfig
    from .walks import frequency_pair

    g = _family(run)
    fp = frequency_pair(LazyConfig(g, run.params["p"], run.seed), run.params["steps"], run.seed, run.params["kind"])
    return {"forward": fp.forward, "backward": fp.backward, "gap": fp.gap}


def cmd_walk_conductance(run, workers):
    from .percolation import LazyConfig, RayDecoration
    from .walks import conductance_rows, tree_cluster_network

    g = _family(run)
    if run.params["process"] == "ray-decoration":
        cfg = RayDecoration(g, run.seed)
    else:
        cfg = LazyConfig(g, run.params["p"], run.seed)
    cond = run.params["conductance"]
    rows = conductance_rows(lambda R: tree_cluster_network(cfg, g.origin, R, cond), _radii(run.params["radii"]))
    return {"rows": rows}


def cmd_threshold_ph(run, workers):
    from .thresholds import ph_closed_form

    v = ph_closed_form(run.params["n1"], run.params["n2"])
    return {"value": v.value, "exact": v.exact}


def cmd_threshold_slab_spectral(run, workers):
    from .thresholds import growth_estimate, slab_spectral_radius, slab_state_graph

    p = run.params
    sg = slab_state_graph(p["n1"], p["n2"], p["n"], p.get("validate_depth"))
    lam = slab_spectral_radius(sg, tol=p["tol"])
    return {
        "states": len(sg.states) - 1,
        "lambda_star": lam.value,
        "inv_lambda": lam.inv,
        "bracket": [lam.lower, lam.upper],
        "iterations": lam.iterations,
        "degenerate": lam.degenerate,
        "bfs_estimate": growth_estimate(sg),
    }


def cmd_threshold_scan(run, workers):
    from .thresholds import ph_limit_scan, scan_to_csv

    p = run.params
    rep = ph_limit_scan(p["n1"], p["n2"], p["n_max"], tol=p["tol"])
    return {
        "rows": [
            {"n": n, "states": k, "lambda_star": lam, "inv_lambda": inv, "bfs_estimate": bfs}
            for (n, lam, inv, bfs), k in zip(rep.rows, rep.states)
        ],
        "closed_form": rep.closed_form,
        "monotone": rep.monotone,
        "terminal_gap": rep.terminal_gap,
        "csv": scan_to_csv(rep),
    }


def cmd_threshold_pu_bound(run, workers):
    from .thresholds import pu_lower_bound

    return {"value": pu_lower_bound(run.params["b"])}


HANDLERS = {
    ("graph", "info"): cmd_graph_info,
    ("graph", "ball"): cmd_graph_ball,
    ("graph", "slab"): cmd_graph_slab,
    ("tmtp", "verify"): cmd_tmtp_verify,
    ("tmtp", "mu"): cmd_tmtp_mu,
    ("tmtp", "harmonic"): cmd_tmtp_harmonic,
    ("tmtp", "cocycle"): cmd_tmtp_cocycle,
    ("perc", "sample"): cmd_perc_sample,
    ("perc", "clusters"): cmd_perc_clusters,
    ("perc", "connect"): cmd_perc_connect,
    ("perc", "decay"): cmd_perc_decay,
    ("perc", "mass"): cmd_perc_mass,
    ("perc", "ray-decoration"): cmd_perc_ray_decoration,
    ("walk", "kernel"): cmd_walk_kernel,
    ("walk", "simulate"): cmd_walk_simulate,
    ("walk", "stationarity"): cmd_walk_stationarity,
    ("walk", "frequency"): cmd_walk_frequency,
    ("walk", "conductance"): cmd_walk_conductance,
    ("threshold", "ph"): cmd_threshold_ph,
    ("threshold", "slab-spectral"): cmd_threshold_slab_spectral,
    ("threshold", "scan"): cmd_threshold_scan,
    ("threshold", "pu-bound"): cmd_threshold_pu_bound,
}


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _csv_body(result: dict) -> str:
    import csv
    import io

    if "csv" in result:
        return result["csv"]
    rows = result.get("rows")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([_csv_cell(r[k]) for k in keys])
    else:
        w.writerow(["key", "value"])
        for k, v in result.items():
            w.writerow([k, _csv_cell(v)])
    return buf.getvalue()


def _csv_cell(v):
    j = _jsonable(v)
    if isinstance(j, dict) and "exact" in j:
        return j["exact"]
    if isinstance(j, float):
        return repr(j)
    return j if isinstance(j, (str, int)) else json.dumps(j)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    head = {k: v for k, v in report.items() if k not in ("result", "meta")}
    lines = ["# " + json.dumps(_jsonable(head), sort_keys=True)]
    body = _csv_body(report["result"])
    lines.append(body.rstrip("\n"))
    lines.append("# meta " + json.dumps(_jsonable(report["meta"]), sort_keys=True))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perclab", description="Percolation on nonunimodular graphs.")
    parser.add_argument("--version", action="version", version=f"perclab {__version__}")
    groups = parser.add_subparsers(dest="group", metavar="GROUP")
    groups.required = True
    sub = {}
    parser.command_parsers = {}
    for group, command in COMMANDS:
        if group not in sub:
            gp = groups.add_parser(group, help=f"{group} commands")
            sub[group] = gp.add_subparsers(dest="command", metavar="COMMAND")
            sub[group].required = True
        uses_family, stochastic, required, _ = COMMANDS[(group, command)]
        cp = sub[group].add_parser(command)
        parser.command_parsers[(group, command)] = cp
        keys = list(OP_KEYS.get((group, command), ()))
        if uses_family:
            keys = list(FAMILY_KEYS) + keys
        keys += ["seed", "trials", "workers", "format", "out"]
        seen = set()
        for key in keys:
            if key in seen:
                continue
            seen.add(key)
            typ, hlp = OPTIONS[key]
            if key in required:
                hlp += " (required)"
            cp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, help=hlp)
        cp.add_argument("--config", default=None, help="key=value file; flags override it")
    return parser


def dispatch(argv=None, stdout=None, stderr=None) -> int:
    """Run one command; returns 0 on success, 1 on checked failures, 2 on usage errors."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = (ns.group, ns.command)
    flags = {k: v for k, v in vars(ns).items() if k not in ("group", "command", "config")}
    try:
        run = load_runspec(ns.config, flags, command)
    except (UsageError, ConfigError) as exc:
        parser.command_parsers[command].print_usage(stderr)
        print(f"perclab {ns.group} {ns.command}: error: {exc}", file=stderr)
        return 2
    workers = max(1, int(flags.get("workers") or 1))
    t0 = time.perf_counter()
    try:
        result = HANDLERS[command](run, workers)
    except ParameterError as exc:
        parser.command_parsers[command].print_usage(stderr)
        print(f"perclab {ns.group} {ns.command}: error: {exc}", file=stderr)
        return 2
    except PerclabError as exc:
        print(f"perclab: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    report = {
        "tool": "perclab",
        "version": __version__,
        "runspec": run.to_dict(),
        "result": result,
        "meta": {"wall_time_s": round(time.perf_counter() - t0, 6), "workers": workers},
    }
    text = render(report, run.format)
    if run.output_path:
        Path(run.output_path).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(dispatch())
