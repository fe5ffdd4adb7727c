"""Command-line entry point: one subcommand per lab, JSON config in, CSV/JSON artifacts out.

    fracnls solve --preset thm11 --out runs/thm11
    fracnls ml-eval --config my.json
    fracnls illposed --preset illposed_p3 --jobs 1 --plots

Exit codes: 0 success, 2 validation error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .duhamel_solver import NonConvergence, SolverConfig, TimeMesh, picard_solve, read_trajectory, write_trajectory
from .illposedness_lab import (
    IllConfig,
    growth_experiment,
    h_closed_form,
    h_quadrature,
    h_window_slope,
    optimal_scaling,
    scaled_threshold,
)
from .linear_propagator import time_sweep, write_sweep_csv
from .mittag_leffler import MLOrder, ml_eval
from .norm_lab import TrialSpec, eta_norms, leibniz_bound_ratio, maximal_ratio, smoothing_ratio
from .spectral_field import FracParams, Grid, SpectralField, sobolev_norm

SUBCOMMANDS = ("ml-eval", "linear", "solve", "norms", "smoothing", "maximal", "illposed", "h-func")
DEFAULT_SEED = 20240611
EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE = 0, 2, 3

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_scales = {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 14}, "minItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_OPTIONS = {
    "ml-eval": _obj(
        {
            "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "rho": _pos,
            "z": {
                "type": "array",
                "minItems": 1,
                "items": {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]},
            },
        },
        ["z"],
    ),
    "linear": _obj({"times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}, "s": _num}, ["times"]),
    "solve": _obj({"s": _num, "delta": _num, "padding": {"type": ["number", "null"], "minimum": 1}}),
    "norms": _obj({"trajectory": {"type": "string"}, "s": _num, "delta": _num}),
    "smoothing": _obj(
        {
            "gamma_prime": _num,
            "gamma_offset": _num,
            "T": _pos,
            "kind": {"enum": ["Osc", "S", "T", "U"]},
            "scales": _scales,
            "n_trials": _posint,
            "n_modes": _posint,
            "x_points": _posint,
            "coherent": {"type": "boolean"},
        }
    ),
    "maximal": _obj(
        {
            "p_exponent": {"type": "number", "minimum": 2},
            "s": _num,
            "T": {"type": "number", "minimum": 0},
            "n_box": _posint,
            "scales": _scales,
            "n_trials": _posint,
            "n_modes": _posint,
        },
        ["p_exponent"],
    ),
    "illposed": _obj(
        {
            "s": _num,
            "s_offset": _num,
            "eps": _num,
            "margin": _pos,
            "T": _pos,
            "b": _num,
            "optimal_scaling": {"type": "boolean"},
            "scaling_margin": _pos,
            "N_list": {"type": "array", "items": _pos, "minItems": 3},
            "window": {"enum": ["interior", "edge"]},
            "band_modes": {"type": "integer", "minimum": 16},
            "n_points": _posint,
            "m_nodes": {"type": "integer", "minimum": 8},
            "grading": {"type": "number", "minimum": 1},
        }
    ),
    "h-func": _obj(
        {
            "p": {"type": "integer", "minimum": 3},
            "eps": _num,
            "N": _pos,
            "n_lam": {"type": "integer", "minimum": 2},
            "N_list": {"type": "array", "items": _pos, "minItems": 2},
        }
    ),
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "RunConfig",
    "type": "object",
    "properties": {
        "subcommand": {"enum": list(SUBCOMMANDS)},
        "params": _obj(
            {
                "alpha": _pos,
                "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "p": {"type": "integer", "minimum": 3},
                "mu": {"enum": [1, -1, 1.0, -1.0]},
            },
            ["alpha", "beta"],
        ),
        "grid": _obj({"n_points": {"type": "integer", "minimum": 8}, "length": _pos, "center": _num}, ["n_points", "length"]),
        "mesh": _obj({"T": _pos, "m": {"type": "integer", "minimum": 2}, "q": {"type": "number", "minimum": 1}}, ["T", "m"]),
        "data": _obj(
            {
                "kind": {"enum": ["gaussian", "band", "random_band"]},
                "width": _pos,
                "amplitude": _num,
                "norm": {"type": "number", "minimum": 0},
                "norm_s": _num,
                "kmin": {"type": "number", "minimum": 0},
                "kmax": _pos,
            },
            ["kind"],
        ),
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "out": {"type": "string"},
        "tolerances": _obj({"fixed_point": _pos, "max_iter": _posint, "blowup_factor": _pos}),
        "options": {"type": "object"},
        "budget_seconds": _pos,
    },
    "required": ["subcommand"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"subcommand": {"const": name}}}, "then": {"properties": {"options": opt}}}
        for name, opt in _OPTIONS.items()
    ]
    + [
        {
            "if": {"properties": {"subcommand": {"enum": ["linear", "solve", "smoothing", "maximal", "illposed"]}}},
            "then": {"required": ["params"]},
        },
        {"if": {"properties": {"subcommand": {"enum": ["linear", "solve"]}}}, "then": {"required": ["grid", "data"]}},
        {"if": {"properties": {"subcommand": {"const": "solve"}}}, "then": {"required": ["mesh"]}},
        {"if": {"properties": {"subcommand": {"const": "ml-eval"}}}, "then": {"required": ["options"]}},
    ],
}


class ConfigError(ValueError):
    """Config failed schema or semantic validation; message carries the field path."""


@dataclass
class RunConfig:
    subcommand: str
    raw: dict
    seed: int = DEFAULT_SEED
    out: Path = Path("fracnls_out")
    jobs: int = 1
    plots: bool = False
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "RunConfig":
        validate(d)
        return cls(
            subcommand=d["subcommand"],
            raw=d,
            seed=int(overrides.get("seed") if overrides.get("seed") is not None else d.get("seed", DEFAULT_SEED)),
            out=Path(overrides.get("out") or d.get("out", "fracnls_out")),
            jobs=int(overrides.get("jobs") or 1),
            plots=bool(overrides.get("plots", False)),
            options=dict(d.get("options", {})),
        )

    @property
    def params(self) -> FracParams:
        p = self.raw["params"]
        return FracParams(float(p["alpha"]), float(p["beta"]), int(p.get("p", 3)), float(p.get("mu", 1.0)))

    @property
    def grid(self) -> Grid:
        g = self.raw["grid"]
        return Grid(int(g["n_points"]), float(g["length"]), float(g.get("center", 0.0)))

    @property
    def mesh(self) -> TimeMesh:
        m = self.raw["mesh"]
        return TimeMesh.graded(float(m["T"]), int(m["m"]), float(m.get("q", 2.0)))


def validate(d: dict) -> None:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(d), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("; ".join(lines))


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("fracnls.presets").iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("fracnls.presets") / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"preset: unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(path.read_text())


# ------------------------------------------------------------------ data


def make_data(cfg: RunConfig) -> SpectralField:
    d = cfg.raw["data"]
    g = cfg.grid
    kind = d["kind"]
    if kind == "gaussian":
        w = float(d.get("width", 1.0))
        f = SpectralField.from_function(g, lambda x: np.exp(-(x**2) / (2 * w * w)) * (1 + 0.5j * np.sin(x)))
    elif kind in ("band", "random_band"):
        lo, hi = float(d.get("kmin", 1.0)), float(d.get("kmax", 4.0))
        ax = np.abs(g.xi)
        mask = (ax >= lo) & (ax <= hi)
        if not mask.any():
            raise ConfigError("data: band contains no grid modes")
        if kind == "band":
            spec = mask.astype(complex)
        else:
            rng = np.random.default_rng(cfg.seed)
            spec = np.where(mask, rng.standard_normal(g.n_points) + 1j * rng.standard_normal(g.n_points), 0.0)
        f = SpectralField(g, spec=spec)
    if "norm" in d:
        cur = sobolev_norm(f, float(d.get("norm_s", 0.0)))
        f = f * (float(d["norm"]) / cur)
    elif "amplitude" in d:
        f = f * float(d["amplitude"])
    return f


# --------------------------------------------------------------- commands


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=float) + "\n")


def cmd_ml_eval(cfg: RunConfig) -> str:
    o = cfg.options
    order = MLOrder(float(o.get("beta", cfg.raw.get("params", {}).get("beta", 1.0))), float(o.get("rho", 1.0)))
    rows = []
    for z in o["z"]:
        zc = complex(*z) if isinstance(z, list) else complex(z)
        v = ml_eval(order, zc)
        rows.append(
            {"re_z": zc.real, "im_z": zc.imag, "re": float(v.value.real), "im": float(v.value.imag), "method": v.method, "err": float(v.err_estimate)}
        )
    with open(cfg.out / "ml_eval.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows)
    first = complex(rows[0]["re"], rows[0]["im"])
    val = f"{first.real:.15g}" if first.imag == 0 else f"{first:.15g}"
    return f"ml-eval: E_{{{order.beta:g},{order.rho:g}}}({rows[0]['re_z']:g}{rows[0]['im_z']:+g}j) = {val} ({rows[0]['method']}); {len(rows)} point(s)"


def cmd_linear(cfg: RunConfig) -> str:
    P, f = cfg.params, make_data(cfg)
    o = cfg.options
    rows = time_sweep(f, o["times"], P, float(o.get("s", 0.0)))
    write_sweep_csv(cfg.out / "sweep.csv", rows)
    limit = 1.0 / P.beta
    _write_json(cfg.out / "summary.json", {"rows": rows, "mass_limit": limit, "final_ratio": rows[-1]["L2_ratio"]})
    if cfg.plots:
        from .plots import plot_sweep

        plot_sweep(rows, cfg.out / "sweep.png", limit)
    return f"linear: mass ratio at t={rows[-1]['t']:g} is {rows[-1]['L2_ratio']:.6f} (limit 1/beta = {limit:.6f})"


def _solver_config(cfg: RunConfig) -> SolverConfig:
    tol = cfg.raw.get("tolerances", {})
    o = cfg.options
    return SolverConfig(
        cfg.mesh,
        tol_fixed_point=float(tol.get("fixed_point", 1e-10)),
        max_iter=int(tol.get("max_iter", 60)),
        s=float(o.get("s", 0.25)),
        delta=float(o.get("delta", 0.74)),
        padding=o.get("padding"),
        blowup_factor=float(tol.get("blowup_factor", 1e6)),
    )


def _write_history(path: Path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual", "lambda_T"])
        for h in history:
            w.writerow([h["iteration"], repr(h["residual"]), repr(h["lambda_T"])])


def cmd_solve(cfg: RunConfig) -> str:
    P, f = cfg.params, make_data(cfg)
    sc = _solver_config(cfg)
    try:
        u = picard_solve(f, P, sc)
    except NonConvergence as exc:
        _write_history(cfg.out / "history.csv", exc.history)
        raise
    write_trajectory(cfg.out / "trajectory.txt", u, P)
    _write_history(cfg.out / "history.csv", u.history)
    rep = eta_norms(u, sc.s, sc.delta, P.p)
    _write_json(cfg.out / "norms.json", {**rep.as_dict(), "iterations": u.iterations_used, "residual": u.residual})
    if cfg.plots:
        from .plots import plot_history

        plot_history(u.history, cfg.out / "history.png")
    return f"solve: converged in {u.iterations_used} iterations, residual {u.residual:.3e}, Lambda_T {rep.lambda_T:.8g}"


def cmd_norms(cfg: RunConfig) -> str:
    o = cfg.options
    s, delta = float(o.get("s", 0.25)), float(o.get("delta", 0.74))
    if "trajectory" in o:
        u, P = read_trajectory(o["trajectory"])
        if P is None:
            P = cfg.params
    else:
        P = cfg.params
        u = picard_solve(make_data(cfg), P, _solver_config(cfg))
    rep = eta_norms(u, s, delta, P.p)
    lb = leibniz_bound_ratio(u, s, P.p)
    _write_json(cfg.out / "norms.json", {**rep.as_dict(), "leibniz": lb.summary()})
    return f"norms: eta1 {rep.eta1:.6g}, eta2 {rep.eta2:.6g}, eta3 {rep.eta3:.6g}, Lambda_T {rep.lambda_T:.6g}, Leibniz ratio {lb.max_ratio:.4g}"


def _trial_spec(cfg: RunConfig, defaults: TrialSpec) -> TrialSpec:
    o = cfg.options
    return TrialSpec(
        scales=tuple(o.get("scales", defaults.scales)),
        n_trials=int(o.get("n_trials", defaults.n_trials)),
        n_modes=int(o.get("n_modes", defaults.n_modes)),
        seed=cfg.seed,
        coherent=bool(o.get("coherent", defaults.coherent)),
        x_points=int(o.get("x_points", defaults.x_points)),
    )


def _ratio_outputs(cfg: RunConfig, stat, name: str) -> None:
    stat.write_csv(cfg.out / f"{name}.csv")
    stat.write_json(cfg.out / f"{name}.json")
    if cfg.plots:
        from .plots import plot_envelope

        plot_envelope(stat, cfg.out / f"{name}.png")


def cmd_smoothing(cfg: RunConfig) -> str:
    P = cfg.params
    o = cfg.options
    gp = float(o.get("gamma_prime", P.gamma)) + float(o.get("gamma_offset", 0.0))
    stat = smoothing_ratio(P, gp, float(o.get("T", 1.0)), _trial_spec(cfg, TrialSpec()), kind=o.get("kind", "Osc"))
    _ratio_outputs(cfg, stat, "smoothing")
    return f"smoothing: gamma' {gp:.4g}, trend slope {stat.trend_slope:.4f}, max ratio {stat.max_ratio:.4g}, {len(stat.samples)} samples"


def cmd_maximal(cfg: RunConfig) -> str:
    P = cfg.params
    o = cfg.options
    spec = _trial_spec(cfg, TrialSpec(scales=(3, 4, 5, 6, 7), n_trials=20))
    stat = maximal_ratio(P, float(o["p_exponent"]), spec, s=o.get("s"), T=o.get("T"), n_box=o.get("n_box"))
    _ratio_outputs(cfg, stat, "maximal")
    return f"maximal: p {o['p_exponent']:g}, s {stat.meta['s']:.4g}, trend slope {stat.trend_slope:.4f}, max ratio {stat.max_ratio:.4g}"


def cmd_illposed(cfg: RunConfig) -> str:
    P = cfg.params
    o = dict(cfg.options)
    extra = {}
    if o.pop("optimal_scaling", False):
        b, eps = optimal_scaling(P, float(o.pop("scaling_margin", 0.02)))
        o["b"], o["eps"] = b, eps
        extra = {"scaled_threshold": scaled_threshold(P, b, eps), "s_c": P.s_c}
    else:
        o.pop("scaling_margin", None)
    s_off = o.pop("s_offset", None)
    if "s" not in o:
        o["s"] = P.s_c + (float(s_off) if s_off is not None else -0.2)
    if "N_list" in o:
        o["N_list"] = tuple(o["N_list"])
    ic = IllConfig(P, **o)
    rep = growth_experiment(ic, jobs=cfg.jobs)
    rep.write_csv(cfg.out / "growth.csv")
    _write_json(cfg.out / "growth.json", {**rep.summary(), **extra})
    if cfg.plots:
        from .plots import plot_growth

        plot_growth(rep, cfg.out / "growth.png")
    return (
        f"illposed: s {ic.s:.4g}, measured slope {rep.measured_slope:.4f}, predicted {rep.predicted_slope:.4f}, "
        f"sign test {'ok' if rep.sign_test else 'FAILED'}"
    )


def cmd_h_func(cfg: RunConfig) -> str:
    o = cfg.options
    p = int(o.get("p", cfg.raw.get("params", {}).get("p", 3)))
    eps = float(o.get("eps", 0.6))
    N = float(o.get("N", 64.0))
    w = N ** (-2 * eps)
    lams = np.linspace(-0.5, p + 0.5, int(o.get("n_lam", 41)))
    rows = []
    for lam in lams:
        xi = float(N - lam * w)
        rows.append({"lam": float(lam), "xi": xi, "closed_form": float(h_closed_form(p, N, eps, xi)), "quadrature": float(h_quadrature(p, N, eps, xi))})
    with open(cfg.out / "h_func.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows({k: repr(v) for k, v in r.items()} for r in rows)
    peak = max(abs(r["closed_form"]) for r in rows)
    err = max(abs(r["closed_form"] - r["quadrature"]) for r in rows) / peak
    summary = {"p": p, "eps": eps, "N": N, "max_rel_err": err}
    msg = f"h-func: p {p}, N {N:g}, max rel. deviation quadrature vs closed form {err:.2e}"
    if "N_list" in o:
        sl = h_window_slope(p, eps, o["N_list"])
        summary["window_slope"] = sl
        msg += f", window slope {sl['slope']:.4f} (predicted {sl['predicted']:.4f})"
    _write_json(cfg.out / "h_func.json", summary)
    if cfg.plots:
        from .plots import plot_h

        plot_h(rows, cfg.out / "h_func.png")
    return msg


COMMANDS = {
    "ml-eval": cmd_ml_eval,
    "linear": cmd_linear,
    "solve": cmd_solve,
    "norms": cmd_norms,
    "smoothing": cmd_smoothing,
    "maximal": cmd_maximal,
    "illposed": cmd_illposed,
    "h-func": cmd_h_func,
}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one subcommand; returns (exit status, one-line summary)."""
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        probe = cfg.out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return EXIT_VALIDATION, f"{cfg.subcommand}: out: directory not writable ({exc})"
    t0 = time.perf_counter()
    try:
        msg = COMMANDS[cfg.subcommand](cfg)
    except NonConvergence as exc:
        return EXIT_NONCONVERGENCE, f"{cfg.subcommand}: duhamel_solver: {exc}"
    except (ConfigError, ValueError) as exc:
        return EXIT_VALIDATION, f"{cfg.subcommand}: {type(exc).__module__.rsplit('.', 1)[-1]}: {exc}"
    dt = time.perf_counter() - t0
    _write_json(cfg.out / "run.json", {"config": cfg.raw, "seed": cfg.seed, "seconds": dt, "summary": msg})
    budget = cfg.raw.get("budget_seconds")
    if budget is not None and dt > budget:
        msg += f" [over budget: {dt:.1f}s > {budget:g}s]"
    return EXIT_OK, msg


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracnls", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS, help="overrides the config's subcommand")
    ap.add_argument("--config", type=Path, help="JSON RunConfig")
    ap.add_argument("--preset", help="bundled config name")
    ap.add_argument("--seed", type=int, help="64-bit seed (default %d)" % DEFAULT_SEED)
    ap.add_argument("--out", type=Path, help="artifact directory")
    ap.add_argument("--jobs", type=int, default=1, help="worker cap for parallel sweeps")
    ap.add_argument("--plots", action="store_true", help="also write PNG figures (needs matplotlib)")
    ap.add_argument("--list-presets", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.list_presets:
        print("\n".join(preset_names()))
        return EXIT_OK
    try:
        if args.config and args.preset:
            raise ConfigError("give --config or --preset, not both")
        if args.config:
            try:
                d = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"config: {exc}") from exc
        elif args.preset:
            d = load_preset(args.preset)
        elif args.subcommand:
            d = {"subcommand": args.subcommand}
        else:
            raise ConfigError("need --config, --preset or a subcommand")
        d = copy.deepcopy(d)
        if args.subcommand:
            d["subcommand"] = args.subcommand
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        cfg = RunConfig.from_dict(d, seed=args.seed, out=args.out, jobs=args.jobs, plots=args.plots)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    status, msg = run(cfg)
    print(msg, file=sys.stdout if status == EXIT_OK else sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
