"""Experiment runner: config parsing, presets, CSV artifacts.

Config files are flat, line-oriented `block.key = value` text (diff-friendly;
`#` starts a comment).  Unknown keys are rejected with their line number.
Every CSV artifact starts with one metadata comment line carrying the tool
version, the root seed, the config hash and a timestamp; the timestamp is
the only non-deterministic field.

Subcommands: price, mlmc-run, mlmc-diagnostics, mlmc-cost-curve, credit,
fmm, verify-coupling (plus `preset` to write a named experiment config and
`run` to dispatch on the config's experiment kind).
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .copula import ClaytonCopula, CopulaMeasure
from .coupling import verify_rate_identity
from .grid import GridSpec, build_jump_table, choose_truncation_by_mass
from .mlmc import LevelLadder, MLMCConfig, PayoffLevelSampler, cost_curve, level_diagnostics, run_mlmc
from .models import CGMY, HEM, VG
from .pathsim import ExpLevyAsset, SchemeProcess, diffusion_matrix, mc_estimate, simulate_batch
from .payoffs import (
    AsianCall,
    BestOfPut,
    EndpointCoordinate,
    Put,
    default_times,
    ftd_survival_closed,
    level_from_spread,
    snap_to_cell_edge,
    survival_probability_closed,
)
from .rng import substream
from .sde import FMMLevelSampler, FMMSpec

SCHEMA = {
    "experiment": {"kind"},
    "model": {"kind", "lam", "p", "eta1", "eta2", "sigma", "nu", "theta", "c", "g", "m", "y"},
    "margin1": {"kind", "lam", "p", "eta1", "eta2", "sigma", "nu", "theta", "c", "g", "m", "y"},
    "margin2": {"kind", "lam", "p", "eta1", "eta2", "sigma", "nu", "theta", "c", "g", "m", "y"},
    "margin3": {"kind", "lam", "p", "eta1", "eta2", "sigma", "nu", "theta", "c", "g", "m", "y"},
    "copula": {"theta", "eta", "dim"},
    "grid": {"h", "R", "mass_ratio", "V", "subcells_K", "state_cap"},
    "payoff": {"type", "strike", "s0", "r", "q", "T", "n_obs", "coord"},
    "mc": {"paths"},
    "mlmc": {
        "eps",
        "h0",
        "pilot_paths",
        "max_levels",
        "theta_stat",
        "d_b",
        "d_t",
        "d_v",
        "verify_coupling",
        "levels",
        "paths_per_level",
        "eps_list",
    },
    "credit": {"spreads_bps", "recovery", "T", "r", "levels_a", "t"},
    "fmm": {"expiry", "periods", "delta", "r0", "strike", "sigma_rows", "paths", "levels"},
    "run": {"seed", "out"},
}

MODEL_KEYS = {
    "hem": {"lam", "p", "eta1", "eta2", "sigma"},
    "vg": {"sigma", "nu", "theta"},
    "cgmy": {"c", "g", "m", "y"},
}


class ConfigError(ValueError):
    pass


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [_parse_value(v) for v in raw.split(",") if v.strip()]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        if any(c in raw for c in ".eE") and not raw.isdigit():
            return float(raw)
        return int(raw)
    except ValueError:
        return raw


def parse_config(text: str) -> dict:
    """Parse `block.key = value` lines into {block: {key: value}}."""
    out: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'block.key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} must be 'block.key'")
        block, _, name = key.partition(".")
        if block not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown block {block!r}")
        if name not in SCHEMA[block]:
            raise ConfigError(f"line {lineno}: unknown key {name!r} in block {block!r}")
        out.setdefault(block, {})[name] = _parse_value(value)
    return out


def serialize_config(cfg: dict) -> str:
    lines = []
    for block in sorted(cfg):
        for key in sorted(cfg[block]):
            value = cfg[block][key]
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            lines.append(f"{block}.{key} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]


def build_model(block: dict):
    kind = str(block.get("kind", "")).lower()
    if kind not in MODEL_KEYS:
        raise ConfigError(f"unknown model kind {block.get('kind')!r}")
    params = {k: v for k, v in block.items() if k != "kind"}
    extra = set(params) - MODEL_KEYS[kind]
    if extra:
        raise ConfigError(f"{kind} does not take parameters {sorted(extra)}")
    if kind == "hem":
        return HEM(**params)
    if kind == "vg":
        return VG(**params)
    return CGMY(**params)


def build_measure(cfg: dict):
    """The 1-d model or the copula measure declared by the config."""
    if "copula" in cfg:
        cop = cfg["copula"]
        dim = int(cop.get("dim", 2))
        margins = []
        for i in range(1, dim + 1):
            block = cfg.get(f"margin{i}")
            if block is None:
                raise ConfigError(f"copula of dimension {dim} needs margin{i}")
            margins.append(build_model(block))
        return CopulaMeasure(ClaytonCopula(float(cop["theta"]), float(cop["eta"]), d=dim), margins)
    if "model" not in cfg:
        raise ConfigError("config needs a model or copula block")
    return build_model(cfg["model"])


def build_grid(cfg: dict, measure, h: float | None = None) -> GridSpec:
    g = dict(cfg.get("grid", {}))
    d = measure.dim if hasattr(measure, "dim") else 1
    h = float(h if h is not None else g.get("h", 0.01))
    if "R" in g:
        r = float(g["R"])
    else:
        r = choose_truncation_by_mass(measure, h, float(g.get("mass_ratio", 0.99999)))
    kwargs = {}
    if "V" in g:
        kwargs["V"] = float(g["V"])
    if "subcells_K" in g:
        kwargs["subcells"] = int(g["subcells_K"])
    if "state_cap" in g:
        kwargs["state_cap"] = int(g["state_cap"])
    return GridSpec(h=h, R=r, d=d, **kwargs)


def build_payoff(cfg: dict, proc: SchemeProcess):
    p = cfg.get("payoff", {})
    kind = str(p.get("type", "endpoint")).lower()
    if kind == "endpoint":
        return EndpointCoordinate(int(p.get("coord", 0)))
    asset = ExpLevyAsset(
        s0=float(p.get("s0", 100.0)), r=float(p.get("r", 0.0)), proc=proc, q=float(p.get("q", 0.0))
    )
    if kind == "put":
        return Put(strike=float(p.get("strike", 100.0)), asset=asset, coord=int(p.get("coord", 0)))
    if kind == "bestofput":
        return BestOfPut(strike=float(p.get("strike", 1.0)), asset=asset)
    if kind == "asiancall":
        return AsianCall(
            strike=float(p.get("strike", 100.0)), asset=asset, T=proc.T, n_obs=int(p.get("n_obs", 12))
        )
    raise ConfigError(f"unknown payoff type {p.get('type')!r}")


def write_csv(path: Path, header: list[str], rows: list[list], meta: dict, comments: list[str] = ()):
    path.parent.mkdir(parents=True, exist_ok=True)
    meta_line = " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w") as fh:
        fh.write(f"# meta {meta_line} generated={time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _meta(cfg: dict, seed: int) -> dict:
    return {"tool": f"levyctmc-{__version__}", "seed": seed, "config_sha": config_hash(cfg)}


# -- experiments --------------------------------------------------------------


def exp_price(cfg: dict, seed: int, out: Path, workers: int) -> list[Path]:
    measure = build_measure(cfg)
    grid = build_grid(cfg, measure)
    table = build_jump_table(measure, grid)
    T = float(cfg.get("payoff", {}).get("T", 1.0))
    d = table.d
    proc = SchemeProcess(mu=np.zeros(d), Sigma=diffusion_matrix(measure), table=table, T=T)
    payoff = build_payoff(cfg, proc)
    n = int(cfg.get("mc", {}).get("paths", 100_000))
    res = mc_estimate(payoff, proc, n, seed=seed, workers=workers)
    rows = [
        [
            "mc",
            res.estimate,
            res.stderr,
            res.n,
            grid.h,
            grid.r_eff,
            res.cost_ops,
            res.wall_seconds,
            seed,
        ]
    ]
    header = ["estimator", "value", "stderr", "n_paths", "h", "R", "cost_ops", "wall_seconds", "seed"]
    return [write_csv(out.with_suffix(".csv"), header, rows, _meta(cfg, seed))]


def _ladder_and_sampler(cfg: dict, workers: int):
    measure = build_measure(cfg)
    m = cfg.get("mlmc", {})
    T = float(cfg.get("payoff", {}).get("T", 1.0))
    grid_over = {}
    g = cfg.get("grid", {})
    if "V" in g:
        grid_over["V"] = float(g["V"])
    if "subcells_K" in g:
        grid_over["subcells"] = int(g["subcells_K"])
    if "state_cap" in g:
        grid_over["state_cap"] = int(g["state_cap"])
    mcfg = MLMCConfig(
        h0=float(m.get("h0", 0.01)),
        eps=float(m.get("eps", 0.05)),
        pilot_paths=int(m.get("pilot_paths", 10_000)),
        max_levels=int(m.get("max_levels", 8)),
        theta_stat=float(m.get("theta_stat", 0.5)),
        mass_ratio=float(g.get("mass_ratio", 0.99999)),
        R=float(g["R"]) if "R" in g else None,
        d_b=float(m["d_b"]) if "d_b" in m else None,
        d_t=float(m["d_t"]) if "d_t" in m else None,
        d_v=float(m["d_v"]) if "d_v" in m else None,
        verify_coupling=bool(m.get("verify_coupling", True)),
        grid_overrides=grid_over,
    )
    d = measure.dim if hasattr(measure, "dim") else 1
    ladder = LevelLadder(measure, np.zeros(d), diffusion_matrix(measure), T, mcfg)
    sampler = PayoffLevelSampler(ladder, lambda proc: build_payoff(cfg, proc))
    sampler.workers = workers
    return ladder, sampler, mcfg


def exp_mlmc_run(cfg: dict, seed: int, out: Path, workers: int) -> list[Path]:
    ladder, sampler, mcfg = _ladder_and_sampler(cfg, workers)
    report = run_mlmc(sampler, mcfg, seed)
    header = ["estimator", "value", "stderr", "n_paths", "h", "R", "cost_ops", "wall_seconds", "seed"]
    rows = [
        [
            "mlmc",
            report.estimate,
            report.stat_error,
            sum(s.n for s in report.levels),
            ladder.h(report.n_levels),
            ladder.R,
            report.total_cost,
            report.wall_seconds,
            seed,
        ]
    ]
    paths = [write_csv(out.with_suffix(".csv"), header, rows, _meta(cfg, seed))]
    lrows = [[s.level, s.h, s.n, s.mean, s.var, s.cost_per_path] for s in report.levels]
    paths.append(
        write_csv(
            out.parent / (out.name + "_levels.csv"),
            ["level", "h", "n", "mean", "var", "cost_per_path"],
            lrows,
            _meta(cfg, seed),
            comments=[f"bias_est={report.bias_est:.6g}", f"mc_proxy_cost={report.mc_proxy_cost:.6g}"],
        )
    )
    return paths


def exp_mlmc_diagnostics(cfg: dict, seed: int, out: Path, workers: int) -> list[Path]:
    _, sampler, _ = _ladder_and_sampler(cfg, workers)
    m = cfg.get("mlmc", {})
    L = int(m.get("levels", 5))
    paths_per_level = int(m.get("paths_per_level", 100_000))
    rows, slopes = level_diagnostics(sampler, L=L, paths=paths_per_level, seed=seed)
    header = ["level", "log2_var_Pl", "log2_var_diff", "log2_mean_Pl", "log2_mean_diff", "cost"]
    csv_rows = [[r[h] for h in header] for r in rows]
    comments = [
        f"var_slope={slopes['var_slope'][0]:.6g} stderr={slopes['var_slope'][1]:.6g}",
        f"mean_slope={slopes['mean_slope'][0]:.6g} stderr={slopes['mean_slope'][1]:.6g}",
    ]
    return [write_csv(out.with_suffix(".csv"), header, csv_rows, _meta(cfg, seed), comments)]


def exp_mlmc_cost_curve(cfg: dict, seed: int, out: Path, workers: int) -> list[Path]:
    m = cfg.get("mlmc", {})
    eps_list = m.get("eps_list", [0.1, 0.05])
    if not isinstance(eps_list, list):
        eps_list = [eps_list]
    eps_list = [float(e) for e in eps_list]
    _, _, mcfg = _ladder_and_sampler(cfg, workers)

    def make():
        _, sampler, _ = _ladder_and_sampler(cfg, workers)
        return sampler

    rows, _, ref = cost_curve(make, mcfg, eps_list, seed)
    header = ["eps", "levels", "total_cost", "mc_proxy_cost", "eps2_cost"]
    csv_rows = [[r[h] for h in header] for r in rows]
    return [
        write_csv(
            out.with_suffix(".csv"), header, csv_rows, _meta(cfg, seed), [f"ref_cost_exponent={ref:.6g}"]
        )
    ]


def exp_credit(cfg: dict, seed: int, out: Path, workers: int) -> list[Path]:
    credit = cfg.get("credit", {})
    recovery = float(credit.get("recovery", 0.4))
    T = float(credit.get("T", 0.5))
    r = float(credit.get("r", 0.02))
    measure = build_measure(cfg)
    if hasattr(measure, "dim"):
        return _credit_ftd(cfg, measure, credit, recovery, T, r, seed, out, workers)
    return _credit_single(cfg, measure, credit, recovery, T, r, seed, out, workers)


def _credit_single(cfg, model, credit, recovery, T, r, seed, out, workers) -> list[Path]:
    spreads_bps = credit.get("spreads_bps", [20.0, 60.0, 100.0])
    if not isinstance(spreads_bps, list):
        spreads_bps = [spreads_bps]
    grid = build_grid(cfg, model)
    table = build_jump_table(model, grid)
    proc = SchemeProcess(np.zeros(1), diffusion_matrix(model), table, T)
    n = int(cfg.get("mc", {}).get("paths", 100_000))
    rows = []
    for i, bps in enumerate(spreads_bps):
        spread = float(bps) / 1e4
        a = level_from_spread(model, spread, recovery)
        a_snap = snap_to_cell_edge(a, grid.h)
        res = _implied_spread_mc(proc, {0: a_snap}, T, r, recovery, n, seed + i, workers)
        rows.append(
            [
                float(bps),
                a,
                survival_probability_closed(model, a, T),
                res["spread"] * 1e4,
                res["ci_low"] * 1e4,
                res["ci_high"] * 1e4,
            ]
        )
    header = [
        "theoretical_spread_bps",
        "level_a",
        "survival_probability",
        "mc_implied_spread_bps",
        "ci_low_bps",
        "ci_high_bps",
    ]
    return [write_csv(out.with_suffix(".csv"), header, rows, _meta(cfg, seed))]


def _implied_spread_mc(proc, levels, T, r, recovery, n, seed, workers) -> dict:
    """MC default/annuity legs and the PV-equation implied spread with 99% CI."""

    class Legs:
        needs_times = True
        obs_dates = ()

        def evaluate(self, view):
            tau = default_times(view, levels)
            capped = np.minimum(tau, T)
            dl = (1.0 - recovery) * np.exp(-r * tau) * (tau <= T)
            ann = (1.0 - np.exp(-r * capped)) / r if r != 0 else capped
            # pack both legs through a complex pair to reuse the engine
            return dl + 1j * ann

    # run the batch engine manually: two correlated leg estimates per path
    from .pathsim import chunk_size_for

    chunk = chunk_size_for(proc)
    sums = np.zeros(5)  # dl, ann, dl^2, ann^2, dl*ann
    count = 0
    ci = 0
    legs = Legs()
    while count < n:
        size = min(chunk, n - count)
        rng = substream(seed, 7, ci)
        batch = simulate_batch(proc, size, rng, needs_times=True)
        z = legs.evaluate(batch.view("fine"))
        dl, ann = z.real, z.imag
        sums += np.array(
            [dl.sum(), ann.sum(), (dl * dl).sum(), (ann * ann).sum(), (dl * ann).sum()]
        )
        count += size
        ci += 1
    mdl, mann = sums[0] / count, sums[1] / count
    vdl = sums[2] / count - mdl**2
    vann = sums[3] / count - mann**2
    cov = sums[4] / count - mdl * mann
    spread = mdl / mann
    var_spread = (vdl - 2 * spread * cov + spread**2 * vann) / (mann**2 * count)
    half = 2.5758293035489004 * math.sqrt(max(var_spread, 0.0))
    return {"spread": spread, "ci_low": spread - half, "ci_high": spread + half}


def _credit_ftd(cfg, measure, credit, recovery, T, r, seed, out, workers) -> list[Path]:
    levels_a = credit.get("levels_a", [-0.2, -0.2])
    if not isinstance(levels_a, list):
        levels_a = [levels_a]
    t = float(credit.get("t", T))
    grid = build_grid(cfg, measure)
    table = build_jump_table(measure, grid)
    proc = SchemeProcess(np.zeros(table.d), diffusion_matrix(measure), table, T)
    snapped = [snap_to_cell_edge(float(a), grid.h) for a in levels_a]
    closed = ftd_survival_closed(table.measure_t, snapped, t)
    n = int(cfg.get("mc", {}).get("paths", 100_000))

    class Survival:
        needs_times = True
        obs_dates = ()

        def evaluate(self, view):
            tau = default_times(view, dict(enumerate(snapped)))
            return (tau > t).astype(float)

    res = mc_estimate(Survival(), proc, n, seed=seed, workers=workers)
    half = 2.5758293035489004 * res.stderr
    rows = [[t, closed, res.estimate, res.estimate - half, res.estimate + half, int(closed >= res.estimate - half and closed <= res.estimate + half)]]
    header = ["t", "survival_closed", "survival_mc", "ci_low", "ci_high", "closed_in_ci"]
    return [write_csv(out.with_suffix(".csv"), header, rows, _meta(cfg, seed))]


FMM_SIGMA_PRESET = [[0.50, 1.50], [0.80, 1.25], [1.00, 1.00], [1.25, 0.80], [1.50, 0.50]]


def exp_fmm(cfg: dict, seed: int, out: Path, workers: int) -> list[Path]:
    f = cfg.get("fmm", {})
    expiry = float(f.get("expiry", 5.0))
    periods = int(f.get("periods", 5))
    delta = float(f.get("delta", 1.0))
    r0 = float(f.get("r0", 0.02))
    strike = float(f.get("strike", 0.02))
    sigma_rows = f.get("sigma_rows")
    sigma = np.asarray(FMM_SIGMA_PRESET[:periods] if sigma_rows is None else np.asarray(sigma_rows).reshape(periods, -1), dtype=float)
    spec = FMMSpec(
        tenors=expiry + delta * np.arange(periods + 1.0),
        delta=delta,
        r0=np.full(periods, r0),
        sigma=sigma,
        strike=strike,
    )
    measure = build_measure(cfg)
    m = cfg.get("mlmc", {})
    g = cfg.get("grid", {})
    mcfg = MLMCConfig(
        h0=float(m.get("h0", 0.01)),
        eps=float(m.get("eps", 1e-4)),
        pilot_paths=int(m.get("pilot_paths", 2000)),
        max_levels=int(m.get("max_levels", 2)),
        mass_ratio=float(g.get("mass_ratio", 0.99999)),
        R=float(g["R"]) if "R" in g else None,
        verify_coupling=bool(m.get("verify_coupling", False)),
        grid_overrides={"V": float(g.get("V", 0.0))},
    )
    dim = measure.dim if hasattr(measure, "dim") else 1
    # the FMM driver is the compensated (zero-center-drift) jump process
    ladder = LevelLadder(measure, np.zeros(dim), np.zeros((dim, dim)), expiry, mcfg, driftless_center=True)
    sampler = FMMLevelSampler(ladder, spec)
    L = int(f.get("levels", 1))
    t0 = time.perf_counter()
    est = var_of_mean = cost = 0.0
    total_paths = 0
    for level in range(L + 1):
        n_level = max(200, int(f.get("paths", 2000)) // 2**level)
        acc = sampler.sample_level(level, n_level, seed, 0, 0)
        est += acc.mean
        var_of_mean += acc.var / acc.n
        cost += acc.cost
        total_paths += acc.n
    stderr = math.sqrt(var_of_mean)
    header = ["estimator", "value", "stderr", "n_paths", "h", "R", "cost_ops", "wall_seconds", "seed"]
    rows = [["fmm-mlmc", est, stderr, total_paths, mcfg.h0, ladder.R, cost, time.perf_counter() - t0, seed]]
    return [write_csv(out.with_suffix(".csv"), header, rows, _meta(cfg, seed))]


def exp_verify_coupling(cfg: dict, seed: int, out: Path, workers: int) -> list[Path]:
    measure = build_measure(cfg)
    grid = build_grid(cfg, measure)
    fine = build_jump_table(measure, grid)
    coarse = build_jump_table(measure, GridSpec(h=2 * grid.h, R=grid.r_eff, d=grid.d, V=grid.V))
    report = verify_rate_identity(fine, coarse)
    rows = [[grid.h, grid.r_eff, report.n_cells, report.max_rel_error, int(report.passed)]]
    header = ["h", "R", "coarse_cells", "max_rel_error", "passed"]
    path = write_csv(out.with_suffix(".csv"), header, rows, _meta(cfg, seed))
    print(f"verify-coupling: max relative error {report.max_rel_error:.3e} over {report.n_cells} cells -> "
          f"{'PASS' if report.passed else 'FAIL'}")
    return [path]


EXPERIMENTS = {
    "price": exp_price,
    "mlmc-run": exp_mlmc_run,
    "mlmc-diagnostics": exp_mlmc_diagnostics,
    "mlmc-cost-curve": exp_mlmc_cost_curve,
    "credit": exp_credit,
    "fmm": exp_fmm,
    "verify-coupling": exp_verify_coupling,
}

PRESETS = {
    "cgmy15-put-diagnostics": """\
experiment.kind = mlmc-diagnostics
model.kind = cgmy
model.c = 0.007
model.g = 2
model.m = 4
model.y = 1.5
payoff.type = put
payoff.strike = 100
payoff.s0 = 100
payoff.r = 0.02
payoff.T = 1.0
mlmc.h0 = 0.01
mlmc.levels = 5
mlmc.paths_per_level = 100000
""",
    "hem-cds": """\
experiment.kind = credit
model.kind = hem
model.lam = 3
model.p = 0.6
model.eta1 = 20
model.eta2 = 25
model.sigma = 0.05
grid.h = 1e-4
credit.spreads_bps = 20,60,100
credit.recovery = 0.4
credit.T = 0.5
credit.r = 0.02
mc.paths = 100000
""",
    "fmm-swaption": """\
experiment.kind = fmm
copula.theta = 0.7
copula.eta = 0.3
copula.dim = 2
margin1.kind = cgmy
margin1.c = 1.23
margin1.g = 15
margin1.m = 20
margin1.y = 0.2
margin2.kind = cgmy
margin2.c = 0.70
margin2.g = 15
margin2.m = 20
margin2.y = 0.4
grid.V = 0
mlmc.h0 = 0.01
fmm.expiry = 5.0
fmm.periods = 5
fmm.delta = 1.0
fmm.r0 = 0.02
fmm.strike = 0.02
fmm.paths = 2000
fmm.levels = 1
""",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="levyctmc", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name in list(EXPERIMENTS) + ["run"]:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", type=Path, default=Path("out"))
    p = sub.add_parser("preset")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out", type=Path, required=True)
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 2
    if args.command == "preset":
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(PRESETS[args.name])
        print(f"wrote preset {args.name} to {args.out}")
        return 0

    if args.config is not None:
        try:
            cfg = parse_config(args.config.read_text())
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
    elif args.preset is not None:
        cfg = parse_config(PRESETS[args.preset])
    else:
        print("one of --config or --preset is required", file=sys.stderr)
        return 2

    seed = int(cfg.get("run", {}).get("seed", args.seed))
    out = Path(cfg.get("run", {}).get("out", args.out))
    kind = cfg.get("experiment", {}).get("kind")
    if args.command == "run":
        if not kind or kind == "none":
            return 0  # empty experiment list: nothing to do
        command = str(kind)
    else:
        command = args.command
        if kind and str(kind) != command and str(kind) != "none":
            print(f"config declares experiment.kind = {kind}, not {command}", file=sys.stderr)
            return 2
    try:
        artifacts = EXPERIMENTS[command](cfg, seed, out, args.threads)
    except (ConfigError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for a in artifacts:
        print(f"wrote {a}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
