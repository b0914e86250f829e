"""Batch front end: INI configs in, key=value reports and CSV out.

Sections: [grid] [scenario] [scheme] [source] [initial] [output].  Every
key has a default except grid.n_cells and scenario.name, and parsing fills
defaults in, so an emitted config is the canonical form of itself.  Exit
statuses are a stable contract: 0 pass, 2 failed check or probe, 3 I/O,
4 usage or config error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    CoefficientField,
    EvobeamError,
    Signal,
    SpaceTag,
    StateVector,
    ZeroSignal,
    SeparableSignal,
    bump_envelope,
    build_grid,
    gaussian_envelope,
    sinusoid_envelope,
    weighted_inner,
    zero_state,
)
from .discretize import skew_defect
from .integrate import (
    SchemeParams,
    bound_probe,
    causality_probe,
    factor,
    run,
)
from .scenarios import (
    AssembledModel,
    FullDynamicParams,
    SturmLiouvilleParams,
    TimoshenkoParams,
    consistent_initial_state,
    embed_block,
    exact_state,
    make_dynamic_inertia,
    make_full_dynamic,
    make_sturm_liouville,
    make_timoshenko_damped,
    manufactured_source,
    timoshenko_mms_fields,
)
from .wellposed import (
    NevanlinnaSpec,
    NotCoerciveError,
    coercivity,
    find_rho0,
    nevanlinna_check,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "emit_config",
    "cmd_check",
    "cmd_run",
    "cmd_converge",
    "cmd_probe",
    "main",
]

SCENARIOS = ("timoshenko_damped", "dynamic_inertia", "full_dynamic", "sturm_liouville")

_SCENARIO_DEFAULTS: dict[str, dict[str, str]] = {
    "timoshenko_damped": {
        "kappa1": "1.0", "nu1": "1.0", "nu2": "1.0", "kappa2": "1.0",
        "d": "0.0", "c": "0.5", "I_tilde": "0.0", "sigma0": "1.0",
    },
    "dynamic_inertia": {
        "kappa1": "1.0", "nu1": "1.0", "nu2": "1.0", "kappa2": "1.0",
        "d": "0.0", "c": "0.0", "I_tilde": "1.0", "sigma0": "1.0",
    },
    "full_dynamic": {
        "m_V1": "1.0", "m_eta": "1.0", "m_s": "1.0", "m_V2": "1.0",
        "g_V1": "0.0", "g_eta": "0.0", "g_s": "0.0", "g_V2": "0.0",
        "mu_minus": "1.0, 0.0", "mu_plus": "1.0, 0.0",
        "nu_minus": "1.0, 0.0", "nu_plus": "1.0, 0.0",
    },
    "sturm_liouville": {
        "r": "1.0", "q": "0.0", "s0": "1.0", "s1": "0.0",
        "mu_minus": "1.0, 0.0", "mu_plus": "1.0, 0.0",
    },
}

_SCHEME_DEFAULTS = {
    "dt": "0.01", "t_end": "1.0", "theta": "0.5",
    "record_every": "1", "rho": "1.0", "c_target": "0.001",
}

_SOURCE_DEFAULTS = {
    "kind": "zero", "block": "", "profile": "1.0", "amplitude": "1.0",
    "center": "0.5", "width": "0.1", "frequency": "1.0", "phase": "0.0",
    "t0": "0.0", "t1": "1.0",
}

_INITIAL_DEFAULTS = {"kind": "zero", "amplitude": "1.0", "seed": "0"}

_OUTPUT_DEFAULTS = {
    "csv": "out.csv", "snapshots": "", "snapshot_stride": "1",
    "energy": "true", "traces": "all",
}


class ConfigError(EvobeamError):
    """Config text violates the format or a scenario invariant."""


@dataclass
class RunConfig:
    scenario: str
    n_cells: int
    params: dict[str, str] = field(default_factory=dict)
    scheme: dict[str, str] = field(default_factory=dict)
    source: dict[str, str] = field(default_factory=dict)
    initial: dict[str, str] = field(default_factory=dict)
    output: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing and validation

_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "sqrt": np.sqrt, "tanh": np.tanh, "abs": np.abs, "log": np.log,
    "pi": np.pi, "e": np.e,
}


def _eval_expr(expr: str, x: np.ndarray, where: str) -> np.ndarray:
    try:
        val = eval(  # noqa: S307 - restricted namespace, config-supplied math
            compile(expr, "<config>", "eval"), {"__builtins__": {}}, {**_EXPR_NAMES, "x": x}
        )
    except Exception as exc:
        raise ConfigError(f"{where}: cannot evaluate {expr!r}: {exc}") from exc
    return np.asarray(val, dtype=float) * np.ones_like(x)


def _float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from exc


def _int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}") from exc


def _bool(raw: str, where: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


def _pair(raw: str, where: str) -> tuple[float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected 'mu0, mu1', got {raw!r}")
    return _float(parts[0], where), _float(parts[1], where)


def _coeff(cfg_val: str, grid, tag: SpaceTag, where: str) -> CoefficientField:
    x = grid.points(tag)
    return CoefficientField(tag, _eval_expr(cfg_val, x, where))


def parse_config(text: str) -> RunConfig:
    """Parse, fill defaults, and validate by building everything once."""
    import configparser

    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    known = {"grid", "scenario", "scheme", "source", "initial", "output"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"unknown section [{sec}]")
    for sec in ("grid", "scenario"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing required section [{sec}]")

    grid_keys = dict(cp.items("grid"))
    extra = set(grid_keys) - {"n_cells"}
    if extra:
        raise ConfigError(f"[grid]: unknown key {sorted(extra)[0]!r}")
    if "n_cells" not in grid_keys:
        raise ConfigError("[grid]: n_cells is required")
    n_cells = _int(grid_keys["n_cells"].strip(), "[grid] n_cells")

    scen_items = {k: v.strip() for k, v in cp.items("scenario")}
    name = scen_items.pop("name", None)
    if name is None:
        raise ConfigError("[scenario]: name is required")
    if name not in SCENARIOS:
        raise ConfigError(f"[scenario] name: unknown scenario {name!r}")
    params = dict(_SCENARIO_DEFAULTS[name])
    for k, v in scen_items.items():
        if k not in params:
            raise ConfigError(f"[scenario]: unknown key {k!r} for {name}")
        params[k] = v

    def section(nm: str, defaults: dict[str, str], extra_ok=()) -> dict[str, str]:
        out = dict(defaults)
        if cp.has_section(nm):
            for k, v in cp.items(nm):
                if k not in defaults and k not in extra_ok:
                    raise ConfigError(f"[{nm}]: unknown key {k!r}")
                out[k] = v.strip()
        return out

    cfg = RunConfig(
        scenario=name,
        n_cells=n_cells,
        params=params,
        scheme=section("scheme", _SCHEME_DEFAULTS),
        source=section("source", _SOURCE_DEFAULTS),
        initial=section(
            "initial", _INITIAL_DEFAULTS,
            extra_ok=("V1", "eta", "s", "V2"),
        ),
        output=section("output", _OUTPUT_DEFAULTS),
    )
    # full validation: if any of these raise, surface it as a parse error
    try:
        model, _ = build_model(cfg)
        scheme = build_scheme(cfg)
        build_source(cfg, model)
        build_initial(cfg, model)
    except ConfigError:
        raise
    except EvobeamError as exc:
        raise ConfigError(str(exc)) from exc
    _ = scheme
    return cfg


def emit_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(emit_config(cfg)) == cfg."""
    lines = ["[grid]", f"n_cells = {cfg.n_cells}", ""]
    lines += ["[scenario]", f"name = {cfg.scenario}"]
    lines += [f"{k} = {v}" for k, v in sorted(cfg.params.items())]
    for sec, data in (
        ("scheme", cfg.scheme),
        ("source", cfg.source),
        ("initial", cfg.initial),
        ("output", cfg.output),
    ):
        lines += ["", f"[{sec}]"]
        lines += [f"{k} = {v}" for k, v in sorted(data.items())]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# builders

def build_model(cfg: RunConfig) -> tuple[AssembledModel, list[NevanlinnaSpec]]:
    """Assemble the configured model plus its trace laws (for validation)."""
    grid = build_grid(cfg.n_cells)
    p = cfg.params
    if cfg.scenario in ("timoshenko_damped", "dynamic_inertia"):
        params = TimoshenkoParams(
            kappa1=_coeff(p["kappa1"], grid, SpaceTag.NODE_FREE_LEFT, "[scenario] kappa1"),
            nu1=_coeff(p["nu1"], grid, SpaceTag.CENTER, "[scenario] nu1"),
            nu2=_coeff(p["nu2"], grid, SpaceTag.NODE_INTERIOR, "[scenario] nu2"),
            kappa2=_coeff(p["kappa2"], grid, SpaceTag.CENTER, "[scenario] kappa2"),
            d=_coeff(p["d"], grid, SpaceTag.NODE_INTERIOR, "[scenario] d"),
            c=_float(p["c"], "[scenario] c"),
            I_tilde=_float(p["I_tilde"], "[scenario] I_tilde"),
            sigma0=_float(p["sigma0"], "[scenario] sigma0"),
        )
        maker = make_timoshenko_damped if cfg.scenario == "timoshenko_damped" else make_dynamic_inertia
        model = maker(grid, params)
        laws = [NevanlinnaSpec(params.I_tilde, params.c)]
    elif cfg.scenario == "sturm_liouville":
        params = SturmLiouvilleParams(
            r=_coeff(p["r"], grid, SpaceTag.CENTER, "[scenario] r"),
            q=_coeff(p["q"], grid, SpaceTag.CENTER, "[scenario] q"),
            s0=_float(p["s0"], "[scenario] s0"),
            s1=_float(p["s1"], "[scenario] s1"),
            mu_minus=NevanlinnaSpec(*_pair(p["mu_minus"], "[scenario] mu_minus")),
            mu_plus=NevanlinnaSpec(*_pair(p["mu_plus"], "[scenario] mu_plus")),
        )
        model = make_sturm_liouville(grid, params)
        laws = [params.mu_minus, params.mu_plus, NevanlinnaSpec(params.s0, params.s1)]
    else:
        params = FullDynamicParams(
            m_V1=_coeff(p["m_V1"], grid, SpaceTag.NODE_ALL, "[scenario] m_V1"),
            m_eta=_coeff(p["m_eta"], grid, SpaceTag.CENTER, "[scenario] m_eta"),
            m_s=_coeff(p["m_s"], grid, SpaceTag.NODE_ALL, "[scenario] m_s"),
            m_V2=_coeff(p["m_V2"], grid, SpaceTag.CENTER, "[scenario] m_V2"),
            g_V1=_coeff(p["g_V1"], grid, SpaceTag.NODE_ALL, "[scenario] g_V1"),
            g_eta=_coeff(p["g_eta"], grid, SpaceTag.CENTER, "[scenario] g_eta"),
            g_s=_coeff(p["g_s"], grid, SpaceTag.NODE_ALL, "[scenario] g_s"),
            g_V2=_coeff(p["g_V2"], grid, SpaceTag.CENTER, "[scenario] g_V2"),
            mu_minus=NevanlinnaSpec(*_pair(p["mu_minus"], "[scenario] mu_minus")),
            mu_plus=NevanlinnaSpec(*_pair(p["mu_plus"], "[scenario] mu_plus")),
            nu_minus=NevanlinnaSpec(*_pair(p["nu_minus"], "[scenario] nu_minus")),
            nu_plus=NevanlinnaSpec(*_pair(p["nu_plus"], "[scenario] nu_plus")),
        )
        model = make_full_dynamic(grid, params)
        laws = [params.mu_minus, params.mu_plus, params.nu_minus, params.nu_plus]
    return model, laws


def build_scheme(cfg: RunConfig) -> SchemeParams:
    s = cfg.scheme
    return SchemeParams(
        dt=_float(s["dt"], "[scheme] dt"),
        t_end=_float(s["t_end"], "[scheme] t_end"),
        theta=_float(s["theta"], "[scheme] theta"),
        record_every=_int(s["record_every"], "[scheme] record_every"),
        rho=_float(s["rho"], "[scheme] rho"),
    )


def build_source(cfg: RunConfig, model: AssembledModel) -> Signal:
    s = cfg.source
    kind = s["kind"]
    if kind == "zero":
        return ZeroSignal(model.layout.dim)
    block = s["block"] or model.layout.names[0]
    if block not in model.layout.names:
        raise ConfigError(f"[source] block: unknown block {block!r}")
    amplitude = _float(s["amplitude"], "[source] amplitude")
    if model.layout.tag_of(block) is SpaceTag.TRACE:
        profile_vals = np.ones(1)
    else:
        x = model.layout.points_of(block)
        profile_vals = _eval_expr(s["profile"], x, "[source] profile")
    profile = embed_block(model.layout, block, profile_vals)
    if kind == "gaussian":
        env = gaussian_envelope(
            _float(s["center"], "[source] center"),
            _float(s["width"], "[source] width"),
            amplitude,
        )
    elif kind == "sinusoid":
        env = sinusoid_envelope(
            _float(s["frequency"], "[source] frequency"),
            _float(s["phase"], "[source] phase"),
            amplitude,
        )
    elif kind == "bump":
        env = bump_envelope(
            _float(s["t0"], "[source] t0"),
            _float(s["t1"], "[source] t1"),
            amplitude,
        )
    else:
        raise ConfigError(f"[source] kind: unknown kind {kind!r}")
    return SeparableSignal(profile, env)


def build_initial(cfg: RunConfig, model: AssembledModel) -> StateVector:
    ini = cfg.initial
    kind = ini["kind"]
    amplitude = _float(ini["amplitude"], "[initial] amplitude")
    if kind == "zero":
        return zero_state(model.layout)
    if kind == "random":
        rng = np.random.default_rng(_int(ini["seed"], "[initial] seed"))
        return StateVector(
            model.layout, amplitude * rng.standard_normal(model.layout.dim)
        )
    if kind == "expr":
        vals = np.zeros(model.layout.dim)
        for key, raw in ini.items():
            if key in _INITIAL_DEFAULTS:
                continue
            if key not in model.layout.names:
                raise ConfigError(f"[initial]: unknown block {key!r}")
            x = model.layout.points_of(key)
            vals[model.layout.slice_of(key)] = amplitude * _eval_expr(
                raw, x, f"[initial] {key}"
            )
        return StateVector(model.layout, vals)
    raise ConfigError(f"[initial] kind: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# report formatting

def fmt17(x: float) -> str:
    """17 significant digits, compact exponent; round-trips float64."""
    mant, exp = f"{float(x):.16e}".split("e")
    return f"{mant}e{int(exp)}"


_NEV_SAMPLE_COUNT = 256


def _nevanlinna_samples() -> np.ndarray:
    rng = np.random.default_rng(20260825)
    return rng.uniform(-5, 5, _NEV_SAMPLE_COUNT) + 1j * rng.uniform(
        1e-3, 5, _NEV_SAMPLE_COUNT
    )


# ---------------------------------------------------------------------------
# commands

def cmd_check(cfg: RunConfig) -> tuple[list[str], int]:
    """Well-posedness report: c0, rho0, bound, skew defect, trace laws."""
    model, laws = build_model(cfg)
    scheme = build_scheme(cfg)
    report = coercivity(model.M0, model.M1, scheme.rho, model.W)
    if not report.satisfied:
        return ["c0<=0"], 2
    lines = [f"c0={fmt17(report.c0)}"]
    code = 0
    try:
        rho0 = find_rho0(
            model.M0, model.M1, _float(cfg.scheme["c_target"], "[scheme] c_target"), model.W
        )
        lines.append(f"rho0={fmt17(rho0)}")
    except NotCoerciveError:
        lines.append("rho0=unreachable")
        code = 2
    lines.append(f"bound={fmt17(report.bound)}")
    lines.append(f"skew_defect={fmt17(skew_defect(model.A))}")
    samples = _nevanlinna_samples()
    ok = all(nevanlinna_check(law, samples) for law in laws)
    lines.append(f"nevanlinna={'pass' if ok else 'fail'}")
    if not ok:
        code = 2
    return lines, code


def cmd_run(cfg: RunConfig) -> int:
    """Simulate and write the CSV (and optional snapshot file)."""
    model, _ = build_model(cfg)
    scheme = build_scheme(cfg)
    source = build_source(cfg, model)
    u0 = consistent_initial_state(model, build_initial(cfg, model), source(0.0))
    sys_ = factor(model.layout, model.W, model.M0, model.M1, model.A, scheme)
    ts = run(sys_, u0, source)
    out = cfg.output
    with_energy = _bool(out["energy"], "[output] energy")
    traces_sel = out["traces"]
    if traces_sel == "all":
        trace_names = list(model.layout.trace_names())
    elif traces_sel == "none":
        trace_names = []
    else:
        trace_names = [t.strip() for t in traces_sel.split(",") if t.strip()]
        for t in trace_names:
            if t not in model.layout.trace_names():
                raise ConfigError(f"[output] traces: unknown trace {t!r}")
    header = ["t"] + (["energy"] if with_energy else []) + [f"trace:{t}" for t in trace_names]
    rows = [",".join(header)]
    for i, t in enumerate(ts.times):
        row = [repr(float(t))]
        if with_energy:
            row.append(repr(float(ts.energy[i])))
        row += [repr(float(ts.traces[name][i])) for name in trace_names]
        rows.append(",".join(row))
    Path(out["csv"]).write_text("\n".join(rows) + "\n")
    snap_path = out["snapshots"]
    if snap_path:
        stride = _int(out["snapshot_stride"], "[output] snapshot_stride")
        if stride < 1:
            raise ConfigError("[output] snapshot_stride: must be >= 1")
        lines = ["t,block,index,value"]
        for i in range(0, len(ts), stride):
            t = repr(float(ts.times[i]))
            for name in model.layout.names:
                block = ts.snapshots[i][model.layout.slice_of(name)]
                for j, v in enumerate(block):
                    lines.append(f"{t},{name},{j},{repr(float(v))}")
        Path(snap_path).write_text("\n".join(lines) + "\n")
    return 0


def _restrict(fine_model: AssembledModel, coarse_model: AssembledModel, u: np.ndarray) -> np.ndarray:
    """Restrict a fine-grid state to a coarse layout of the same shape:
    node blocks inject, center blocks average the two straddling fine
    centers, traces copy."""
    lf, lc = fine_model.layout, coarse_model.layout
    m = lf.grid.n_cells // lc.grid.n_cells
    if m * lc.grid.n_cells != lf.grid.n_cells or m % 2 != 0:
        raise ConfigError("reference grid must be an even multiple of each level")
    out = np.zeros(lc.dim)
    for name, tag in lc.blocks:
        fine = u[lf.slice_of(name)]
        if tag is SpaceTag.TRACE:
            out[lc.offset_of(name)] = fine[0]
        elif tag is SpaceTag.CENTER:
            idx = m * np.arange(lc.grid.n_cells) + m // 2
            out[lc.slice_of(name)] = 0.5 * (fine[idx - 1] + fine[idx])
        else:
            first = {SpaceTag.NODE_ALL: 0, SpaceTag.NODE_FREE_LEFT: 1, SpaceTag.NODE_INTERIOR: 1}[tag]
            count = tag.block_length(lc.grid.n_cells)
            nodes_c = first + np.arange(count)
            out[lc.slice_of(name)] = fine[m * nodes_c - first]
        # node indexing: fine block starts at node `first`, so fine node m*j
        # sits at offset m*j - first within the block
    return out


def _converge_timoshenko(cfg: RunConfig, levels: list[int]) -> tuple[list[str], int]:
    fields, dfields = timoshenko_mms_fields()
    t_end = _float(cfg.scheme["t_end"], "[scheme] t_end")
    errs, hs, lines = [], [], []
    for n in levels:
        level_cfg = RunConfig(
            cfg.scenario, n, dict(cfg.params), dict(cfg.scheme),
            dict(cfg.source), dict(cfg.initial), dict(cfg.output),
        )
        model, _ = build_model(level_cfg)
        h = model.grid.h
        steps = max(1, round(t_end / h))
        scheme = SchemeParams(dt=t_end / steps, t_end=t_end, record_every=max(1, steps))
        src = manufactured_source(model, fields, dfields)
        sys_ = factor(model.layout, model.W, model.M0, model.M1, model.A, scheme)
        ts = run(sys_, exact_state(model, fields, 0.0), src)
        diff = ts.snapshots[-1] - exact_state(model, fields, ts.times[-1]).values
        err = math.sqrt(weighted_inner(diff, diff, model.W))
        errs.append(err)
        hs.append(h)
        lines.append(f"level={n} error={fmt17(err)}")
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    lines.append(f"slope={fmt17(slope)}")
    return lines, 0 if slope >= 1.9 else 2


def _converge_self(cfg: RunConfig, levels: list[int]) -> tuple[list[str], int]:
    """Self-convergence against a fine reference (for scenarios without a
    closed-form family).

    The error is the W-norm over the differential slots (nonzero M0
    diagonal).  Algebraic slots are pointwise functionals of the rest of
    the state with an h-dependent stencil, so comparing them across grids
    mixes first-order boundary terms into an otherwise second-order
    solution; the differential part is the quantity the time integrator
    actually propagates.
    """
    t_end = _float(cfg.scheme["t_end"], "[scheme] t_end")
    n_ref = 4 * max(levels)

    def solve(n: int):
        level_cfg = RunConfig(
            cfg.scenario, n, dict(cfg.params), dict(cfg.scheme),
            dict(cfg.source), dict(cfg.initial), dict(cfg.output),
        )
        model, _ = build_model(level_cfg)
        steps = max(1, round(t_end * n))
        scheme = SchemeParams(dt=t_end / steps, t_end=t_end, record_every=steps)
        source = build_source(level_cfg, model)
        u0 = consistent_initial_state(model, build_initial(level_cfg, model), source(0.0))
        sys_ = factor(model.layout, model.W, model.M0, model.M1, model.A, scheme)
        return model, run(sys_, u0, source)

    ref_model, ref_ts = solve(n_ref)
    errs, hs, lines = [], [], []
    for n in levels:
        model, ts = solve(n)
        ref = _restrict(ref_model, model, ref_ts.snapshots[-1])
        diff = (ts.snapshots[-1] - ref) * (model.M0.diagonal() != 0.0)
        err = math.sqrt(weighted_inner(diff, diff, model.W))
        errs.append(err)
        hs.append(model.grid.h)
        lines.append(f"level={n} error={fmt17(err)}")
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    lines.append(f"slope={fmt17(slope)}")
    return lines, 0 if slope >= 1.9 else 2


def cmd_converge(cfg: RunConfig, levels: list[int]) -> tuple[list[str], int]:
    if len(levels) < 3:
        raise ConfigError("converge needs at least 3 levels")
    if len(set(levels)) != len(levels):
        raise ConfigError("converge levels must be distinct")
    if any(n < 2 for n in levels):
        raise ConfigError("levels must be >= 2")
    levels = sorted(levels)
    if cfg.scenario in ("timoshenko_damped", "dynamic_inertia"):
        return _converge_timoshenko(cfg, levels)
    if cfg.scenario == "sturm_liouville":
        return _converge_self(cfg, levels)
    raise ConfigError(f"converge does not support scenario {cfg.scenario!r}")


def cmd_probe(cfg: RunConfig, kind: str, a: float | None = None) -> tuple[list[str], int]:
    model, _ = build_model(cfg)
    scheme = build_scheme(cfg)
    sys_ = factor(model.layout, model.W, model.M0, model.M1, model.A, scheme)
    if kind == "causality":
        if a is None:
            raise ConfigError("causality probe needs --a")
        if not 0 < a < scheme.t_end:
            raise ConfigError(f"split time a={a} must lie inside (0, t_end)")
        base = build_source(cfg, model)
        t0 = a + 0.01 * (scheme.t_end - a)
        pulse_block = model.layout.names[0]
        profile = embed_block(
            model.layout, pulse_block, np.ones(model.layout.length_of(pulse_block))
        )
        pulse = SeparableSignal(profile, bump_envelope(t0, scheme.t_end))
        dev = causality_probe(sys_, base, base + pulse, a)
        return [f"max_dev_before_a={fmt17(dev)}"], 0 if dev <= 1e-13 else 2
    if kind == "bound":
        report = coercivity(model.M0, model.M1, scheme.rho, model.W)
        if not report.satisfied:
            return ["c0<=0"], 2
        source = build_source(cfg, model)
        from .integrate import UndefinedRatioError

        try:
            ratio = bound_probe(sys_, source, scheme, scheme.rho)
        except UndefinedRatioError as exc:
            raise ConfigError(str(exc)) from exc
        lines = [f"ratio={fmt17(ratio)}", f"limit={fmt17(report.bound)}"]
        return lines, 0 if ratio <= 1.05 * report.bound else 2
    raise ConfigError(f"unknown probe kind {kind!r}")


# ---------------------------------------------------------------------------
# entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve that
        raise ConfigError(message)


def main(argv=None) -> int:
    parser = _Parser(prog="evobeam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check", "run", "converge", "probe"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to an INI config")
        if name == "converge":
            p.add_argument("--levels", required=True, help="comma-separated n_cells")
        if name == "probe":
            p.add_argument("--kind", required=True, choices=("causality", "bound"))
            p.add_argument("--a", type=float, default=None, help="causality split time")
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 4
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 3
    try:
        cfg = parse_config(text)
        if args.command == "check":
            lines, code = cmd_check(cfg)
        elif args.command == "run":
            lines, code = [], cmd_run(cfg)
        elif args.command == "converge":
            levels = [_int(v.strip(), "--levels") for v in args.levels.split(",") if v.strip()]
            lines, code = cmd_converge(cfg, levels)
        else:
            lines, code = cmd_probe(cfg, args.kind, args.a)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except NotCoerciveError as exc:
        print(f"not coercive: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except EvobeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in lines:
        print(line)
    return code
