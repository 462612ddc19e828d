"""File formats: curve/trajectory CSV, config files, manifests, reports.

All floats are serialized with 17 significant digits so that write->read
round-trips reproduce IEEE doubles bit-exactly, and every write is atomic
(temp file in the target directory, then rename).
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .curves import PiecewiseConstantCurve, SampledCurve
from .errors import ConfigError, IncompatibleSnapshots
from .flows import FlowConfig, FlowTrajectory
from .manifolds import Manifold, parse_manifold

_FMT = "%.17g"


def fmt(x: float) -> str:
    return _FMT % float(x)


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta_line(tag: str, **fields) -> str:
    parts = " ".join(f"{k}={v}" for k, v in fields.items())
    return f"# {tag} {parts}"


def _parse_meta(line: str, tag: str) -> dict:
    body = line.lstrip("#").strip()
    tokens = body.split()
    if not tokens or tokens[0] != tag:
        raise ConfigError(f"expected a '# {tag} ...' metadata line, got {line!r}")
    out = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"malformed metadata token {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


def curve_to_text(curve) -> str:
    man = curve.manifold
    n = man.ambient_dim
    cols = ",".join(f"c{i}" for i in range(n))
    lines = []
    if isinstance(curve, PiecewiseConstantCurve):
        lines.append(_meta_line("curve", kind="pc", manifold=man.spec_id))
        lines.append(f"x_right_end,{cols}")
        right_ends = np.concatenate([curve.breakpoints, [1.0]])
        for x, v in zip(right_ends, curve.values):
            lines.append(",".join([fmt(x)] + [fmt(c) for c in v]))
    elif isinstance(curve, SampledCurve):
        lines.append(_meta_line("curve", kind="sampled", manifold=man.spec_id))
        lines.append(f"x,{cols}")
        for x, v in zip(curve.xs, curve.values):
            lines.append(",".join([fmt(x)] + [fmt(c) for c in v]))
    else:
        raise ConfigError(f"not a curve: {type(curve).__name__}")
    return "\n".join(lines) + "\n"


def write_curve(path: str, curve) -> None:
    _atomic_write_text(path, curve_to_text(curve))


def _read_rows(lines, n_cols: int):
    rows = []
    for ln in lines:
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split(",")
        if len(parts) != n_cols:
            raise ConfigError(
                f"row has {len(parts)} columns, expected {n_cols}: {ln!r}"
            )
        rows.append([float(p) for p in parts])
    return np.array(rows)


def curve_from_text(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty curve file")
    meta = _parse_meta(lines[0], "curve")
    man = parse_manifold(meta.get("manifold", ""))
    kind = meta.get("kind")
    header = lines[1].strip().split(",")
    if len(header) != 1 + man.ambient_dim:
        raise ConfigError(
            f"curve for {man.spec_id} needs {1 + man.ambient_dim} columns, "
            f"header has {len(header)}"
        )
    data = _read_rows(lines[2:], 1 + man.ambient_dim)
    if data.size == 0:
        raise ConfigError("curve file has no data rows")
    if kind == "pc":
        if header[0] != "x_right_end":
            raise ConfigError("pc curve must use the x_right_end column")
        right_ends, values = data[:, 0], data[:, 1:]
        if abs(right_ends[-1] - 1.0) > 1e-12:
            raise ConfigError("last plateau must end at x=1")
        return PiecewiseConstantCurve(man, right_ends[:-1], values)
    if kind == "sampled":
        if header[0] != "x":
            raise ConfigError("sampled curve must use the x column")
        xs, values = data[:, 0], data[:, 1:]
        expected = np.linspace(0.0, 1.0, len(xs))
        if len(xs) < 2 or np.max(np.abs(xs - expected)) > 1e-9:
            raise ConfigError("sampled curve must sit on a uniform grid over [0,1]")
        return SampledCurve(man, values)
    raise ConfigError(f"unknown curve kind {kind!r}")


def read_curve(path: str):
    with open(path) as handle:
        return curve_from_text(handle.read())


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def write_trajectory(traj_path: str, diag_path: str, traj: FlowTrajectory) -> None:
    man = traj.manifold
    n = man.ambient_dim
    first = traj.snapshots[0]
    kind = "pc" if isinstance(first, PiecewiseConstantCurve) else "sampled"
    eps = "none" if traj.epsilon is None else fmt(traj.epsilon)
    lines = [
        _meta_line(
            "trajectory",
            kind=kind,
            manifold=man.spec_id,
            solver=traj.solver,
            dt_nominal=fmt(traj.dt_nominal),
            epsilon=eps,
        ),
        "t,x," + ",".join(f"c{i}" for i in range(n)),
    ]
    for t, snap in zip(traj.times, traj.snapshots):
        if isinstance(snap, PiecewiseConstantCurve):
            xs = np.concatenate([snap.breakpoints, [1.0]])
        else:
            xs = snap.xs
        for x, v in zip(xs, snap.values):
            lines.append(",".join([fmt(t), fmt(x)] + [fmt(c) for c in v]))
    _atomic_write_text(traj_path, "\n".join(lines) + "\n")

    diag = ["# diagnostics", "t,tv,dissipation,max_jump,stopped"]
    for k in range(len(traj)):
        diag.append(
            ",".join(
                [
                    fmt(traj.times[k]),
                    fmt(traj.tv[k]),
                    fmt(traj.dissipation[k]),
                    fmt(traj.max_jump[k]),
                    str(int(traj.stopped[k])),
                ]
            )
        )
    _atomic_write_text(diag_path, "\n".join(diag) + "\n")


def read_trajectory(traj_path: str, diag_path: str) -> FlowTrajectory:
    with open(traj_path) as handle:
        lines = [ln for ln in handle.read().splitlines() if ln.strip()]
    meta = _parse_meta(lines[0], "trajectory")
    man = parse_manifold(meta["manifold"])
    kind = meta.get("kind")
    data = _read_rows(lines[2:], 2 + man.ambient_dim)
    if data.size == 0:
        raise ConfigError("trajectory file has no data rows")
    # split rows into snapshots at changes of t (bit-exact after round-trip)
    tcol = data[:, 0]
    starts = np.concatenate([[0], np.nonzero(np.diff(tcol) != 0.0)[0] + 1, [len(tcol)]])
    times, snapshots = [], []
    for a, b in zip(starts[:-1], starts[1:]):
        block = data[a:b]
        times.append(block[0, 0])
        xs, values = block[:, 1], block[:, 2:]
        if kind == "pc":
            snapshots.append(PiecewiseConstantCurve(man, xs[:-1], values))
        else:
            snapshots.append(SampledCurve(man, values))

    with open(diag_path) as handle:
        dlines = [ln for ln in handle.read().splitlines() if ln.strip()]
    ddata = _read_rows(dlines[2:], 5)
    if ddata.shape[0] != len(times) or np.any(ddata[:, 0] != np.array(times)):
        raise IncompatibleSnapshots("diagnostics do not match the trajectory times")
    eps_raw = meta.get("epsilon", "none")
    return FlowTrajectory(
        manifold=man,
        solver=meta.get("solver", "unknown"),
        times=np.array(times),
        snapshots=snapshots,
        flux_fields=[None] * len(times),
        tv=ddata[:, 1],
        dissipation=ddata[:, 2],
        max_jump=ddata[:, 3],
        stopped=ddata[:, 4] != 0.0,
        dt_nominal=float(meta.get("dt_nominal", 0.0)),
        epsilon=None if eps_raw == "none" else float(eps_raw),
    )


# ---------------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "manifold": str,
    "epsilon": float,
    "grid_n": int,
    "dt": None,  # float or "auto"
    "t_max": float,
    "merge_tol": float,
    "snapshot_every": int,
    "seed": int,
    "scheme": str,
    "cfl_factor": float,
}


def parse_config_text(text: str) -> dict:
    """key = value lines; '#' comments; keys are the FlowConfig fields."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        caster = _CONFIG_KEYS[key]
        if key == "dt":
            out[key] = "auto" if value == "auto" else float(value)
        elif caster is None:
            out[key] = value
        else:
            try:
                out[key] = caster(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return out


def flow_config_from_mapping(mapping: dict) -> FlowConfig:
    if "manifold" not in mapping:
        raise ConfigError("config must set 'manifold'")
    kwargs = dict(mapping)
    kwargs["manifold"] = parse_manifold(kwargs["manifold"]) \
        if isinstance(kwargs["manifold"], str) else kwargs["manifold"]
    try:
        return FlowConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def read_config(path: str) -> FlowConfig:
    with open(path) as handle:
        return flow_config_from_mapping(parse_config_text(handle.read()))


def config_to_text(cfg: FlowConfig) -> str:
    pairs = [
        ("manifold", cfg.manifold.spec_id),
        ("epsilon", fmt(cfg.epsilon)),
        ("grid_n", str(cfg.grid_n)),
        ("dt", "auto" if cfg.dt == "auto" else fmt(cfg.dt)),
        ("t_max", fmt(cfg.t_max)),
        ("merge_tol", fmt(cfg.merge_tol)),
        ("snapshot_every", str(cfg.snapshot_every)),
        ("seed", str(cfg.seed)),
        ("scheme", cfg.scheme),
        ("cfl_factor", fmt(cfg.cfl_factor)),
    ]
    return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"


# ---------------------------------------------------------------------------
# reports, manifests
# ---------------------------------------------------------------------------


def reports_to_csv(reports) -> str:
    lines = ["check,pass,worst,at_t,at_x,tol"]
    for r in reports:
        loc = list(r.location) + ["", ""]
        at_t = fmt(loc[0]) if loc[0] != "" else ""
        at_x = fmt(loc[1]) if isinstance(loc[1], (int, float)) else ""
        lines.append(
            ",".join(
                [r.name, str(int(r.passed)), fmt(r.worst), at_t, at_x, fmt(r.tolerance)]
            )
        )
    return "\n".join(lines) + "\n"


def write_reports(path: str, reports) -> None:
    _atomic_write_text(path, reports_to_csv(reports))


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path: str, command: str, config: dict | None,
                   inputs: list[str], outputs: list[str], seed=None) -> None:
    from . import __version__

    payload = {
        "tool": "mtvf",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": {os.path.basename(p): sha256_of(p) for p in inputs},
        "outputs": [os.path.basename(p) for p in outputs],
    }
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
