"""File formats: trajectory CSV/binary, result JSON, regions CSV, QQ CSV/SVG.

The binary trajectory format is a magic tag, a length-prefixed UTF-8 JSON
header, then length-prefixed little-endian float64 blocks for x, v, pbest,
nbest, fx. CSV floats use repr, which round-trips float64 exactly.
"""

import csv
import hashlib
import io
import json
import struct

import numpy as np

from .swarm_core import PsoParams, TopologySpec, Trajectory

_MAGIC = b"SWC1"

CSV_HEADER = ["run_id", "particle", "iter", "coord", "x", "v", "pbest", "nbest", "fx"]


class FormatError(ValueError):
    """Raised when a file does not match the expected layout."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (frozenset, set)):
        return sorted(obj)
    return obj


def params_to_dict(params: PsoParams) -> dict:
    return {
        "omega": params.omega,
        "c": params.c,
        "swarm_size": params.swarm_size,
        "iterations": params.iterations,
        "dim": params.dim,
        "domain": [list(ax) for ax in params.domain],
        "topology": {"kind": params.topology.kind, "ring_k": params.topology.ring_k},
        "seed": params.seed,
        "velocity_init_factor": params.velocity_init_factor,
    }


def params_from_dict(d: dict) -> PsoParams:
    topo = d.get("topology", {})
    return PsoParams(
        omega=d["omega"],
        c=d["c"],
        swarm_size=d["swarm_size"],
        iterations=d["iterations"],
        dim=d.get("dim", 2),
        domain=tuple(tuple(ax) for ax in d.get("domain", ((-10.0, 10.0), (-10.0, 10.0)))),
        topology=TopologySpec(kind=topo.get("kind", "ring"), ring_k=topo.get("ring_k", 1)),
        seed=d.get("seed", 0),
        velocity_init_factor=d.get("velocity_init_factor", 0.5),
    )


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per (iteration, particle, coordinate); fx repeats per coordinate."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        R, S, d = traj.x.shape
        for n in range(R):
            for i in range(S):
                fx = repr(float(traj.fx[n, i]))
                for k in range(d):
                    w.writerow([
                        traj.run_id, i, n, k,
                        repr(float(traj.x[n, i, k])),
                        repr(float(traj.v[n, i, k])),
                        repr(float(traj.pbest[n, i, k])),
                        repr(float(traj.nbest[n, i, k])),
                        fx,
                    ])


def read_trajectory_csv(path, params: PsoParams = None, objective: str = "",
                        exit_count: int = 0) -> Trajectory:
    """Rebuild a Trajectory from CSV; params/objective are not stored in CSV."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != CSV_HEADER:
            raise FormatError(f"unexpected CSV header {header}")
        rows = list(r)
    if not rows:
        raise FormatError("trajectory CSV has no data rows")
    run_id = rows[0][0]
    R = max(int(row[2]) for row in rows) + 1
    S = max(int(row[1]) for row in rows) + 1
    d = max(int(row[3]) for row in rows) + 1
    x = np.empty((R, S, d))
    v = np.empty((R, S, d))
    pbest = np.empty((R, S, d))
    nbest = np.empty((R, S, d))
    fx = np.empty((R, S))
    for row in rows:
        i, n, k = int(row[1]), int(row[2]), int(row[3])
        x[n, i, k] = float(row[4])
        v[n, i, k] = float(row[5])
        pbest[n, i, k] = float(row[6])
        nbest[n, i, k] = float(row[7])
        fx[n, i] = float(row[8])
    return Trajectory(x=x, v=v, pbest=pbest, nbest=nbest, fx=fx, run_id=run_id,
                      objective=objective, params=params, exit_count=exit_count)


def _write_block(fh, arr: np.ndarray) -> None:
    flat = np.ascontiguousarray(arr, dtype="<f8").ravel()
    fh.write(struct.pack("<Q", flat.size))
    fh.write(flat.tobytes())


def _read_block(fh) -> np.ndarray:
    raw = fh.read(8)
    if len(raw) != 8:
        raise FormatError("truncated block length")
    (count,) = struct.unpack("<Q", raw)
    data = fh.read(8 * count)
    if len(data) != 8 * count:
        raise FormatError("truncated block payload")
    return np.frombuffer(data, dtype="<f8").copy()


def write_trajectory_binary(traj: Trajectory, path) -> None:
    header = {
        "run_id": traj.run_id,
        "objective": traj.objective,
        "exit_count": traj.exit_count,
        "shape": list(traj.x.shape),
        "params": params_to_dict(traj.params) if traj.params is not None else None,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in (traj.x, traj.v, traj.pbest, traj.nbest, traj.fx):
            _write_block(fh, arr)


def read_trajectory_binary(path) -> Trajectory:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise FormatError("bad magic; not a trajectory binary")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        R, S, d = header["shape"]
        x = _read_block(fh).reshape(R, S, d)
        v = _read_block(fh).reshape(R, S, d)
        pbest = _read_block(fh).reshape(R, S, d)
        nbest = _read_block(fh).reshape(R, S, d)
        fx = _read_block(fh).reshape(R, S)
    params = params_from_dict(header["params"]) if header["params"] else None
    return Trajectory(x=x, v=v, pbest=pbest, nbest=nbest, fx=fx,
                      run_id=header["run_id"], objective=header["objective"],
                      params=params, exit_count=header["exit_count"])


def stats_json(theorem: int, params: dict, estimates: dict, region,
               mode: str, warnings) -> dict:
    """Canonical analysis result: {theorem, params, estimates, region, mode, warnings}."""
    if region is not None and hasattr(region, "to_dict"):
        region = region.to_dict()
    return {
        "theorem": theorem,
        "params": _jsonable(params),
        "estimates": _jsonable(estimates),
        "region": _jsonable(region),
        "mode": mode,
        "warnings": list(warnings),
    }


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _strip_keys(obj, names):
    if isinstance(obj, dict):
        return {k: _strip_keys(v, names) for k, v in obj.items() if k not in names}
    if isinstance(obj, list):
        return [_strip_keys(v, names) for v in obj]
    return obj


def digest(obj, ignore=("timestamp",)) -> str:
    """SHA-256 of the canonical JSON with volatile keys removed."""
    clean = _strip_keys(_jsonable(obj), set(ignore))
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def trajectory_digest(traj: Trajectory) -> str:
    """SHA-256 over the trajectory arrays and identifying metadata."""
    h = hashlib.sha256()
    h.update(traj.run_id.encode("utf-8"))
    h.update(traj.objective.encode("utf-8"))
    h.update(str(traj.exit_count).encode("ascii"))
    if traj.params is not None:
        h.update(json.dumps(params_to_dict(traj.params), sort_keys=True).encode("utf-8"))
    for arr in (traj.x, traj.v, traj.pbest, traj.nbest, traj.fx):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()


def load_trajectory(path) -> Trajectory:
    """Read a trajectory file, sniffing binary vs CSV by the magic tag."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return read_trajectory_binary(path)
    return read_trajectory_csv(path)


def write_regions_csv(rows, path) -> None:
    """Admissibility grid rows (omega, c, a3_ok, b2_ok) with lowercase booleans."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "c", "a3_ok", "b2_ok"])
        for omega, c, a3_ok, b2_ok in rows:
            w.writerow([repr(float(omega)), repr(float(c)),
                        "true" if a3_ok else "false",
                        "true" if b2_ok else "false"])


def write_qq_csv(qq, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theoretical", "sample"])
        for t, s in zip(qq.theoretical, qq.sample):
            w.writerow([repr(float(t)), repr(float(s))])


def qq_svg(qq) -> str:
    """Standalone 600x600 scatter of the QQ pairs with a reference diagonal."""
    size, margin = 600.0, 50.0
    lo = float(min(qq.theoretical.min(), qq.sample.min()))
    hi = float(max(qq.theoretical.max(), qq.sample.max()))
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    scale = (size - 2.0 * margin) / span

    def px(val):
        return margin + (val - lo) * scale

    def py(val):
        return size - margin - (val - lo) * scale

    buf = io.StringIO()
    buf.write('<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 600 600">\n')
    buf.write('<rect width="600" height="600" fill="white"/>\n')
    buf.write(f'<polyline points="{px(lo):.2f},{py(lo):.2f} {px(hi):.2f},{py(hi):.2f}" '
              'stroke="#888" stroke-width="1" fill="none"/>\n')
    for t, s in zip(qq.theoretical, qq.sample):
        buf.write(f'<circle cx="{px(float(t)):.2f}" cy="{py(float(s)):.2f}" r="2" '
                  'fill="#1f62a8" fill-opacity="0.7"/>\n')
    buf.write(f'<text x="{size / 2:.0f}" y="592" text-anchor="middle" font-size="14" '
              'font-family="sans-serif">theoretical quantile</text>\n')
    buf.write('<text x="14" y="300" text-anchor="middle" font-size="14" '
              'font-family="sans-serif" transform="rotate(-90 14 300)">sample quantile</text>\n')
    buf.write("</svg>\n")
    return buf.getvalue()


def write_qq_svg(qq, path) -> None:
    with open(path, "w") as fh:
        fh.write(qq_svg(qq))
