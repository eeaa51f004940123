"""File formats for sampled tuples, polynomials, certificates, and reports.

Writers are atomic (temp file in the target directory, then rename) and emit
shortest round-trip decimals, so equal inputs give byte-identical files.
"""

import json
import math
import os
import tempfile

import numpy as np

from .certify import DecayHypothesis
from .geometry import Domain, QuadratureGrid
from .points import SampledQFunction
from .polyfit import QPolynomial, multi_indices


def _atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    """Recursively convert numpy containers; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_report_json(path, obj):
    """Serialize a dict-like report; NaN and infinities are emitted as null."""
    text = json.dumps(_jsonable(obj), indent=1, sort_keys=True)
    _atomic_write(path, text + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# sampled tuple functions
#
# CSV layout: first line `n,m,Q` (the three integers), then one row per grid
# node with n coordinates followed by Q*m values grouped by branch.  Branch
# order within a row carries no meaning.


def write_samples_csv(path, u):
    n, m, q = u.n, u.m, u.q
    lines = ["%d,%d,%d" % (n, m, q)]
    flat = u.values.reshape(u.size, q * m)
    for x, row in zip(u.grid.points, flat):
        cells = [repr(float(c)) for c in x] + [repr(float(v)) for v in row]
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def _infer_resolution(points):
    """Smallest positive per-axis gap between distinct sorted coordinates."""
    best = math.inf
    for axis in range(points.shape[1]):
        u = np.unique(points[:, axis])
        if u.size > 1:
            best = min(best, float(np.diff(u).min()))
    if not math.isfinite(best):
        raise ValueError(
            "cannot infer grid resolution from coincident coordinates"
        )
    return best


def _samples_from_arrays(points, values, resolution=None):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float)
    h = float(resolution) if resolution else _infer_resolution(points)
    weights = np.full(points.shape[0], h ** points.shape[1])
    grid = QuadratureGrid(points, weights, h)
    return SampledQFunction(grid, values)


def read_samples_csv(path, resolution=None):
    """Load a sampled tuple function; node weights are h^n cell measures.

    The grid step h is inferred from the closest pair of distinct coordinate
    values unless an explicit resolution overrides it.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            n, m, q = (int(tok) for tok in header.split(","))
        except ValueError:
            raise ValueError("malformed sample header %r" % header) from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != n + q * m:
                raise ValueError(
                    "row %d has %d cells, expected %d"
                    % (lineno, len(cells), n + q * m)
                )
            rows.append([float(c) for c in cells])
    if not rows:
        raise ValueError("sample file has no data rows")
    data = np.asarray(rows)
    return _samples_from_arrays(
        data[:, :n], data[:, n:].reshape(-1, q, m), resolution
    )


def write_samples_json(path, u):
    obj = {
        "n": u.n,
        "m": u.m,
        "Q": u.q,
        "resolution": u.grid.resolution,
        "points": u.grid.points,
        "values": u.values,
    }
    write_report_json(path, obj)


def read_samples_json(path):
    obj = read_json(path)
    values = np.asarray(obj["values"], dtype=float)
    expected = (int(obj["Q"]), int(obj["m"]))
    if values.ndim != 3 or values.shape[1:] != expected:
        raise ValueError("values shape %s does not match header" % (values.shape,))
    return _samples_from_arrays(obj["points"], values, obj.get("resolution"))


# ---------------------------------------------------------------------------
# polynomial tuples
#
# JSON layout: {n, m, Q, k, center, coeffs: [{i, j, p, a}]} where i is the
# 1-based branch index, j the 1-based component index, p the monomial
# multi-index, and a the coefficient.  Zero coefficients are included so the
# file determines the shape without consulting the degree.


def polynomial_to_dict(poly):
    entries = []
    idx = poly.indices
    for i in range(poly.q):
        for j in range(poly.m):
            for col, p in enumerate(idx):
                entries.append({
                    "i": i + 1,
                    "j": j + 1,
                    "p": list(p),
                    "a": float(poly.coeffs[i, j, col]),
                })
    return {
        "n": poly.n,
        "m": poly.m,
        "Q": poly.q,
        "k": poly.degree,
        "center": poly.center,
        "coeffs": entries,
    }


def polynomial_from_dict(obj):
    n, m, q, k = (int(obj[key]) for key in ("n", "m", "Q", "k"))
    idx = {p: col for col, p in enumerate(multi_indices(n, k))}
    coeffs = np.zeros((q, m, len(idx)))
    for entry in obj["coeffs"]:
        p = tuple(int(v) for v in entry["p"])
        if p not in idx:
            raise ValueError("multi-index %s exceeds degree %d" % (p, k))
        coeffs[int(entry["i"]) - 1, int(entry["j"]) - 1, idx[p]] = float(entry["a"])
    return QPolynomial(np.asarray(obj["center"], dtype=float), k, coeffs)


def write_polynomial_json(path, poly, residual=None, extra=None):
    obj = polynomial_to_dict(poly)
    if residual is not None:
        obj["residual"] = float(residual)
    if extra:
        obj.update(extra)
    write_report_json(path, obj)


def read_polynomial_json(path):
    return polynomial_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# certificates and hypotheses


def write_certificate_json(path, cert):
    write_report_json(path, cert.as_dict())


def hypothesis_from_dict(obj):
    """Build a decay hypothesis from parsed JSON; `q` and `q_exp` both work."""
    kwargs = {
        "n": int(obj["n"]),
        "k": int(obj["k"]),
        "q_exp": float(obj.get("q_exp", obj.get("q", 2.0))),
        "mu": float(obj["mu"]),
    }
    for key in ("eps", "beta", "beta1", "beta2", "beta0"):
        if obj.get(key) is not None:
            kwargs[key] = float(obj[key])
    for key in ("betas", "beta_tildes"):
        if obj.get(key):
            kwargs[key] = tuple(float(v) for v in obj[key])
    return DecayHypothesis(**kwargs)


def read_hypothesis_json(path):
    return hypothesis_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# plot-ready profiles and domain configs


def write_profile_csv(path, radii, values, labels=("rho", "value")):
    lines = ["%s,%s" % labels]
    for rho, val in zip(np.asarray(radii, float), np.asarray(values, float)):
        lines.append("%s,%s" % (repr(float(rho)), repr(float(val))))
    _atomic_write(path, "\n".join(lines) + "\n")


def domain_to_dict(domain, resolution=None):
    obj = {"kind": domain.kind, "n": domain.n, "center": domain.center}
    if domain.kind == "annulus":
        obj["inner_radius"] = domain.inner_radius
        obj["outer_radius"] = domain.radius
    elif domain.kind == "box":
        obj["half_width"] = domain.half_width
    else:
        obj["radius"] = domain.radius
    if resolution is not None:
        obj["resolution"] = float(resolution)
    return obj


def domain_from_dict(obj):
    """Rebuild a domain from config JSON; returns (domain, resolution|None)."""
    kind = obj["kind"]
    n = int(obj["n"])
    center = obj.get("center")
    if kind == "ball":
        dom = Domain.ball(n, float(obj["radius"]), center)
    elif kind == "half_ball":
        dom = Domain.half_ball(n, float(obj["radius"]), center)
    elif kind == "annulus":
        dom = Domain.annulus(
            n, float(obj["inner_radius"]), float(obj["outer_radius"]), center
        )
    elif kind == "box":
        dom = Domain.box(n, float(obj["half_width"]), center)
    else:
        raise ValueError("unknown domain kind %r" % kind)
    res = obj.get("resolution")
    return dom, (float(res) if res is not None else None)


def read_domain_json(path):
    return domain_from_dict(read_json(path))


def bounding_ball(u):
    """Deterministic enclosing ball: bounding-box midpoint, padded radius."""
    pts = u.grid.points
    center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    radius = float(np.linalg.norm(pts - center, axis=1).max()) + u.grid.resolution
    return center, radius
