"""File writers: OBJ mesh, grid CSV, PPM contour image, and number formatting.

All writers return bytes so callers decide where they go.  Output is a pure
function of the input arrays, which keeps lot artifacts byte-reproducible.
"""

from __future__ import annotations

import functools

import numpy as np

from .errors import GeometryError
from .surface import lattice_faces

SIG_DIGITS = 9


def fmt_sig(x, digits=SIG_DIGITS):
    """Fixed-notation string of ``x`` rounded to ``digits`` significant digits."""
    return fmt_sig_array(np.array([x], dtype=float), digits)[0]


def fmt_sig_array(values, digits=SIG_DIGITS):
    """Vectorised :func:`fmt_sig`; returns a list of strings."""
    vals = np.asarray(values, dtype=float).ravel() + 0.0  # folds -0.0 into 0.0
    if not np.all(np.isfinite(vals)):
        raise ValueError("cannot format non-finite values")
    # decimal exponent after rounding to `digits` figures; log10 decides it
    # except near a power of ten, where the exact %e rendering is consulted
    mag = np.abs(vals)
    exps = np.zeros(vals.size, dtype=np.int64)
    nz = mag > 0
    exps[nz] = np.floor(np.log10(mag[nz])).astype(np.int64)
    mant = np.ones_like(mag)
    mant[nz] = mag[nz] / 10.0 ** exps[nz].astype(float)
    risky = nz & ((mant < 1.000001) | (mant > 9.99999))
    if risky.any():
        sub = vals[risky].tolist()
        sci = (("%." + str(digits - 1) + "e\n") * len(sub)) % tuple(sub)
        exps[risky] = [int(tok.rsplit("e", 1)[1]) for tok in sci.split()]
    decimals = np.maximum(digits - 1 - exps, 0)
    args = [a for pair in zip(decimals.tolist(), vals.tolist()) for a in pair]
    return (("%.*f\n" * vals.size) % tuple(args)).split()


@functools.lru_cache(maxsize=4)
def _face_block(n_theta, n_z):
    faces = lattice_faces(n_theta, n_z) + 1
    return (("f %d %d %d %d\n" * len(faces)) % tuple(faces.ravel().tolist())).encode("ascii")


def fixed_point_lines(rows, decimals=6, prefix=b""):
    """Rows of numbers as ``prefix x y ...`` text lines in fixed notation.

    Values are rounded with ``rint(x * 10**decimals)`` (half to even) and
    rendered without exponent; a rounded zero prints unsigned.  Built as one
    byte matrix with padding masked out, so large meshes format quickly.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or not np.all(np.isfinite(rows)):
        raise ValueError("expected a finite 2D array")
    scale = 10 ** decimals
    q = np.rint(rows * scale).astype(np.int64)
    neg = q < 0
    ip, fp = np.divmod(np.abs(q), scale)
    if ip.size and ip.max() < 2 ** 31:
        ip = ip.astype(np.int32)  # narrower digit arithmetic is markedly faster
    fp = fp.astype(np.int32)
    n_int = len(str(int(ip.max()))) if ip.size else 1
    width = 2 + n_int + 1 + decimals  # leading space, sign, digits, point, decimals
    chars = np.zeros(rows.shape + (width,), dtype=np.uint8)
    keep = np.ones(rows.shape + (width,), dtype=bool)
    chars[..., 0] = ord(" ")
    chars[..., 1] = ord("-")
    keep[..., 1] = neg
    for i in range(n_int):
        place = 10 ** (n_int - 1 - i)
        chars[..., 2 + i] = 48 + (ip // place) % 10
        keep[..., 2 + i] = (ip >= place) | (i == n_int - 1)
    chars[..., 2 + n_int] = ord(".")
    for i in range(decimals):
        chars[..., 3 + n_int + i] = 48 + (fp // 10 ** (decimals - 1 - i)) % 10
    n = rows.shape[0]
    head = np.frombuffer(prefix, dtype=np.uint8)
    line = np.concatenate([np.broadcast_to(head, (n, head.size)),
                           chars.reshape(n, -1), np.full((n, 1), ord("\n"), np.uint8)], axis=1)
    mask = np.concatenate([np.ones((n, head.size), bool), keep.reshape(n, -1),
                           np.ones((n, 1), bool)], axis=1)
    return line[mask].tobytes()


def export_obj(mesh):
    """Wavefront OBJ: ``v x y z`` lines (6 decimals) then 1-based quad ``f`` lines."""
    v = np.asarray(mesh.vertices, dtype=float)
    faces = np.asarray(mesh.faces)
    if len(v) < 3 or len(faces) == 0:
        raise GeometryError("degenerate mesh")
    head = fixed_point_lines(v, 6, b"v")
    if mesh.lattice is not None:
        tail = _face_block(*mesh.lattice)
    else:
        f1 = faces + 1
        line = "f" + " %d" * faces.shape[1] + "\n"
        tail = ((line * len(f1)) % tuple(f1.ravel().tolist())).encode("ascii")
    return head + tail


def export_grid_csv(grid):
    """Grid as CSV: header ``z_mm`` + theta values, then one row per height."""
    lines = ["z_mm," + ",".join(fmt_sig_array(grid.theta))]
    cells = fmt_sig_array(grid.deviations)
    zs = fmt_sig_array(grid.z)
    n = grid.n_theta
    for k, zk in enumerate(zs):
        lines.append(zk + "," + ",".join(cells[k * n:(k + 1) * n]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def diverging_rgb(values):
    """Blue-white-red colours, symmetric about zero; uint8 array (..., 3).

    ``-s`` maps to pure blue, 0 to white and ``+s`` to pure red, with
    ``s = max(|min|, |max|)``; channels are linear in value.
    """
    d = np.asarray(values, dtype=float)
    s = float(np.max(np.abs(d))) if d.size else 0.0
    t = d / s if s > 0 else np.zeros_like(d)
    fade = np.floor(255.0 * (1.0 - np.abs(t)) + 0.5).astype(np.uint8)
    rgb = np.full(d.shape + (3,), 255, dtype=np.uint8)
    neg = t < 0
    pos = t > 0
    rgb[neg, 0] = fade[neg]
    rgb[neg, 1] = fade[neg]
    rgb[pos, 1] = fade[pos]
    rgb[pos, 2] = fade[pos]
    return rgb


def export_contour_ppm(grid):
    """Binary PPM (P6) of the unrolled wall; one pixel per cell, top row = top of part."""
    if grid.n_theta < 2 or grid.n_z < 2:
        raise GeometryError("contour image needs at least 2 rows and 2 columns")
    rgb = diverging_rgb(grid.deviations[::-1])
    header = f"P6\n{grid.n_theta} {grid.n_z}\n255\n".encode("ascii")
    return header + rgb.tobytes()
