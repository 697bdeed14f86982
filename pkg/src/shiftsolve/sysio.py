"""File formats: Matrix Market matrices, reduction archives, CSV output.

An archive is a directory holding the reduced triple as three Matrix
Market files plus ``manifest.json`` with dimensions, the band width, a
checksum of the banded data, and the reduction's recorded counters.
Matrices are written with 17 significant digits so a write/read round
trip reproduces every float64 bit; CSV output uses the same precision and
is locale independent.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .errors import DimensionMismatchError
from .hessenberg import ControllerHessForm

MANIFEST_NAME = "manifest.json"
ARCHIVE_FORMAT = "controller-hessenberg-archive/1"
FLOAT_FMT = "%.16e"


class MatrixParseError(ValueError):
    """A matrix file could not be read as a real dense Matrix Market matrix."""


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a real matrix from Matrix Market array or coordinate format."""
    path = Path(path)
    if not path.exists():
        raise MatrixParseError(f"no such file: {path}")
    try:
        M = scipy.io.mmread(str(path))
    except Exception as exc:
        raise MatrixParseError(f"{path}: {exc}") from exc
    if scipy.sparse.issparse(M):
        M = M.toarray()
    M = np.asarray(M)
    if np.iscomplexobj(M):
        raise MatrixParseError(f"{path}: complex matrices are not supported")
    return np.asfortranarray(M, dtype=np.float64)


def write_matrix(path: str | Path, M: np.ndarray) -> None:
    """Write a dense real matrix in Matrix Market array format.

    17 significant digits, so reading the file back reproduces every
    float64 bit.
    """
    scipy.io.mmwrite(str(path), np.asarray(M), field="real", precision=17)


def _band_checksum(Ahat: np.ndarray, m: int) -> str:
    """SHA-256 over the in-band entries of the reduced A, column-major."""
    n = Ahat.shape[0]
    h = hashlib.sha256()
    for j in range(n):
        h.update(np.ascontiguousarray(Ahat[: min(j + m + 1, n), j]).tobytes())
    return h.hexdigest()


def _content_hash(*mats: np.ndarray) -> str:
    h = hashlib.sha256()
    for M in mats:
        h.update(str(M.shape).encode())
        h.update(np.asfortranarray(M).tobytes(order="F"))
    return h.hexdigest()


def write_archive(out_dir: str | Path, chf: ControllerHessForm,
                  reduction_stats: dict | None = None,
                  config: dict | None = None, name: str = "") -> Path:
    """Write a reduced triple plus manifest; returns the archive directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "ahat.mtx", chf.Ahat)
    write_matrix(out / "bhat.mtx", chf.Bhat)
    write_matrix(out / "chat.mtx", chf.Chat)
    manifest = {
        "format": ARCHIVE_FORMAT,
        "name": name,
        "n": chf.n,
        "m": chf.m,
        "p": chf.p,
        "band_checksum": _band_checksum(chf.Ahat, chf.m),
        "content_sha256": _content_hash(chf.Ahat, chf.Bhat, chf.Chat),
        "reduction": reduction_stats or {},
        "config": config or {},
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def load_archive(path: str | Path) -> tuple[ControllerHessForm, dict]:
    """Load an archive, re-verifying dimensions, zero patterns and checksum."""
    root = Path(path)
    mpath = root / MANIFEST_NAME
    if not mpath.exists():
        raise MatrixParseError(f"not an archive (missing {MANIFEST_NAME}): {root}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("format") != ARCHIVE_FORMAT:
        raise MatrixParseError(f"unknown archive format in {mpath}")
    Ahat = read_matrix(root / "ahat.mtx")
    Bhat = read_matrix(root / "bhat.mtx")
    Chat = read_matrix(root / "chat.mtx")
    n, m, p = manifest["n"], manifest["m"], manifest["p"]
    if Ahat.shape != (n, n) or Bhat.shape != (n, m) or Chat.shape != (p, n):
        raise DimensionMismatchError("archive matrices disagree with manifest")
    band = _band_checksum(Ahat, m)
    if band != manifest["band_checksum"]:
        raise MatrixParseError("band checksum mismatch; archive is corrupt")
    chf = ControllerHessForm(Ahat=Ahat, Bhat=Bhat, Chat=Chat, m=m, n=n, p=p)
    return chf, manifest


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_tf_csv(path: str | Path, G: np.ndarray, shifts: np.ndarray,
                 failures: dict[int, int], p: int, m: int) -> None:
    """One row per shift: re/im of sigma, a status flag, then the p*m
    entries of G in column-major order as re/im pairs."""
    header = ["re_sigma", "im_sigma", "status"]
    for j in range(m):
        for i in range(p):
            header += [f"re_g{i + 1}_{j + 1}", f"im_g{i + 1}_{j + 1}"]
    lines = [",".join(header)]
    for l, sig in enumerate(shifts):
        status = "singular" if l in failures else "ok"
        row = [_fmt(sig.real), _fmt(sig.imag), status]
        blk = G[:, l * m:(l + 1) * m]
        for j in range(m):
            for i in range(p):
                v = blk[i, j]
                if status == "singular":
                    row += ["nan", "nan"]
                else:
                    row += [_fmt(v.real), _fmt(v.imag)]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pspec_csv(path: str | Path, grid: np.ndarray, norms: np.ndarray) -> None:
    lines = ["re_z,im_z,norm,status"]
    for z, v in zip(grid, norms):
        status = "singular" if np.isinf(v) else "ok"
        val = "inf" if np.isinf(v) else _fmt(v)
        lines.append(",".join([_fmt(z.real), _fmt(z.imag), val, status]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_history_csv(path: str | Path, history) -> None:
    """Per-iteration shift trajectory: iter, shift-index, re, im, change."""
    lines = ["iter,shift_index,re,im,shift_change"]
    for k, rec in enumerate(history):
        for i, sig in enumerate(rec.shifts):
            lines.append(",".join([str(k), str(i), _fmt(sig.real), _fmt(sig.imag),
                                   _fmt(rec.shift_change)]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_bench_csv(path: str | Path, rows: list[dict], note: str = "") -> None:
    lines = ["phase,flops,seconds,pct_time,note"]
    for row in rows:
        lines.append(",".join([
            row["phase"], _fmt(row["flops"]), _fmt(row["seconds"]),
            _fmt(row["pct_time"]), row.get("note", ""),
        ]))
    if note:
        lines.append(f"# {note}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_shift_file(path: str | Path) -> np.ndarray:
    """Shift list: one `re im` or `re,im` pair per line ('#' comments)."""
    out = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) == 1:
            out.append(complex(float(parts[0]), 0.0))
        elif len(parts) == 2:
            out.append(complex(float(parts[0]), float(parts[1])))
        else:
            raise MatrixParseError(f"bad shift line: {raw!r}")
    return np.asarray(out, dtype=np.complex128)
