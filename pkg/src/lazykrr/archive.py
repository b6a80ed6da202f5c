"""Binary model archives.

Layout (all integers little-endian)::

    magic      4 bytes  b"LKRR"
    version    uint16
    kind       field    (utf-8 string field named "kind")
    count      uint32   number of fields that follow
    fields     count x field
    crc32      uint32   over every preceding byte

    field:  name_len uint16, name utf-8,
            type uint8 ('d' float64, 'q' int64, 's' utf-8 string),
            ndim uint8, dims ndim x uint64, payload
            (arrays row-major little-endian; a string has ndim 1 and dims = byte length)

Dense models store their coefficients; the Cholesky factor is recomputed on
load. Neighbor indices and cell caches are never stored.
"""

import os
import struct
import tempfile
import zlib

import numpy as np

from .continuous import BlendedModel, HierModel
from .dense import DenseModel, factor_spd
from .errors import ArchiveError
from .kernels import KernelSpec, Normalizer, gram_self
from .learn import HYBRID_PARAMS, HybridModel
from .sparse import SparseModel

MAGIC = b"LKRR"
FORMAT_VERSION = 1
KINDS = ("dense", "sparse", "blended", "hierarchical", "hybrid")


def _pack_field(name, value):
    nb = name.encode()
    head = struct.pack("<H", len(nb)) + nb
    if isinstance(value, str):
        data = value.encode()
        return head + struct.pack("<BBQ", ord("s"), 1, len(data)) + data
    arr = np.asarray(value)
    if arr.dtype.kind in "iub":
        code, arr = "q", arr.astype("<i8")
    else:
        code, arr = "d", arr.astype("<f8")
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + struct.pack("<BB", ord(code), arr.ndim) + dims + np.ascontiguousarray(arr).tobytes()


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise ArchiveError("archive is truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def field(self):
        (nlen,) = self.unpack("<H")
        name = self.take(nlen).decode()
        code, ndim = self.unpack("<BB")
        dims = self.unpack(f"<{ndim}Q") if ndim else ()
        code = chr(code)
        if code == "s":
            return name, self.take(dims[0]).decode()
        if code not in "dq":
            raise ArchiveError(f"unknown field type {code!r} for {name!r}")
        dtype = "<f8" if code == "d" else "<i8"
        n = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(self.take(8 * n), dtype=dtype).reshape(dims)
        return name, arr.astype(np.float64 if code == "d" else np.int64)


def encode(kind, fields):
    if kind not in KINDS:
        raise ArchiveError(f"unknown model kind {kind!r}")
    body = MAGIC + struct.pack("<H", FORMAT_VERSION) + _pack_field("kind", kind)
    body += struct.pack("<I", len(fields))
    for name in sorted(fields):
        body += _pack_field(name, fields[name])
    return body + struct.pack("<I", zlib.crc32(body))


def decode(buf):
    if len(buf) < 10 or buf[:4] != MAGIC:
        raise ArchiveError("not a lazykrr model archive (bad magic)")
    r = _Reader(buf)
    r.take(4)
    (version,) = r.unpack("<H")
    if version != FORMAT_VERSION:
        raise ArchiveError(f"archive format version {version} is not supported (this build reads version {FORMAT_VERSION})")
    _, kind = r.field()
    (count,) = r.unpack("<I")
    fields = dict(r.field() for _ in range(count))
    (crc,) = r.unpack("<I")
    if r.pos != len(buf):
        raise ArchiveError("trailing bytes after archive")
    if zlib.crc32(buf[: r.pos - 4]) != crc:
        raise ArchiveError("archive checksum mismatch (corrupt file)")
    if kind not in KINDS:
        raise ArchiveError(f"unknown model kind {kind!r}")
    return kind, fields


# ---------------------------------------------------------------- model <-> fields


def _spec_fields(spec, feature_names):
    f = {"kernel.metric": spec.metric, "kernel.activation": spec.activation}
    if spec.normalizer is not None:
        f["kernel.shift"] = spec.normalizer.shift
        f["kernel.scale"] = spec.normalizer.scale
    if feature_names is not None:
        f["feature_names"] = "\n".join(feature_names)
    return f


def _spec_from(f):
    norm = None
    if "kernel.shift" in f:
        norm = Normalizer(shift=f["kernel.shift"], scale=f["kernel.scale"])
    return KernelSpec(metric=f["kernel.metric"], activation=f["kernel.activation"], normalizer=norm)


def _scalar(f, name, cast=float):
    return cast(np.asarray(f[name]).reshape(()))


def model_fields(model, feature_names=None, meta=None):
    """``(kind, fields)`` describing ``model``."""
    if isinstance(model, DenseModel):
        kind = "dense"
        f = {"X": model.X, "Y": model.Y, "lambda": model.lam, "theta": model.theta}
        spec = model.spec
    elif isinstance(model, SparseModel):
        kind = "sparse"
        f = {"X": model.X, "Y": model.Y, "lambda": model.lam, "M": model.M}
        spec = model.spec
    elif isinstance(model, BlendedModel):
        kind = "blended"
        sp = model.sparse
        f = {
            "X": sp.X,
            "Y": sp.Y,
            "lambda": sp.lam,
            "M": sp.M,
            "J": model.J,
            "weight_activation": model.weight_activation,
            "weight_scale": model.weight_scale,
        }
        spec = sp.spec
    elif isinstance(model, HierModel):
        kind = "hierarchical"
        c = model.coarse
        rs = model.residual
        f = {
            "X": rs.X,
            "Y": model.Y,
            "residual.Y": rs.Y,
            "lambda": rs.lam,
            "M": rs.M,
            "subset": model.subset,
            "coarse.theta": c.theta,
        }
        spec = rs.spec
    elif isinstance(model, HybridModel):
        kind = "hybrid"
        f = {f"param.{k}": model.params[k] for k in HYBRID_PARAMS}
        f["lambda"] = model.lam
        spec = model.spec
    else:
        raise ArchiveError(f"cannot archive object of type {type(model).__name__}")
    f.update(_spec_fields(spec, feature_names))
    for k, v in (meta or {}).items():
        f[f"meta.{k}"] = v
    return kind, f


def _dense_from(spec, X, Y, lam, theta):
    L, lam_used = factor_spd(gram_self(spec, X, warn=False), lam)
    return DenseModel(spec=spec, X=X, Y=Y, lam=lam, L=L, theta=theta, lam_used=lam_used)


def model_from_fields(kind, f):
    spec = _spec_from(f)
    if kind == "hybrid":
        params = {k: f[f"param.{k}"] for k in HYBRID_PARAMS}
        return HybridModel(params=params, spec=spec, lam=_scalar(f, "lambda"))
    X, Y, lam = f["X"], f["Y"], _scalar(f, "lambda")
    if kind == "dense":
        return _dense_from(spec, X, Y, lam, f["theta"])
    M = _scalar(f, "M", int)
    if kind == "sparse":
        return SparseModel(spec, X, Y, M, lam)
    if kind == "blended":
        return BlendedModel(
            SparseModel(spec, X, Y, M, lam),
            J=_scalar(f, "J", int),
            weight_activation=f["weight_activation"],
            weight_scale=_scalar(f, "weight_scale"),
        )
    subset = f["subset"]
    coarse = _dense_from(spec, X[subset], Y[subset], lam, f["coarse.theta"])
    residual = SparseModel(spec, X, f["residual.Y"], M, lam)
    return HierModel(coarse=coarse, residual=residual, subset=subset, Y=Y)


class LoadedArchive:
    """A decoded archive: the model plus stored feature names and metadata."""

    def __init__(self, kind, fields):
        self.kind = kind
        self.fields = fields
        self.model = model_from_fields(kind, fields)
        names = fields.get("feature_names")
        self.feature_names = names.split("\n") if names else None
        self.meta = {k[5:]: v for k, v in fields.items() if k.startswith("meta.")}


def save_model(model, path, feature_names=None, meta=None):
    """Write ``model`` atomically (temporary file + rename)."""
    kind, fields = model_fields(model, feature_names, meta)
    blob = encode(kind, fields)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".lkrr-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return blob


def load_archive(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    return LoadedArchive(*decode(buf))


def load_model(path):
    return load_archive(path).model
