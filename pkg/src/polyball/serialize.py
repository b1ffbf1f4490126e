"""Artifact persistence: deterministic JSON plus a hash manifest.

Every float is written with 17 significant digits, which round-trips
IEEE doubles exactly, so rebuild-with-same-seed produces byte-identical
files.  A build directory carries a single manifest with SHA-256 content
hashes; loaders refuse to touch a directory whose hashes do not match.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .blocks import Exhaustion
from .errors import ManifestMismatch
from .holo import HoloSeries, HoloTerm, RungeApproximant
from .polytope import ConvexPolytope

SCHEMA = "v1"
MANIFEST_NAME = "manifest.json"


def _fmt(x):
    return "%.17g" % x


def dumps(obj):
    """Deterministic JSON text: 17-significant-digit floats, compact
    separators, stable key order (insertion), trailing newline."""
    out = []
    _write(obj, out)
    out.append("\n")
    return "".join(out)


def _write(obj, out):
    if isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _write(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _write(v, out)
        out.append("]")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            raise ValueError("cannot serialize NaN")
        if np.isinf(x):
            # overflows back to the infinity of the right sign on load
            out.append("1e999" if x > 0 else "-1e999")
            return
        # "-0" would reload as the integer 0 and lose the sign bit
        s = _fmt(x)
        out.append("-0.0" if s == "-0" else s)
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError("cannot serialize %r" % type(obj))


def encode_array(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {
            "shape": list(a.shape), "dtype": "complex128",
            "data": [float(v) for pair in
                     zip(a.real.ravel(), a.imag.ravel()) for v in pair],
        }
    if a.dtype.kind in "iu":
        return {"shape": list(a.shape), "dtype": "int64",
                "data": [int(v) for v in a.ravel()]}
    return {"shape": list(a.shape), "dtype": "float64",
            "data": [float(v) for v in a.ravel()]}


def decode_array(d):
    shape = tuple(d["shape"])
    if d["dtype"] == "complex128":
        flat = np.asarray(d["data"], dtype=float)
        out = np.empty(flat.shape[0] // 2, dtype=complex)
        # componentwise assignment keeps signed zeros bit-exact
        out.real = flat[0::2]
        out.imag = flat[1::2]
        return out.reshape(shape)
    if d["dtype"] == "int64":
        return np.asarray(d["data"], dtype=np.int64).reshape(shape)
    return np.asarray(d["data"], dtype=float).reshape(shape)


def _encode_value(v):
    """Meta-dict value: scalars pass through, arrays get tagged."""
    if isinstance(v, np.ndarray):
        return {"__array__": encode_array(v)}
    if isinstance(v, (list, tuple)):
        return [_encode_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _encode_value(x) for k, x in v.items()}
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v

def _decode_value(v):
    if isinstance(v, dict):
        if set(v) == {"__array__"}:
            return decode_array(v["__array__"])
        return {k: _decode_value(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode_value(x) for x in v]
    return v


def polytope_to_dict(P):
    return {
        "schema": SCHEMA,
        "kind": "polytope",
        "normals": encode_array(P.normals),
        "offsets": encode_array(P.offsets),
        "vertices": encode_array(P.vertices),
        "facet_vertex_indices": [list(t) for t in P.facet_vertex_indices],
        "meta": _encode_value(P.meta),
    }


def polytope_from_dict(d):
    if d.get("kind") != "polytope":
        raise ValueError("not a polytope record")
    return ConvexPolytope(
        normals=decode_array(d["normals"]),
        offsets=decode_array(d["offsets"]),
        vertices=decode_array(d["vertices"]),
        facet_vertex_indices=tuple(tuple(t) for t in
                                   d["facet_vertex_indices"]),
        meta=_decode_value(d["meta"]),
    )


def sha256_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(out_dir, kind, texts):
    """Write each named text plus the manifest hashing all of them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, text in texts.items():
        (out_dir / name).write_text(text)
        hashes[name] = sha256_text(text)
    manifest = {"schema": SCHEMA, "kind": kind,
                "files": {k: hashes[k] for k in sorted(hashes)}}
    (out_dir / MANIFEST_NAME).write_text(dumps(manifest))


def read_manifest(out_dir):
    """Load and check the manifest; every hash must match on disk."""
    out_dir = Path(out_dir)
    path = out_dir / MANIFEST_NAME
    if not path.is_file():
        raise ManifestMismatch("no manifest in %s" % out_dir)
    manifest = json.loads(path.read_text())
    if manifest.get("schema") != SCHEMA:
        raise ManifestMismatch(
            "unsupported schema %r" % manifest.get("schema"))
    for name, digest in manifest["files"].items():
        f = out_dir / name
        if not f.is_file():
            raise ManifestMismatch("missing artifact file %s" % name)
        actual = sha256_text(f.read_text())
        if actual != digest:
            raise ManifestMismatch(
                "content hash mismatch for %s: %s != %s"
                % (name, actual, digest))
    return manifest


def save_exhaustion(exh, out_dir, extra_texts=None):
    """Exhaustion directory: one schedule file, one file per polytope,
    and the manifest over all of them.  extra_texts (name -> text) are
    written alongside and hashed into the same manifest."""
    texts = {} if extra_texts is None else dict(extra_texts)
    names = []
    for i, P in enumerate(exh.polytopes, 1):
        name = "polytope_%04d.json" % i
        names.append(name)
        texts[name] = dumps(polytope_to_dict(P))
    texts["exhaustion.json"] = dumps({
        "schema": SCHEMA,
        "kind": "exhaustion",
        "radii": encode_array(exh.radii),
        "sigmas": encode_array(exh.sigmas),
        "theta1": float(exh.theta1),
        "constants": _encode_value(exh.constants),
        "n_blocks": int(exh.n_blocks),
        "polytope_files": names,
    })
    write_manifest(out_dir, "exhaustion", texts)


def load_exhaustion(out_dir):
    """Reload a persisted exhaustion after verifying the manifest.

    Large-block groupings are not persisted; the reloaded object carries
    the flattened polytope sequence plus the full schedule, which is all
    the verification suites consume.
    """
    out_dir = Path(out_dir)
    read_manifest(out_dir)
    head = json.loads((out_dir / "exhaustion.json").read_text())
    if head.get("kind") != "exhaustion":
        raise ValueError("not an exhaustion directory")
    polys = tuple(
        polytope_from_dict(json.loads((out_dir / name).read_text()))
        for name in head["polytope_files"]
    )
    return Exhaustion(
        blocks=(),
        polytopes=polys,
        radii=decode_array(head["radii"]),
        sigmas=decode_array(head["sigmas"]),
        theta1=float(head["theta1"]),
        constants=_decode_value(head["constants"]),
        n_blocks=int(head["n_blocks"]),
    )


def _approximant_to_dict(phi):
    return {
        "coefficients": encode_array(phi.coefficients),
        "hessenberg": encode_array(phi.hessenberg),
        "domain_radius": float(phi.domain_radius),
        "margin": float(phi.margin),
        "target_level": float(phi.target_level),
        "tolerance": float(phi.tolerance),
        "degree": int(phi.degree),
    }


def _approximant_from_dict(d):
    return RungeApproximant(
        coefficients=decode_array(d["coefficients"]),
        hessenberg=decode_array(d["hessenberg"]),
        domain_radius=float(d["domain_radius"]),
        margin=float(d["margin"]),
        target_level=float(d["target_level"]),
        tolerance=float(d["tolerance"]),
        degree=int(d["degree"]),
    )


def series_to_text(series):
    """Series as one JSON document: per-term facet functionals plus the
    one-variable approximant data, the sampled certificates, and the
    polytopes the certificates refer to."""
    return dumps({
        "schema": SCHEMA,
        "kind": "series",
        "terms": [
            {"W": encode_array(t.W), "phi": _approximant_to_dict(t.phi)}
            for t in series.terms
        ],
        "certificates": [_encode_value(c) for c in series.certificates],
        "polytopes": [polytope_to_dict(P) for P in series.polytopes],
        "meta": _encode_value(series.meta),
    })


def series_from_text(text):
    d = json.loads(text)
    if d.get("kind") != "series":
        raise ValueError("not a series record")
    terms = tuple(
        HoloTerm(W=decode_array(t["W"]),
                 phi=_approximant_from_dict(t["phi"]))
        for t in d["terms"]
    )
    polys = tuple(polytope_from_dict(p) for p in d["polytopes"])
    return HoloSeries(
        terms=terms, polytopes=polys,
        certificates=tuple(_decode_value(c) for c in d["certificates"]),
        meta=_decode_value(d["meta"]),
    )


def crossing_report_csv(report):
    """CSV text for a CrossingReport: one row per boundary crossing."""
    if report.crossings:
        dim = report.crossings[0].point.shape[0]
    else:
        dim = 0
    cols = ["n"] + ["x%d" % (i + 1) for i in range(dim)] + \
        ["skeleton_distance", "in_neighbourhood"]
    lines = [",".join(cols)]
    for row in report.rows():
        n, *rest = row
        vals = [str(int(n))] + [_fmt(v) for v in rest[:-1]] + \
            [str(int(rest[-1]))]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def profile_csv(profile):
    """CSV text for a trace profile: t, Re f, |f|, region index."""
    lines = ["t,re_f,abs_f,n"]
    for t, re_f, abs_f, n in zip(profile["t"], profile["re_f"],
                                 profile["abs_f"], profile["region"]):
        lines.append(",".join([_fmt(t), _fmt(re_f), _fmt(abs_f),
                               str(int(n))]))
    return "\n".join(lines) + "\n"
