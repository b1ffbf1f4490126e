import json

import numpy as np
import pytest

from polyball.errors import ManifestMismatch
from polyball.serialize import (
    decode_array,
    dumps,
    encode_array,
    load_exhaustion,
    polytope_from_dict,
    polytope_to_dict,
    read_manifest,
    save_exhaustion,
    series_from_text,
    series_to_text,
    write_manifest,
)


def test_dumps_floats_roundtrip():
    vals = [0.1, 1.0 / 3.0, 2.0 ** -1074, 1.7976931348623157e308,
            -0.0, np.pi]
    text = dumps(vals)
    back = json.loads(text)
    for a, b in zip(vals, back):
        assert a == b and np.signbit(a) == np.signbit(float(b))


def test_dumps_special_values():
    assert dumps(float("inf")) == "1e999\n"
    assert dumps(float("-inf")) == "-1e999\n"
    assert json.loads(dumps(float("inf"))) == float("inf")
    assert dumps(-0.0) == "-0.0\n"
    with pytest.raises(ValueError):
        dumps(float("nan"))
    assert dumps({"a": [1, True, None, "x"]}) == '{"a":[1,true,null,"x"]}\n'


def test_dumps_deterministic_key_order():
    a = {"z": 1, "a": 2}
    assert dumps(a) == '{"z":1,"a":2}\n'
    assert dumps(a) == dumps({"z": 1, "a": 2})


def test_array_roundtrip_real_int_complex():
    rng = np.random.default_rng(3)
    for a in (rng.standard_normal((3, 4)),
              rng.integers(-5, 5, (2, 3)),
              rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))):
        d = json.loads(dumps(encode_array(a)))
        b = decode_array(d)
        assert b.dtype.kind == np.asarray(a).dtype.kind
        assert np.array_equal(a, b)


def test_complex_signed_zero_preserved():
    a = np.empty(2, dtype=complex)
    a.real = [0.0, -0.0]
    a.imag = [-0.0, 0.0]
    b = decode_array(json.loads(dumps(encode_array(a))))
    assert np.signbit(b.imag[0]) and np.signbit(b.real[1])


def test_polytope_roundtrip(exh_small):
    P = exh_small.polytopes[0]
    Q = polytope_from_dict(json.loads(dumps(polytope_to_dict(P))))
    assert np.array_equal(P.normals, Q.normals)
    assert np.array_equal(P.offsets, Q.offsets)
    assert Q.is_light == P.is_light
    assert np.array_equal(P.meta["window_skeleton"],
                          Q.meta["window_skeleton"])
    # serialization is byte-stable across a round trip
    t1 = dumps(polytope_to_dict(P))
    t2 = dumps(polytope_to_dict(Q))
    assert t1 == t2


def test_exhaustion_save_load(tmp_path, exh_small):
    save_exhaustion(exh_small, tmp_path / "run")
    exh = load_exhaustion(tmp_path / "run")
    assert exh.n_built == exh_small.n_built
    assert np.array_equal(exh.radii, exh_small.radii)
    assert np.array_equal(exh.sigmas, exh_small.sigmas)
    assert exh.theta1 == exh_small.theta1
    assert exh.constants["mu"] == exh_small.constants["mu"]
    for P, Q in zip(exh.polytopes, exh_small.polytopes):
        assert np.array_equal(P.normals, Q.normals)
        assert np.array_equal(P.offsets, Q.offsets)
    # saving the reloaded object reproduces the bytes
    save_exhaustion(exh, tmp_path / "run2")
    for f in sorted((tmp_path / "run").iterdir()):
        assert f.read_text() == (tmp_path / "run2" / f.name).read_text()


def test_manifest_detects_corruption(tmp_path, exh_small):
    save_exhaustion(exh_small, tmp_path / "run")
    victim = tmp_path / "run" / "polytope_0002.json"
    victim.write_text(victim.read_text().replace("0.8", "0.9", 1))
    with pytest.raises(ManifestMismatch):
        load_exhaustion(tmp_path / "run")


def test_manifest_detects_missing_file(tmp_path):
    write_manifest(tmp_path, "test", {"a.json": dumps({"x": 1})})
    assert read_manifest(tmp_path)["kind"] == "test"
    (tmp_path / "a.json").unlink()
    with pytest.raises(ManifestMismatch):
        read_manifest(tmp_path)
    with pytest.raises(ManifestMismatch):
        read_manifest(tmp_path / "nowhere")


def _tiny_series():
    from polyball.holo import (
        HoloSeries, HoloTerm, facet_functionals, runge_two_region)
    from polyball.paths import _regular_polygon

    sq = _regular_polygon(4, 0.8, np.pi / 4)
    funcs, R = facet_functionals(sq)
    phi = runge_two_region(R, 0.9, 2.0, 0.25, seed=17)
    term = HoloTerm(W=np.array([f.w for f in funcs]), phi=phi,
                    meta={"eta": 0.9, "R": R, "theta": 0.1})
    return HoloSeries(
        terms=(term,), polytopes=(sq,),
        certificates=({"n": 1, "theta": 0.1, "min_re": 2.0,
                       "n_outside": 100},),
        meta={"seed": 17, "n_samples": 100},
    )


def test_series_text_roundtrip():
    from polyball.holo import evaluate_f

    ser = _tiny_series()
    text = series_to_text(ser)
    back = series_from_text(text)
    assert back.n_terms == 1
    t0, t1 = ser.terms[0], back.terms[0]
    assert np.array_equal(t0.W, t1.W)
    assert np.array_equal(t0.phi.coefficients, t1.phi.coefficients)
    assert np.array_equal(t0.phi.hessenberg, t1.phi.hessenberg)
    assert t1.phi.degree == t0.phi.degree
    assert back.certificates[0]["min_re"] == 2.0
    # byte-stable re-serialization and identical evaluation
    assert series_to_text(back) == text
    pts = np.random.default_rng(0).uniform(-0.4, 0.4, (50, 2))
    assert np.array_equal(evaluate_f(pts, ser), evaluate_f(pts, back))
