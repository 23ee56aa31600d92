import json

import numpy as np
import pytest

from instrument_forge import dilation as dil
from instrument_forge import formats as fmt
from instrument_forge import instrument as ins
from instrument_forge.errors import NotUnital, ParseError
from instrument_forge.random import random_instrument, random_unitary
from instrument_forge import algebra as alg


def test_matrix_round_trip():
    m = np.array([[1 + 2j, -0.5], [3j, 4]])
    assert np.array_equal(fmt.decode_matrix(fmt.encode_matrix(m)), m)
    assert np.array_equal(fmt.decode_matrix([[1, 0], [0, 1]]), np.eye(2))
    assert fmt.encode_matrix([[1 / 3]], digits=4) == [[[0.3333, 0.0]]]


@pytest.mark.parametrize("bad", [[], [1, 2], [[1, 2], [3]], [[1, "x"]], [[[1, 2, 3]]], [[True]]])
def test_decode_matrix_rejects(bad):
    with pytest.raises(ParseError):
        fmt.decode_matrix(bad)


def test_instrument_round_trip(tmp_path):
    a = alg.make_block_algebra([(1, 1), (2, 1)], random_unitary(3, 0))
    inst = random_instrument(a, outcomes=3, rng=1)
    path = tmp_path / "inst.json"
    fmt.dump_json(fmt.instrument_to_json(inst), path)
    back = fmt.load_instrument(path)
    assert back.algebra.blocks == a.blocks
    assert ins.instrument_distance(back, inst) == 0.0


def test_algebra_references(fixtures_dir):
    inst = fmt.load_instrument(fixtures_dir / "diagonal_instrument.json")
    assert inst.algebra.blocks == ((1, 1), (1, 1))
    assert fmt.algebra_from_json("full:3").is_full
    with pytest.raises(ParseError):
        fmt.algebra_from_json("full:x")
    with pytest.raises(ParseError):
        fmt.algebra_from_json({"blocks": [[2]]})


def test_instrument_errors(tmp_path, fixtures_dir):
    with pytest.raises(NotUnital):
        fmt.load_instrument(fixtures_dir / "nonunital.json")
    assert not ins.validate(fmt.load_instrument(fixtures_dir / "nonunital.json", validate=False)).passed
    bad = tmp_path / "bad.json"
    bad.write_text('{"outcomes": ["0"], "kraus": {"0": [[[1, 0], [0, 1]]]}')
    with pytest.raises(ParseError) as err:
        fmt.load_instrument(bad)
    assert err.value.location.startswith(str(bad) + ":1:")
    bad.write_text(json.dumps({"outcomes": ["0"], "kraus": {"0": [[[1, 0, 0], [0, 1, 0]]]}}))
    with pytest.raises(ParseError):
        fmt.load_instrument(bad)
    with pytest.raises(ParseError):
        fmt.load_instrument(tmp_path / "missing.json")


def test_states(fixtures_dir):
    plus = fmt.load_state(fixtures_dir / "plus_state.json")
    assert np.allclose(plus.density, 0.5)
    assert np.allclose(fmt.load_state(fixtures_dir / "zero_state.json").density, np.diag([1, 0]))
    with pytest.raises(ParseError):
        fmt.state_from_json({"ket": [0, 0]})
    with pytest.raises(ParseError):
        fmt.state_from_json({"density": [[2, 0], [0, -1]]})


def test_process_round_trip_is_exact():
    proc = dil.synthesize_measuring_process(random_instrument(2, outcomes=2, rng=2))
    back = fmt.process_from_json(json.loads(fmt.dump_json(fmt.process_to_json(proc))))
    assert np.array_equal(back.U, proc.U)
    assert back.outcomes == proc.outcomes


def test_net(fixtures_dir):
    net = fmt.net_from_json(fmt.read_json(fixtures_dir / "net_L3.json"))
    assert (net.sites, net.local_dim) == (3, 2)
    with pytest.raises(ParseError):
        fmt.net_from_json({"sites": "3", "local_dim": 2})


def test_digest_is_content_based(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.write_text("x")
    b.write_text("x")
    assert fmt.digest(a) == fmt.digest(b) != fmt.digest(a, b)
