"""
JSON encodings of algebras, instruments, states, measuring processes and nets.

Matrices are row-major nested lists whose entries are ``[re, im]`` pairs;
plain real numbers are accepted on input. See ``docs/formats.md``.
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from . import algebra as alg
from . import dilation as dil
from . import instrument as ins
from . import localnet as ln
from .errors import ParseError

PathLike = Union[str, Path]


def encode_matrix(m, digits: int = None) -> list:
    m = np.asarray(m, dtype=complex)
    if digits is None:
        conv = float
    else:
        conv = lambda x: float(f"{x:.{digits}g}")
    return [[[conv(z.real), conv(z.imag)] for z in row] for row in m]


def _entry(x, where: str) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ParseError(f"expected a number or [re, im] pair, got {x!r}", where)


def decode_matrix(data, where: str = "matrix") -> np.ndarray:
    """Inverse of :func:`encode_matrix`: a list of rows of numbers or ``[re, im]`` pairs."""
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ParseError("matrix must be a non-empty list of rows", where)
    rows = [[_entry(x, f"{where}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(data)]
    if len({len(r) for r in rows}) != 1:
        raise ParseError("matrix rows have unequal lengths", where)
    return np.array(rows, dtype=complex)


def decode_vector(data, where: str = "vector") -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ParseError("vector must be a non-empty list", where)
    return np.array([_entry(x, f"{where}[{i}]") for i, x in enumerate(data)], dtype=complex)


def read_json(path: PathLike) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc


def digest(*paths: PathLike) -> str:
    h = hashlib.sha256()
    for p in paths:
        try:
            h.update(Path(p).read_bytes())
        except OSError as exc:
            raise ParseError(f"cannot read {p}: {exc.strerror or exc}") from exc
    return "sha256:" + h.hexdigest()


def _require(data: Dict, key: str, where: str):
    if not isinstance(data, dict):
        raise ParseError("expected a JSON object", where)
    if key not in data:
        raise ParseError(f"missing field {key!r}", where)
    return data[key]


def _wrap(fn, where):
    try:
        return fn()
    except ParseError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ParseError(str(exc), where) from exc


# ---------------------------------------------------------------- algebra

def algebra_from_json(data, where: str = "algebra", base: Path = None) -> alg.BlockAlgebra:
    """Algebra spec, a path to one (relative to ``base``), or ``"full:D"``."""
    if isinstance(data, str):
        if data.startswith("full:"):
            return _wrap(lambda: alg.full_algebra(int(data[5:])), where)
        path = (base / data) if base is not None else Path(data)
        return algebra_from_json(read_json(path), str(path), path.parent)
    blocks = _require(data, "blocks", where)
    if not isinstance(blocks, list) or not all(
            isinstance(b, list) and len(b) == 2 and all(isinstance(v, int) for v in b) for b in blocks):
        raise ParseError("blocks must be a list of [n, m] integer pairs", f"{where}.blocks")
    w = data.get("basis_change")
    w = None if w is None else decode_matrix(w, f"{where}.basis_change")
    return _wrap(lambda: alg.make_block_algebra([tuple(b) for b in blocks], w), where)


def algebra_to_json(a: alg.BlockAlgebra) -> Dict:
    out = {"blocks": [list(b) for b in a.blocks]}
    if np.abs(a.basis_change - np.eye(a.dim)).max() > 0:
        out["basis_change"] = encode_matrix(a.basis_change)
    return out


# ---------------------------------------------------------------- instrument

def instrument_from_json(data, where: str = "instrument", base: Path = None,
                         validate: bool = True) -> ins.CPInstrument:
    """Decode an instrument spec; ``validate=False`` skips unitality/range checks."""
    outcomes = _require(data, "outcomes", where)
    if not isinstance(outcomes, list) or not outcomes:
        raise ParseError("outcomes must be a non-empty list", f"{where}.outcomes")
    outcomes = [str(s) for s in outcomes]
    raw = _require(data, "kraus", where)
    if not isinstance(raw, dict):
        raise ParseError("kraus must map labels to lists of matrices", f"{where}.kraus")
    kraus = {}
    for s, mats in raw.items():
        if not isinstance(mats, list):
            raise ParseError("expected a list of matrices", f"{where}.kraus.{s}")
        kraus[s] = [decode_matrix(m, f"{where}.kraus.{s}[{i}]") for i, m in enumerate(mats)]
    if "algebra" in data:
        algebra = algebra_from_json(data["algebra"], f"{where}.algebra", base)
    else:
        first = next((m for ms in kraus.values() for m in ms), None)
        if first is None:
            raise ParseError("cannot infer the dimension without an algebra", where)
        algebra = alg.full_algebra(first.shape[0])
    build = ins.make_instrument if validate else ins.build_instrument
    try:
        return build(algebra, outcomes, kraus)
    except (ins.NotUnital, ins.RangeViolation):
        raise
    except (ValueError, KeyError) as exc:
        raise ParseError(str(exc), where) from exc


def instrument_to_json(inst: ins.CPInstrument) -> Dict:
    return {
        "algebra": algebra_to_json(inst.algebra),
        "outcomes": list(inst.outcomes),
        "kraus": {s: [encode_matrix(k) for k in inst.kraus[s]] for s in inst.outcomes},
    }


def load_instrument(path: PathLike, validate: bool = True) -> ins.CPInstrument:
    path = Path(path)
    return instrument_from_json(read_json(path), str(path), path.parent, validate)


# ---------------------------------------------------------------- state

def state_from_json(data, where: str = "state") -> alg.NormalState:
    """``{"density": matrix}`` or ``{"ket": vector}`` (normalized on load)."""
    if isinstance(data, dict) and "ket" in data:
        v = decode_vector(data["ket"], f"{where}.ket")
        if np.linalg.norm(v) == 0:
            raise ParseError("ket is zero", f"{where}.ket")
        return alg.pure_state(v)
    rho = decode_matrix(_require(data, "density", where), f"{where}.density")
    return _wrap(lambda: alg.make_state(rho), where)


def load_state(path: PathLike) -> alg.NormalState:
    return state_from_json(read_json(path), str(path))


# ---------------------------------------------------------------- measuring process

def process_to_json(p: dil.MeasuringProcess) -> Dict:
    return {
        "ancilla_dim": p.ancilla_dim,
        "sigma": encode_matrix(p.sigma),
        "U": encode_matrix(p.U),
        "meter": {s: encode_matrix(p.meter[s]) for s in p.outcomes},
    }


def process_from_json(data, where: str = "process", tol: float = 1e-10) -> dil.MeasuringProcess:
    k = _require(data, "ancilla_dim", where)
    if not isinstance(k, int) or k < 1:
        raise ParseError("ancilla_dim must be a positive integer", f"{where}.ancilla_dim")
    sigma = decode_matrix(_require(data, "sigma", where), f"{where}.sigma")
    u = decode_matrix(_require(data, "U", where), f"{where}.U")
    meter = _require(data, "meter", where)
    if not isinstance(meter, dict) or not meter:
        raise ParseError("meter must map labels to projections", f"{where}.meter")
    proj = {str(s): decode_matrix(m, f"{where}.meter.{s}") for s, m in meter.items()}
    return _wrap(lambda: dil.make_process(list(proj), k, sigma, u, proj, tol), where)


def dump_json(data, path: PathLike = None) -> str:
    text = json.dumps(data, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------- net

def net_from_json(data, where: str = "net") -> ln.LocalNet:
    sites = _require(data, "sites", where)
    d = _require(data, "local_dim", where)
    if not isinstance(sites, int) or not isinstance(d, int):
        raise ParseError("sites and local_dim must be integers", where)
    return ln.make_lattice_net(sites, d)
