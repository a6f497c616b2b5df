"""On-disk formats for scenario generators.

SG container (all integers little-endian)::

    b"SCENGEN\\0"            magic, 8 bytes
    u16                     format version (1)
    u32 + bytes             JSON header: variables, alphabet, counts, origin
    n_states x (u32 + bytes) canonical state keys
    u32[n_states + 1]       edge offsets
    u32[n_edges]            input index of each edge (into the header alphabet)
    u32[n_edges]            successor state of each edge
    optional b"TBLS" section:
        u32 h_max, then ext(x, k) for k = 0..h_max, x = 0..n_states-1,
        each as u32 byte length + big-endian magnitude

Tuple manifest: a JSON document
``{"format": "scengen-tuple", "version": 1, "factors": [{"name", "path"}]}``
whose factor paths are relative to the manifest; factor order is the
mixed-radix digit order.
"""

from __future__ import annotations

import io
import json
import struct
import sys
from array import array
from pathlib import Path

from .errors import FormatError
from .monitor import VariableDecl
from .product import SGTuple
from .synthesis import ExploredGraph, Origin, ScenarioGenerator

MAGIC = b"SCENGEN\x00"
FORMAT_VERSION = 1
TABLES_TAG = b"TBLS"


def _u32_array(values) -> bytes:
    a = array("I", values)
    if a.itemsize != 4:
        a = array("L", values)
    if sys.byteorder == "big":
        a.byteswap()
    return a.tobytes()


def _read_u32_array(buf: io.BytesIO, n: int) -> list:
    raw = buf.read(4 * n)
    if len(raw) != 4 * n:
        raise FormatError("truncated SG file")
    return list(struct.unpack(f"<{n}I", raw))


def _read_exact(buf, n):
    raw = buf.read(n)
    if len(raw) != n:
        raise FormatError("truncated SG file")
    return raw


def encode_bigint(n: int) -> bytes:
    mag = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return struct.pack("<I", len(mag)) + mag


def decode_bigint(buf) -> int:
    (n,) = struct.unpack("<I", _read_exact(buf, 4))
    return int.from_bytes(_read_exact(buf, n), "big")


def dumps_sg(sg: ScenarioGenerator, with_tables: bool = False) -> bytes:
    g = sg.graph
    header = {
        "kind": "sg",
        "variables": [{"name": v.name, "domain": list(v.domain)} for v in g.variables],
        "alphabet": [list(c) for c in g.alphabet],
        "n_states": g.n_states,
        "n_edges": g.n_edges,
        "pruned_states": sg.pruned_states,
        "origin": sg.origin.as_dict(),
    }
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<H", FORMAT_VERSION))
    hb = json.dumps(header, sort_keys=True).encode()
    out.write(struct.pack("<I", len(hb)))
    out.write(hb)
    for k in g.keys:
        out.write(struct.pack("<I", len(k)))
        out.write(k)
    offsets = [0]
    for row in g.succ:
        offsets.append(offsets[-1] + len(row))
    out.write(_u32_array(offsets))
    out.write(_u32_array([s for row in g.inputs for s in row]))
    out.write(_u32_array([y for row in g.succ for y in row]))
    t = sg.tables
    if with_tables and t.h_max is not None:
        out.write(TABLES_TAG)
        out.write(struct.pack("<I", t.h_max))
        for col in t.ext:
            for v in col:
                out.write(encode_bigint(v))
    return out.getvalue()


def loads_sg(data: bytes) -> ScenarioGenerator:
    buf = io.BytesIO(data)
    if buf.read(8) != MAGIC:
        raise FormatError("not a scengen SG file (bad magic)")
    (version,) = struct.unpack("<H", _read_exact(buf, 2))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported SG format version {version}")
    (hlen,) = struct.unpack("<I", _read_exact(buf, 4))
    try:
        header = json.loads(_read_exact(buf, hlen))
        variables = tuple(VariableDecl(v["name"], tuple(v["domain"])) for v in header["variables"])
        alphabet = [tuple(c) for c in header["alphabet"]]
        n, e = header["n_states"], header["n_edges"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad SG header: {exc}") from None
    keys = []
    for _ in range(n):
        (klen,) = struct.unpack("<I", _read_exact(buf, 4))
        keys.append(_read_exact(buf, klen))
    offsets = _read_u32_array(buf, n + 1)
    flat_in = _read_u32_array(buf, e)
    flat_succ = _read_u32_array(buf, e)
    if offsets[-1] != e:
        raise FormatError("edge offsets do not match the edge count")
    inputs = [flat_in[offsets[x] : offsets[x + 1]] for x in range(n)]
    succ = [flat_succ[offsets[x] : offsets[x + 1]] for x in range(n)]
    if any(y >= n for y in flat_succ) or any(s >= len(alphabet) for s in flat_in):
        raise FormatError("edge refers to a missing state or input")
    origin = header.get("origin") or {}
    sg = ScenarioGenerator(
        ExploredGraph(variables, keys, succ, inputs, alphabet),
        Origin(origin.get("description", ""), origin.get("components", [])),
        pruned_states=header.get("pruned_states", 0),
    )
    tag = buf.read(4)
    if tag == TABLES_TAG:
        (h_max,) = struct.unpack("<I", _read_exact(buf, 4))
        ext = [[decode_bigint(buf) for _ in range(n)] for _ in range(h_max + 1)]
        _restore_tables(sg.tables, ext)
    elif tag:
        raise FormatError(f"unknown section {tag!r}")
    return sg


def _restore_tables(tables, ext):
    succ = tables.succ
    for k in range(len(ext) - 1):
        prev = ext[k]
        if [sum(prev[y] for y in ys) for ys in succ] != ext[k + 1]:
            raise FormatError("stored count tables are inconsistent with the graph")
    if any(v != 1 for v in ext[0]):
        raise FormatError("stored count tables are inconsistent with the graph")
    tables.ext = ext
    tables.h_max = len(ext) - 1


def save_sg(sg: ScenarioGenerator, path, with_tables: bool = False) -> None:
    Path(path).write_bytes(dumps_sg(sg, with_tables))


def save_tuple(t: SGTuple, path, with_tables: bool = False) -> list:
    """Write the manifest at ``path`` and one SG file per factor next to it."""
    path = Path(path)
    entries = []
    written = []
    for j, (name, f) in enumerate(zip(t.names, t.factors)):
        fpath = path.with_name(f"{path.name}.f{j}.sg")
        save_sg(f, fpath, with_tables)
        written.append(fpath)
        entries.append({"name": name, "path": fpath.name})
    manifest = {"format": "scengen-tuple", "version": FORMAT_VERSION, "factors": entries}
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return written


def save(src, path, with_tables: bool = False) -> None:
    if isinstance(src, SGTuple):
        save_tuple(src, path, with_tables)
    else:
        save_sg(src, path, with_tables)


def load(path):
    """Load an SG file or a tuple manifest."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(MAGIC):
        return loads_sg(data)
    try:
        manifest = json.loads(data)
    except (ValueError, UnicodeDecodeError):
        raise FormatError(f"{path}: neither an SG file nor a tuple manifest") from None
    if not isinstance(manifest, dict) or manifest.get("format") != "scengen-tuple":
        raise FormatError(f"{path}: not a scengen tuple manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported manifest version {manifest.get('version')!r}")
    factors, names = [], []
    for entry in manifest.get("factors", []):
        factors.append(loads_sg((path.parent / entry["path"]).read_bytes()))
        names.append(entry.get("name"))
    return SGTuple(factors, names)
