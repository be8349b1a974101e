"""Canonical JSON, atomic file writes and bit-stream files."""
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from diqrng.errors import FormatError, ReportIOError
from diqrng.models import BitStream


def round_floats(value, digits=6):
    """Recursively round floats to ``digits`` significant digits."""
    if isinstance(value, float):
        if math.isfinite(value):
            return float(f"{value:.{digits}g}")
        return value
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, digits) for v in value]
    return value


def canonical_json(obj, report=False) -> str:
    if report:
        obj = round_floats(obj)
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def atomic_write(path, data):
    """Write bytes or text to ``path`` through a temp file and rename."""
    path = Path(path)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}") from e
    return path


def write_json(path, obj, report=False):
    return atomic_write(path, canonical_json(obj, report=report))


def read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}") from e
    except OSError as e:
        raise ReportIOError(f"cannot read {path}: {e}") from e


def pack_bits(stream: BitStream) -> bytes:
    # big-endian within each byte, tail padded with zero bits
    return np.packbits(stream.bits, bitorder="big").tobytes()


def unpack_bits(payload: bytes, length=None, source_tag="external") -> BitStream:
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="big")
    if length is not None:
        if length > bits.size:
            raise FormatError(f"requested {length} bits but the file holds {bits.size}")
        bits = bits[:length]
    return BitStream(bits, source_tag)


def write_bitstream(prefix, stream: BitStream, line_width=None):
    """Write ``prefix.bin`` (packed) and ``prefix.txt`` (ASCII) for a stream."""
    prefix = Path(prefix)
    text = stream.to_text()
    if line_width:
        text = "\n".join(text[i:i + line_width] for i in range(0, len(text), line_width))
    bin_path = atomic_write(prefix.with_suffix(".bin"), pack_bits(stream))
    txt_path = atomic_write(prefix.with_suffix(".txt"), text + "\n")
    return bin_path, txt_path


def read_bitstream(path, length=None, source_tag="external") -> BitStream:
    """Load a ``.txt`` stream as text, anything else as packed binary."""
    path = Path(path)
    try:
        if path.suffix == ".txt":
            stream = BitStream.from_text(path.read_text(encoding="ascii"), source_tag)
            if length is not None:
                if length > len(stream):
                    raise FormatError(f"requested {length} bits but the file holds {len(stream)}")
                stream = BitStream(stream.bits[:length], source_tag)
            return stream
        return unpack_bits(path.read_bytes(), length, source_tag)
    except UnicodeDecodeError as e:
        raise FormatError(f"{path} is not an ASCII bit stream") from e
    except OSError as e:
        raise ReportIOError(f"cannot read {path}: {e}") from e
