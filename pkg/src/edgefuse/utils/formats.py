"""
File formats used across the pipeline.

Provides:
- PFM (Portable FloatMap) reader/writer, bit-exact on round trip
- Binary PPM (P6) and PGM (P5, 8 or 16 bit) reader/writer
- Middlebury-style calib.txt parsing
- Atomic writes (temp file in the target directory + rename)
"""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from edgefuse.imaging import ImageKind, MultiChannelImage
from edgefuse.utils.errors import InputError, ParseError, ShapeError
from edgefuse.utils.logging import get_logger

if TYPE_CHECKING:
    from edgefuse.ground_truth import CameraIntrinsics

logger = get_logger(__name__)


def atomic_write_bytes(path: str | Path, payload: bytes) -> Path:
    """
    Write bytes so readers never observe a partially written file.

    Args:
        path: Destination file
        payload: File contents

    Returns:
        Path: The destination path

    Raises:
        InputError: If the destination cannot be written
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    except OSError as e:
        raise InputError(f"{target}: cannot write: {e}") from e

    tmp_path = Path(tmp_name)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_path, target)
    except OSError as e:
        tmp_path.unlink(missing_ok=True)
        raise InputError(f"{target}: cannot write: {e}") from e
    except BaseException:
        tmp_path.unlink(missing_ok=True)
        raise
    return target


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write UTF-8 text atomically."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError as e:
        raise InputError(f"{path}: file not found") from e
    except OSError as e:
        raise InputError(f"{path}: cannot read: {e}") from e


def _header_tokens(buf: bytes, count: int, path: str | Path) -> tuple[list[str], int]:
    """Split the first `count` whitespace-separated header tokens off a binary file."""
    tokens: list[str] = []
    pos = 0
    size = len(buf)
    while len(tokens) < count:
        while pos < size and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < size and buf[pos : pos + 1] == b"#":
            while pos < size and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < size and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"truncated header (expected {count} fields, got {len(tokens)})", path)
        tokens.append(buf[start:pos].decode("ascii", errors="replace"))
    # Exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def _parse_dimensions(tokens: list[str], path: str | Path) -> tuple[int, int]:
    try:
        width, height = int(tokens[0]), int(tokens[1])
    except ValueError as e:
        raise ParseError(f"bad dimensions {tokens[0]!r} {tokens[1]!r}", path) from e
    if width < 1 or height < 1:
        raise ParseError(f"dimensions must be positive, got {width}x{height}", path)
    return width, height


# --- PFM ---


def read_pfm_array(path: str | Path) -> np.ndarray:
    """
    Read a PFM file into a top-row-first (height, width, channels) float32 array.

    Raises:
        ParseError: On a malformed header or short raster
        InputError: If the file cannot be read
    """
    buf = _read_bytes(path)
    tokens, offset = _header_tokens(buf, 4, path)
    magic = tokens[0]
    if magic == "PF":
        channels = 3
    elif magic == "Pf":
        channels = 1
    else:
        raise ParseError(f"unrecognized PFM identifier {magic!r}", path)
    width, height = _parse_dimensions(tokens[1:3], path)
    try:
        scale = float(tokens[3])
    except ValueError as e:
        raise ParseError(f"bad scale line {tokens[3]!r}", path) from e
    if scale == 0:
        raise ParseError("scale must be nonzero", path)

    # Negative scale means little-endian samples
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = width * height * channels
    if len(buf) - offset < count * 4:
        raise ParseError(f"raster truncated: need {count * 4} bytes, have {len(buf) - offset}", path)
    raw = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)

    # Rows are stored bottom-to-top
    return raw.reshape(height, width, channels)[::-1].astype(np.float32)


def read_pfm(path: str | Path, kind: ImageKind = ImageKind.GENERIC) -> MultiChannelImage:
    """Read a PFM file as an image of the given kind."""
    try:
        return MultiChannelImage(read_pfm_array(path), kind)
    except ValueError as e:
        raise ParseError(f"invalid {kind.value} image: {e}", path) from e


def encode_pfm(data: np.ndarray) -> bytes:
    """
    Encode a (height, width[, channels]) array as little-endian PFM.

    Two-channel arrays (direction fields) are stored as 3-channel PF with a
    zero third channel.
    """
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise ShapeError(f"PFM data must be 2-D or 3-D, got shape {arr.shape}")
    height, width, channels = arr.shape
    if channels == 2:
        arr = np.concatenate([arr, np.zeros((height, width, 1), dtype=np.float32)], axis=2)
        channels = 3
    if channels not in (1, 3):
        raise ShapeError(f"PFM stores 1 or 3 channels, got {channels}")

    header = f"{'PF' if channels == 3 else 'Pf'}\n{width} {height}\n-1.0\n".encode("ascii")
    raster = np.ascontiguousarray(arr[::-1]).astype("<f4").tobytes()
    return header + raster


def write_pfm(path: str | Path, image: MultiChannelImage | np.ndarray) -> Path:
    """Atomically write an image or array as PFM."""
    data = image.data if isinstance(image, MultiChannelImage) else image
    return atomic_write_bytes(path, encode_pfm(data))


# --- PPM / PGM ---


def read_pnm(path: str | Path) -> np.ndarray:
    """
    Read a binary P6 (color) or P5 (gray) file.

    Returns:
        np.ndarray: (height, width, 3) for P6 or (height, width) for P5;
            uint8 when maxval < 256, else uint16
    """
    buf = _read_bytes(path)
    tokens, offset = _header_tokens(buf, 4, path)
    magic = tokens[0]
    if magic not in ("P5", "P6"):
        raise ParseError(f"unsupported PNM identifier {magic!r} (need P5 or P6)", path)
    width, height = _parse_dimensions(tokens[1:3], path)
    try:
        maxval = int(tokens[3])
    except ValueError as e:
        raise ParseError(f"bad maxval {tokens[3]!r}", path) from e
    if not 0 < maxval < 65536:
        raise ParseError(f"maxval out of range: {maxval}", path)

    channels = 3 if magic == "P6" else 1
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    count = width * height * channels
    if len(buf) - offset < count * dtype.itemsize:
        raise ParseError("raster truncated", path)
    raw = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    out = raw.astype(np.uint8 if maxval < 256 else np.uint16)
    return out.reshape(height, width, 3) if channels == 3 else out.reshape(height, width)


def _encode_pnm(magic: str, data: np.ndarray, maxval: int) -> bytes:
    height, width = data.shape[:2]
    header = f"{magic}\n{width} {height}\n{maxval}\n".encode("ascii")
    if maxval < 256:
        return header + np.ascontiguousarray(data, dtype=np.uint8).tobytes()
    return header + np.ascontiguousarray(data).astype(">u2").tobytes()


def write_ppm(path: str | Path, rgb: np.ndarray) -> Path:
    """Atomically write an (height, width, 3) uint8-range array as binary P6."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"PPM needs (height, width, 3) data, got {arr.shape}")
    return atomic_write_bytes(path, _encode_pnm("P6", np.clip(np.rint(arr), 0, 255).astype(np.uint8), 255))


def write_pgm(path: str | Path, gray: np.ndarray, sixteen_bit: bool = False) -> Path:
    """Atomically write a 2-D array as binary P5, 8-bit or big-endian 16-bit."""
    arr = np.asarray(gray)
    if arr.ndim != 2:
        raise ShapeError(f"PGM needs 2-D data, got {arr.shape}")
    if sixteen_bit:
        if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
            raise ShapeError("values do not fit a 16-bit PGM")
        return atomic_write_bytes(path, _encode_pnm("P5", arr.astype(np.uint16), 65535))
    return atomic_write_bytes(path, _encode_pnm("P5", np.clip(np.rint(arr), 0, 255).astype(np.uint8), 255))


def read_color(path: str | Path) -> MultiChannelImage:
    """Read an 8-bit P6 file as a color image with samples in [0, 255]."""
    rgb = read_pnm(path)
    if rgb.ndim != 3:
        raise ParseError("expected a color (P6) image", path)
    return MultiChannelImage(rgb.astype(np.float32), ImageKind.COLOR)


# --- Calibration ---

_CAM_PATTERN = re.compile(r"\[\s*([^\];]+);\s*([^\];]+);")


def read_calibration(path: str | Path) -> CameraIntrinsics:
    """
    Parse a Middlebury-style calib.txt into camera intrinsics.

    Uses the cam0 matrix for focal length and principal point, `baseline`
    (millimetres) for the depth scale and `doffs` as disparity offset.

    Raises:
        ParseError: If a required key is missing or malformed
    """
    from edgefuse.ground_truth import CameraIntrinsics

    values: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(_read_bytes(path).decode("utf-8", errors="replace").splitlines(), start=1):
        if "=" in line:
            key, _, value = line.partition("=")
            values[key.strip()] = (value.strip(), lineno)

    for key in ("cam0", "baseline"):
        if key not in values:
            raise ParseError(f"missing key {key!r}", path)

    cam_text, cam_line = values["cam0"]
    match = _CAM_PATTERN.search(cam_text)
    if not match:
        raise ParseError(f"cam0: cannot parse matrix {cam_text!r}", path, cam_line)
    try:
        row0 = [float(v) for v in match.group(1).split()]
        row1 = [float(v) for v in match.group(2).split()]
        focal, cx, cy = row0[0], row0[2], row1[2]
        baseline = float(values["baseline"][0])
        doffs = float(values["doffs"][0]) if "doffs" in values else 0.0
    except (ValueError, IndexError) as e:
        raise ParseError(f"malformed calibration value: {e}", path) from e

    logger.debug("Calibration %s: f=%.3f cx=%.3f cy=%.3f baseline=%.3f", path, focal, cx, cy, baseline)
    return CameraIntrinsics(
        focal=focal,
        cx=cx,
        cy=cy,
        baseline_focal=baseline * focal,
        disparity_offset=doffs,
    )
