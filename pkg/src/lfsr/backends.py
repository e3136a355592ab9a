"""Single-image super-resolution backends.

Backends operate on the target grid: the pipeline bicubically upsamples
first, so every backend maps an image in [0, 1] to a same-sized image.
External programs speak a pipe protocol: ``<command> --scale <alpha>``,
a binary 16-bit PGM (P5, maxval 65535, big-endian) on stdin, the restored
image in the same format and size on stdout, non-zero exit on failure.
"""

from __future__ import annotations

import logging
import re
import shlex
import subprocess
import sys
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0


class BackendError(RuntimeError):
    """Any failure of a super-resolution backend."""


class BackendSpawnError(BackendError):
    pass


class BackendTimeoutError(BackendError):
    pass


class BackendExitError(BackendError):
    def __init__(self, returncode: int, stderr: str):
        super().__init__(f"backend exited with status {returncode}: {stderr.strip()}")
        self.returncode = returncode
        self.stderr = stderr


class BackendOutputError(BackendError):
    """Backend output is not a valid 16-bit PGM."""


class BackendDimMismatchError(BackendError):
    def __init__(self, got, want):
        super().__init__(f"backend dim mismatch (got {got[1]}×{got[0]}, want {want[1]}×{want[0]})")
        self.got, self.want = got, want


# -- PGM -----------------------------------------------------------------

def encode_pgm(image: np.ndarray) -> bytes:
    """Float image in [0, 1] -> binary 16-bit PGM."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM carries single-channel images")
    q = np.round(np.clip(img, 0.0, 1.0) * 65535).astype(">u2")
    Y, X = img.shape
    return f"P5\n{X} {Y}\n65535\n".encode("ascii") + q.tobytes()


_PGM_HEADER = re.compile(rb"P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def decode_pgm(data: bytes) -> np.ndarray:
    """Binary 16-bit PGM -> float image in [0, 1]."""
    m = _PGM_HEADER.match(data)
    if not m:
        raise BackendOutputError("output is not a binary PGM (P5)")
    X, Y, maxval = (int(g) for g in m.groups())
    if maxval != 65535:
        raise BackendOutputError(f"expected maxval 65535, got {maxval}")
    body = data[m.end():]
    if len(body) != 2 * X * Y:
        raise BackendOutputError(f"PGM body has {len(body)} bytes, expected {2 * X * Y}")
    return np.frombuffer(body, ">u2").reshape(Y, X).astype(np.float64) / 65535.0


# -- backends ------------------------------------------------------------

@dataclass(frozen=True)
class IdentityBackend:
    kind = "identity"
    scale_aware = False

    def __call__(self, image: np.ndarray, alpha: int) -> np.ndarray:
        return np.array(image, dtype=np.float64, copy=True)


@dataclass(frozen=True)
class SharpenBackend:
    """Back-projection style deblurring of an upsampled image.

    Each iteration adds the residual between the input and a Gaussian
    re-blur of the current estimate (Van Cittert update).  The total
    correction per pixel is clamped to ``+-max_correction`` and the output
    to [0, 1].  The same parameters serve every magnification factor.
    """

    iterations: int = 3
    sigma: float = 1.0
    gain: float = 1.0
    max_correction: float = 0.2
    kind = "sharpen"
    scale_aware = False

    def __call__(self, image: np.ndarray, alpha: int) -> np.ndarray:
        y = np.asarray(image, dtype=np.float64)
        x = y.copy()
        for _ in range(self.iterations):
            x = x + self.gain * (y - ndimage.gaussian_filter(x, self.sigma, mode="nearest"))
            x = y + np.clip(x - y, -self.max_correction, self.max_correction)
        return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class ExternalBackend:
    command: str
    timeout: float = DEFAULT_TIMEOUT
    kind = "external"
    scale_aware = True

    def __call__(self, image: np.ndarray, alpha: int) -> np.ndarray:
        return run_external_backend(image, alpha, self.command, self.timeout)


def run_external_backend(image: np.ndarray, alpha: int, command, timeout: float = DEFAULT_TIMEOUT) -> np.ndarray:
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    argv += ["--scale", str(int(alpha))]
    payload = encode_pgm(image)
    log.info("backend call: %s (%dx%d)", " ".join(argv), image.shape[1], image.shape[0])
    try:
        proc = subprocess.run(argv, input=payload, capture_output=True, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        raise BackendTimeoutError(f"backend timed out after {timeout:g} s") from exc
    except OSError as exc:
        raise BackendSpawnError(f"cannot start backend {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        raise BackendExitError(proc.returncode, proc.stderr.decode(errors="replace"))
    out = decode_pgm(proc.stdout)
    if out.shape != image.shape:
        raise BackendDimMismatchError(out.shape, image.shape)
    return out


def passthrough_command() -> str:
    """Command line of the bundled pass-through backend."""
    return f"{shlex.quote(sys.executable)} -m lfsr.passthrough"


def parse_backend(spec: str, timeout: float = DEFAULT_TIMEOUT):
    """``identity`` | ``sharpen`` | ``external:<command>``."""
    if spec == "identity":
        return IdentityBackend()
    if spec == "sharpen":
        return SharpenBackend()
    if spec.startswith("external:"):
        cmd = spec[len("external:"):].strip()
        if not cmd:
            raise ValueError("external backend needs a command")
        if cmd == "passthrough":
            cmd = passthrough_command()
        return ExternalBackend(cmd, timeout)
    raise ValueError(f"unknown backend {spec!r} (identity | sharpen | external:<cmd>)")
