"""Named parameter store with Glorot-style init and a binary checkpoint format.

Checkpoint layout: a text manifest (format-version line, then one
``name dim0 dim1 ...`` line per parameter, then a lone ``.``) followed by the
raw little-endian float64 payload in manifest order. Round-trips bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor

FORMAT_VERSION = "insertion-asr-ckpt-1"


class CheckpointError(Exception):
    pass


class ParameterStore:
    """Ordered name -> leaf Tensor mapping for one model."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def create(self, name: str, shape: tuple[int, ...], rng: np.random.Generator, kind: str = "matrix") -> Tensor:
        """Add a parameter; ``kind`` selects the init rule.

        matrix: uniform +-sqrt(6 / (fan_in + fan_out)); zero: zeros (biases);
        one: ones (normalization gains).
        """
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        if kind == "matrix":
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            fan_out = shape[1] if len(shape) > 1 else shape[0]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            value = rng.uniform(-bound, bound, size=shape)
        elif kind == "zero":
            value = np.zeros(shape)
        elif kind == "one":
            value = np.ones(shape)
        else:
            raise ValueError(f"unknown init kind {kind!r}")
        t = Tensor(np.asarray(value, dtype=np.float64), name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> dict[str, Tensor]:
        return self._params

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad = None

    def n_scalars(self) -> int:
        return sum(p.value.size for p in self._params.values())

    # -- checkpoint I/O ------------------------------------------------------

    def save(self, path) -> None:
        lines = [FORMAT_VERSION]
        for name, p in self._params.items():
            dims = " ".join(str(d) for d in p.value.shape)
            lines.append(f"{name} {dims}".rstrip())
        lines.append(".")
        header = ("\n".join(lines) + "\n").encode("ascii")
        with open(path, "wb") as f:
            f.write(header)
            for p in self._params.values():
                f.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())

    def load(self, path) -> None:
        """Fill existing parameters from a checkpoint; manifests must match."""
        with open(path, "rb") as f:
            blob = f.read()
        try:
            end = blob.index(b"\n.\n") + len(b"\n.\n")
        except ValueError:
            raise CheckpointError("missing manifest terminator") from None
        manifest = blob[:end].decode("ascii").splitlines()
        if not manifest or manifest[0] != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format: {manifest[:1]}")
        entries = []
        for line in manifest[1:-1]:
            fields = line.split()
            entries.append((fields[0], tuple(int(d) for d in fields[1:])))
        expected = [(n, p.value.shape) for n, p in self._params.items()]
        if entries != expected:
            raise CheckpointError("checkpoint manifest does not match this model's parameters")
        offset = end
        for name, shape in entries:
            count = int(np.prod(shape)) if shape else 1
            nbytes = count * 8
            chunk = blob[offset : offset + nbytes]
            if len(chunk) != nbytes:
                raise CheckpointError("truncated checkpoint payload")
            self._params[name].value = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
            offset += nbytes
        if offset != len(blob):
            raise CheckpointError("trailing bytes after checkpoint payload")
