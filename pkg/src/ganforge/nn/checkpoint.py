""".gfc checkpoints: a JSON header followed by GFT1 tensor blocks.

Layout: magic ``GFC1``, little-endian u32 header length, the UTF-8 JSON
header, then one GFT1 block per entry of ``header["tensors"]`` in order.
The header carries the network architectures, the training config, the
epoch and the RNG state, so a checkpoint alone is enough to rebuild and
resume.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.io import FormatError, read_block, write_block
from .networks import Network, rebuild

MAGIC = b"GFC1"


@dataclass
class Checkpoint:
    generator: Network
    discriminator: Network | None
    epoch: int
    config: dict = field(default_factory=dict)
    rng_state: dict | None = None
    extra: dict = field(default_factory=dict)


def _encode(header: dict, tensors: dict[str, np.ndarray]) -> bytes:
    header = dict(header, tensors=list(tensors))
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    for arr in tensors.values():
        write_block(buf, arr)
    return buf.getvalue()


def save_checkpoint(
    path,
    generator: Network,
    discriminator: Network | None = None,
    epoch: int = 0,
    config: dict | None = None,
    rng_state: dict | None = None,
    states: tuple[dict, dict | None] | None = None,
    extra: dict | None = None,
) -> None:
    """Write networks (or explicit ``states`` for them) to ``path``.

    ``states`` lets a past snapshot be saved through template networks
    without loading it into them first.
    """
    g_state, d_state = states if states is not None else (
        generator.state_dict(),
        discriminator.state_dict() if discriminator is not None else None,
    )
    tensors = {f"generator/{k}": v for k, v in sorted(g_state.items())}
    if discriminator is not None and d_state is not None:
        tensors.update({f"discriminator/{k}": v for k, v in sorted(d_state.items())})
    header = {
        "format": "ganforge-checkpoint",
        "epoch": int(epoch),
        "config": config or {},
        "rng_state": rng_state,
        "generator_arch": generator.arch,
        "discriminator_arch": discriminator.arch if discriminator is not None else None,
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(_encode(header, tensors))


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Raw header and tensors."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path}: not a .gfc checkpoint")
        raw = fh.read(4)
        if len(raw) != 4:
            raise FormatError(f"{path}: truncated header")
        (n,) = struct.unpack("<I", raw)
        blob = fh.read(n)
        if len(blob) != n:
            raise FormatError(f"{path}: truncated header")
        header = json.loads(blob.decode("utf-8"))
        tensors = {name: read_block(fh) for name in header["tensors"]}
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after the last tensor block")
    return header, tensors


def load_checkpoint(path) -> Checkpoint:
    header, tensors = read_checkpoint(path)

    def part(prefix):
        return {k[len(prefix) :]: v for k, v in tensors.items() if k.startswith(prefix)}

    gen = rebuild(header["generator_arch"])
    gen.load_state_dict(part("generator/"))
    disc = None
    if header.get("discriminator_arch"):
        disc = rebuild(header["discriminator_arch"])
        disc.load_state_dict(part("discriminator/"))
    return Checkpoint(gen, disc, header["epoch"], header["config"], header["rng_state"], header["extra"])


def save_network(path, net: Network, extra: dict | None = None) -> None:
    """A single network (e.g. a trained classifier) in the same container."""
    header = {"format": "ganforge-network", "arch": net.arch, "extra": extra or {}}
    tensors = dict(sorted(net.state_dict().items()))
    with open(path, "wb") as fh:
        fh.write(_encode(header, tensors))


def load_network(path) -> tuple[Network, dict]:
    header, tensors = read_checkpoint(path)
    if header.get("format") != "ganforge-network":
        raise FormatError(f"{path}: not a single-network file")
    net = rebuild(header["arch"])
    net.load_state_dict(tensors)
    return net, header["extra"]
