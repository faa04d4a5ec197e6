"""Writes the byte-level fixtures with struct/zlib, independent of the C++ encoder."""
import json
import pathlib
import struct
import zlib

HERE = pathlib.Path(__file__).parent


def blob(fmt_code, shape, values):
    out = b"ATF1" + bytes([fmt_code]) + struct.pack("<I", len(shape))
    out += b"".join(struct.pack("<I", d) for d in shape)
    out += b"".join(struct.pack("<f" if fmt_code == 0 else "<d", v) for v in values)
    return out


config = {
    "image_height": 8, "image_width": 8, "image_channels": 1, "patch_size": 4,
    "sequence_length": 16, "frame": 4, "hop": 4, "model_dim": 8, "embed_dim": 4,
    "tcn_kernel_size": 3, "tcn_dilations": [1, 2], "heads": 2, "mlp_ratio": 2,
    "layers": 2, "num_classes": 3, "ln_eps": 1e-05, "modalities": ["face", "fingerprint", "voice"],
}
entries = [("head.bias", [3], [0.5, -1.0, 2.25]), ("w", [2, 2], [1.0, -2.0, 0.125, 3.5])]

text = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
body = b"AFCK" + struct.pack("<I", 1) + struct.pack("<I", len(text)) + text + struct.pack("<I", len(entries))
for name, shape, values in entries:
    body += struct.pack("<I", len(name)) + name.encode() + blob(0, shape, values)
body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
(HERE / "checkpoint_v1.afck").write_bytes(body)

(HERE / "blob_f32.atf").write_bytes(blob(0, [2, 3], [0.0, 1.0, -1.5, 0.25, 1e-3, 65504.0]))
(HERE / "blob_f64.atf").write_bytes(blob(1, [2], [0.1, -1e300]))
