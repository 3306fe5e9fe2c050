"""Freezes mock-embedder vectors into tests/data/mock_embeddings.json.

Values are stored with float.hex so the comparison is bit-exact.
"""
import hashlib
import json
import pathlib

from mockvec import vector

ROOT = pathlib.Path(__file__).resolve().parent.parent

cases = []
for seed, dim, key in [(0, 8, "a diagram"), (0, 8, "A diagram"), (0, 512, "a diagram"), (7, 16, ""),
                       (7, 16, "ünïcödé"), (18446744073709551615, 4, "max seed"), (3, 1, "single")]:
    cases.append({"seed": str(seed), "dim": dim, "key": key, "values": [x.hex() for x in vector(seed, dim, key)]})

image_bytes = b"\x89PNG\r\n\x1a\nnot really a png"
key = "image:" + hashlib.sha256(image_bytes).hexdigest()
image = {"bytes_hex": image_bytes.hex(), "key": key, "seed": "0", "dim": 8,
         "values": [x.hex() for x in vector(0, 8, key)]}

(ROOT / "data" / "mock_embeddings.json").write_text(
    json.dumps({"text": cases, "image": image}, indent=1, ensure_ascii=False) + "\n")
