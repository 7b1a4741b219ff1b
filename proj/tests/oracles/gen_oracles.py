# Copyright 2026 The VideoMemory Authors
# SPDX-License-Identifier: Apache-2.0
"""Independent reference values for the C++ tests.

Regenerate with:  python3 tests/oracles/gen_oracles.py tests/data
The outputs are committed; the C++ tests only read them.
"""

import json
import math
import re
import sys
from pathlib import Path

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes, seed: int = FNV_OFFSET) -> int:
    h = seed
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def unit(self) -> float:
        """Uniform in [-1, 1), exactly representable."""
        return (self.next() >> 11) * 2.0**-53 * 2.0 - 1.0


# -- entity keys -----------------------------------------------------------------


def ascii_lower(text: str) -> str:
    return "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in text)


def canonical_name(name: str) -> str:
    # ASCII case folding and ASCII whitespace only, byte-for-byte otherwise.
    return "_".join(w for w in re.split(r"[ \t\n\v\f\r]+", ascii_lower(name)) if w)


def entity_key(name: str, attributes: dict) -> str:
    attrs = {ascii_lower(k.strip(" \t\n\v\f\r")): v for k, v in attributes.items()}
    canon = "\n".join(f"{k}={attrs[k]}" for k in sorted(attrs, key=lambda s: s.encode()))
    return canonical_name(name) + "_" + format(fnv1a64(canon.encode()) & 0xFFFFFFFF, "08x")


def key_cases():
    names = ["Anna", "  Old   Harry ", "the Red Kite", "Dr. Vega", "Élodie Marchand", "castle hall"]
    attr_sets = [
        {},
        {"age": "20"},
        {"age": "60"},
        {"Age": "20", "outfit": "blue coat"},
        {"outfit": "blue coat", "age": "20"},
        {"era": "1920s", "hair": "grey, tied back", "scar": "left cheek"},
        {"condition": "cracked glass", "color": "brass"},
        {"mood": "café lights, dusk", "lighting": "lamps lit"},
    ]
    cases = []
    for name in names:
        for attrs in attr_sets:
            cases.append({"name": name, "attributes": attrs, "key": entity_key(name, attrs)})
    return cases


# -- scoring ---------------------------------------------------------------------


def cosine(u, v):
    dot = math.fsum(a * b for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(a * a for a in u))
    nv = math.sqrt(math.fsum(b * b for b in v))
    return dot / (nu * nv)


def score_instance(seed: int):
    rng = SplitMix64(seed)
    n_req = (4, 8, 12)[rng.next() % 3]
    n_out = 1 + rng.next() % (n_req + 3)
    dim = 2 + rng.next() % 63
    shots = []
    for _ in range(n_out):
        detected = rng.next() % 10 != 0
        values = [rng.unit() for _ in range(dim)]
        shots.append((detected, values))

    # Brute force: materialize the list of N_req - 1 contributions.
    contributions = [0.0] * (n_req - 1)
    raw = []
    ref_detected, ref = shots[0]
    for i in range(1, min(n_out, n_req)):
        detected, values = shots[i]
        if ref_detected and detected:
            c = cosine(ref, values)
            raw.append(c)
            contributions[i - 1] = max(0.0, c)
        else:
            raw.append(None)
    score = math.fsum(contributions) / (n_req - 1)
    return {"seed": seed, "n_req": n_req, "n_out": n_out, "dim": dim, "cosines": raw, "score": score}


# -- mock image colors -------------------------------------------------------------


def mock_color(prompt: str, digests, salt: str):
    h = fnv1a64(prompt.encode())
    for d in digests:
        h = fnv1a64(d.encode(), h)
    h = fnv1a64(salt.encode(), h)
    return [(h >> 16) & 0xFF, (h >> 8) & 0xFF, h & 0xFF]


def color_cases():
    digest_a = "a" * 64
    digest_b = "0123456789abcdef" * 4
    cases = []
    for prompt in ["Reference image of Anna", "castle hall at dusk", ""]:
        for digests in ([], [digest_a], [digest_a, digest_b]):
            for salt in ("", "shot-1", "shot-2"):
                cases.append({"prompt": prompt, "digests": digests, "salt": salt,
                              "rgb": mock_color(prompt, digests, salt)})
    return cases


def main(out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fnv_vectors = [{"text": t, "hash": format(fnv1a64(t.encode()), "016x")}
                   for t in ["", "a", "foobar", "age=20", "age=20\noutfit=blue coat"]]
    (out / "oracle_keys.json").write_text(
        json.dumps({"fnv1a64": fnv_vectors, "keys": key_cases()}, indent=1, ensure_ascii=False) + "\n")
    instances = [score_instance(0x5EED0000 + i) for i in range(1200)]
    (out / "oracle_scores.json").write_text(
        json.dumps({"generator": "splitmix64", "instances": instances}, separators=(",", ":")) + "\n")
    (out / "oracle_mock_colors.json").write_text(json.dumps({"cases": color_cases()}, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
