import numpy as np

from drhash.fingerprint import FNV64_OFFSET, fnv1a_64, fold, pack_bits


def reference_fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) % (1 << 64)
    return h


def test_published_vectors():
    assert fnv1a_64(b"") == FNV64_OFFSET == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_matches_independent_implementation(rng):
    for _ in range(100):
        data = rng.integers(0, 256, size=int(rng.integers(0, 40)), dtype=np.uint8).tobytes()
        assert fnv1a_64(data) == reference_fnv1a_64(data)


def test_serialization():
    assert pack_bits("") == bytes(8)
    assert pack_bits("1") == (1).to_bytes(8, "little") + b"\x80"
    assert pack_bits("101000001") == (9).to_bytes(8, "little") + b"\xa0\x80"


def test_empty_and_length_prefix():
    assert fold("").value == fnv1a_64(bytes(8))
    assert fold("0").value != fold("00").value
    assert fold("0101").drh_bit_len == 4
    assert fold("0101", 12).window_len == 12 and fold("0101", 12).value == fold("0101").value
    assert fold("1").hex() == f"{fold('1').value:016x}"


def test_single_bit_flips_never_collide(rng):
    seen = set()
    for _ in range(10_000):
        bits = "".join(rng.choice(["0", "1"], size=64))
        i = int(rng.integers(0, 64))
        flipped = bits[:i] + ("1" if bits[i] == "0" else "0") + bits[i + 1:]
        a, b = fold(bits).value, fold(flipped).value
        assert a != b
        seen.add(a)
    assert len(seen) > 9_990
