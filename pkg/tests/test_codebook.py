import numpy as np
import pytest

from drhash import codebook
from drhash.codebook import (TANS_ALPHABET, TANS_TABLE_SIZE, Backend, CodebookConfig, block_bit_count,
                             build_tans_table, en_dec, en_dec_tans, en_dec_xorshift, kmer_codes, kmer_model,
                             make_ttable, normalize_counts, splitmix64, tans_table_for)
from drhash.sequence import decode, random_sequence

import oracles


def test_splitmix64_reference_vector():
    g = splitmix64(1234567)
    assert [next(g) for _ in range(3)] == [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_ttable_matches_straight_line_oracle():
    for seed, bs, n in [(1, 4, 8), (codebook.DEFAULT_SEED, 4, 8), (7, 7, 8), (99, 5, 10)]:
        table = make_ttable(CodebookConfig(n=n, block_size=bs, seed=seed))
        assert table.tolist() == oracles.ttable(seed, bs, n)
        assert len({v >> (16 - n) for v in table.tolist()}) == 1 << bs


def test_ttable_is_deterministic_and_seed_dependent():
    a = make_ttable(CodebookConfig(seed=5)).tolist()
    assert a == make_ttable(CodebookConfig(seed=5)).tolist()
    assert a != make_ttable(CodebookConfig(seed=6)).tolist()


def test_three_step_trace_seed_one():
    cfg = CodebookConfig(n=8, block_size=4, seed=1)
    table = oracles.ttable(1, 4, 8)
    state, ostate = 0, 0
    for h in (3, 14, 0):
        block, state = en_dec_xorshift(state, h, cfg)
        oblock, ostate = oracles.xorshift_step(ostate, h, table, 8)
        assert decode(block) == oblock and state == ostate


def test_zero_xor_gives_zero_state():
    cfg = CodebookConfig()
    t = make_ttable(cfg)
    for h in range(16):
        block, state = en_dec_xorshift(int(t[h]), h, cfg)
        assert state == 0 and decode(block) == "AAAA"


def test_shift_arithmetic_example(monkeypatch):
    table = np.zeros(16, dtype=np.uint16)
    table[0] = 0x00FF
    monkeypatch.setattr(codebook, "make_ttable", lambda cfg: table)
    block, state = en_dec_xorshift(0x0000, 0, CodebookConfig())
    assert state == 0xFF00 and decode(block) == "AAAA"
    table[1] = 0x1B00  # 00 01 10 11 in the top byte
    block, state = en_dec_xorshift(0x0000, 1, CodebookConfig())
    assert state == 0x001B and decode(block) == "ACGT"


def test_state_update_is_a_bijection():
    cfg = CodebookConfig()
    t = int(make_ttable(cfg)[5])
    states = np.arange(1 << 16, dtype=np.int64)
    x = states ^ t
    new = ((x << cfg.n) | (x >> (16 - cfg.n))) & 0xFFFF
    assert len(np.unique(new)) == 1 << 16
    for s in (0, 1, 0xBEEF, 0xFFFF):
        assert en_dec_xorshift(s, 5, cfg)[1] == int(new[s])


def test_rate_accounting(rng):
    for bs in (4, 5, 6, 7):
        cfg = CodebookConfig(block_size=bs)
        state, hash_bits, seq_bits = 0, 0, 0
        for h in rng.integers(0, 1 << bs, size=200):
            block, state = en_dec(state, int(h), cfg)
            hash_bits += block_bit_count(state, cfg)
            seq_bits += 2 * len(block)
        assert hash_bits / seq_bits == bs / 8 == cfg.rate


def test_distinct_prefixes_do_not_collide(rng):
    cfg = CodebookConfig()
    seen = {}
    for _ in range(10_000):
        blocks = tuple(int(h) for h in rng.integers(0, 16, size=8))
        state, parts = 0, []
        for h in blocks:
            b, state = en_dec(state, h, cfg)
            parts.append(decode(b))
        key = (state, "".join(parts))
        assert seen.setdefault(key, blocks) == blocks


def test_xorshift_validation():
    with pytest.raises(ValueError):
        en_dec_xorshift(0, 16, CodebookConfig())
    with pytest.raises(ValueError):
        en_dec_xorshift(1 << 16, 0, CodebookConfig())
    for kwargs in ({"n": 7}, {"n": 18}, {"block_size": 8}, {"block_size": 0}, {"seed": -1}):
        with pytest.raises(ValueError):
            CodebookConfig(**kwargs)


# tANS ---------------------------------------------------------------------------------------------------------------
def test_uniform_model_table():
    t = build_tans_table()
    assert (t.nb_bits == 8).all()
    assert sorted(t.symbol.tolist()) == list(range(TANS_ALPHABET))
    cfg = CodebookConfig(Backend.TANS)
    assert all(block_bit_count(s, cfg) == 8 for s in range(TANS_TABLE_SIZE, 2 * TANS_TABLE_SIZE))


def skewed_reference(rng, length=40_000):
    probs = np.array([0.4, 0.1, 0.1, 0.4])
    return rng.choice(4, size=length, p=probs).astype(np.uint8)


def test_table_symbol_frequencies_equal_counts(rng):
    counts = kmer_model(skewed_reference(rng))
    t = build_tans_table(counts)
    assert np.bincount(t.symbol, minlength=TANS_ALPHABET).tolist() == list(counts)
    # every transition lands inside the state range
    assert ((t.new_x_base >= TANS_TABLE_SIZE) & (t.new_x_base + (1 << t.nb_bits) <= 2 * TANS_TABLE_SIZE)).all()


def test_decoded_kmers_follow_the_model(rng):
    counts = kmer_model(skewed_reference(rng))
    cfg = CodebookConfig(Backend.TANS, model_counts=counts)
    table = tans_table_for(cfg)
    state = cfg.initial_state()
    seen = np.zeros(TANS_ALPHABET)
    nb_total = 0
    steps = 100_000
    for _ in range(steps):
        nb = block_bit_count(state, cfg)
        nb_total += nb
        h = int(rng.integers(0, 1 << nb))
        state = int(table.new_x_base[state - TANS_TABLE_SIZE]) + h
        seen[table.symbol[state - TANS_TABLE_SIZE]] += 1
    model = np.array(counts) / TANS_TABLE_SIZE
    tv = 0.5 * np.abs(seen / steps - model).sum()
    assert tv < 0.05
    p = model[model > 0]
    entropy = float(-(p * np.log2(p)).sum())
    assert abs(nb_total / steps - entropy) <= 1.0


def test_en_dec_tans_contract(rng):
    cfg = CodebookConfig(Backend.TANS, model_counts=kmer_model(skewed_reference(rng)))
    table = tans_table_for(cfg)
    state = cfg.initial_state()
    nb = int(table.nb_bits[0])
    bits = "1" * nb
    block, new = en_dec_tans(state, bits, table)
    assert new == int(table.new_x_base[0]) + (int(bits, 2) if nb else 0)
    assert (block == kmer_codes(int(table.symbol[new - TANS_TABLE_SIZE]))).all()
    with pytest.raises(ValueError):
        en_dec_tans(state, bits + "0", table)
    with pytest.raises(ValueError):
        en_dec_tans(3, "", table)


def test_tans_replay_is_deterministic(rng):
    cfg = CodebookConfig(Backend.TANS, model_counts=kmer_model(random_sequence(rng, 5000)))
    hashes = [int(x) for x in rng.integers(0, 1 << 16, size=50)]

    def run():
        state, out = cfg.initial_state(), []
        for h in hashes:
            nb = block_bit_count(state, cfg)
            b, state = en_dec(state, h % (1 << nb), cfg)
            out.append(decode(b))
        return "".join(out)

    assert run() == run()


def test_normalize_counts():
    raw = [0] * TANS_ALPHABET
    raw[0], raw[1], raw[2] = 1000, 10, 1
    c = normalize_counts(raw)
    assert sum(c) == TANS_TABLE_SIZE and c[1] >= 1 and c[2] >= 1 and c[3] == 0
    assert normalize_counts([0] * TANS_ALPHABET) == (1,) * TANS_ALPHABET
    assert CodebookConfig(Backend.TANS, model_counts=(1,) * TANS_ALPHABET).model_counts is None
    with pytest.raises(ValueError):
        CodebookConfig(Backend.TANS, model_counts=(2,) * TANS_ALPHABET)


def test_kmer_codes_order():
    assert decode(kmer_codes(0)) == "AAAA"
    assert decode(kmer_codes(0b00011011)) == "ACGT"
    assert decode(kmer_codes(255)) == "TTTT"
