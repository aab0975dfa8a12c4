import numpy as np
import pytest

from drhash.sequence import SequenceParseError, decode, encode, parse_text, read_sequence


def test_round_trip_and_case():
    assert encode("ACGT").tolist() == [0, 1, 2, 3]
    assert encode("acgt").tolist() == [0, 1, 2, 3]
    assert decode(encode("GATTACA")) == "GATTACA"
    assert encode(b"").tolist() == []


def test_rejects_other_bytes_with_position():
    with pytest.raises(SequenceParseError) as err:
        encode("ACNT")
    assert err.value.position == 2 and err.value.byte == ord("N")
    with pytest.raises(ValueError):
        encode(np.array([0, 4], dtype=np.uint8))


def test_fasta_and_line_endings():
    data = b">chr1 test\nACGT\r\nTT\n>second\nGG\n"
    assert decode(parse_text(data)) == "ACGTTTGG"
    assert decode(parse_text(b"AC\nGT")) == "ACGT"


def test_parse_error_offsets_count_the_whole_file():
    data = b">hdr\nACGT\nACXT\n"
    with pytest.raises(SequenceParseError) as err:
        parse_text(data)
    assert err.value.position == data.index(b"X")
    with pytest.raises(SequenceParseError):
        parse_text(b"AC GT")


def test_read_sequence(tmp_path):
    p = tmp_path / "s.fa"
    p.write_bytes(b">x\nacgt\n")
    assert decode(read_sequence(p)) == "ACGT"
