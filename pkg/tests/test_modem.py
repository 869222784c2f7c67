from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pimsim.modem import (
    Scheme,
    SchemeConfig,
    demap_symbols,
    make_alphabet,
    map_bits,
    spectral_efficiency,
)

ALPHABETS = ["bpsk", "qam4", "qam8", "qam16"]


@pytest.mark.parametrize("name", ALPHABETS)
def test_unit_energy_and_distinct(name):
    a = make_alphabet(name)
    assert len(a) == 2 ** a.bits_per_symbol
    assert np.mean(np.abs(a.points) ** 2) == pytest.approx(1.0, abs=1e-12)
    gaps = [abs(x - y) for x, y in combinations(a.points, 2)]
    assert min(gaps) > 0.1


@pytest.mark.parametrize("name", ALPHABETS)
def test_gray_neighbours_differ_in_one_bit(name):
    a = make_alphabet(name)
    dmin = min(abs(x - y) for x, y in combinations(a.points, 2))
    for i, j in combinations(range(len(a)), 2):
        if abs(a.points[i] - a.points[j]) < dmin * (1 + 1e-9):
            assert bin(i ^ j).count("1") == 1


def test_bpsk_convention():
    np.testing.assert_array_equal(map_bits([0, 1, 0], make_alphabet("bpsk")), [1, -1, 1])


def test_qam4_points_in_listing_order():
    pts = make_alphabet("qam4").points * np.sqrt(2)
    np.testing.assert_allclose(pts, [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], atol=1e-15)


def test_qam16_scale():
    pts = make_alphabet("qam16").points * np.sqrt(10)
    assert sorted(set(np.round(pts.real).astype(int))) == [-3, -1, 1, 3]


def test_qam8_is_rectangular_grid():
    pts = make_alphabet("qam8").points * np.sqrt(6)
    assert sorted(set(np.round(pts.real).astype(int))) == [-3, -1, 1, 3]
    assert sorted(set(np.round(pts.imag).astype(int))) == [-1, 1]


def test_empty_and_errors():
    a = make_alphabet("qam4")
    assert map_bits([], a).size == 0
    with pytest.raises(ValueError):
        map_bits([0, 1, 1], a)
    with pytest.raises(ValueError):
        make_alphabet("psk8")


def test_demap():
    bpsk = make_alphabet("bpsk")
    np.testing.assert_array_equal(demap_symbols([1, -1], bpsk), [0, 1])
    with pytest.raises(ValueError):
        demap_symbols([0.5 + 0j], bpsk)


@pytest.mark.parametrize("name", ["bpsk", "qam4"])
@pytest.mark.parametrize("length", range(1, 9))
def test_round_trip_exhaustive(name, length):
    a = make_alphabet(name)
    if length % a.bits_per_symbol:
        return
    for bits in product([0, 1], repeat=length):
        np.testing.assert_array_equal(demap_symbols(map_bits(bits, a), a), bits)


@given(name=st.sampled_from(ALPHABETS), data=st.data())
def test_round_trip_random(name, data):
    a = make_alphabet(name)
    n = data.draw(st.integers(0, 40)) * a.bits_per_symbol
    bits = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    np.testing.assert_array_equal(demap_symbols(map_bits(bits, a), a), bits)


class TestSpectralEfficiency:
    def test_sm_8qam(self):
        assert spectral_efficiency(SchemeConfig("sm", n_t=2, alphabet="qam8")) == 4

    def test_pim_4bpcu(self):
        assert spectral_efficiency(SchemeConfig("pim", p=5, n_p=4, alphabet="qam4")) == 4

    def test_pim_sm_4bpcu(self):
        assert spectral_efficiency(SchemeConfig("pim-sm", p=5, n_t=4, n_p=2, alphabet="bpsk")) == 4

    def test_block_bits(self):
        assert SchemeConfig("pim", p=5, n_p=4, alphabet="qam4").bits_per_block == 20


class TestConfigValidation:
    @pytest.mark.parametrize("kw", [
        dict(scheme="sm", n_t=3),
        dict(scheme="pim", p=2, n_p=3),
        dict(scheme="prpp", p=0),
        dict(scheme="sm", n_t=2, p=2),
        dict(scheme="prpp", p=2, n_t=2),
        dict(scheme="sm", n_t=2, n_p=2),
        dict(scheme="pim", p=2, n_p=2, identity_precoder=True),
        dict(scheme="ofdm"),
    ])
    def test_rejected(self, kw):
        with pytest.raises(ValueError):
            SchemeConfig(**kw)

    def test_hashable_and_normalised(self):
        a = SchemeConfig("pim", p=2, n_p=2, alphabet="4-QAM")
        b = SchemeConfig(Scheme.PIM, p=2, n_p=2, alphabet="qam4")
        assert a == b and hash(a) == hash(b)
        assert a.n_rf == 1
