import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import activation, block_diag, dense_signal
from pimsim.channel import apply_channel, draw_channel
from pimsim.modem import SchemeConfig, bits_to_int
from pimsim.numerics import SplitMix64
from pimsim.schemes import (
    ActivationPattern,
    bits_from_pattern,
    build_materials,
    build_precoder_set,
    build_prpp,
    encode,
    enumerate_hypotheses,
    expand_activation,
    hypothesis_bits,
    hypothesis_count,
    hypothesis_rank,
    pattern_from_bits,
    pattern_of_precoder,
    select_precoder,
    transmit_signal,
)

CONFIGS = [
    SchemeConfig("prpp", p=3, alphabet="qam4", seed=1),
    SchemeConfig("sm", n_t=4, alphabet="qam4"),
    SchemeConfig("prpp-sm", p=3, n_t=2, alphabet="bpsk", seed=2),
    SchemeConfig("pim", p=3, n_p=4, alphabet="qam4", seed=3),
    SchemeConfig("pim-sm", p=3, n_t=4, n_p=2, alphabet="bpsk", seed=4),
    SchemeConfig("pim-sm", p=2, n_t=2, n_p=2, n_r=2, alphabet="qam8", seed=5),
]


class TestPhasePrecoder:
    def test_scalar(self):
        assert abs(build_prpp(1, 1, 9).matrix[0, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_square_energy_and_rows(self):
        q = build_prpp(4, 4, 11).matrix
        assert np.linalg.norm(q) ** 2 == pytest.approx(4.0, abs=1e-10)
        np.testing.assert_allclose(np.abs(q), 0.5, atol=1e-12)
        np.testing.assert_allclose(np.sum(np.abs(q) ** 2, axis=1), 1.0, atol=1e-10)

    def test_deterministic(self):
        assert build_prpp(5, 20, 3) == build_prpp(5, 20, 3)
        assert not np.array_equal(build_prpp(5, 20, 3).matrix, build_prpp(5, 20, 4).matrix)

    def test_row_major_fill(self):
        theta = SplitMix64(8).phases(6)
        m = build_prpp(2, 3, 8).matrix
        np.testing.assert_allclose(np.angle(m[0, 1]) % (2 * np.pi), theta[1], atol=1e-12)
        np.testing.assert_allclose(np.angle(m[1, 0]) % (2 * np.pi), theta[3], atol=1e-12)

    @settings(max_examples=20)
    @given(seed=st.integers(0, 2 ** 64 - 1), p=st.integers(1, 6))
    def test_frobenius_preserved(self, seed, p):
        rng = SplitMix64(seed)
        d = np.diag(rng.gaussian(p))
        g = d @ build_prpp(p, p, seed).matrix
        assert np.linalg.norm(g) == pytest.approx(np.linalg.norm(d), rel=1e-10)


class TestActivation:
    def test_example_matrix(self):
        pat = ActivationPattern(2, (0, 1, 0))
        expected = np.array([[1, 0, 0], [0, 0, 0], [0, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0]])
        np.testing.assert_array_equal(expand_activation(pat), expected)
        assert tuple(s + 1 for s in pat.support) == (1, 4, 5)

    def test_single_antenna_is_identity(self):
        np.testing.assert_array_equal(expand_activation(ActivationPattern(1, (0, 0, 0, 0))), np.eye(4))

    @given(fan=st.sampled_from([1, 2, 4, 8]), data=st.data())
    def test_orthonormal_columns(self, fan, data):
        idx = data.draw(st.lists(st.integers(0, fan - 1), min_size=1, max_size=6))
        a = expand_activation(ActivationPattern(fan, idx))
        np.testing.assert_array_equal(a.T @ a, np.eye(len(idx)))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            ActivationPattern(2, (0, 2))

    def test_bits_to_pattern(self):
        assert pattern_from_bits([0, 1, 0], 3, 2).indices == (0, 1, 0)
        assert bits_from_pattern(ActivationPattern(1, (0, 0))).size == 0
        with pytest.raises(ValueError):
            pattern_from_bits([0, 1], 3, 2)

    @given(fan=st.sampled_from([1, 2, 4, 8]), p=st.integers(1, 6), data=st.data())
    def test_bits_round_trip(self, fan, p, data):
        width = fan.bit_length() - 1
        bits = data.draw(st.lists(st.integers(0, 1), min_size=p * width, max_size=p * width))
        np.testing.assert_array_equal(bits_from_pattern(pattern_from_bits(bits, p, fan)), bits)


class TestPrecoderSet:
    def test_listing_of_two_by_two_example(self):
        pset = build_precoder_set(2, 2, 21)
        q = pset.q.matrix
        assert pset.size == 4
        expected = [q[:, [0, 2]], q[:, [0, 3]], q[:, [1, 2]], q[:, [1, 3]]]
        for j, m in enumerate(expected):
            np.testing.assert_array_equal(select_precoder(pset, j), m)

    def test_single_member(self):
        pset = build_precoder_set(3, 1, 5)
        assert pset.size == 1
        np.testing.assert_array_equal(pset.member(0), pset.q.matrix)

    def test_entry_magnitude(self):
        pset = build_precoder_set(3, 4, 6)
        np.testing.assert_allclose(np.abs(pset.all_members()), 1 / np.sqrt(3), atol=1e-12)

    def test_zero_index_takes_first_columns(self):
        pset = build_precoder_set(3, 4, 6)
        np.testing.assert_array_equal(pset.member(0), pset.q.matrix[:, [0, 4, 8]])

    @pytest.mark.parametrize("p,n_p", [(1, 2), (2, 2), (2, 4), (3, 2), (3, 4)])
    def test_member_equals_q_times_activation(self, p, n_p):
        pset = build_precoder_set(p, n_p, 17)
        for j, member in enumerate(pset.all_members()):
            qb = pset.q.matrix @ expand_activation(pattern_of_precoder(pset, j))
            np.testing.assert_allclose(select_precoder(pset, j), qb, atol=1e-15)
            np.testing.assert_array_equal(member, select_precoder(pset, j))

    def test_errors(self):
        pset = build_precoder_set(2, 2, 1)
        with pytest.raises(ValueError):
            pset.member(4)
        with pytest.raises(ValueError):
            build_precoder_set(2, 3, 1)
        with pytest.raises(OverflowError):
            build_precoder_set(40, 4, 1)


class TestEncode:
    def test_prpp_only_symbols(self):
        cfg = SchemeConfig("prpp", p=2, alphabet="qam4")
        hyp = encode(cfg, [1, 0, 0, 1])
        assert hyp.symbols == (2, 1)
        assert hyp.antenna_pattern is None and hyp.precoder_index is None

    def test_pim_split(self):
        cfg = SchemeConfig("pim", p=5, n_p=4, alphabet="qam4")
        bits = [1] * 10 + [0] * 10
        hyp = encode(cfg, bits)
        assert hyp.precoder_index == 2 ** 10 - 1
        assert hyp.symbols == (0,) * 5

    def test_field_order(self):
        cfg = SchemeConfig("pim-sm", p=2, n_t=2, n_p=2, alphabet="bpsk")
        hyp = encode(cfg, [1, 0, 0, 1, 1, 1])
        assert hyp.precoder_index == 2
        assert hyp.antenna_pattern.indices == (0, 1)
        assert hyp.symbols == (1, 1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            encode(SchemeConfig("sm", n_t=2), [0])

    @pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: c.label())
    def test_round_trip_and_rank(self, cfg):
        rng = SplitMix64(99)
        for _ in range(10 ** 4 // len(CONFIGS)):
            bits = rng.bits(cfg.bits_per_block)
            hyp = encode(cfg, bits)
            np.testing.assert_array_equal(hypothesis_bits(cfg, hyp), bits)
            assert hypothesis_rank(cfg, hyp) == bits_to_int(bits)

    @pytest.mark.parametrize("cfg,count", [
        (SchemeConfig("sm", n_t=4, alphabet="qam4"), 16),
        (SchemeConfig("prpp", p=3, alphabet="qam4"), 64),
        (SchemeConfig("prpp-sm", p=2, n_t=4, alphabet="bpsk"), 64),
        (SchemeConfig("pim", p=2, n_p=4, alphabet="qam4"), 256),
        (SchemeConfig("pim-sm", p=2, n_t=2, n_p=4, alphabet="bpsk"), 256),
    ])
    def test_enumeration_cardinality(self, cfg, count):
        hyps = list(enumerate_hypotheses(cfg))
        assert len(hyps) == hypothesis_count(cfg) == count
        assert [hypothesis_rank(cfg, h) for h in hyps] == list(range(count))


class TestTransmit:
    def test_identity_prpp_sends_symbols(self):
        cfg = SchemeConfig("prpp", p=3, alphabet="qam4", identity_precoder=True)
        hyp = encode(cfg, [0, 1, 1, 0, 1, 1])
        ant, amp = transmit_signal(cfg, hyp)
        np.testing.assert_array_equal(ant, 0)
        np.testing.assert_array_equal(amp, cfg.modulation.points[[1, 2, 3]])

    def test_missing_materials(self):
        from pimsim.schemes import Materials
        cfg = SchemeConfig("pim", p=2, n_p=2)
        with pytest.raises(ValueError):
            transmit_signal(cfg, encode(cfg, [0, 0, 0, 0]), Materials())

    @pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: c.label())
    def test_matches_dense_system_model(self, cfg):
        rng = SplitMix64(7)
        mats = build_materials(cfg)
        prpp = mats.prpp.matrix if mats.prpp is not None else None
        q = mats.pset.q.matrix if mats.pset is not None else None
        for _ in range(50):
            bits = rng.bits(cfg.bits_per_block)
            hyp = encode(cfg, bits)
            real = draw_channel(rng, cfg.p, cfg.n_t, cfg.n_r)
            y = apply_channel(real, *transmit_signal(cfg, hyp, mats))
            jd = pattern_of_precoder(mats.pset, hyp.precoder_index).indices if q is not None else ()
            ant = hyp.antenna_pattern.indices if hyp.antenna_pattern else (0,) * cfg.p
            expected = dense_signal(cfg, real.blocks, prpp, q, jd, ant, hyp.symbols)
            np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_pim_signal_equals_qbx(self):
        cfg = SchemeConfig("pim", p=3, n_p=4, alphabet="qam4", seed=2)
        mats = build_materials(cfg)
        for hyp in list(enumerate_hypotheses(cfg))[::37]:
            _, amp = transmit_signal(cfg, hyp, mats)
            b = activation(pattern_of_precoder(mats.pset, hyp.precoder_index).indices, 4)
            x = cfg.modulation.points[list(hyp.symbols)]
            np.testing.assert_allclose(amp, mats.pset.q.matrix @ b @ x, atol=1e-12)

    @pytest.mark.parametrize("cfg", [
        SchemeConfig("prpp", p=5, alphabet="qam8"),
        SchemeConfig("prpp-sm", p=5, n_t=4),
        SchemeConfig("pim", p=5, n_p=4, alphabet="qam4"),
        SchemeConfig("pim-sm", p=5, n_t=4, n_p=2),
        SchemeConfig("sm", n_t=4, alphabet="qam4"),
    ], ids=lambda c: c.label())
    def test_average_energy_per_use(self, cfg):
        rng = SplitMix64(123)
        n = 10 ** 5 // cfg.p
        energy = 0.0
        for _ in range(n):
            _, amp = transmit_signal(cfg, encode(cfg, rng.bits(cfg.bits_per_block)))
            energy += np.sum(np.abs(amp) ** 2)
        assert energy / (n * cfg.p) == pytest.approx(1.0, rel=0.02)

    def test_block_diag_oracle_shape(self):
        blocks = np.ones((3, 2, 4))
        assert block_diag(blocks).shape == (6, 12)
