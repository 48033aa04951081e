import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqreplay.environment import (Codebook, SequenceSet, StimulusSchedule, StimulusEvent,
                                   build_balanced_codebook, build_codebook, build_sequences,
                                   read_codebook, read_sequences, sample_replay_seeds,
                                   schedule_online, stimulus_matrix, write_codebook,
                                   write_sequences)
from seqreplay.errors import ConfigError


def test_codebook_pattern_size():
    cb = build_codebook(0, 128, 16, 15)
    assert len(cb) == 15
    for idx in cb.patterns.values():
        assert len(idx) == 16 and len(set(idx)) == 16
        assert list(idx) == sorted(idx) and 0 <= min(idx) and max(idx) < 128


def test_codebook_deterministic():
    assert build_codebook(5, 128, 16, 15) == build_codebook(5, 128, 16, 15)
    assert build_codebook(5, 128, 16, 15) != build_codebook(6, 128, 16, 15)


def test_codebook_k_too_large():
    with pytest.raises(ConfigError, match="k"):
        build_codebook(0, 8, 9, 1)


def test_uniform_pair_overlap_matches_hypergeometric_mean():
    n, k, pairs = 128, 16, 1000
    cb = build_codebook(1, n, k, 2 * pairs)
    ov = np.array([len(set(cb.patterns[2 * i]) & set(cb.patterns[2 * i + 1]))
                   for i in range(pairs)])
    expected = k * k / n
    # hypergeometric variance
    var = k * (k / n) * (1 - k / n) * (n - k) / (n - 1)
    assert abs(ov.mean() - expected) <= 3 * math.sqrt(var / pairs)
    assert abs(ov.mean() - 2.0) <= 3 * ov.std(ddof=1) / math.sqrt(pairs)


def test_uniform_codebook_neuron_marginals():
    cb = build_codebook(2, 32, 4, 4000)
    counts = cb.matrix().sum(axis=0)
    p = 4 / 32
    sd = math.sqrt(4000 * p * (1 - p))
    assert np.all(np.abs(counts - 4000 * p) <= 4.5 * sd)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(64, 256), st.integers(1, 16))
def test_balanced_codebook_usage_and_overlap(seed, n, m):
    k = round(n / 8)
    cb = build_balanced_codebook(seed, n, k, m)
    mat = cb.matrix()
    assert mat.shape == (m, n) and np.all(mat.sum(axis=1) == k)
    assert mat.sum(axis=0).max() <= math.ceil(m * k / n)
    shared = mat.astype(int) @ mat.T.astype(int)
    np.fill_diagonal(shared, 0)
    assert shared.max(initial=0) <= k // 5


def test_balanced_codebook_deterministic_and_infeasible():
    assert build_balanced_codebook(3, 128, 16, 15) == build_balanced_codebook(3, 128, 16, 15)
    with pytest.raises(ConfigError):
        build_balanced_codebook(0, 4, 1, 15, max_shared=0)


def test_balanced_codebook_single_pattern_is_uniform():
    # with one pattern there is no constraint: each neuron equally likely
    counts = np.zeros(16)
    for s in range(3000):
        counts[list(build_balanced_codebook(s, 16, 4, 1).patterns[0])] += 1
    p = 4 / 16
    assert np.all(np.abs(counts - 3000 * p) <= 4.5 * math.sqrt(3000 * p * (1 - p)))


def test_sequences_partition():
    cb = build_codebook(0, 128, 16, 15)
    seqs = build_sequences(1, cb, 3, 5)
    flat = [p for s in seqs for p in s]
    assert sorted(flat) == cb.ids and all(len(s) == 5 for s in seqs)


def test_sequences_length_one_all_terminal():
    cb = build_codebook(0, 128, 16, 4)
    seqs = build_sequences(0, cb, 4, 1)
    assert all(len(s) == 1 for s in seqs)


def test_sequences_deterministic_and_insufficient():
    cb = build_codebook(0, 128, 16, 15)
    assert build_sequences(2, cb, 3, 5) == build_sequences(2, cb, 3, 5)
    with pytest.raises(ConfigError):
        build_sequences(0, cb, 4, 5)
    with pytest.raises(ConfigError):
        build_sequences(0, cb, 1, 2, policy="bogus")


def test_shared_policy_has_no_repeats_within_sequence():
    cb = build_codebook(0, 64, 8, 6)
    for s in build_sequences(0, cb, 10, 6, policy="shared"):
        assert len(set(s)) == 6


def test_sequence_set_rejects_repeats():
    with pytest.raises(ConfigError):
        SequenceSet(((1, 2, 1),))


def test_schedule_example():
    seqs = SequenceSet(((0, 1),))
    sched = schedule_online(seqs, D=3, G=1, G_seq=0, repeats=1)
    assert [(e.start, e.stop - 1) for e in sched.events] == [(0, 2), (4, 6)]
    assert sched.total_steps == 7


def test_schedule_repeats_double_events():
    seqs = SequenceSet(((0, 1, 2), (3, 4, 5)))
    one = schedule_online(seqs, 5, 0, 10, 1)
    two = schedule_online(seqs, 5, 0, 10, 2)
    assert len(two) == 2 * len(one)


def test_schedule_empty():
    sched = schedule_online(SequenceSet(()), 5, 0, 10, 3)
    assert len(sched) == 0 and sched.total_steps == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=0, max_size=4), st.integers(1, 6),
       st.integers(0, 3), st.integers(0, 12), st.integers(1, 3))
def test_schedule_total_duration(lengths, D, G, G_seq, repeats):
    ids = iter(range(100))
    seqs = SequenceSet(tuple(tuple(next(ids) for _ in range(L)) for L in lengths))
    sched = schedule_online(seqs, D, G, G_seq, repeats)
    assert sched.total_steps == repeats * sum(L * D + (L - 1) * G + G_seq for L in lengths)
    for a, b in zip(sched.events, sched.events[1:]):
        assert a.stop <= b.start


def test_schedule_preconditions():
    with pytest.raises(ConfigError):
        schedule_online(SequenceSet(((0,),)), 0, 0, 0, 1)
    with pytest.raises(ConfigError):
        StimulusSchedule((StimulusEvent(0, 3, 0, 1.0), StimulusEvent(2, 3, 1, 1.0)), 10)


def test_stimulus_matrix_hits_exactly_the_pattern():
    cb = build_codebook(0, 32, 4, 3)
    sched = schedule_online(SequenceSet(((0, 1, 2),)), 2, 1, 0, 1, amplitude=3.0)
    stim = stimulus_matrix(sched, cb)
    for ev in sched.events:
        for t in range(ev.start, ev.stop):
            assert set(np.flatnonzero(stim[t])) == set(cb.patterns[ev.pattern_id])
            assert np.all(stim[t][stim[t] > 0] == 3.0)
    assert not stim[2].any()


def test_replay_seeds_single_pattern():
    assert sample_replay_seeds(SequenceSet(((7,),)), 20, 0) == [7] * 20


def test_replay_seeds_deterministic_and_empty():
    seqs = SequenceSet(((0, 1, 2), (3, 4)))
    assert sample_replay_seeds(seqs, 30, 4) == sample_replay_seeds(seqs, 30, 4)
    with pytest.raises(ConfigError):
        sample_replay_seeds(SequenceSet(()), 5, 0)


def test_replay_seeds_uniform():
    seqs = SequenceSet(tuple(tuple(range(5 * i, 5 * i + 5)) for i in range(3)))
    draws = np.array(sample_replay_seeds(seqs, 15000, 9))
    freq = np.bincount(draws, minlength=15) / 15000
    se = math.sqrt((1 / 15) * (14 / 15) / 15000)
    assert np.all(np.abs(freq - 1 / 15) <= 3 * se)


def test_text_round_trip(tmp_path):
    cb = build_balanced_codebook(4, 128, 16, 15)
    seqs = build_sequences(4, cb, 3, 5)
    write_codebook(tmp_path / "cb.tsv", cb)
    write_sequences(tmp_path / "seq.tsv", seqs)
    assert read_codebook(tmp_path / "cb.tsv").patterns == cb.patterns
    assert read_sequences(tmp_path / "seq.tsv") == seqs
    line = (tmp_path / "cb.tsv").read_text().splitlines()[1]
    assert line.split("\t")[0] == "pattern"


def test_codebook_validation():
    with pytest.raises(ConfigError):
        Codebook(8, 2, {0: (1, 1)})
    with pytest.raises(ConfigError):
        Codebook(8, 2, {0: (1, 8)})
