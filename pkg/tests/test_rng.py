"""Named random streams: identity, independence, cross-platform stability."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metalab.rng import stream, tag_hash


def test_same_identity_gives_identical_stream():
    a = stream(7, "episode", 3).standard_normal(64)
    b = stream(7, "episode", 3).standard_normal(64)
    assert np.array_equal(a, b)


def test_fresh_generator_each_call():
    # stream() must hand out an unconsumed generator, not a shared one.
    g = stream(7, "episode", 3)
    g.standard_normal(10)
    a = g.standard_normal(5)
    b = stream(7, "episode", 3).standard_normal(5)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize(
    "left,right",
    [
        ((7, "episode", (3,)), (7, "episode", (4,))),
        ((7, "episode", (3,)), (8, "episode", (3,))),
        ((7, "episode", (3,)), (7, "init", (3,))),
        ((7, "episode", ()), (7, "episode", (0,))),
        ((7, "episode", (1, 2)), (7, "episode", (2, 1))),
    ],
)
def test_distinct_identities_differ(left, right):
    ls, lt, li = left
    rs, rt, ri = right
    a = stream(ls, lt, *li).standard_normal(32)
    b = stream(rs, rt, *ri).standard_normal(32)
    assert not np.array_equal(a, b)


@given(
    seed=st.integers(min_value=0, max_value=2**31 - 1),
    tag=st.sampled_from(["source-means", "episode", "union-data", "init", "probe"]),
    indices=st.lists(st.integers(min_value=0, max_value=10**6), max_size=3),
)
@settings(max_examples=40, deadline=None)
def test_stream_is_a_pure_function_of_its_identity(seed, tag, indices):
    a = stream(seed, tag, *indices).integers(0, 2**32, size=16)
    b = stream(seed, tag, *indices).integers(0, 2**32, size=16)
    assert np.array_equal(a, b)


def test_tag_hash_pinned_values():
    # blake2b(tag, digest_size=8), little-endian. Pinned so any change to
    # the hashing scheme is caught: it would silently reshuffle every
    # benchmark and initialization in existing runs.
    import hashlib

    for tag in ("init", "episode", "source-means"):
        expected = int.from_bytes(
            hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")
        assert tag_hash(tag) == expected
    assert tag_hash("init") == 9012581901755855035


def test_tag_hash_is_not_python_hash():
    # Python's str hash is salted per process; ours must not be.
    assert tag_hash("episode") == tag_hash("episode")
    assert tag_hash("episode") != tag_hash("Episode")


def test_indices_are_coerced_to_int():
    a = stream(5, "body", np.int64(2)).standard_normal(8)
    b = stream(5, "body", 2).standard_normal(8)
    assert np.array_equal(a, b)
