"""
シード導出と並列実行（スレッド数に依存しない結果）の単体テスト
"""
import numpy as np
import pytest

from seeding import Seed, chunked, derive_seed, mix_keys, resolve_threads, run_units


def test_mix_keys_は決定的():
    assert mix_keys("zk", 1, 2) == mix_keys("zk", 1, 2)
    assert mix_keys("zk", 1, 2) != mix_keys("zk", 2, 1)
    # 文字列 "1" と整数 1 は区別する
    assert mix_keys("1") != mix_keys(1)
    assert 0 <= mix_keys("a") < 2 ** 64


def test_Seed_は64bitに丸める():
    s = Seed(-1)
    assert s.root == 2 ** 64 - 1
    assert Seed(5).stream == 0


def test_derive():
    root = Seed(20240501)
    a = root.derive("zk_scaling", 0, 1)
    assert a == root.derive("zk_scaling", 0, 1)
    assert a != root.derive("zk_scaling", 1, 0)
    assert a.root == root.root
    assert derive_seed(20240501, "zk_scaling", 0, 1) == a


def test_実数キーは切り捨てない():
    """H=0.7 と H=0.8 のように整数部が同じ実数キーでも別のストリームになる"""
    assert Seed(1).derive("x", 1, 0.8) != Seed(1).derive("x", 1, 0.7)
    assert mix_keys(0.8) != mix_keys(0.7)
    assert mix_keys(0.8) != mix_keys(0)
    # numpy の数値型も Python の数値と同じキーになる
    assert mix_keys(np.float64(0.8)) == mix_keys(0.8)
    assert mix_keys(np.int64(3)) == mix_keys(3)
    # 整数 1 と実数 1.0 は区別する
    assert mix_keys(1) != mix_keys(1.0)


def test_使えないキー():
    with pytest.raises(TypeError):
        mix_keys(object())


def test_generator_の再現性と独立性():
    s = Seed(7).derive("x", 3)
    np.testing.assert_array_equal(s.generator().standard_normal(5), s.generator().standard_normal(5))
    other = Seed(7).derive("x", 4).generator().standard_normal(5)
    assert not np.allclose(s.generator().standard_normal(5), other)


def test_resolve_threads():
    assert resolve_threads(1) == 1
    assert resolve_threads("3") == 3
    assert resolve_threads("auto") >= 1
    assert resolve_threads(None) >= 1
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_run_units_は順序を保つ():
    def fn(i):
        return Seed(1).derive("unit", i).generator().standard_normal()

    serial = run_units(fn, range(40), 1)
    parallel = run_units(fn, range(40), 4)
    assert serial == parallel
    assert run_units(fn, [], 4) == []


@pytest.mark.parametrize("n, size, expected", [
    (5, 2, [[0, 1], [2, 3], [4]]),
    (4, 2, [[0, 1], [2, 3]]),
    (0, 3, []),
    (2, 5, [[0, 1]]),
])
def test_chunked(n, size, expected):
    assert chunked(range(n), size) == expected
