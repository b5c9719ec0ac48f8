"""
乱数シードの導出と並列実行。

シード規約:
  作業単位（replicate r, mode j など）ごとに seed = hash(root, suite_id, r, j) を導出し、
  Philox（カウンタベース）で独立な Generator を作る。
  結果は index 順にマージするので、スレッド数に依存せず同じ数値になる。
"""
import hashlib
import logging
import numbers
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, List, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


def _key_bytes(key: Any) -> bytes:
    if isinstance(key, str):
        return b"s" + key.encode("utf-8")
    if isinstance(key, numbers.Integral):
        return b"i" + int(key).to_bytes(8, "little", signed=False)
    if isinstance(key, numbers.Real):
        # 実数キー（H など）は切り捨てずに倍精度のビット列で区別する
        return b"f" + struct.pack("<d", float(key))
    raise TypeError(f"シードのキーに使えない型です: {type(key).__name__}")


def mix_keys(*keys: Any) -> int:
    """文字列・整数・実数の並びから 64bit の整数を決定的に作る。"""
    h = hashlib.blake2b(digest_size=8)
    for key in keys:
        h.update(_key_bytes(key))
        h.update(b"|")
    return int.from_bytes(h.digest(), "little") & _MASK64


@dataclass(frozen=True)
class Seed:
    """root: 実験全体のシード, stream: 作業単位のストリーム番号（いずれも 64bit 符号なし）。"""
    root: int
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "root", int(self.root) & _MASK64)
        object.__setattr__(self, "stream", int(self.stream) & _MASK64)

    def derive(self, *keys: Any) -> "Seed":
        """子ストリームを導出する（例: seed.derive("zk_scaling", r, j)）。"""
        return Seed(self.root, mix_keys(self.stream, *keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.root, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))


def derive_seed(root: int, suite_id: str, replicate: int, mode: int = 0) -> Seed:
    """seed = hash(root, suite_id, r, j)。"""
    return Seed(root).derive(suite_id, replicate, mode)


def resolve_threads(threads: Union[int, str, None]) -> int:
    if threads is None or threads == "auto":
        return max(1, os.cpu_count() or 1)
    n = int(threads)
    if n < 1:
        raise ValueError(f"threads は 1 以上または auto: {threads}")
    return n


def run_units(fn: Callable[[Any], Any], units: Sequence[Any], threads: Union[int, str, None] = 1) -> List[Any]:
    """
    独立な作業単位を実行し、units と同じ順序で結果を返す。
    各 unit は自分のシードを持つこと（共有 Generator を使わない）。
    """
    n = resolve_threads(threads)
    units = list(units)
    if n == 1 or len(units) <= 1:
        return [fn(u) for u in units]
    logger.debug("run_units: %d units on %d threads", len(units), n)
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, units))


def chunked(indices: Iterable[int], size: int) -> List[List[int]]:
    """index 列を size ごとのブロックに分ける（作業単位のまとめ用）。"""
    block: List[int] = []
    out: List[List[int]] = []
    for i in indices:
        block.append(i)
        if len(block) == size:
            out.append(block)
            block = []
    if block:
        out.append(block)
    return out
