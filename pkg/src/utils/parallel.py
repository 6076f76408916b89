"""
并行映射工具
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1, desc: str = "", progress: bool = False) -> List[R]:
    """按输入顺序返回结果，与线程数无关"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        iterator = tqdm(items, desc=desc, disable=not progress)
        return [func(item) for item in iterator]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = pool.map(func, items)
        return list(tqdm(results, total=len(items), desc=desc, disable=not progress))
