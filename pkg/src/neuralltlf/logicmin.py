"""Two-level minimisation: Quine-McCluskey primes + exact/greedy covering.

Minterms are integers, bit i = variable i. A cube is ``(value, care)``:
variable i is fixed to bit i of ``value`` when bit i of ``care`` is set and
free otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

MAX_VARS = 24
EXACT_PRIME_LIMIT = 16

Cube = tuple[int, int]


@dataclass(frozen=True)
class Cover:
    cubes: tuple[Cube, ...]
    n: int

    def __len__(self):
        return len(self.cubes)

    def covers(self, minterm: int) -> bool:
        return any((minterm & care) == value for value, care in self.cubes)

    def literal_count(self) -> int:
        return sum(bin(care).count("1") for _, care in self.cubes)

    def cube_strings(self) -> list[str]:
        return [cube_string(c, self.n) for c in self.cubes]

    def to_pla(self) -> str:
        lines = [f".i {self.n}", ".o 1", f".p {len(self.cubes)}"]
        lines += [f"{s} 1" for s in self.cube_strings()]
        lines.append(".e")
        return "\n".join(lines)


def cube_string(cube: Cube, n: int) -> str:
    """Variable 0 first; '-' for a free variable."""
    value, care = cube
    return "".join(
        "-" if not (care >> i) & 1 else str((value >> i) & 1) for i in range(n)
    )


def parse_cube(text: str) -> Cube:
    value = care = 0
    for i, ch in enumerate(text):
        if ch != "-":
            care |= 1 << i
            value |= int(ch) << i
    return value, care


def _cube_minterms(cube: Cube, n: int) -> list[int]:
    value, care = cube
    free = [i for i in range(n) if not (care >> i) & 1]
    out = []
    for k in range(1 << len(free)):
        m = value
        for j, i in enumerate(free):
            if (k >> j) & 1:
                m |= 1 << i
        out.append(m)
    return out


def prime_implicants(minterms: Iterable[int], n: int) -> list[Cube]:
    full = (1 << n) - 1
    current = {(m, full) for m in minterms}
    primes: set[Cube] = set()
    while current:
        merged = set()
        used = set()
        by_care: dict[int, list[int]] = {}
        for value, care in current:
            by_care.setdefault(care, []).append(value)
        for care, values in by_care.items():
            vs = set(values)
            for v in values:
                for i in range(n):
                    bit = 1 << i
                    if care & bit and not v & bit and (v | bit) in vs:
                        merged.add((v, care & ~bit))
                        used.add((v, care))
                        used.add((v | bit, care))
        primes.update(current - used)
        current = merged
    return sorted(primes, key=lambda c: (cube_string(c, n)))


def _cost(cubes) -> tuple[int, int]:
    return len(cubes), sum(bin(c).count("1") for _, c in cubes)


def _exact_cover(primes: list[Cube], cover_sets: list[frozenset], targets: frozenset) -> list[int]:
    """Minimum-cost subset of primes covering ``targets`` (branch and bound)."""
    best: list = [None, (float("inf"), float("inf"))]
    lits = [bin(c).count("1") for _, c in primes]

    def search(chosen: list[int], uncovered: frozenset, start_cost):
        if start_cost >= best[1]:
            return
        if not uncovered:
            best[0], best[1] = list(chosen), start_cost
            return
        # branch on the uncovered minterm with the fewest options
        pivot = min(uncovered, key=lambda m: (sum(1 for s in cover_sets if m in s), m))
        options = [i for i, s in enumerate(cover_sets) if pivot in s]
        options.sort(key=lambda i: (-len(cover_sets[i] & uncovered), lits[i], i))
        for i in options:
            cost = (start_cost[0] + 1, start_cost[1] + lits[i])
            search(chosen + [i], uncovered - cover_sets[i], cost)

    search([], targets, (0, 0))
    return best[0]


def _greedy_cover(primes, cover_sets, targets) -> list[int]:
    chosen = []
    uncovered = set(targets)
    while uncovered:
        i = max(range(len(primes)),
                key=lambda k: (len(cover_sets[k] & uncovered), -bin(primes[k][1]).count("1"), -k))
        chosen.append(i)
        uncovered -= cover_sets[i]
    return chosen


def minimize_cover(onset: Iterable[int], dcset: Iterable[int], n: int,
                   exact_limit: int = EXACT_PRIME_LIMIT) -> Cover:
    """Small sum-of-products cover of ``onset`` that may use ``dcset``."""
    if n > MAX_VARS:
        raise ValueError(f"{n} variables exceeds the limit of {MAX_VARS}")
    onset, dcset = set(onset), set(dcset)
    if onset & dcset:
        raise ValueError("onset and dcset overlap")
    if not onset:
        return Cover((), n)
    primes = prime_implicants(onset | dcset, n)
    cover_sets = [frozenset(m for m in _cube_minterms(p, n) if m in onset) for p in primes]

    # essential primes first
    chosen: list[int] = []
    uncovered = set(onset)
    for m in sorted(onset):
        owners = [i for i, s in enumerate(cover_sets) if m in s]
        if len(owners) == 1 and owners[0] not in chosen:
            chosen.append(owners[0])
    for i in chosen:
        uncovered -= cover_sets[i]
    rest = [i for i in range(len(primes)) if i not in chosen and cover_sets[i] & uncovered]
    # drop primes dominated by a no-more-expensive prime
    kept = []
    for i in rest:
        si = cover_sets[i] & uncovered
        dominated = False
        for j in rest:
            if j == i:
                continue
            sj = cover_sets[j] & uncovered
            li, lj = bin(primes[i][1]).count("1"), bin(primes[j][1]).count("1")
            if si <= sj and (si < sj or (lj, j) < (li, i)) and lj <= li:
                dominated = True
                break
        if not dominated:
            kept.append(i)
    sub_primes = [primes[i] for i in kept]
    sub_sets = [cover_sets[i] & uncovered for i in kept]
    if uncovered:
        if len(kept) <= exact_limit:
            picked = _exact_cover(sub_primes, sub_sets, frozenset(uncovered))
        else:
            picked = _greedy_cover(sub_primes, sub_sets, frozenset(uncovered))
        chosen += [kept[k] for k in picked]
    cubes = tuple(sorted((primes[i] for i in chosen), key=lambda c: cube_string(c, n)))
    cover = Cover(cubes, n)
    bad = verify_cover(cover, onset, dcset)
    if bad is not None:
        raise AssertionError(f"cover fails at minterm {bad}")
    return cover


def verify_cover(cover: Cover, onset: Iterable[int], dcset: Iterable[int]) -> int | None:
    """First minterm where ``cover`` disagrees with the function, else None."""
    onset, dcset = set(onset), set(dcset)
    for m in range(1 << cover.n):
        hit = cover.covers(m)
        if m in onset and not hit:
            return m
        if hit and m not in onset and m not in dcset:
            return m
    return None
