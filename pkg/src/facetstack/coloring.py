"""Constructive proper edge coloring of the complete graph K_n.

Odd n: place the vertices on a regular n-gon and give each side its own
color; every diagonal is parallel to exactly one side and inherits its color.
Algebraically color(i, j) = (i + j) mod n, which assigns one parallel class
per residue.  Even n: color K_{n-1} this way; vertex v then misses exactly the
color 2v mod (n-1), which the edge to the added vertex takes.
"""

from dataclasses import dataclass
from typing import Dict, Tuple


@dataclass(frozen=True)
class EdgeColoring:
    n: int
    n_colors: int
    colors: Dict[Tuple[int, int], int]  # keyed by (min, max) vertex pair

    def color(self, i: int, j: int) -> int:
        return self.colors[(min(i, j), max(i, j))]

    def is_proper(self) -> bool:
        seen = [set() for _ in range(self.n)]
        for (i, j), c in self.colors.items():
            if c in seen[i] or c in seen[j]:
                return False
            seen[i].add(c)
            seen[j].add(c)
        return True


def edge_color_complete(n: int) -> EdgeColoring:
    """Proper edge coloring of K_n with n colors (n odd) or n - 1 (n even)."""
    if n < 2:
        raise ValueError("need at least two vertices")
    colors: Dict[Tuple[int, int], int] = {}
    if n % 2 == 1:
        m = n
        for i in range(n):
            for j in range(i + 1, n):
                colors[(i, j)] = (i + j) % m
    else:
        m = n - 1
        for i in range(m):
            for j in range(i + 1, m):
                colors[(i, j)] = (i + j) % m
        for v in range(m):
            colors[(v, m)] = (2 * v) % m
    used = len(set(colors.values()))
    return EdgeColoring(n=n, n_colors=used, colors=colors)
