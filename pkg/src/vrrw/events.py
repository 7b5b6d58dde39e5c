"""Events as races between stopping times.

Every supported event is a conjunction of races ``T_a < T_b`` where each T is
a stopping time ``T_x(k)``. A race is won when its winner fires strictly
before its loser (a winner firing with the loser still unfired counts, per the
convention that ``{T < T'}`` lives inside ``{T < infinity}``), and lost when the
loser fires first or at the same step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

OCCURRED, REFUTED, UNDECIDED = 1, 0, 2


def ceil_threshold(value, rel=1e-9):
    """Round a real visit threshold up to an integer >= 1, forgiving float fuzz like 8.000000000000002."""
    value = float(value)
    r = round(value)
    if abs(value - r) <= rel * max(1.0, abs(value)):
        v = int(r)
    else:
        v = math.ceil(value)
    return max(1, v)


@dataclass(frozen=True)
class Race:
    clocks: tuple  # ((site, threshold), ...)
    races: tuple  # ((winner_index, loser_index), ...)

    def arrays(self):
        sites = np.array([c[0] for c in self.clocks], dtype=np.int64)
        thr = np.array([c[1] for c in self.clocks], dtype=np.int64)
        win = np.array([r[0] for r in self.races], dtype=np.int64)
        lose = np.array([r[1] for r in self.races], dtype=np.int64)
        return sites, thr, win, lose


class _RaceBuilder:
    def __init__(self):
        self.clocks = []
        self.races = []

    def clock(self, site, thr):
        item = (int(site), int(thr))
        if item not in self.clocks:
            self.clocks.append(item)
        return self.clocks.index(item)

    def race(self, winner, loser):
        self.races.append((self.clock(*winner), self.clock(*loser)))

    def build(self):
        return Race(tuple(self.clocks), tuple(self.races))


@dataclass(frozen=True)
class EventSpec:
    """A declarative event.

    kinds:
      ``E``       {T_x(m) < T_{x-1}}
      ``Eprime``  {T_x(m) < T_{x+1}}
      ``A0``      {T_{x+1}(k^gamma) < T_x(k) and T_{x+1}(k^gamma) < T_{x+2}(k^gamma_prime)}
      ``F``       {T_{x+i}(m^g_{i+1}) < T_{x+i-1}(m^g_i) for i = 1..depth}, g = ``gammas``
      ``race``    explicit clocks/races (anything else expressible as a race)
    Non-integer thresholds are rounded up.
    """

    kind: str
    x: int = 0
    m: float | None = None
    k: float | None = None
    gamma: float | None = None
    gamma_prime: float | None = None
    gammas: tuple = ()
    depth: int | None = None
    explicit: Race | None = field(default=None, compare=True)

    @classmethod
    def E(cls, x, m):
        return cls("E", x=x, m=m)

    @classmethod
    def Eprime(cls, x, m):
        return cls("Eprime", x=x, m=m)

    @classmethod
    def A0(cls, x, k, gamma, gamma_prime):
        return cls("A0", x=x, k=k, gamma=gamma, gamma_prime=gamma_prime)

    @classmethod
    def F(cls, x, m, gammas, depth=6):
        gammas = tuple(float(g) for g in gammas)
        if len(gammas) < depth + 1:
            raise ValueError(f"F with depth {depth} needs gamma_1..gamma_{depth + 1}")
        return cls("F", x=x, m=m, gammas=gammas[: depth + 1], depth=depth)

    @classmethod
    def hitting_race(cls, a, b):
        """{T_a < T_b} for two plain hitting times."""
        return cls("race", explicit=Race(((a, 1), (b, 1)), ((0, 1),)))

    @classmethod
    def from_race(cls, clocks, races):
        return cls("race", explicit=Race(tuple(map(tuple, clocks)), tuple(map(tuple, races))))

    def thresholds(self):
        """The rounded integer thresholds, recorded alongside every estimate."""
        r = self.compile()
        return {f"T_{s}": t for s, t in r.clocks}

    @property
    def label(self):
        return self.kind

    @property
    def level(self):
        """The m or k parameter, for tabular output."""
        return self.m if self.m is not None else self.k

    def compile(self):
        b = _RaceBuilder()
        x = self.x
        if self.kind == "E":
            b.race((x, ceil_threshold(self.m)), (x - 1, 1))
        elif self.kind == "Eprime":
            b.race((x, ceil_threshold(self.m)), (x + 1, 1))
        elif self.kind == "A0":
            k = float(self.k)
            top = (x + 1, ceil_threshold(k ** float(self.gamma)))
            b.race(top, (x, ceil_threshold(k)))
            b.race(top, (x + 2, ceil_threshold(k ** float(self.gamma_prime))))
        elif self.kind == "F":
            m = float(self.m)
            g = self.gammas
            for i in range(1, self.depth + 1):
                b.race((x + i, ceil_threshold(m ** g[i])), (x + i - 1, ceil_threshold(m ** g[i - 1])))
        elif self.kind == "race":
            return self.explicit
        else:
            raise ValueError(f"unknown event kind {self.kind!r}")
        return b.build()


def race_status(fired, races):
    """Status given firing steps (None for unfired) per clock."""
    status = OCCURRED
    for a, b in races:
        fa, fb = fired[a], fired[b]
        if fa is not None and (fb is None or fa < fb):
            continue
        if fb is not None:
            return REFUTED
        status = UNDECIDED
    return status


def classify_path(race, positions):
    """Status of the race along a finished prefix X_0..X_n (post-hoc scan)."""
    z = {}
    fired = [None] * len(race.clocks)
    for n, x in enumerate(positions):
        z[x] = z.get(x, 0) + 1
        for i, (s, t) in enumerate(race.clocks):
            if fired[i] is None and s == x and z[x] >= t:
                fired[i] = n
    return race_status(fired, race.races)
