"""Modulation alphabets, joint constellations and their bit labelings.

Labels are stored as integers whose binary expansion (MSB first) is the bit
string carried by the point.  In every concatenated joint label the bits of
user 1 precede the bits of user 2.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

#: absolute tolerance used when grouping joint points into rings
CIRCLE_TOL = 1e-9

#: relative slack when collecting nearest neighbours for the remap cost
NEIGHBOR_RTOL = 1e-6

#: DVB-S2 16APSK bit-to-ring table, label -> (ring, angle in multiples of pi/12)
_APSK16_TABLE = {
    0b1100: (0, 3), 0b1110: (0, 9), 0b1111: (0, 15), 0b1101: (0, 21),
    0b0100: (1, 1), 0b0000: (1, 3), 0b1000: (1, 5), 0b1010: (1, 7),
    0b0010: (1, 9), 0b0110: (1, 11), 0b0111: (1, 13), 0b0011: (1, 15),
    0b1011: (1, 17), 0b1001: (1, 19), 0b0001: (1, 21), 0b0101: (1, 23),
}

DEFAULT_RING_RATIO = 3.15


def gray_code(nbits: int) -> np.ndarray:
    """Binary-reflected Gray sequence of length ``2**nbits``."""
    if nbits < 0:
        raise InvalidParameterError("nbits must be non-negative")
    i = np.arange(1 << nbits)
    return i ^ (i >> 1)


def _log2_int(M: int) -> int:
    if M < 1 or (M & (M - 1)) != 0:
        raise InvalidParameterError(f"cardinality {M} is not a power of two")
    return M.bit_length() - 1


def label_bits(labels: np.ndarray, nbits: int) -> np.ndarray:
    """Expand integer labels into an ``(len(labels), nbits)`` 0/1 matrix, MSB first."""
    labels = np.asarray(labels, dtype=np.int64)
    shifts = np.arange(nbits - 1, -1, -1)
    return ((labels[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_labels(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array (MSB first) into integers."""
    bits = np.asarray(bits, dtype=np.int64)
    nbits = bits.shape[-1]
    weights = 1 << np.arange(nbits - 1, -1, -1)
    return bits @ weights


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-energy labeled alphabet.

    Parameters
    ----------
    points : ndarray of complex, shape (M,)
    labels : ndarray of int, shape (M,)
        ``labels[k]`` is the bit pattern carried by ``points[k]``.
    name : str
    """

    points: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        labs = np.asarray(self.labels, dtype=np.int64).ravel()
        M = pts.size
        _log2_int(M)
        if labs.size != M:
            raise InvalidParameterError("points and labels differ in length")
        if not np.array_equal(np.sort(labs), np.arange(M)):
            raise InvalidParameterError("labels must enumerate all log2(M)-bit strings")
        energy = np.mean(np.abs(pts) ** 2)
        if abs(energy - 1.0) > 1e-12:
            raise InvalidParameterError(f"average energy {energy} is not 1")
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "labels", _readonly(labs))

    @property
    def M(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return _log2_int(self.M)

    @property
    def bit_matrix(self) -> np.ndarray:
        return label_bits(self.labels, self.bits_per_symbol)

    @property
    def index_of_label(self) -> np.ndarray:
        inv = np.empty(self.M, dtype=np.int64)
        inv[self.labels] = np.arange(self.M)
        return inv

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        """Symbol indices for rows of ``bits`` (last axis of length log2 M)."""
        return self.index_of_label[bits_to_labels(bits)]

    def relabeled(self, labels: np.ndarray, name: str | None = None) -> "Constellation":
        return Constellation(self.points, labels, self.name if name is None else name)


@dataclass(frozen=True, eq=False)
class JointConstellation:
    """Superposition ``x1 + gamma2 * x2`` of two alphabets.

    ``index1[h]`` and ``index2[h]`` identify the component symbols of joint
    point ``h``; ``labels[h]`` holds ``bits1 + bits2`` label bits with user-1
    bits first.
    """

    points: np.ndarray
    labels: np.ndarray
    gamma2: complex
    circle_index: np.ndarray
    index1: np.ndarray
    index2: np.ndarray
    bits1: int
    bits2: int
    name: str = ""
    _lookup: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for attr in ("points", "labels", "circle_index", "index1", "index2"):
            object.__setattr__(self, attr, _readonly(getattr(self, attr)))
        H = self.points.size
        if not np.array_equal(np.sort(self.labels), np.arange(H)):
            raise InvalidParameterError("joint labels must be a permutation")
        inv = np.empty(H, dtype=np.int64)
        inv[self.labels] = np.arange(H)
        object.__setattr__(self, "_lookup", _readonly(inv))

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def nbits(self) -> int:
        return self.bits1 + self.bits2

    @property
    def n_circles(self) -> int:
        return int(self.circle_index.max()) + 1

    @property
    def bit_matrix(self) -> np.ndarray:
        return label_bits(self.labels, self.nbits)

    @property
    def index_of_label(self) -> np.ndarray:
        return self._lookup

    def pair_of_bits(self, bits1: np.ndarray, bits2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Component symbol indices carrying user bit groups ``bits1``/``bits2``."""
        lab = (bits_to_labels(bits1) << self.bits2) | bits_to_labels(bits2)
        h = self._lookup[lab]
        return self.index1[h], self.index2[h]

    def with_gain(self, gamma2: complex, c1: Constellation, c2: Constellation) -> "JointConstellation":
        """Same pair-to-label map evaluated at another interference gain."""
        pts = c1.points[self.index1] + gamma2 * c2.points[self.index2]
        return JointConstellation(
            points=pts,
            labels=self.labels,
            gamma2=complex(gamma2),
            circle_index=_circle_index(pts),
            index1=self.index1,
            index2=self.index2,
            bits1=self.bits1,
            bits2=self.bits2,
            name=self.name,
        )


def make_psk(M: int, phase_offset: float = 0.0) -> Constellation:
    """M-PSK with Gray labels assigned in counter-clockwise angular order.

    Examples
    --------
    >>> c = make_psk(4)
    >>> [format(int(l), "02b") for l in c.labels]
    ['00', '01', '11', '10']
    """
    nbits = _log2_int(M)
    if M < 2:
        raise InvalidParameterError("PSK needs at least two points")
    if not np.isfinite(phase_offset):
        raise InvalidParameterError("phase offset must be finite")
    k = np.arange(M)
    pts = np.exp(1j * (2 * np.pi * k / M + phase_offset))
    return Constellation(pts, gray_code(nbits), name=f"{M}psk")


def apsk16_radii(ring_ratio: float) -> tuple[float, float]:
    """Inner and outer radius of a unit-energy 4+12 APSK."""
    r1 = np.sqrt(16.0 / (4.0 + 12.0 * ring_ratio**2))
    return float(r1), float(ring_ratio * r1)


def make_16apsk(ring_ratio: float = DEFAULT_RING_RATIO) -> Constellation:
    """4+12 APSK with the DVB-S2 labeling table.

    Inner points sit at ``pi/4 + k pi/2``, outer points at ``pi/12 + k pi/6``.
    """
    if not ring_ratio > 1:
        raise InvalidParameterError("ring_ratio must exceed 1")
    r = apsk16_radii(ring_ratio)
    labels = np.array(sorted(_APSK16_TABLE))
    pts = np.array([r[_APSK16_TABLE[l][0]] * np.exp(1j * np.pi * _APSK16_TABLE[l][1] / 12) for l in labels])
    return Constellation(pts, labels, name="16apsk")


def make_constellation(name: str) -> Constellation:
    """Look up an alphabet by short name (``bpsk``, ``qpsk``, ``8psk``, ``16apsk``)."""
    key = name.lower()
    table = {"bpsk": 2, "qpsk": 4, "4psk": 4, "8psk": 8, "16psk": 16}
    if key in table:
        return make_psk(table[key])
    if key == "16apsk":
        return make_16apsk()
    raise InvalidParameterError(f"unknown modulation {name!r}")


def _circle_index(points: np.ndarray, tol: float = CIRCLE_TOL) -> np.ndarray:
    mod = np.abs(points)
    order = np.argsort(mod, kind="stable")
    idx = np.empty(points.size, dtype=np.int64)
    ring = 0
    prev = mod[order[0]]
    for h in order:
        if mod[h] - prev > tol:
            ring += 1
        prev = mod[h]
        idx[h] = ring
    return idx


def joint_constellation(c1: Constellation, c2: Constellation, gamma2: complex) -> JointConstellation:
    """All ``M1*M2`` superpositions ``x1 + gamma2 x2`` with concatenated labels.

    Joint point ``h = i1 * M2 + i2``.
    """
    i1, i2 = np.meshgrid(np.arange(c1.M), np.arange(c2.M), indexing="ij")
    i1 = i1.ravel()
    i2 = i2.ravel()
    pts = c1.points[i1] + gamma2 * c2.points[i2]
    labels = (c1.labels[i1] << c2.bits_per_symbol) | c2.labels[i2]
    return JointConstellation(
        points=pts,
        labels=labels,
        gamma2=complex(gamma2),
        circle_index=_circle_index(pts),
        index1=i1,
        index2=i2,
        bits1=c1.bits_per_symbol,
        bits2=c2.bits_per_symbol,
        name=f"{c1.name}+{c2.name}",
    )


def angular_slots(joint: JointConstellation, n_slots: int, ref_angle: float) -> np.ndarray:
    """Angular position index of each joint point on a lattice of ``n_slots`` angles."""
    step = 2 * np.pi / n_slots
    raw = (np.angle(joint.points) - ref_angle) / step
    slots = np.rint(raw).astype(np.int64) % n_slots
    if np.max(np.abs(raw - np.rint(raw))) > 1e-6:
        raise InvalidParameterError("points do not lie on the angular lattice")
    return slots


def joint_gray_mapping(M: int) -> JointConstellation:
    """Joint labeling of two M-PSK signals offset by ``pi/M`` at unit gain.

    The joint alphabet has ``M/2`` rings of ``2M`` equally spaced points.
    The first ``log2(M/2)`` label bits Gray-code the ring (ordered by
    modulus), the remaining ``log2(2M)`` bits Gray-code the angular slot, so
    neighbours along a ring and between adjacent rings differ in one bit.
    """
    nbits = _log2_int(M)
    if M < 2:
        raise InvalidParameterError("joint mapping needs M >= 2")
    c = make_psk(M)
    joint = joint_constellation(c, c, np.exp(1j * np.pi / M))
    n_slots = 2 * M
    slot_bits = nbits + 1
    slots = angular_slots(joint, n_slots, np.pi / (2 * M))
    rings = joint.circle_index
    if joint.n_circles != max(M // 2, 1):
        raise InvalidParameterError("unexpected ring structure")
    g_ring = gray_code(max(nbits - 1, 0))
    g_slot = gray_code(slot_bits)
    labels = (g_ring[rings] << slot_bits) | g_slot[slots]
    return JointConstellation(
        points=joint.points,
        labels=labels,
        gamma2=joint.gamma2,
        circle_index=rings,
        index1=joint.index1,
        index2=joint.index2,
        bits1=nbits,
        bits2=nbits,
        name=f"joint-gray-{M}psk",
    )


def neighbor_pairs(points: np.ndarray, rtol: float = NEIGHBOR_RTOL) -> np.ndarray:
    """Unordered pairs ``(p, q)`` where ``q`` is a nearest neighbour of ``p``.

    Every point contributes the pairs to all points within ``(1 + rtol)``
    times its own nearest-neighbour distance; the union is symmetrised.
    """
    d = np.abs(points[:, None] - points[None, :])
    np.fill_diagonal(d, np.inf)
    dmin = d.min(axis=1, keepdims=True)
    near = d <= dmin * (1 + rtol)
    near = near | near.T
    p, q = np.nonzero(np.triu(near, k=1))
    return np.stack([p, q], axis=1)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


def remap_cost(user1_labels: np.ndarray, joint: JointConstellation, pairs: np.ndarray | None = None) -> int:
    """Sum of user-1 label Hamming distances over nearest-neighbour pairs.

    ``user1_labels`` is either a length-``M1`` array (one labeling of
    user 1) or an ``(M2, M1)`` table giving the user-1 label of symbol ``i1``
    when user 2 sends symbol ``i2``.
    """
    if pairs is None:
        pairs = neighbor_pairs(joint.points)
    table = np.asarray(user1_labels)
    if table.ndim == 1:
        table = np.broadcast_to(table, (int(joint.index2.max()) + 1, table.size))
    p, q = pairs[:, 0], pairs[:, 1]
    a = table[joint.index2[p], joint.index1[p]]
    b = table[joint.index2[q], joint.index1[q]]
    return int(_popcount(a ^ b).sum())


def _greedy_remap(table: np.ndarray, joint: JointConstellation, pairs: np.ndarray) -> np.ndarray:
    """Multi-start block-coordinate descent.

    Starts from the given table and from every table that applies one common
    user-1 permutation to all groups (up to 24 starts), descends from each
    and keeps the cheapest result; ties go to the earliest start.
    """
    M2, M1 = table.shape
    starts = [table]
    if M1 <= 4:
        for perm in itertools.permutations(range(M1)):
            starts.append(table[:, list(perm)])
    best, best_cost = None, None
    for start in starts:
        cand = _descend(start, joint, pairs)
        c = remap_cost(cand, joint, pairs)
        if best_cost is None or c < best_cost:
            best, best_cost = cand, c
    return best


def _descend(table: np.ndarray, joint: JointConstellation, pairs: np.ndarray) -> np.ndarray:
    """Block-coordinate descent over user-2 groups.

    A move replaces the user-1 permutations of a block of user-2 groups by
    the best combination, holding the other groups fixed.  Blocks are pairs
    of groups while ``(M1!)**2`` stays small, single groups otherwise; within
    a group all ``M1!`` permutations are tried for ``M1 <= 8`` and pairwise
    swaps beyond.  Sweeps repeat until a full pass brings no strict
    improvement.
    """
    table = table.copy()
    M2, M1 = table.shape
    p, q = pairs[:, 0], pairs[:, 1]
    if M1 <= 8:
        moves = np.array(list(itertools.permutations(range(M1))), dtype=np.int64)
    else:
        moves = [np.arange(M1)]
        for a, b in itertools.combinations(range(M1), 2):
            perm = np.arange(M1)
            perm[a], perm[b] = b, a
            moves.append(perm)
        moves = np.array(moves)
    block = 2 if M2 >= 2 and len(moves) ** 2 <= 50_000 else 1
    blocks = list(itertools.combinations(range(M2), block))
    choice = np.array(list(itertools.product(range(len(moves)), repeat=block)), dtype=np.int64)
    cost = remap_cost(table, joint, pairs)
    improved = True
    while improved:
        improved = False
        for groups in blocks:
            lab = np.broadcast_to(table, (len(choice), M2, M1)).copy()
            for slot, i2 in enumerate(groups):
                lab[:, i2, :] = table[i2][moves[choice[:, slot]]]
            a = lab[:, joint.index2[p], joint.index1[p]]
            b = lab[:, joint.index2[q], joint.index1[q]]
            costs = _popcount(a ^ b).sum(axis=1)
            k = int(np.argmin(costs))
            if costs[k] < cost:
                table, cost, improved = lab[k], int(costs[k]), True
    return table


def _exhaustive_remap(table: np.ndarray, joint: JointConstellation, pairs: np.ndarray) -> np.ndarray:
    M2, M1 = table.shape
    perms = np.array(list(itertools.permutations(range(M1))), dtype=np.int64)
    n_perm = len(perms)
    p, q = pairs[:, 0], pairs[:, 1]
    best_cost, best_table = None, table
    # one permutation per user-2 symbol; stream over the first factor
    rest = np.array(list(itertools.product(range(n_perm), repeat=M2 - 1)), dtype=np.int64).reshape(-1, M2 - 1)
    for first in range(n_perm):
        combos = np.concatenate([np.full((len(rest), 1), first), rest], axis=1)
        lab = np.empty((len(combos), M2, M1), dtype=np.int64)
        for i2 in range(M2):
            lab[:, i2, :] = table[i2][perms[combos[:, i2]]]
        a = lab[:, joint.index2[p], joint.index1[p]]
        b = lab[:, joint.index2[q], joint.index1[q]]
        costs = _popcount(a ^ b).sum(axis=1)
        k = int(np.argmin(costs))
        if best_cost is None or costs[k] < best_cost:
            best_cost, best_table = int(costs[k]), lab[k]
    return best_table


#: largest search space (``(M1!)**M2`` labelings) handled exhaustively
EXHAUSTIVE_LIMIT = 2_000_000


def strategy1_remap(
    c1: Constellation, c2: Constellation, gamma2: complex, method: str = "auto"
) -> JointConstellation:
    """Relabel user-1 bits on the joint alphabet, leaving user-2 bits intact.

    The transmitter of both signals knows both bit streams, so the user-1
    labeling may depend on the user-2 symbol sent in the same slot: for each
    ``x2`` the user-1 bits are a bijection onto the ``M1`` symbols, which keeps
    signal 1 a uniform ``M1``-ary signal and leaves the user-2 labeling
    untouched.  The labeling minimises :func:`remap_cost` over
    nearest-neighbour pairs of the joint alphabet.

    ``method="auto"`` searches exhaustively when there are at most
    :data:`EXHAUSTIVE_LIMIT` candidate labelings (ties keep the classical
    labeling, then the first permutation in lexicographic order) and the
    multi-start block descent of :func:`_greedy_remap` otherwise.
    """
    if not 0.5 - 1e-12 <= abs(gamma2) <= 2.0 + 1e-12:
        raise InvalidParameterError("|gamma2| must lie in [0.5, 2] for the ring structure to matter")
    space = float(np.prod([float(k) for k in range(1, c1.M + 1)])) ** c2.M
    if method == "auto":
        method = "exhaustive" if space <= EXHAUSTIVE_LIMIT else "greedy"
    joint = joint_constellation(c1, c2, gamma2)
    pairs = neighbor_pairs(joint.points)
    start = np.tile(c1.labels, (c2.M, 1))
    if method == "exhaustive":
        table = _exhaustive_remap(start, joint, pairs)
    elif method == "greedy":
        table = _greedy_remap(start, joint, pairs)
    else:
        raise InvalidParameterError(f"unknown search method {method!r}")
    user1 = table[joint.index2, joint.index1]
    labels = (user1 << c2.bits_per_symbol) | c2.labels[joint.index2]
    return JointConstellation(
        points=joint.points,
        labels=labels,
        gamma2=joint.gamma2,
        circle_index=joint.circle_index,
        index1=joint.index1,
        index2=joint.index2,
        bits1=joint.bits1,
        bits2=joint.bits2,
        name=f"{c1.name}-remap+{c2.name}",
    )


def user1_label_table(joint: JointConstellation) -> np.ndarray:
    """``(M2, M1)`` table of user-1 labels recovered from a joint labeling."""
    M1 = int(joint.index1.max()) + 1
    M2 = int(joint.index2.max()) + 1
    table = np.empty((M2, M1), dtype=np.int64)
    table[joint.index2, joint.index1] = joint.labels >> joint.bits2
    return table


def constellation_rows(c: Constellation | JointConstellation) -> list[tuple[int, float, float, str]]:
    nbits = c.bits_per_symbol if isinstance(c, Constellation) else c.nbits
    return [
        (k, float(p.real), float(p.imag), format(int(l), f"0{nbits}b"))
        for k, (p, l) in enumerate(zip(c.points, c.labels))
    ]


def constellation_csv(c: Constellation | JointConstellation) -> str:
    """CSV text with columns ``index,re,im,label``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "re", "im", "label"])
    for row in constellation_rows(c):
        w.writerow([row[0], repr(row[1]), repr(row[2]), row[3]])
    return buf.getvalue()
