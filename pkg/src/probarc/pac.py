"""Probabilistic arc consistency (pAC).

Every round is synchronous: supports ``S`` from the current messages, beliefs
``F`` as the normalised product of supports, then new messages ``M = F / S``
(guarded at ``S == 0``), each rescaled to unit sum. The kernels evaluate the
quotient as the product of the sender's other supports, which is the same
number without the underflow. On singly-connected constraint graphs the
beliefs converge to the exact solution frequencies. Two variants share the
same machinery: ``Boolean`` (``or``/``and`` in place of ``+``/``*``, which is arc
consistency) and ``Peleg`` (each new belief also multiplies in the previous
one).

Arc ``a = (u -> v)`` carries the message from ``u`` about its own values
(length ``|D_u|``) and the support it induces on ``v`` (length ``|D_v|``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .ac3 import DomainSet
from .csp import CspInstance, CspError, NoSuchEdge


class Mode(str, enum.Enum):
    STANDARD = "standard"
    BOOLEAN = "boolean"
    PELEG = "peleg"

    @property
    def code(self) -> int:
        return {"standard": K.STANDARD, "boolean": K.BOOLEAN, "peleg": K.PELEG}[self.value]


class LengthMismatch(CspError):
    pass


class NonFiniteInput(CspError):
    pass


class NonFiniteState(ArithmeticError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite belief or message at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class PropagationConfig:
    epsilon: float = 1e-5
    max_iter: int = 1000
    mode: Mode = Mode.STANDARD
    oscillation_window: int = 10
    record_history: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        object.__setattr__(self, "mode", Mode(self.mode))


@dataclass
class PropagationResult:
    status: str  # Converged | MaxIterReached | Oscillating | Wipeout
    iterations: int
    beliefs: list[np.ndarray]
    period: int | None = None
    wiped_var: int | None = None
    residual_history: list[float] | None = None
    min_mass: float = field(default=float("nan"))

    @property
    def converged(self) -> bool:
        return self.status == "Converged"

    def label(self) -> str:
        if self.status == "Converged":
            return f"Converged({self.iterations})"
        if self.status == "Oscillating":
            return f"Oscillating({self.period})"
        return self.status


class PackedCsp:
    """Kernel layout of an instance: padded arrays, arcs sorted by (dst, src).

    ``arc_mat[a][j, i]`` is ``C(v=j, u=i)`` for ``a = (u -> v)``, zero
    outside either domain.
    """

    def __init__(self, inst: CspInstance):
        n, mmax = inst.n, max(inst.max_domain, 1)
        self.inst = inst
        self.n, self.mmax = n, mmax
        arcs = sorted([(y, x) for x, y in inst.edges] + [(x, y) for x, y in inst.edges], key=lambda a: (a[1], a[0]))
        self.arcs = arcs
        index = {a: k for k, a in enumerate(arcs)}
        A = len(arcs)
        self.arc_src = np.array([u for u, _ in arcs], dtype=np.int64)
        self.arc_dst = np.array([v for _, v in arcs], dtype=np.int64)
        self.arc_rev = np.array([index[(v, u)] for u, v in arcs], dtype=np.int64)
        self.arc_index = index
        self.arc_mat = np.zeros((A, mmax, mmax))
        for a, (u, v) in enumerate(arcs):
            mat = inst.matrix(v, u)
            self.arc_mat[a, : mat.shape[0], : mat.shape[1]] = mat
        self.dst_start = np.searchsorted(self.arc_dst, np.arange(n + 1)).astype(np.int64)
        self.unary = np.zeros((n, mmax))
        for x in range(n):
            self.unary[x, : inst.domain_sizes[x]] = inst.unary[x]

    def uniform(self, unary: np.ndarray | None = None) -> np.ndarray:
        base = self.unary if unary is None else unary
        mass = base.sum(axis=1, keepdims=True)
        return np.divide(base, mass, out=np.zeros_like(base), where=mass > 0)

    def initial_messages(self, unary: np.ndarray | None = None) -> np.ndarray:
        # M^(0) = 1 on every live value of the sender
        base = self.unary if unary is None else unary
        return base[self.arc_src].copy()

    def masked_unary(self, assignment: dict[int, int]) -> np.ndarray:
        """Unary mask equivalent to conditioning on ``assignment``."""
        unary = self.unary.copy()
        for x, v in assignment.items():
            keep = unary[x, v]
            unary[x] = 0.0
            unary[x, v] = keep
        return unary

    def unpack(self, F: np.ndarray) -> list[np.ndarray]:
        return [F[x, : m].copy() for x, m in enumerate(self.inst.domain_sizes)]


_STATUS = {
    K.CONVERGED: "Converged",
    K.MAX_ITER: "MaxIterReached",
    K.OSCILLATING: "Oscillating",
    K.WIPEOUT: "Wipeout",
}


def run_packed(
    packed: PackedCsp,
    cfg: PropagationConfig,
    unary: np.ndarray | None = None,
    messages: np.ndarray | None = None,
) -> PropagationResult:
    """Propagate on a packed instance, optionally with a narrowed unary mask.

    A narrowed ``unary`` gives the same trajectory as propagating the
    :func:`~probarc.csp.condition`-ed instance and skips repacking, which is
    what dynamic search heuristics rely on.
    """
    unary = packed.unary if unary is None else unary
    msg = packed.initial_messages(unary) if messages is None else np.array(messages, dtype=np.float64)
    F_init = packed.uniform(unary)
    history = np.zeros(cfg.max_iter)
    status, k, F, _sup, wiped = K.propagate_kernel(
        cfg.mode.code, packed.arc_src, packed.arc_dst, packed.arc_rev, packed.arc_mat,
        packed.dst_start, unary, msg, F_init, cfg.epsilon, cfg.max_iter,
        cfg.oscillation_window, history,
    )
    if status == K.NON_FINITE:
        raise NonFiniteState(int(k))
    status = _STATUS[int(status)]
    k = int(k)
    if status == "Wipeout":
        beliefs = [np.zeros(m) for m in packed.inst.domain_sizes]
    else:
        beliefs = packed.unpack(F)
    mass = [float(F[x].max()) for x in range(packed.n)]
    return PropagationResult(
        status=status,
        iterations=k,
        beliefs=beliefs,
        period=2 if status == "Oscillating" else None,
        wiped_var=int(wiped) if status == "Wipeout" else None,
        residual_history=[float(r) for r in history[: max(k, 0)]] if cfg.record_history else None,
        min_mass=min(mass, default=float("nan")),
    )


def propagate(inst: CspInstance, cfg: PropagationConfig | None = None, messages=None) -> PropagationResult:
    """Run pAC on ``inst``.

    ``messages`` optionally overrides ``M^(0)``; it must be a nonnegative
    array shaped like :meth:`PackedCsp.initial_messages`.
    """
    cfg = cfg or PropagationConfig()
    return run_packed(PackedCsp(inst), cfg, messages=messages)


# -- single-step operations ---------------------------------------------------


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput("non-finite entry")


def support_sum(inst: CspInstance, M: Sequence[float], x: int, y: int, mode: Mode = Mode.STANDARD) -> np.ndarray:
    """Support for each value of ``x`` from the message ``M`` over ``y``'s values."""
    if not inst.has_edge(x, y):
        raise NoSuchEdge(f"no constraint between {x} and {y}")
    mat = inst.matrix(x, y)
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (mat.shape[1],):
        raise LengthMismatch(f"message length {M.shape} != |D_{y}| = {mat.shape[1]}")
    if Mode(mode) is Mode.BOOLEAN:
        return (mat & (M > 0)[None, :]).any(axis=1).astype(np.float64)
    return mat.astype(np.float64) @ M


def belief_update(inst: CspInstance, x: int, supports: Sequence[np.ndarray], mode: Mode = Mode.STANDARD,
                  previous: np.ndarray | None = None) -> tuple[np.ndarray, bool]:
    """Normalised product of neighbour supports for ``x``; ``(F, wiped)``."""
    m = inst.domain_sizes[x]
    prod = inst.unary[x].astype(np.float64)
    if previous is not None:
        prod = prod * np.asarray(previous, dtype=np.float64)
    for s in supports:
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (m,):
            raise LengthMismatch(f"support length {s.shape} != {m}")
        _check_finite(s)
        prod = prod * s
    total = prod.sum()
    if total == 0.0:
        return np.zeros(m), True
    if Mode(mode) is Mode.BOOLEAN:
        return (prod > 0).astype(np.float64), False
    return prod / total, False


def message_update(F: Sequence[float], S: Sequence[float]) -> np.ndarray:
    """``F / S`` where ``S > 0``, else 0 (exact-zero guard)."""
    F = np.asarray(F, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if F.shape != S.shape:
        raise LengthMismatch(f"{F.shape} != {S.shape}")
    _check_finite(F, S)
    out = np.zeros_like(F)
    np.divide(F, S, out=out, where=S > 0)
    return out


def residual(F_new: Sequence[np.ndarray], F_old: Sequence[np.ndarray]) -> tuple[list[float], float]:
    """Per-variable squared L2 change and its maximum."""
    if len(F_new) != len(F_old):
        raise LengthMismatch("belief states cover different variable counts")
    per = []
    for a, b in zip(F_new, F_old):
        a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise LengthMismatch(f"{a.shape} != {b.shape}")
        per.append(float(((a - b) ** 2).sum()))
    return per, max(per, default=0.0)


@dataclass
class BeliefState:
    """Explicit pAC state for step-by-step inspection.

    ``M[a]`` and ``S[a]`` are indexed by ``packed.arcs``: the message ``u``
    sends about its own values and the support it gives ``v``.
    """

    packed: PackedCsp
    F: np.ndarray
    F_prev: np.ndarray
    M: np.ndarray
    S: np.ndarray
    k: int = 0

    @classmethod
    def initial(cls, inst: CspInstance | PackedCsp) -> "BeliefState":
        packed = inst if isinstance(inst, PackedCsp) else PackedCsp(inst)
        F = packed.uniform()
        A = len(packed.arcs)
        return cls(packed, F.copy(), F.copy(), packed.initial_messages(), np.zeros((A, packed.mmax)), 0)

    def message(self, sender: int, receiver: int) -> np.ndarray:
        a = self.packed.arc_index[(sender, receiver)]
        return self.M[a, : self.packed.inst.domain_sizes[sender]].copy()

    def beliefs(self) -> list[np.ndarray]:
        return self.packed.unpack(self.F)


def pac_round(state: BeliefState, mode: Mode = Mode.STANDARD) -> tuple[BeliefState, int | None]:
    """Supports and beliefs from the current messages, then fresh messages.

    Returns the advanced state and the first wiped variable (or ``None``).
    This is the same update the kernel loops over; it exists for tests and
    for inspecting individual rounds.
    """
    p = state.packed
    mode = Mode(mode)
    prior = p.unary * state.F if mode is Mode.PELEG else p.unary
    F, S, wiped = K._round_numpy(mode.code, p.arc_dst, p.arc_mat, prior, state.M)
    if wiped >= 0:
        F = np.zeros_like(F)
    M = K._messages_numpy(mode.code, p.arc_src, p.arc_rev, p.dst_start, prior, S)
    new = BeliefState(p, F, state.F.copy(), M, S, state.k + 1)
    return new, (wiped if wiped >= 0 else None)


def boolean_support_sets(result: PropagationResult) -> DomainSet:
    """Live values of a Boolean-mode run; everything dead after a wipeout."""
    if result.status == "Wipeout":
        return DomainSet([np.zeros(len(b), dtype=bool) for b in result.beliefs])
    if result.status != "Converged":
        raise ValueError(f"Boolean propagation did not reach a fixpoint: {result.label()}")
    return DomainSet([np.asarray(b) > 0 for b in result.beliefs])
