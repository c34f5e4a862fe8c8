"""Compile a symmetric density-coupling matrix into an ancilla gate sequence.

Target operation, for one time step eps: multiply each principal amplitude
a_k by exp(-i*eps*sum_j f_kj*|a_j|^2), a diagonal whose phases depend on the
state's own probability weights. The circuit realizes it from two kinds of
blocks built on the nonlinear ancilla:

  single block, index k:   [flip_k, N(g), P(g), flip_k]
  pair block, k < l:       [flip_k, flip_l, N(g), P(g), flip_l, flip_k]

where flip_k is the ancilla flip on |k>, N(g) the branch-probability phase
gate and P(g) the ancilla-|1> phase. Up to a state-independent global phase,
the single block multiplies a_k by exp(2i*g*|a_k|^2) and leaves all other
amplitudes alone; the pair block multiplies both a_k and a_l by
exp(2i*g*(|a_k|^2 + |a_l|^2)). Every block is modulus-preserving, so blocks
compose independently of order and the angles follow from matching phase
exponents against the target diagonal:

    pair angle    g_kl = -eps * f_kl / 2               (k < l)
    single angle  g_k  = -eps * f_kk / 2 - sum_{l != k} g_kl

This calibration is not taken on faith: the test suite checks the compiled
sequence against the directly applied diagonal (`apply_w_direct`) on random
states and couplings to 1e-12.

Resource accounting treats each ancilla flip as one multi-controlled NOT,
expanded into basic_c * n**2 basic gates when converting to basic-gate
counts; N and P count as one gate each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import statevec
from .statevec import NORM_TOL, Register


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric real matrix f_kj weighting the density-dependent potential.

    Entries carry units of energy*volume per squared amplitude. Symmetry is
    required bitwise at construction; the dimension must be a power of two.
    """

    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=np.float64)
        object.__setattr__(self, "f", f)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValueError(f"coupling matrix must be square, got {f.shape}")
        dim = f.shape[0]
        if dim < 2 or dim & (dim - 1) != 0:
            raise ValueError(f"dimension must be a power of two >= 2, got {dim}")
        if not np.array_equal(f, f.T):
            raise ValueError("coupling matrix must be symmetric")

    @property
    def dim(self) -> int:
        return self.f.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(self.dim.bit_length() - 1)

    @classmethod
    def zeros(cls, dim: int) -> "CouplingMatrix":
        return cls(np.zeros((dim, dim)))


@dataclass(frozen=True)
class GammaSchedule:
    """Calibrated rotation angles: one per index, one per index pair (k < l)."""

    gamma_k: np.ndarray
    gamma_kl: dict[tuple[int, int], float]

    def __post_init__(self):
        for (k, l), g in self.gamma_kl.items():
            if not k < l:
                raise ValueError(f"pair angles are keyed with k < l, got {(k, l)}")
            if not math.isfinite(g):
                raise ValueError(f"non-finite pair angle at {(k, l)}")
        if not np.all(np.isfinite(self.gamma_k)):
            raise ValueError("non-finite single-index angle")

    def sparsity(self) -> tuple[int, int]:
        """(number of nonzero single angles, number of nonzero pair angles)."""
        singles = int(np.count_nonzero(self.gamma_k))
        pairs = sum(1 for g in self.gamma_kl.values() if g != 0.0)
        return singles, pairs


@dataclass(frozen=True)
class GateOp:
    """One primitive operation of a compiled sequence.

    kind is one of "MCX" (ancilla flip on index k), "NL" (branch-probability
    phase, angle), "APH" (ancilla-|1> phase, angle), "DIAG" (principal
    diagonal phases), "DFT" (principal Fourier transform, direction).
    """

    kind: str
    k: int | None = None
    angle: float | None = None
    phases: tuple[float, ...] | None = None
    inverse: bool = False

    @classmethod
    def mcx(cls, k: int) -> "GateOp":
        return cls("MCX", k=k)

    @classmethod
    def nl(cls, angle: float) -> "GateOp":
        return cls("NL", angle=float(angle))

    @classmethod
    def aph(cls, angle: float) -> "GateOp":
        return cls("APH", angle=float(angle))

    @classmethod
    def diag(cls, phases) -> "GateOp":
        return cls("DIAG", phases=tuple(float(p) for p in phases))

    @classmethod
    def dft(cls, inverse: bool = False) -> "GateOp":
        return cls("DFT", inverse=inverse)


@dataclass(frozen=True)
class GateSequence:
    """Immutable compiled sequence acting on an n-qubit principal register."""

    n: int
    ops: tuple[GateOp, ...]

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def counts(self) -> "GateCounts":
        c = GateCounts()
        for op in self.ops:
            c = c.add_op(op.kind)
        return c


@dataclass(frozen=True)
class GateCounts:
    """Counts of the three ancilla-gate kinds used by compiled sequences."""

    mcx: int = 0
    nonlinear: int = 0
    ancilla_phase: int = 0

    def add_op(self, kind: str) -> "GateCounts":
        return GateCounts(
            self.mcx + (kind == "MCX"),
            self.nonlinear + (kind == "NL"),
            self.ancilla_phase + (kind == "APH"),
        )

    def __add__(self, other: "GateCounts") -> "GateCounts":
        return GateCounts(
            self.mcx + other.mcx,
            self.nonlinear + other.nonlinear,
            self.ancilla_phase + other.ancilla_phase,
        )

    def scaled(self, m: int) -> "GateCounts":
        return GateCounts(self.mcx * m, self.nonlinear * m, self.ancilla_phase * m)

    def basic(self, n: int, c: int = 1) -> int:
        """Basic-gate equivalent: each MCX costs c*n**2, N and P cost 1."""
        return self.mcx * c * n * n + self.nonlinear + self.ancilla_phase


@dataclass(frozen=True)
class ResourceTally:
    """Exact gate counts for a run of n_steps repetitions of one step."""

    per_step: GateCounts
    n_steps: int
    n: int
    basic_c: int = 1

    @property
    def total(self) -> GateCounts:
        return self.per_step.scaled(self.n_steps)

    @property
    def mcx_count(self) -> int:
        return self.total.mcx

    @property
    def nonlinear_count(self) -> int:
        return self.total.nonlinear

    @property
    def ancilla_phase_count(self) -> int:
        return self.total.ancilla_phase

    @property
    def basic_per_step(self) -> int:
        return self.per_step.basic(self.n, self.basic_c)

    @property
    def basic_gate_count(self) -> int:
        return self.total.basic(self.n, self.basic_c)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "n_steps": self.n_steps,
            "basic_c": self.basic_c,
            "per_step": {
                "mcx": self.per_step.mcx,
                "nonlinear": self.per_step.nonlinear,
                "ancilla_phase": self.per_step.ancilla_phase,
                "basic": self.basic_per_step,
            },
            "total": {
                "mcx": self.mcx_count,
                "nonlinear": self.nonlinear_count,
                "ancilla_phase": self.ancilla_phase_count,
                "basic": self.basic_gate_count,
            },
        }


def gammas_from_coupling(f: CouplingMatrix, eps: float) -> GammaSchedule:
    """Calibrate rotation angles so the compiled blocks realize the diagonal.

    See the module docstring for the derivation; the pair angle carries half
    the off-diagonal coupling and the single angle compensates the |a_k|^2
    contribution that every pair block involving k leaks onto index k.
    """
    mat = f.f
    dim = f.dim
    gamma_kl: dict[tuple[int, int], float] = {}
    for k in range(dim):
        for l in range(k + 1, dim):
            gamma_kl[(k, l)] = -eps * mat[k, l] / 2.0
    gamma_k = np.empty(dim)
    for k in range(dim):
        pair_sum = 0.0
        for l in range(dim):
            if l != k:
                pair_sum += gamma_kl[(k, l) if k < l else (l, k)]
        gamma_k[k] = -eps * mat[k, k] / 2.0 - pair_sum
    return GammaSchedule(gamma_k, gamma_kl)


def schedule_blocks(
    schedule: GammaSchedule, prune: bool = True
) -> list[tuple[GateOp, ...]]:
    """Gate blocks for a schedule: singles by ascending k, then pairs in
    lexicographic (k, l) order. Zero-angle blocks are dropped when pruning.

    The order is immaterial for the resulting state (all constituents are
    modulus-preserving) but fixed for reproducibility.
    """
    blocks: list[tuple[GateOp, ...]] = []
    for k, g in enumerate(schedule.gamma_k):
        if prune and g == 0.0:
            continue
        blocks.append(
            (GateOp.mcx(k), GateOp.nl(g), GateOp.aph(g), GateOp.mcx(k))
        )
    for (k, l) in sorted(schedule.gamma_kl):
        g = schedule.gamma_kl[(k, l)]
        if prune and g == 0.0:
            continue
        blocks.append(
            (
                GateOp.mcx(k),
                GateOp.mcx(l),
                GateOp.nl(g),
                GateOp.aph(g),
                GateOp.mcx(l),
                GateOp.mcx(k),
            )
        )
    return blocks


def compile_w(f: CouplingMatrix, eps: float, prune: bool = True) -> GateSequence:
    """Compile the one-step nonlinear-potential diagonal into gate blocks."""
    schedule = gammas_from_coupling(f, eps)
    ops: list[GateOp] = []
    for block in schedule_blocks(schedule, prune=prune):
        ops.extend(block)
    return GateSequence(f.n_qubits, tuple(ops))


def execute(seq: GateSequence, r: Register) -> Register:
    """Run a compiled sequence on a register (in place)."""
    if seq.n != r.n:
        raise ValueError(f"sequence is for n={seq.n}, register has n={r.n}")
    for op in seq.ops:
        if op.kind == "MCX":
            statevec.apply_mcx_k(r, op.k)
        elif op.kind == "NL":
            statevec.apply_nonlinear(r, op.angle)
        elif op.kind == "APH":
            statevec.apply_ancilla_phase(r, op.angle)
        elif op.kind == "DIAG":
            statevec.apply_principal_diagonal(r, np.array(op.phases))
        elif op.kind == "DFT":
            statevec.dft_principal(r, inverse=op.inverse)
        else:
            raise ValueError(f"unknown gate kind {op.kind!r}")
    return r


def execute_counted(seq: GateSequence, r: Register) -> tuple[Register, GateCounts]:
    """Run a sequence and report the instrumented ancilla-gate counts."""
    execute(seq, r)
    return r, seq.counts()


def apply_w_direct(r: Register, f: CouplingMatrix, eps: float) -> Register:
    """Apply the nonlinear-potential diagonal directly from the densities.

    Reads the current probability weights |a_k|^2 off the clean ancilla-|0>
    branch and multiplies amp[2k] by exp(-i*eps*sum_j f_kj*|a_j|^2). This is
    the in-process oracle the compiled sequence is checked against.
    """
    if f.dim != r.num_states:
        raise ValueError(f"coupling is {f.dim}-dimensional, register has {r.num_states}")
    if not r.ancilla_is_clean(NORM_TOL):
        raise ValueError("ancilla not clean")
    a0 = r.ancilla0
    dens = np.abs(a0) ** 2
    a0 *= np.exp(-1j * eps * (f.f @ dens))
    return r


def dense_sparsity(n: int) -> tuple[int, int]:
    """(singles, pairs) counts for a fully dense coupling on n qubits."""
    dim = 2**n
    return dim, dim * (dim - 1) // 2


def estimate_resources(
    n: int,
    n_steps: int,
    singles: int | None = None,
    pairs: int | None = None,
    basic_c: int = 1,
) -> ResourceTally:
    """Closed-form gate counts for n_steps repetitions of the potential step.

    Per step, with S single blocks and P pair blocks: 2S + 4P ancilla flips
    and S + P each of the branch-probability and ancilla-phase gates. Dense
    coupling is assumed when the sparsity is not given.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if n_steps < 0:
        raise ValueError("need n_steps >= 0")
    if singles is None or pairs is None:
        d_singles, d_pairs = dense_sparsity(n)
        singles = d_singles if singles is None else singles
        pairs = d_pairs if pairs is None else pairs
    per_step = GateCounts(
        mcx=2 * singles + 4 * pairs,
        nonlinear=singles + pairs,
        ancilla_phase=singles + pairs,
    )
    return ResourceTally(per_step, n_steps, n, basic_c)


def tensor_square(r: Register, max_result_qubits: int = 24) -> Register:
    """Register whose principal amplitudes are all products a_j * a_k.

    The output principal index is (j, k) row-major over two copies of the
    input index, so a single application of the potential step on the doubled
    register produces phases containing |a_j|^2 * |a_k|^2 terms (one route to
    higher-than-quadratic density dependence). Requires a clean ancilla.
    """
    if not r.ancilla_is_clean(NORM_TOL):
        raise ValueError("ancilla not clean")
    n2 = 2 * r.n
    if n2 + 1 > max_result_qubits:
        raise ValueError(
            f"result would need {n2 + 1} qubits, above the bound {max_result_qubits}"
        )
    a = r.ancilla0
    doubled = np.outer(a, a).reshape(-1)
    return statevec.init_from_amplitudes(doubled)


def sequence_to_text(seq: GateSequence) -> str:
    """Serialize a sequence, one op per line.

    Formats: ``MCX <k>``, ``NL <angle>``, ``APH <angle>``,
    ``DIAG <p0> <p1> ...``, ``DFT 1`` (forward) / ``DFT -1`` (inverse).
    Angles are radians printed with full round-trip precision and a
    locale-independent decimal point.
    """
    lines = []
    for op in seq.ops:
        if op.kind == "MCX":
            lines.append(f"MCX {op.k}")
        elif op.kind in ("NL", "APH"):
            lines.append(f"{op.kind} {op.angle!r}")
        elif op.kind == "DIAG":
            lines.append("DIAG " + " ".join(repr(p) for p in op.phases))
        elif op.kind == "DFT":
            lines.append(f"DFT {-1 if op.inverse else 1}")
        else:
            raise ValueError(f"unknown gate kind {op.kind!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def sequence_from_text(text: str, n: int) -> GateSequence:
    """Parse the line format written by `sequence_to_text`."""
    ops: list[GateOp] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        kind, args = parts[0], parts[1:]
        try:
            if kind == "MCX":
                ops.append(GateOp.mcx(int(args[0])))
            elif kind == "NL":
                ops.append(GateOp.nl(float(args[0])))
            elif kind == "APH":
                ops.append(GateOp.aph(float(args[0])))
            elif kind == "DIAG":
                ops.append(GateOp.diag(float(a) for a in args))
            elif kind == "DFT":
                ops.append(GateOp.dft(inverse=int(args[0]) < 0))
            else:
                raise ValueError(f"unknown op {kind!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"bad gate line {lineno}: {raw!r}") from exc
    return GateSequence(n, tuple(ops))
