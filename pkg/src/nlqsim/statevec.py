"""State vector for n principal qubits plus one phase-feedback ancilla.

Index layout: ``amps[2*k + b]`` holds the amplitude of principal basis state
|k> with ancilla bit b, i.e. the ancilla is the least significant bit of the
flat index. The two ancilla branches are then the stride-2 views
``amps[0::2]`` and ``amps[1::2]``, which keeps every branch operation a cheap
strided update.

Every gate implemented here is either phase-only or an amplitude swap, so the
2-norm is preserved to machine precision. Branch probabilities are reduced
with numpy's pairwise summation, which is deterministic for a fixed array
length; the feedback phases of the nonlinear gate are therefore
bit-reproducible from run to run.

The gate set is deliberately small: the ancilla-flip on a single principal
index, the branch-probability phase gate, an ancilla-conditioned phase, a
diagonal phase over the principal index, and the unitary DFT. Nothing else is
needed to realize the diagonal nonlinear-potential step and the kinetic step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: tolerance for exactness checks (normalization, clean-ancilla tests)
NORM_TOL = 1e-12


@dataclass
class Register:
    """Amplitudes of an (n+1)-qubit system, ancilla stored as the flat LSB."""

    n: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one principal qubit")
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (2 ** (self.n + 1),):
            raise ValueError(
                f"amplitude vector must have length {2 ** (self.n + 1)}, "
                f"got {self.amps.shape}"
            )

    @property
    def num_states(self) -> int:
        """Number of principal basis states, 2**n."""
        return 2**self.n

    @property
    def ancilla0(self) -> np.ndarray:
        """View of the ancilla-|0> branch amplitudes (length 2**n)."""
        return self.amps[0::2]

    @property
    def ancilla1(self) -> np.ndarray:
        """View of the ancilla-|1> branch amplitudes (length 2**n)."""
        return self.amps[1::2]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "Register":
        return Register(self.n, self.amps.copy())

    def principal_probabilities(self) -> np.ndarray:
        """|amplitude|^2 per principal index, summed over the ancilla bit."""
        mags = np.abs(self.amps) ** 2
        return mags[0::2] + mags[1::2]

    def ancilla_is_clean(self, tol: float = NORM_TOL) -> bool:
        """True when all weight sits in the ancilla-|0> branch."""
        return float(np.sum(np.abs(self.ancilla1) ** 2)) <= tol


@dataclass(frozen=True)
class BranchWeights:
    """Probabilities of the two ancilla branches; p0 + p1 = 1 for any state."""

    p0: float
    p1: float


def init_from_amplitudes(a: np.ndarray) -> Register:
    """Build a register from principal amplitudes, ancilla set to |0>.

    The input is normalized; its length must be a power of two >= 2.
    """
    a = np.asarray(a, dtype=np.complex128).ravel()
    size = a.shape[0]
    if size < 2 or size & (size - 1) != 0:
        raise ValueError(f"length must be a power of two >= 2, got {size}")
    nrm = np.linalg.norm(a)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise ValueError("unnormalizable")
    n = int(size.bit_length() - 1)
    amps = np.zeros(2 * size, dtype=np.complex128)
    amps[0::2] = a / nrm
    return Register(n, amps)


def basis_state(n: int, k: int) -> Register:
    """Register prepared in principal basis state |k> with clean ancilla."""
    a = np.zeros(2**n, dtype=np.complex128)
    a[k] = 1.0
    return init_from_amplitudes(a)


def uniform_state(n: int) -> Register:
    """Uniform superposition over all principal states, clean ancilla."""
    return init_from_amplitudes(np.ones(2**n, dtype=np.complex128))


def branch_weights(r: Register) -> BranchWeights:
    """Ancilla branch probabilities, reduced in a fixed deterministic order."""
    p0 = float(np.sum(np.abs(r.ancilla0) ** 2))
    p1 = float(np.sum(np.abs(r.ancilla1) ** 2))
    return BranchWeights(p0, p1)


def apply_mcx_k(r: Register, k: int) -> Register:
    """Flip the ancilla exactly on principal state |k> (amplitude swap).

    Semantically this is the multi-controlled NOT conditioned on every bit of
    k; the simulator applies it as a native two-amplitude swap. An involution.
    """
    if not 0 <= k < r.num_states:
        raise ValueError(f"index {k} out of range for {r.n} principal qubits")
    amps = r.amps
    amps[2 * k], amps[2 * k + 1] = amps[2 * k + 1], amps[2 * k]
    return r


def apply_nonlinear(r: Register, gamma: float) -> Register:
    """Branch-probability phase gate on the ancilla.

    With branch weights (p0, p1), multiplies every ancilla-|0> amplitude by
    exp(i*gamma*p0) and every ancilla-|1> amplitude by exp(i*gamma*p1). This
    is the state-dependent Bloch-sphere rotation
    (theta, phi) -> (theta, phi - gamma*cos(theta)) of the ancilla qubit,
    written out on the full register. Phase-only, hence norm-preserving; an
    empty branch just receives an irrelevant phase.
    """
    w = branch_weights(r)
    a0, a1 = r.ancilla0, r.ancilla1
    a0 *= np.exp(1j * gamma * w.p0)
    a1 *= np.exp(1j * gamma * w.p1)
    return r


def apply_ancilla_phase(r: Register, lam: float) -> Register:
    """Multiply every ancilla-|1> amplitude by exp(i*lam)."""
    a1 = r.ancilla1
    a1 *= np.exp(1j * lam)
    return r


def apply_principal_diagonal(r: Register, phases: np.ndarray) -> Register:
    """Apply exp(i*phases[k]) to principal index k on both ancilla branches."""
    phases = np.asarray(phases, dtype=np.float64).ravel()
    if phases.shape[0] != r.num_states:
        raise ValueError(
            f"need {r.num_states} phases, got {phases.shape[0]}"
        )
    factors = np.exp(1j * phases)
    a0, a1 = r.ancilla0, r.ancilla1
    a0 *= factors
    a1 *= factors
    return r


def dft_principal(
    r: Register, inverse: bool = False, axes_shape: tuple[int, ...] | None = None
) -> Register:
    """Unitary DFT over the principal index; the ancilla is untouched.

    ``axes_shape`` optionally factors the principal index into a row-major
    multi-axis grid (e.g. (8, 8) for a 2-d field) and transforms each axis,
    which is what the kinetic step needs on multi-dimensional grids. The
    default is the full one-dimensional transform. Forward uses the
    exp(-2*pi*i*k*m/M) kernel; inverse undoes it exactly (round trip is
    identity to machine precision).
    """
    if axes_shape is None:
        axes_shape = (r.num_states,)
    if int(np.prod(axes_shape)) != r.num_states:
        raise ValueError(f"axes shape {axes_shape} does not cover 2**{r.n} states")
    block = r.amps.reshape(*axes_shape, 2)
    axes = tuple(range(len(axes_shape)))
    if inverse:
        out = np.fft.ifftn(block, axes=axes, norm="ortho")
    else:
        out = np.fft.fftn(block, axes=axes, norm="ortho")
    r.amps[:] = out.reshape(-1)
    return r


def overlap(r1: Register, r2: Register) -> complex:
    """Inner product <r1|r2> over the full (n+1)-qubit amplitude vectors."""
    if r1.n != r2.n:
        raise ValueError(f"size mismatch: {r1.n} vs {r2.n} principal qubits")
    return complex(np.vdot(r1.amps, r2.amps))


def fidelity(r1: Register, r2: Register) -> float:
    """|<r1|r2>|, which is 1 exactly when the states agree up to global phase."""
    return abs(overlap(r1, r2))


def global_phase_aligned(reference: Register, r: Register) -> np.ndarray:
    """Copy of r's amplitudes rotated to best match the reference's phase.

    Returns r.amps * exp(i*chi) with chi chosen to maximize the real part of
    the overlap with the reference, so amplitude-wise comparisons ignore the
    (physically meaningless) global phase.
    """
    ov = overlap(reference, r)
    if ov == 0:
        return r.amps.copy()
    return r.amps * (abs(ov) / ov)
