"""Reversible nucleotide substitution models (nst = 1, 2, 6) and the
``lset`` configuration line that selects them.

State order is fixed as A, C, G, T everywhere. The rate matrix Q is
scaled so the expected substitution rate at stationarity is 1, making
branch lengths expected substitutions per site. Transition matrices come
from an eigendecomposition of the frequency-symmetrized Q, which is exact
for the whole GTR family.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammainc, gammaincinv

from ..errors import PhyloflowError, ValidationError

STATES = "ACGT"

# rel_rates order for nst=6 (rGT is pinned to 1 for identifiability)
RATE_NAMES = ("rAC", "rAG", "rAT", "rCG", "rCT", "rGT")
_RATE_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_TRANSITIONS = ((0, 2), (1, 3))  # A<->G, C<->T


class LsetError(PhyloflowError):
    code = "lset_error"


@dataclass(frozen=True)
class SubstitutionModel:
    nst: int = 1
    state_freqs: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    rel_rates: tuple[float, ...] = (1.0,)
    rates: str = "equal"  # "equal" | "gamma"
    gamma_shape: float = 0.5
    ncat: int = 4

    def __post_init__(self):
        if self.nst not in (1, 2, 6):
            raise ValidationError(f"nst must be 1, 2 or 6, got {self.nst}")
        freqs = tuple(float(f) for f in self.state_freqs)
        if len(freqs) != 4 or any(f <= 0 for f in freqs):
            raise ValidationError("state_freqs must be 4 positive values")
        if abs(sum(freqs) - 1.0) > 1e-12:
            raise ValidationError("state_freqs must sum to 1")
        expected = {1: 1, 2: 1, 6: 6}[self.nst]
        rel = tuple(float(r) for r in self.rel_rates)
        if len(rel) != expected:
            raise ValidationError(
                f"nst={self.nst} needs {expected} rel_rates, got {len(rel)}"
            )
        if any(r <= 0 for r in rel):
            raise ValidationError("rel_rates must be positive")
        if self.nst == 6 and rel[-1] != 1.0:
            rel = tuple(r / rel[-1] for r in rel)  # pin rGT = 1
        if self.rates not in ("equal", "gamma"):
            raise ValidationError(f"rates must be equal or gamma, got {self.rates!r}")
        if self.gamma_shape <= 0 or not np.isfinite(self.gamma_shape):
            raise ValidationError("gamma_shape must be positive")
        if self.ncat < 1:
            raise ValidationError("ncat must be >= 1")
        object.__setattr__(self, "state_freqs", freqs)
        object.__setattr__(self, "rel_rates", rel)

    def exchangeabilities(self) -> tuple[float, ...]:
        """The six pairwise rates implied by nst, in RATE_NAMES order."""
        if self.nst == 6:
            return self.rel_rates
        if self.nst == 2:
            kappa = self.rel_rates[0]
            return (1.0, kappa, 1.0, 1.0, kappa, 1.0)
        return (1.0,) * 6


def lset_parse(text: str) -> SubstitutionModel:
    """Parse an ``lset`` line, e.g. ``lset nst=6 rates=gamma``.

    Unparameterized fields get defaults: uniform frequencies, unit
    exchangeabilities, gamma_shape 0.5, ncat 4.
    """
    body = text.strip().rstrip(";").strip()
    if body.lower().startswith("lset"):
        body = body[4:].strip()
    if not body:
        raise LsetError("empty lset line")
    fields: dict[str, str] = {}
    for token in body.split():
        m = re.match(r"(\w+)=(\S+)$", token)
        if not m:
            raise LsetError(f"expected key=value, got {token!r}")
        key = m.group(1).lower()
        if key not in ("nst", "rates"):
            raise LsetError(f"unknown lset key {m.group(1)!r}")
        if key in fields:
            raise LsetError(f"duplicate lset key {m.group(1)!r}")
        fields[key] = m.group(2).lower()

    nst_text = fields.get("nst", "1")
    if nst_text not in ("1", "2", "6"):
        raise LsetError(f"illegal value nst={nst_text} (must be 1, 2 or 6)")
    nst = int(nst_text)
    rates = fields.get("rates", "equal")
    if rates not in ("equal", "gamma"):
        raise LsetError(f"illegal value rates={rates} (must be equal or gamma)")
    rel = (1.0,) * 6 if nst == 6 else (1.0,)
    return SubstitutionModel(nst=nst, rel_rates=rel, rates=rates)


def lset_render(m: SubstitutionModel) -> str:
    return f"nst={m.nst} rates={m.rates}"


@lru_cache(maxsize=512)
def rate_matrix(m: SubstitutionModel) -> np.ndarray:
    """Q with Q[i,j] = s_ij * pi_j, scaled to expected rate 1."""
    freqs = np.array(m.state_freqs)
    s = np.zeros((4, 4))
    for (i, j), r in zip(_RATE_PAIRS, m.exchangeabilities()):
        s[i, j] = s[j, i] = r
    q = s * freqs[None, :]
    np.fill_diagonal(q, -q.sum(axis=1))
    scale = -float(freqs @ np.diag(q))
    q /= scale
    q.setflags(write=False)
    return q


@lru_cache(maxsize=512)
def eigen_system(m: SubstitutionModel):
    """Eigendecomposition of Q via the symmetrized form (exact for GTR)."""
    q = rate_matrix(m)
    sqrt_f = np.sqrt(np.array(m.state_freqs))
    sym = q * sqrt_f[:, None] / sqrt_f[None, :]
    sym = (sym + sym.T) / 2.0
    evals, vecs = np.linalg.eigh(sym)
    u = vecs / sqrt_f[:, None]
    u_inv = vecs.T * sqrt_f[None, :]
    for a in (evals, u, u_inv):
        a.setflags(write=False)
    return evals, u, u_inv


@lru_cache(maxsize=512)
def category_rates(m: SubstitutionModel) -> np.ndarray:
    """Site-rate multipliers: [1] or the mean-per-quantile-bin discrete gamma."""
    if m.rates == "equal":
        out = np.array([1.0])
    else:
        a, k = m.gamma_shape, m.ncat
        bounds = np.concatenate(
            [[0.0], gammaincinv(a, np.arange(1, k) / k), [np.inf]]
        )
        out = k * (gammainc(a + 1, bounds[1:]) - gammainc(a + 1, bounds[:-1]))
    out.setflags(write=False)
    return out


def transition_matrix(m: SubstitutionModel, t: float, r: float = 1.0) -> np.ndarray:
    """P(t) = exp(Q * r * t); row-stochastic, P(0) = I."""
    if t < 0:
        raise ValidationError("branch length must be >= 0")
    if r <= 0:
        raise ValidationError("category rate must be > 0")
    evals, u, u_inv = eigen_system(m)
    p = (u * np.exp(evals * (r * t))[None, :]) @ u_inv
    return np.clip(p, 0.0, None)
