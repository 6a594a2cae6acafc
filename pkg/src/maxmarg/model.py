"""Triplet Markov models and the non-homogeneous pair chains they induce.

A :class:`TripletModel` is a homogeneous chain over joint states ``(x, u, y)``.
Conditioning it on an observed ``y`` sequence gives a :class:`PairChain`: an
unnormalized, non-homogeneous chain over ``(x, u)`` whose total weight is
``p(y_{1:n})``.  All decoding code works on pair chains only.

Joint state ordering is row-major with ``x`` slowest, then ``u``, then ``y``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .logdomain import ZERO, lse

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid model parameters or malformed model files."""


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic 64-bit seeded generator (PCG64)."""
    return np.random.default_rng(np.uint64(seed % 2**64))


@dataclass(frozen=True, eq=False)
class TripletModel:
    """Homogeneous discrete TMM.

    ``initial`` has shape ``(X, U, Y)`` and ``transition`` has shape
    ``(X, U, Y, X, U, Y)`` with the source state first.  Both hold linear
    probabilities exactly as sampled; log views are derived.
    """

    card_x: int
    card_u: int
    card_y: int
    initial: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        shape = (self.card_x, self.card_u, self.card_y)
        if self.initial.shape != shape or self.transition.shape != shape + shape:
            raise ConfigError("tensor shapes do not match cardinalities")

    @property
    def n_states(self) -> int:
        return self.card_x * self.card_u * self.card_y

    @cached_property
    def log_initial(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.initial)

    @cached_property
    def log_transition(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.transition)

    def to_json(self) -> dict:
        s = self.n_states
        return {
            "card_x": self.card_x,
            "card_u": self.card_u,
            "card_y": self.card_y,
            "initial": self.initial.reshape(s).tolist(),
            "transition": self.transition.reshape(s, s).tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TripletModel":
        try:
            cx, cu, cy = int(doc["card_x"]), int(doc["card_u"]), int(doc["card_y"])
            init = np.asarray(doc["initial"], dtype=float).reshape(cx, cu, cy)
            trans = np.asarray(doc["transition"], dtype=float).reshape(cx, cu, cy, cx, cu, cy)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"malformed triplet model document: {exc}") from exc
        return cls(cx, cu, cy, init, trans)


@dataclass(frozen=True, eq=False)
class PairChain:
    """Non-homogeneous bivariate chain over ``(x, u)`` with log weights.

    ``initial`` is ``w_1(x, u)`` with shape ``(X, U)``.  ``steps[i]`` holds
    ``w(x, u | x', u')`` for the move from position ``i + 1`` to ``i + 2``
    (1-based), indexed ``[x', u', x, u]``.  ``log_norm`` is the total mass the
    chain claims to carry.
    """

    n: int
    card_x: int
    card_u: int
    initial: np.ndarray
    steps: np.ndarray
    log_norm: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        X, U = self.card_x, self.card_u
        if self.n < 1:
            raise ConfigError("chain length must be at least 1")
        if self.initial.shape != (X, U):
            raise ConfigError(f"initial weight shape {self.initial.shape} != {(X, U)}")
        if self.steps.shape != (self.n - 1, X, U, X, U):
            raise ConfigError(f"step weight shape {self.steps.shape} != {(self.n - 1, X, U, X, U)}")

    @cached_property
    def ext_steps(self) -> np.ndarray:
        """Steps with a virtual transition prepended.

        Position 0 is a dummy root state ``(x_0, u_0) = (0, 0)`` whose only
        outgoing row is the initial weight, so ``ext_steps[k]`` always moves a
        prefix of length ``k`` to length ``k + 1``.
        """
        X, U = self.card_x, self.card_u
        ext = np.full((self.n, X, U, X, U), ZERO)
        ext[0, 0, 0] = self.initial
        ext[1:] = self.steps
        return ext

    def shifted(self, c: float) -> "PairChain":
        """Copy with every initial weight multiplied by ``e**c``."""
        return PairChain(self.n, self.card_x, self.card_u, self.initial + c,
                         self.steps.copy(), self.log_norm + c, self.name)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "card_x": self.card_x,
            "card_u": self.card_u,
            "initial_weight": _encode_log(self.initial),
            "step_weight": _encode_log(self.steps),
            "log_norm": None if self.log_norm == ZERO else float(self.log_norm),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PairChain":
        try:
            n, cx, cu = int(doc["n"]), int(doc["card_x"]), int(doc["card_u"])
            init = _decode_log(doc["initial_weight"]).reshape(cx, cu)
            steps = _decode_log(doc["step_weight"]).reshape(n - 1, cx, cu, cx, cu)
            ln = doc.get("log_norm", 0.0)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"malformed pair chain document: {exc}") from exc
        return cls(n, cx, cu, init, steps, ZERO if ln is None else float(ln))


# JSON has no infinity; the zero element is written as null.
def _encode_log(a: np.ndarray):
    obj = np.asarray(a, dtype=object)
    obj[np.isneginf(a)] = None
    return obj.tolist()


def _decode_log(v) -> np.ndarray:
    arr = np.asarray(v, dtype=object)
    arr[np.equal(arr, None)] = ZERO
    return arr.astype(float)


def _dirichlet_rows(rng: np.random.Generator, alpha: float, rows: int, size: int) -> np.ndarray:
    g = rng.gamma(alpha, 1.0, size=(rows, size))
    s = g.sum(axis=1, keepdims=True)
    # alpha << 1 can underflow every gamma draw in a row
    bad = s[:, 0] == 0
    if bad.any():
        g[bad, rng.integers(0, size, size=bad.sum())] = 1.0
        s = g.sum(axis=1, keepdims=True)
    return g / s


def sample_tmm(card_x: int, card_u: int, card_y: int, alpha: float,
               rng: np.random.Generator) -> TripletModel:
    """Random TMM with Dirichlet(alpha) initial law and joint transition rows."""
    if min(card_x, card_u, card_y) < 1:
        raise ConfigError("cardinalities must be positive")
    if not alpha > 0:
        raise ConfigError("Dirichlet concentration must be positive")
    s = card_x * card_u * card_y
    shape = (card_x, card_u, card_y)
    init = _dirichlet_rows(rng, alpha, 1, s).reshape(shape)
    trans = _dirichlet_rows(rng, alpha, s, s).reshape(shape + shape)
    return TripletModel(card_x, card_u, card_y, init, trans)


def simulate(tmm: TripletModel, n: int, rng: np.random.Generator):
    """Sample a joint trajectory of length ``n``; returns ``(x, u, y)`` arrays."""
    if n < 1:
        raise ConfigError("length must be at least 1")
    s = tmm.n_states
    flat_init = tmm.initial.reshape(s)
    flat_trans = tmm.transition.reshape(s, s)
    z = np.empty(n, dtype=np.int64)
    z[0] = rng.choice(s, p=flat_init / flat_init.sum())
    for t in range(1, n):
        row = flat_trans[z[t - 1]]
        z[t] = rng.choice(s, p=row / row.sum())
    x, u, y = np.unravel_index(z, (tmm.card_x, tmm.card_u, tmm.card_y))
    return x.astype(np.int64), u.astype(np.int64), y.astype(np.int64)


def condition_on_observations(tmm: TripletModel, y_path) -> PairChain:
    """Factor chain of ``(X, U)`` given ``Y = y_path``.

    The chain is left unnormalized; ``log_norm`` is ``log p(y_{1:n})``.
    """
    y = np.asarray(y_path, dtype=np.int64)
    if y.ndim != 1 or len(y) < 1:
        raise ConfigError("observation sequence must be a non-empty 1-d sequence")
    if (y < 0).any() or (y >= tmm.card_y).any():
        raise ConfigError(f"observation symbol out of range 0..{tmm.card_y - 1}")
    n = len(y)
    li, lt = tmm.log_initial, tmm.log_transition
    initial = li[:, :, y[0]].copy()
    steps = np.stack([lt[:, :, y[t - 1], :, :, y[t]] for t in range(1, n)]) if n > 1 \
        else np.empty((0, tmm.card_x, tmm.card_u, tmm.card_x, tmm.card_u))
    chain = PairChain(n, tmm.card_x, tmm.card_u, initial, steps, 0.0)
    log_norm = float(forward_total(chain))
    if log_norm == ZERO:
        log.warning("observation sequence has zero probability under the model")
    return PairChain(n, tmm.card_x, tmm.card_u, initial, steps, log_norm)


def forward_total(chain: PairChain) -> float:
    """Total log weight of all ``(x, u)`` paths via the forward recursion."""
    a = chain.initial.reshape(-1)
    S = chain.card_x * chain.card_u
    for step in chain.steps:
        a = lse(a[:, None] + step.reshape(S, S), axis=0)
    return float(lse(a))


@dataclass
class Diagnostics:
    ok: bool
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate(chain: PairChain, tol: float = 1e-9) -> Diagnostics:
    """Shape, NaN and total-mass checks; never raises."""
    failures = []
    X, U = chain.card_x, chain.card_u
    if chain.initial.shape != (X, U):
        failures.append(f"initial_weight shape {chain.initial.shape}")
    if chain.steps.shape != (chain.n - 1, X, U, X, U):
        failures.append(f"step_weight shape {chain.steps.shape}")
    for name, arr in (("initial_weight", chain.initial), ("step_weight", chain.steps)):
        bad = np.argwhere(np.isnan(arr))
        for idx in bad[:10]:
            failures.append(f"NaN in {name} at index {tuple(int(i) for i in idx)}")
        if np.isposinf(arr).any():
            failures.append(f"+inf in {name}")
    if not failures:
        total = forward_total(chain)
        if total == ZERO:
            failures.append("total mass is zero")
        elif chain.log_norm == ZERO or abs(total - chain.log_norm) > tol:
            failures.append(f"log_norm {chain.log_norm!r} != total mass {total!r}")
    return Diagnostics(not failures, failures)


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj.to_json()) + "\n")


def load_tmm(path) -> TripletModel:
    return TripletModel.from_json(json.loads(Path(path).read_text()))


def load_chain(path) -> PairChain:
    return PairChain.from_json(json.loads(Path(path).read_text()))


def write_observations(y, path) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in y))


def read_observations(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    try:
        return np.array([int(ln) for ln in lines if ln], dtype=np.int64)
    except ValueError as exc:
        raise ConfigError(f"bad observation file {path}: {exc}") from exc
