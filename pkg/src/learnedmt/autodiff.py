"""Small reverse-mode autodiff over dense 2-D float64 arrays.

Every op builds a new :class:`Tensor` holding its parents and a closure that
pushes the output gradient back to them. :func:`backward` collects the
ancestors of a scalar loss into a :class:`Tape` ordered by construction and
replays it in reverse.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class InvalidMaskError(ValueError):
    """A softmax mask leaves no entry unmasked."""


class ProbeError(ArithmeticError):
    """A finite-difference probe produced a non-finite value."""


_counter = itertools.count()
_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording in the current thread."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "parents", "_backward", "seq", "name")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise DimensionError(f"expected at most 2 dims, got {arr.ndim}")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.seq = next(_counter)
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other: Tensor) -> Tensor:
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        return sub(self, other)

    def __mul__(self, other: Tensor) -> Tensor:
        return mul(self, other)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def _result(values: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.values = values
    out.grad = None
    out.seq = next(_counter)
    out.name = None
    live = tuple(p for p in parents if p.requires_grad)
    if live and grad_enabled():
        out.requires_grad = True
        out.parents = live
        out._backward = backward
    else:
        out.requires_grad = False
        out.parents = ()
        out._backward = None
    return out


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# --------------------------------------------------------------------------
# primitive ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: {a.shape} x {b.shape}")
    av, bv = a.values, b.values

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ bv.T)
        if b.requires_grad:
            b._accumulate(av.T @ g)

    return _result(av @ bv, (a, b), backward)


def elementwise(a: Tensor, b: Tensor, kind: str) -> Tensor:
    _same_shape(a, b, kind)
    av, bv = a.values, b.values
    if kind == "add":
        def backward(g):
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(g)
        return _result(av + bv, (a, b), backward)
    if kind == "sub":
        def backward(g):
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(-g)
        return _result(av - bv, (a, b), backward)
    if kind == "mul":
        def backward(g):
            if a.requires_grad:
                a._accumulate(g * bv)
            if b.requires_grad:
                b._accumulate(g * av)
        return _result(av * bv, (a, b), backward)
    raise ValueError(f"unknown elementwise kind {kind!r}")


def add(a: Tensor, b: Tensor) -> Tensor:
    return elementwise(a, b, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    return elementwise(a, b, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    return elementwise(a, b, "mul")


def add_row(a: Tensor, row: Tensor) -> Tensor:
    """Add a 1 x cols bias row to every row of ``a``."""
    if row.shape != (1, a.shape[1]):
        raise DimensionError(f"add_row: {a.shape} + {row.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if row.requires_grad:
            row._accumulate(g.sum(axis=0, keepdims=True))

    return _result(a.values + row.values, (a, row), backward)


def scale(a: Tensor, s: Tensor | float) -> Tensor:
    """Scalar-times-tensor; ``s`` is a float or a 1x1 tensor."""
    if not isinstance(s, Tensor):
        c = float(s)

        def backward_const(g):
            a._accumulate(g * c)

        return _result(a.values * c, (a,), backward_const)
    if s.shape != (1, 1):
        raise DimensionError(f"scale: factor must be 1x1, got {s.shape}")
    av, sv = a.values, s.values[0, 0]

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * sv)
        if s.requires_grad:
            s._accumulate(np.array([[np.sum(g * av)]]))

    return _result(av * sv, (a, s), backward)


def abs(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    av = a.values
    sign = np.sign(av)

    def backward(g):
        a._accumulate(g * sign)

    return _result(np.abs(av), (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.values)

    def backward(g):
        a._accumulate(g * (1.0 - out * out))

    return _result(out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    av = a.values
    pos = (av > 0).astype(np.float64)

    def backward(g):
        a._accumulate(g * pos)

    return _result(av * pos, (a,), backward)


relu_max0 = relu

_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximated GELU."""
    x = a.values
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        a._accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner))

    return _result(out, (a,), backward)


def _stable_softmax(z: np.ndarray, axis: int) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax(a: Tensor, mask: Sequence[bool] | np.ndarray | None = None) -> Tensor:
    """Softmax over a vector; ``mask[i] == False`` drops entry ``i`` (weight -inf).

    Masked outputs are exactly zero and receive no gradient.
    """
    if 1 not in a.shape:
        raise DimensionError(f"softmax expects a vector, got {a.shape}")
    z = a.values.reshape(-1)
    if mask is None:
        keep = np.ones(z.shape, dtype=bool)
    else:
        keep = np.asarray(mask, dtype=bool).reshape(-1)
        if keep.shape != z.shape:
            raise DimensionError(f"softmax: mask length {keep.size} != {z.size}")
    if not keep.any():
        raise InvalidMaskError("softmax: every entry is masked")
    p = np.zeros_like(z)
    p[keep] = _stable_softmax(z[keep], axis=0)
    out = p.reshape(a.shape)

    def backward(g):
        gv = g.reshape(-1)
        a._accumulate((p * (gv - np.dot(gv, p))).reshape(a.shape))

    return _result(out, (a,), backward)


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax of a matrix (attention weights)."""
    p = _stable_softmax(a.values, axis=1)

    def backward(g):
        a._accumulate(p * (g - np.sum(g * p, axis=1, keepdims=True)))

    return _result(p, (a,), backward)


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    """Mean over all entries (1x1) or along ``axis`` keeping 2-D shape."""
    av = a.values
    if axis is None:
        n = av.size

        def backward_all(g):
            a._accumulate(np.full(av.shape, g[0, 0] / n))

        return _result(np.array([[av.mean()]]), (a,), backward_all)
    n = av.shape[axis]

    def backward(g):
        a._accumulate(np.broadcast_to(g / n, av.shape))

    return _result(av.mean(axis=axis, keepdims=True), (a,), backward)


def reduce_sum(a: Tensor) -> Tensor:
    av = a.values

    def backward(g):
        a._accumulate(np.full(av.shape, g[0, 0]))

    return _result(np.array([[av.sum()]]), (a,), backward)


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not parts:
        raise DimensionError("concat of nothing")
    other = 1 - axis
    if len({p.shape[other] for p in parts}) != 1:
        raise DimensionError(f"concat: incompatible shapes {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])
    out = np.concatenate([p.values for p in parts], axis=axis)

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                p._accumulate(g[:, lo:hi] if axis == 1 else g[lo:hi, :])

    return _result(out, tuple(parts), backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    av = a.values

    def backward(g):
        full = np.zeros_like(av)
        full[:, start:stop] = g
        a._accumulate(full)

    return _result(av[:, start:stop], (a,), backward)


def take_rows(table: Tensor, ids: Sequence[int] | np.ndarray) -> Tensor:
    """Gather rows of ``table`` (embedding lookup)."""
    idx = np.asarray(ids, dtype=np.int64)
    tv = table.values

    def backward(g):
        full = np.zeros_like(tv)
        np.add.at(full, idx, g)
        table._accumulate(full)

    return _result(tv[idx], (table,), backward)


def transpose(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g.T)

    return _result(a.values.T, (a,), backward)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise layer normalisation with learnable gain and bias rows."""
    d = a.shape[1]
    if gain.shape != (1, d) or bias.shape != (1, d):
        raise DimensionError("layer_norm: gain/bias must be 1 x cols")
    x = a.values
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gain.values + bias.values

    def backward(g):
        if gain.requires_grad:
            gain._accumulate(np.sum(g * xhat, axis=0, keepdims=True))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0, keepdims=True))
        if a.requires_grad:
            gx = g * gain.values
            a._accumulate(
                inv * (gx - gx.mean(axis=1, keepdims=True)
                       - xhat * np.mean(gx * xhat, axis=1, keepdims=True))
            )

    return _result(out, (a, gain, bias), backward)


def euclid(u: Tensor, v: Tensor) -> Tensor:
    """Euclidean distance between two equal-shape vectors; gradient 0 at u == v."""
    _same_shape(u, v, "euclid")
    diff = u.values - v.values
    dist = float(np.sqrt(np.sum(diff * diff)))

    def backward(g):
        unit = np.zeros_like(diff) if dist == 0.0 else diff * (g[0, 0] / dist)
        if u.requires_grad:
            u._accumulate(unit)
        if v.requires_grad:
            v._accumulate(-unit)

    return _result(np.array([[dist]]), (u, v), backward)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; identity outside training or when ``p == 0``."""
    if not train or p <= 0.0:
        return a
    keep = rng.random(a.shape) >= p
    return mul(a, constant(keep / (1.0 - p)))


# --------------------------------------------------------------------------
# backward pass


@dataclass
class Tape:
    """Ancestors of a loss in construction order."""

    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def from_loss(cls, loss: Tensor) -> Tape:
        seen: set[int] = set()
        nodes: list[Tensor] = []
        stack = [loss]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t.parents)
        nodes.sort(key=lambda t: t.seq)
        return cls(nodes)

    def replay(self, loss: Tensor) -> None:
        interior = [n for n in self.nodes if n._backward is not None]
        for node in interior:
            node.grad = None
        loss.grad = np.ones((1, 1))
        for node in reversed(interior):
            if node.grad is not None:
                node._backward(node.grad)
        # leaves keep accumulating across calls; interior grads are scratch
        for node in interior:
            node.grad = None


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every requires-grad leaf feeding ``loss``."""
    if loss.shape != (1, 1):
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    Tape.from_loss(loss).replay(loss)


# --------------------------------------------------------------------------
# optimisation


@dataclass
class ParamGroup:
    name: str
    params: list[Tensor]
    lr: float
    frozen: bool = False


@dataclass
class Adam:
    """Adam with per-group learning rates; moments persist across steps."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)
    t: dict[int, int] = field(default_factory=dict)

    def step(self, groups: Iterable[ParamGroup]) -> None:
        for group in groups:
            if group.frozen:
                continue
            for p in group.params:
                if p.grad is None:
                    continue
                key = id(p)
                m = self.m.setdefault(key, np.zeros_like(p.values))
                v = self.v.setdefault(key, np.zeros_like(p.values))
                t = self.t.get(key, 0) + 1
                self.t[key] = t
                m *= self.beta1
                m += (1 - self.beta1) * p.grad
                v *= self.beta2
                v += (1 - self.beta2) * p.grad * p.grad
                mhat = m / (1 - self.beta1**t)
                vhat = v / (1 - self.beta2**t)
                p.values -= group.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state_arrays(self, params: Sequence[Tensor]) -> list[np.ndarray]:
        """Moments and step counts laid out in ``params`` order."""
        out = []
        for p in params:
            key = id(p)
            out.append(self.m.get(key, np.zeros_like(p.values)))
            out.append(self.v.get(key, np.zeros_like(p.values)))
            out.append(np.array([[float(self.t.get(key, 0))]]))
        return out

    def load_state_arrays(self, params: Sequence[Tensor], arrays: Sequence[np.ndarray]) -> None:
        self.m.clear(), self.v.clear(), self.t.clear()
        for i, p in enumerate(params):
            m, v, t = arrays[3 * i: 3 * i + 3]
            steps = int(t[0, 0])
            if steps:
                self.m[id(p)] = np.array(m, dtype=np.float64)
                self.v[id(p)] = np.array(v, dtype=np.float64)
                self.t[id(p)] = steps


def adam_step(groups: Iterable[ParamGroup], optimizer: Adam) -> None:
    optimizer.step(groups)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# --------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    probes: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def _rel(analytic: float, numeric: float, floor: float) -> float:
    return float(np.abs(analytic - numeric) / max(np.abs(analytic), np.abs(numeric), floor))


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
    tol: float = 1e-4,
    max_probes: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare tape gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` must rebuild the graph on every call and be deterministic.
    When ``max_probes`` is given, that many entries are sampled across params.
    """
    zero_grad(params)
    backward(loss_fn())
    analytic = [np.zeros_like(p.values) if p.grad is None else p.grad.copy() for p in params]
    zero_grad(params)

    coords = [(i, idx) for i, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if max_probes is not None and max_probes < len(coords):
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(coords), size=max_probes, replace=False)
        coords = [coords[j] for j in sorted(pick)]

    worst = 0.0
    with no_grad():
        for i, idx in coords:
            p = params[i]
            orig = p.values[idx]
            p.values[idx] = orig + step
            up = loss_fn().item()
            p.values[idx] = orig - step
            down = loss_fn().item()
            p.values[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ProbeError(f"non-finite loss probing param {i} at {idx}")
            numeric = (up - down) / (2 * step)
            worst = max(worst, _rel(analytic[i][idx], numeric, floor))
    return GradCheckReport(worst, tol, len(coords))


def grad_check(
    f: Callable[[Tensor], Tensor],
    point: Tensor | np.ndarray,
    step: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Check d f(x)/dx at ``point`` for a scalar-valued tensor function."""
    x = point if isinstance(point, Tensor) else Tensor(point)
    x = Tensor(x.values.copy(), requires_grad=True)
    return grad_check_params(lambda: f(x), [x], step=step, tol=tol, floor=floor)
