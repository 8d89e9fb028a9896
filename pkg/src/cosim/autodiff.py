"""Dense reverse-mode autodiff on numpy float64 arrays.

Operations executed while a :class:`Tape` is active are recorded together
with a vector-Jacobian product closure; :meth:`Tape.backward` replays them in
reverse creation order.  Without an active tape every op is a plain numpy
evaluation (inference mode).

Matrix ops act on the last two axes, so a leading axis batches graphs or
pairs; binary elementwise ops broadcast numpy-style and reduce gradients
back to each operand's shape.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

_state = threading.local()


def _stack() -> list:
    st = getattr(_state, "tapes", None)
    if st is None:
        st = _state.tapes = []
    return st


def current_tape():
    st = _stack()
    return st[-1] if st else None


class ShapeError(ValueError):
    pass


class Tensor:
    """A float64 array plus the bookkeeping needed to differentiate through it."""

    __slots__ = ("data", "requires_grad", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _not_scalar(t):
    raise ShapeError(f"expected a single-element tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


@dataclass
class _Node:
    out: Tensor
    parents: tuple
    vjp: object


@dataclass
class Tape:
    """Ordered record of primitive applications (creation order is topological)."""

    nodes: list = field(default_factory=list)

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    def record(self, out: Tensor, parents: tuple, vjp) -> None:
        self.nodes.append(_Node(out, parents, vjp))

    def backward(self, loss: Tensor, params: dict | None = None) -> dict:
        """Gradients of a scalar ``loss``.

        Returns ``{name: ndarray}`` for every named leaf reached, plus zero
        arrays for entries of ``params`` the loss does not depend on.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise ShapeError(f"vjp produced {pg.shape} for input of shape {parent.shape}")
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                if parent.name is not None:
                    leaves[key] = parent
        out = {}
        for key, t in leaves.items():
            if key in grads:
                out[t.name] = grads[key]
        if params is not None:
            for name, p in params.items():
                if name not in out:
                    out[name] = np.zeros_like(p.data)
        return out


@contextmanager
def no_grad():
    """Evaluate without recording, even inside an enclosing tape."""
    _stack().append(None)
    try:
        yield
    finally:
        _stack().pop()


def _make(data: np.ndarray, parents: tuple, vjp) -> Tensor:
    st = getattr(_state, "tapes", None)
    tape = st[-1] if st else None
    if tape is None or not any(p.requires_grad for p in parents):
        return Tensor(data)
    out = Tensor(data, True)
    tape.record(out, parents, vjp)
    return out


# ---------------------------------------------------------------------------
# Kink monitoring for finite-difference checks

_kinks = threading.local()


def _kink_log():
    return getattr(_kinks, "log", None)


@contextmanager
def record_kinks():
    """Collect the sign pattern of every ReLU-family input evaluated inside."""
    prev = _kink_log()
    _kinks.log = []
    try:
        yield _kinks.log
    finally:
        _kinks.log = prev


def _note_kink(x: np.ndarray):
    log = _kink_log()
    if log is not None:
        log.append(x > 0)


# ---------------------------------------------------------------------------
# Primitives
#
# Matrices live in the last two axes; any leading axes are a batch.  Binary
# elementwise ops follow numpy broadcasting and reduce gradients back to each
# input's shape.


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_mat(op: str, *ts):
    for t in ts:
        if t.data.ndim < 2:
            raise ShapeError(f"{op} expects tensors with at least 2 axes, got shape {t.shape}")


def _bshape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op} shape mismatch: {a.shape} vs {b.shape}") from None


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_mat("matmul", a, b)
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return _make(ad @ bd, (a, b), vjp)


def transpose(a) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    _check_mat("transpose", a)
    return _make(np.swapaxes(a.data, -1, -2).copy(), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape("add", a, b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape("sub", a, b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape("mul", a, b)
    ad, bd = a.data, b.data

    def vjp(g):
        return (_unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
                _unbroadcast(g * ad, bd.shape) if b.requires_grad else None)

    return _make(ad * bd, (a, b), vjp)


def scale(a, alpha: float, beta: float = 0.0) -> Tensor:
    """``alpha * a + beta`` for scalar constants."""
    a = as_tensor(a)
    return _make(alpha * a.data + beta, (a,), lambda g: (alpha * g,))


def mul_scalar(a, s) -> Tensor:
    """``a`` times a single-element tensor ``s``."""
    a, s = as_tensor(a), as_tensor(s)
    if s.data.size != 1:
        raise ShapeError(f"mul_scalar needs a single-element multiplier, got shape {s.shape}")
    ad, sv = a.data, s.data.reshape(-1)[0]
    shape = s.shape
    return _make(ad * sv, (a, s),
                 lambda g: (g * sv, np.full(shape, float((g * ad).sum()))))


def relu(a) -> Tensor:
    a = as_tensor(a)
    _note_kink(a.data)
    pos = a.data > 0
    return _make(np.where(pos, a.data, 0.0), (a,), lambda g: (g * pos,))


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    _note_kink(a.data)
    k = np.where(a.data > 0, 1.0, slope)
    return _make(a.data * k, (a,), lambda g: (g * k,))


def softmax_rows(a, mask=None) -> Tensor:
    """Softmax along the last axis; ``mask`` (bool, broadcastable) keeps True entries.

    A row with no admissible entry yields a zero row.
    """
    a = as_tensor(a)
    x = a.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        try:
            np.broadcast_shapes(mask.shape, x.shape)
        except ValueError:
            raise ShapeError(f"softmax mask shape {mask.shape} does not match {x.shape}") from None
        x = np.where(mask, x, -np.inf)
    mx = np.max(x, axis=-1, keepdims=True)
    if mask is None:
        # unmasked rows always hold their max, so the sum is >= 1
        e = np.exp(x - mx)
        y = e / e.sum(axis=-1, keepdims=True)
    else:
        mx = np.where(np.isfinite(mx), mx, 0.0)
        e = np.exp(x - mx)
        s = e.sum(axis=-1, keepdims=True)
        y = np.divide(e, s, out=np.zeros_like(e), where=s > 0)
    return _make(y, (a,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


def sum_rows(a) -> Tensor:
    """Sum over the row axis: ``... x n x d -> ... x 1 x d``."""
    a = as_tensor(a)
    _check_mat("sum_rows", a)
    shape = a.shape
    return _make(a.data.sum(axis=-2, keepdims=True), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_rows(a, counts=None) -> Tensor:
    """Mean over the row axis; ``counts`` (broadcastable ``... x 1 x 1``) overrides
    the divisor so zero padding rows can be ignored."""
    a = as_tensor(a)
    _check_mat("mean_rows", a)
    shape = a.shape
    div = np.asarray(counts, dtype=np.float64) if counts is not None else float(shape[-2])
    return _make(a.data.sum(axis=-2, keepdims=True) / div, (a,),
                 lambda g: (np.broadcast_to(g / div, shape).copy(),))


def sum_cols(a) -> Tensor:
    """Sum over the last axis: ``... x n x d -> ... x n x 1``."""
    a = as_tensor(a)
    shape = a.shape
    return _make(a.data.sum(axis=-1, keepdims=True), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _make(np.array([[a.data.sum()]]), (a,), lambda g: (np.full(shape, g.item()),))


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    shape, size = a.shape, a.data.size
    return _make(np.array([[a.data.mean()]]), (a,), lambda g: (np.full(shape, g.item() / size),))


def _concat(op, ts, axis):
    ts = [as_tensor(t) for t in ts]
    _check_mat(op, *ts)
    other = {t.shape[:axis] + t.shape[axis + 1:] if axis != -1 else t.shape[:-1] for t in ts}
    if len(other) != 1:
        raise ShapeError(f"{op} shape mismatch: {[t.shape for t in ts]}")
    cuts = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(np.concatenate([t.data for t in ts], axis=axis), tuple(ts),
                 lambda g: tuple(np.split(g, cuts, axis=axis)))


def concat_cols(ts) -> Tensor:
    return _concat("concat_cols", ts, -1)


def concat_rows(ts) -> Tensor:
    return _concat("concat_rows", ts, -2)


def l2_normalize_rows(a) -> Tensor:
    """Unit L2 norm along the last axis; an all-zero row stays zero with zero gradient."""
    a = as_tensor(a)
    r = np.sqrt((a.data * a.data).sum(axis=-1, keepdims=True))
    inv = np.divide(1.0, r, out=np.zeros_like(r), where=r > 0)
    y = a.data * inv
    return _make(y, (a,), lambda g: ((g - y * (g * y).sum(axis=-1, keepdims=True)) * inv,))


def cosine_rows(a, b) -> Tensor:
    """Cosine between matching rows of ``a`` and ``b`` (``... x n x 1``); zero rows give 0."""
    return sum_cols(mul(l2_normalize_rows(a), l2_normalize_rows(b)))


def row_l1_normalize(a) -> Tensor:
    """Divide each row of a nonnegative array by its sum (last axis)."""
    a = as_tensor(a)
    s = a.data.sum(axis=-1, keepdims=True)
    if np.any(s <= 0):
        raise ValueError("row_l1_normalize needs rows with positive sums")
    y = a.data / s
    return _make(y, (a,), lambda g: ((g - (g * y).sum(axis=-1, keepdims=True)) / s,))


def outer_add(u, v) -> Tensor:
    """``u (... x n x 1) + v (... x 1 x m) -> ... x n x m``."""
    u, v = as_tensor(u), as_tensor(v)
    _check_mat("outer_add", u, v)
    if u.shape[-1] != 1 or v.shape[-2] != 1:
        raise ShapeError(f"outer_add needs n x 1 and 1 x m, got {u.shape} and {v.shape}")
    return add(u, v)


def affine(x, w, b=None) -> Tensor:
    """``x @ w + b`` over the last axis of ``x``; ``w`` is ``k x m``, ``b`` is ``1 x m``."""
    x, w = as_tensor(x), as_tensor(w)
    if w.data.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"affine shape mismatch: {x.shape} @ {w.shape}")
    xs = x.shape
    xd = x.data.reshape(-1, xs[-1])
    wd = w.data
    out = (xd @ wd).reshape(xs[:-1] + (wd.shape[1],))
    if b is None:
        def vjp(g):
            g2 = g.reshape(-1, wd.shape[1])
            return ((g2 @ wd.T).reshape(xs) if x.requires_grad else None, xd.T @ g2)

        return _make(out, (x, w), vjp)
    b = as_tensor(b)
    if b.shape != (1, wd.shape[1]):
        raise ShapeError(f"affine bias shape {b.shape} does not match output width {wd.shape[1]}")

    def vjp_b(g):
        g2 = g.reshape(-1, wd.shape[1])
        return ((g2 @ wd.T).reshape(xs) if x.requires_grad else None, xd.T @ g2,
                g2.sum(axis=0, keepdims=True))

    return _make(out + b.data, (x, w, b), vjp_b)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        y = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {old} to {tuple(shape)}") from exc
    return _make(y.copy(), (a,), lambda g: (g.reshape(old),))


def rows(a, start: int, stop: int) -> Tensor:
    """Slice ``start:stop`` along the row axis."""
    a = as_tensor(a)
    _check_mat("rows", a)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        full[..., start:stop, :] = g
        return (full,)

    return _make(a.data[..., start:stop, :].copy(), (a,), vjp)


def take(a, index) -> Tensor:
    """Gather along the leading (batch) axis; indices may repeat."""
    a = as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], (a,), vjp)


def mse(pred, target) -> Tensor:
    """Mean squared difference against a constant target array."""
    pred = as_tensor(pred)
    if pred.data.size == 0:
        raise ShapeError("mse of an empty batch")
    t = np.asarray(target, dtype=np.float64)
    if t.size != pred.data.size:
        raise ShapeError(f"mse size mismatch: {pred.shape} vs {t.shape}")
    diff = pred.data - t.reshape(pred.shape)
    n = diff.size
    return _make(np.array([[np.mean(diff * diff)]]), (pred,),
                 lambda g: (g.item() * 2.0 * diff / n,))


@dataclass
class BatchNormState:
    """Running per-feature statistics for :func:`batchnorm`."""

    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.9
    eps: float = 1e-5

    @classmethod
    def fresh(cls, d: int, momentum: float = 0.9, eps: float = 1e-5):
        return cls(np.zeros((1, d)), np.ones((1, d)), momentum, eps)


def batchnorm(x, gamma, beta, state: BatchNormState, train: bool, update: bool = True,
              mask=None) -> Tensor:
    """Per-feature normalization over the node (row) axis of each graph.

    ``x`` is ``n x d`` or ``B x n x d``; ``mask`` (``B x n x 1``, 0/1) marks
    real nodes in zero-padded batches and padded rows come out as zero.
    Training mode uses each graph's own statistics and, when ``update``,
    folds their average over the batch into the running values with one
    momentum step.  Eval mode uses the running values.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    _check_mat("batchnorm", x)
    d = x.shape[-1]
    if gamma.shape != (1, d) or beta.shape != (1, d):
        raise ShapeError(f"batchnorm scale/shift must be 1 x {d}, got {gamma.shape}, {beta.shape}")
    xd, gd = x.data, gamma.data
    if mask is None:
        # scalar weight: every row is a real node
        m, cnt = 1.0, float(xd.shape[-2])
    else:
        m = np.asarray(mask, dtype=np.float64)
        cnt = m.sum(axis=-2, keepdims=True)
    if train:
        mu = (xd * m).sum(axis=-2, keepdims=True) / cnt
        xc = (xd - mu) * m
        var = (xc * xc).sum(axis=-2, keepdims=True) / cnt
        if update:
            # one momentum update per call, from the graph-averaged statistics
            ns = np.reshape(cnt, (-1, 1))
            unbiased = var.reshape(-1, d) * np.where(ns > 1, ns / np.maximum(ns - 1, 1), 1.0)
            state.mean = state.momentum * state.mean + (1.0 - state.momentum) * mu.reshape(-1, d).mean(
                axis=0, keepdims=True)
            state.var = state.momentum * state.var + (1.0 - state.momentum) * unbiased.mean(
                axis=0, keepdims=True)
        istd = 1.0 / np.sqrt(var + state.eps)
        xhat = xc * istd

        def vjp(g):
            gm = g * m
            gx = gm * gd
            mean_gx = gx.sum(axis=-2, keepdims=True) / cnt
            mean_gxh = (gx * xhat).sum(axis=-2, keepdims=True) / cnt
            dx = istd * (gx - mean_gx - xhat * mean_gxh) * m
            return (dx, _unbroadcast(gm * xhat, gd.shape), _unbroadcast(gm, gd.shape))
    else:
        istd = 1.0 / np.sqrt(state.var + state.eps)
        xhat = (xd - state.mean) * istd * m

        def vjp(g):
            gm = g * m
            return (gm * gd * istd, _unbroadcast(gm * xhat, gd.shape), _unbroadcast(gm, gd.shape))

    return _make((xhat * gd + beta.data) * m, (x, gamma, beta), vjp)


# ---------------------------------------------------------------------------
# Finite-difference checking


class NondeterministicBuild(RuntimeError):
    pass


@dataclass
class GradcheckReport:
    max_rel_err: float
    offending_param: str | None
    offending_index: tuple | None
    checked: int
    skipped_kinks: int
    per_param: dict

    def passed(self, tol: float) -> bool:
        return self.max_rel_err < tol


def rel_error(a: float, n: float, floor: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), floor)


def gradcheck(build, params: dict, eps: float = 1e-4, samples: int = 500, seed: int = 0,
              floor: float = 1e-6) -> GradcheckReport:
    """Compare tape gradients of ``build()`` with central differences.

    ``build`` takes no arguments and returns a scalar loss computed from the
    tensors in ``params``.  At least ``samples`` coordinates are checked (all
    of them when fewer exist), with every parameter represented.  A
    coordinate whose perturbation flips any ReLU-family input sign is
    skipped and replaced.  Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    with no_grad():
        f0 = build().data.copy()
        f1 = build().data.copy()
    if not np.array_equal(f0, f1):
        raise NondeterministicBuild("two forward passes with identical parameters disagree")
    with Tape() as tape:
        loss = build()
    analytic = tape.backward(loss, params)

    rng = np.random.default_rng(seed)
    names = sorted(params)
    sizes = np.array([params[k].data.size for k in names])
    total = int(sizes.sum())
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    # one guaranteed coordinate per parameter, the rest uniform over all coordinates
    first = [int(offsets[i] + rng.integers(sizes[i])) for i in range(len(names)) if sizes[i]]
    seen = set(first)
    rest = [i for i in rng.permutation(total).tolist() if i not in seen]
    queue = first + rest
    target = min(max(samples, len(first)), total)

    def loss_at():
        with no_grad(), record_kinks() as kinks:
            val = build().item()
        return val, kinks

    with no_grad(), record_kinks() as base_kinks:
        build()

    def same_pattern(ks):
        return len(ks) == len(base_kinks) and all(np.array_equal(a, b) for a, b in zip(ks, base_kinks))

    worst, worst_name, worst_idx = 0.0, None, None
    per_param: dict = {}
    checked = skipped = 0
    for flat in queue:
        if checked >= target:
            break
        pi = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[pi]
        arr = params[name].data
        idx = np.unravel_index(flat - offsets[pi], arr.shape)
        orig = arr[idx]
        arr[idx] = orig + eps
        fp, kp = loss_at()
        arr[idx] = orig - eps
        fm, km = loss_at()
        arr[idx] = orig
        if not (same_pattern(kp) and same_pattern(km)):
            skipped += 1
            continue
        num = (fp - fm) / (2 * eps)
        err = rel_error(float(analytic[name][idx]), num, floor)
        checked += 1
        per_param[name] = max(per_param.get(name, 0.0), err)
        if err > worst:
            worst, worst_name, worst_idx = err, name, tuple(int(i) for i in idx)
    return GradcheckReport(worst, worst_name, worst_idx, checked, skipped, per_param)
