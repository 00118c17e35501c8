"""Tiny transformer repair model: tokens, forward pass, training, and I/O.

Each variable becomes one token: a learned value embedding plus a learned
position embedding, plus a shared "selected for repair" embedding on flagged
positions. Edge-based problems additionally mix in a per-token conflict
fraction (violated constraints touching the variable, normalized) through a
learned projection, since positions alone carry no adjacency information
there. A stack of pre-norm attention blocks maps tokens to per-variable
logits over the domain.

The network is small and fixed, so the forward and backward passes are
written directly in numpy (float64) and verified against central finite
differences; parameters serialize as little-endian float32.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .csp import CspInstance, ProblemKind, conflict_fractions, one_hot, validate_assignment
from .errors import CapacityError, ConfigError, ModelFormatError, TrainingFault
from .gradients import loss_grad_wrt_q, loss_value, softmax_rows, softmax_rows_backward

LN_EPS = 1e-5
MAGIC = b"NLNS"
FORMAT_VERSION = 1
FFN_MULT = 4

_KIND_IDS = {ProblemKind.SUDOKU: 0, ProblemKind.GRAPH_COLORING: 1, ProblemKind.MAXCUT: 2}
_IDS_KIND = {v: k for k, v in _KIND_IDS.items()}


@dataclass(frozen=True)
class ModelHyper:
    """Architecture description; desk-scale defaults."""

    domain_size: int
    kind: ProblemKind
    n_layers: int = 2
    width: int = 64
    n_heads: int = 4
    n_max: int = 256
    use_conflict: bool = False

    def __post_init__(self):
        if self.width % self.n_heads != 0:
            raise ConfigError(f"width {self.width} not divisible by {self.n_heads} heads")
        if min(self.domain_size, self.n_layers, self.width, self.n_heads, self.n_max) < 1:
            raise ConfigError("all architecture sizes must be >= 1")


def hyper_for_instance(instance: CspInstance, **overrides) -> ModelHyper:
    """Desk-scale hyperparameters matched to an instance's problem kind."""
    kw = dict(
        domain_size=instance.domain_size,
        kind=instance.problem_kind,
        use_conflict=instance.problem_kind is not ProblemKind.SUDOKU,
    )
    kw.update(overrides)
    return ModelHyper(**kw)


def param_spec(hyper: ModelHyper) -> list[tuple[str, tuple[int, ...]]]:
    """Declaration-ordered (name, shape) pairs; also the serialization order."""
    h, d = hyper.width, hyper.domain_size
    f = FFN_MULT * h
    spec = [
        ("value_emb", (d + 1, h)),  # one row per value plus a spare blank row
        ("pos_emb", (hyper.n_max, h)),
        ("destroy_emb", (h,)),
        ("conflict_proj", (h,)),
    ]
    for b in range(hyper.n_layers):
        p = f"blocks.{b}."
        spec += [
            (p + "ln1.g", (h,)), (p + "ln1.b", (h,)),
            (p + "attn.wq", (h, h)), (p + "attn.bq", (h,)),
            (p + "attn.wk", (h, h)), (p + "attn.bk", (h,)),
            (p + "attn.wv", (h, h)), (p + "attn.bv", (h,)),
            (p + "attn.wo", (h, h)), (p + "attn.bo", (h,)),
            (p + "ln2.g", (h,)), (p + "ln2.b", (h,)),
            (p + "mlp.w1", (h, f)), (p + "mlp.b1", (f,)),
            (p + "mlp.w2", (f, h)), (p + "mlp.b2", (h,)),
        ]
    spec += [("ln_f.g", (h,)), ("ln_f.b", (h,)), ("head", (h, d))]
    return spec


@dataclass(eq=False)
class RepairModel:
    """Parameter store for the repair network. Training mutates it in place."""

    hyper: ModelHyper
    params: dict[str, np.ndarray]
    _adam: dict | None = field(default=None, repr=False)

    def copy(self) -> "RepairModel":
        return RepairModel(self.hyper, {k: v.copy() for k, v in self.params.items()})


def init_model(hyper: ModelHyper, seed: int = 0) -> RepairModel:
    """Fresh model: N(0, 0.02) weights, unit layer-norm gains, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_spec(hyper):
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            params[name] = np.ones(shape)
        elif leaf in ("b", "bq", "bk", "bv", "bo", "b1", "b2"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, 0.02, size=shape)
    return RepairModel(hyper, params)


# ---------------------------------------------------------------------------
# forward / backward


def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)

def _layernorm_backward(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _silu(u):
    s = 1.0 / (1.0 + np.exp(-u))
    return u * s, s

def _silu_backward(du_out, u, s):
    return du_out * s * (1.0 + u * (1.0 - s))


def _split_heads(x, n_heads):
    b, n, h = x.shape
    return x.reshape(b, n, n_heads, h // n_heads).transpose(0, 2, 1, 3)

def _merge_heads(x):
    b, nh, n, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, nh * dk)


def _embed(params, hyper, xv, mask, conflict):
    e = params["value_emb"][xv] + params["pos_emb"][: xv.shape[1]]
    e = e + mask[..., None] * params["destroy_emb"]
    if hyper.use_conflict:
        e = e + conflict[..., None] * params["conflict_proj"]
    return e


def _forward_batch(params, hyper, xv, mask, conflict, want_cache=False):
    """Batched forward pass. xv, mask, conflict: (B, n) arrays."""
    nh = hyper.n_heads
    scale = 1.0 / np.sqrt(hyper.width // nh)
    hcur = _embed(params, hyper, xv, mask, conflict)
    blocks = []
    for b in range(hyper.n_layers):
        p = f"blocks.{b}."
        a, ln1 = _layernorm(hcur, params[p + "ln1.g"], params[p + "ln1.b"])
        qh = _split_heads(a @ params[p + "attn.wq"] + params[p + "attn.bq"], nh)
        kh = _split_heads(a @ params[p + "attn.wk"] + params[p + "attn.bk"], nh)
        vh = _split_heads(a @ params[p + "attn.wv"] + params[p + "attn.bv"], nh)
        scores = (qh @ np.swapaxes(kh, -1, -2)) * scale
        att = softmax_rows(scores)
        ctx = _merge_heads(att @ vh)
        h1 = hcur + ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        f, ln2 = _layernorm(h1, params[p + "ln2.g"], params[p + "ln2.b"])
        u = f @ params[p + "mlp.w1"] + params[p + "mlp.b1"]
        act, sig = _silu(u)
        h2 = h1 + act @ params[p + "mlp.w2"] + params[p + "mlp.b2"]
        if want_cache:
            blocks.append((hcur, a, ln1, qh, kh, vh, att, ctx, h1, f, ln2, u, sig, act))
        hcur = h2
    y, lnf = _layernorm(hcur, params["ln_f.g"], params["ln_f.b"])
    z = y @ params["head"]
    cache = (xv, mask, conflict, blocks, y, lnf) if want_cache else None
    return z, cache


def _backward_batch(params, hyper, cache, dz):
    """Parameter gradients of a scalar loss given dLoss/dlogits."""
    xv, mask, conflict, blocks, y, lnf = cache
    nh = hyper.n_heads
    scale = 1.0 / np.sqrt(hyper.width // nh)
    grads = {k: np.zeros_like(v) for k, v in params.items()}

    grads["head"] += np.einsum("bnh,bnd->hd", y, dz)
    dy = dz @ params["head"].T
    dhcur, grads["ln_f.g"], grads["ln_f.b"] = _layernorm_backward(dy, params["ln_f.g"], lnf)

    for b in reversed(range(hyper.n_layers)):
        p = f"blocks.{b}."
        hin, a, ln1, qh, kh, vh, att, ctx, h1, f, ln2, u, sig, act = blocks[b]
        # feed-forward branch
        dh1 = dhcur.copy()
        grads[p + "mlp.w2"] += np.einsum("bnf,bnh->fh", act, dhcur)
        grads[p + "mlp.b2"] += dhcur.sum(axis=(0, 1))
        du = _silu_backward(dhcur @ params[p + "mlp.w2"].T, u, sig)
        grads[p + "mlp.w1"] += np.einsum("bnh,bnf->hf", f, du)
        grads[p + "mlp.b1"] += du.sum(axis=(0, 1))
        df = du @ params[p + "mlp.w1"].T
        dh1_ln, grads[p + "ln2.g"], grads[p + "ln2.b"] = _layernorm_backward(
            df, params[p + "ln2.g"], ln2)
        dh1 += dh1_ln
        # attention branch
        dhcur_res = dh1.copy()
        grads[p + "attn.wo"] += np.einsum("bnh,bnk->hk", ctx, dh1)
        grads[p + "attn.bo"] += dh1.sum(axis=(0, 1))
        dctx = _split_heads(dh1 @ params[p + "attn.wo"].T, nh)
        datt = dctx @ np.swapaxes(vh, -1, -2)
        dvh = np.swapaxes(att, -1, -2) @ dctx
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
        dqh = (dscores @ kh) * scale
        dkh = (np.swapaxes(dscores, -1, -2) @ qh) * scale
        dq, dk, dv = _merge_heads(dqh), _merge_heads(dkh), _merge_heads(dvh)
        grads[p + "attn.wq"] += np.einsum("bnh,bnk->hk", a, dq)
        grads[p + "attn.bq"] += dq.sum(axis=(0, 1))
        grads[p + "attn.wk"] += np.einsum("bnh,bnk->hk", a, dk)
        grads[p + "attn.bk"] += dk.sum(axis=(0, 1))
        grads[p + "attn.wv"] += np.einsum("bnh,bnk->hk", a, dv)
        grads[p + "attn.bv"] += dv.sum(axis=(0, 1))
        da = dq @ params[p + "attn.wq"].T + dk @ params[p + "attn.wk"].T + dv @ params[p + "attn.wv"].T
        da_ln, grads[p + "ln1.g"], grads[p + "ln1.b"] = _layernorm_backward(
            da, params[p + "ln1.g"], ln1)
        dhcur = dhcur_res + da_ln

    de = dhcur
    np.add.at(grads["value_emb"], xv.reshape(-1), de.reshape(-1, hyper.width))
    grads["pos_emb"][: xv.shape[1]] += de.sum(axis=0)
    grads["destroy_emb"] += (mask[..., None] * de).sum(axis=(0, 1))
    if hyper.use_conflict:
        grads["conflict_proj"] += (conflict[..., None] * de).sum(axis=(0, 1))
    return grads


def forward(model: RepairModel, instance: CspInstance, x: np.ndarray,
            m: np.ndarray) -> np.ndarray:
    """Logits over the domain for every variable; pure in (params, inputs)."""
    hyper = model.hyper
    if instance.n > hyper.n_max:
        raise CapacityError(f"instance has {instance.n} variables, model capacity is {hyper.n_max}")
    if instance.domain_size != hyper.domain_size:
        raise ConfigError(
            f"model domain size {hyper.domain_size} does not match instance ({instance.domain_size})")
    x = validate_assignment(instance, x)
    m = np.asarray(m, dtype=bool)
    if m.shape != (instance.n,):
        raise ConfigError(f"mask shape {m.shape} does not match n={instance.n}")
    conflict = conflict_fractions(instance, x)[None] if hyper.use_conflict else None
    z, _ = _forward_batch(model.params, hyper, x[None], m[None].astype(np.float64), conflict)
    return z[0]


# ---------------------------------------------------------------------------
# Gumbel-softmax sampling


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    u = np.clip(rng.random(shape), 1e-12, 1.0 - 1e-12)
    return -np.log(-np.log(u))


def gumbel_softmax_sample(z_row: np.ndarray, tau: float,
                          rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Relaxed categorical draw from a logits row.

    Returns ``(soft, hard)`` where soft = softmax((z + gumbel) / tau) and
    hard is the argmax of soft. The hard index is the sample used forward;
    training backpropagates through the soft vector (straight-through).
    """
    if not tau > 0:
        raise ValueError(f"gumbel temperature must be positive, got {tau}")
    z_row = np.asarray(z_row, dtype=np.float64)
    soft = softmax_rows((z_row + gumbel_noise(rng, z_row.shape)) / tau)
    return soft, int(np.argmax(soft))


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    """Self-supervised training settings."""

    learning_rate: float = 1e-3
    batch_size: int = 32
    steps: int = 2000
    tau: float = 1.0
    destroy_rate: float = 0.3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    tau_schedule: Callable[[int], float] | None = None  # step -> temperature

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be >= 0")
        if not self.tau > 0:
            raise ConfigError("gumbel temperature must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if not 0 < self.destroy_rate <= 1:
            raise ConfigError("destroy rate must be in (0, 1]")


def sample_training_case(instance: CspInstance, rate: float,
                         rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random assignment respecting givens plus a random nonempty repair mask."""
    x = instance.given_values.copy()
    free = instance.free_indices
    x[free] = rng.integers(0, instance.domain_size, size=free.size)
    mask = np.zeros(instance.n, dtype=bool)
    if free.size:
        for _ in range(16):
            mask[free] = rng.random(free.size) < rate
            if mask.any():
                break
        else:
            mask[rng.choice(free)] = True
    return x, mask


def _training_loss_and_grads(params, hyper, cases, gumbels, tau):
    """Mean masked-penalty loss over cases and its parameter gradients.

    ``cases`` is a list of (instance, x, mask); ``gumbels`` a per-case (n, d)
    noise array. Randomness lives entirely in the arguments so callers can
    re-evaluate at perturbed parameters (finite-difference checks).
    """
    n = cases[0][1].size
    xv = np.stack([x for _, x, _ in cases])
    mk = np.stack([m for _, _, m in cases]).astype(np.float64)
    conflict = None
    if hyper.use_conflict:
        conflict = np.stack([conflict_fractions(inst, x) for inst, x, _ in cases])
    z, cache = _forward_batch(params, hyper, xv, mk, conflict, want_cache=True)

    dz = np.zeros_like(z)
    losses = []
    for e, (inst, x, mask) in enumerate(cases):
        rows = np.flatnonzero(mask)
        soft = softmax_rows((z[e, rows] + gumbels[e][rows]) / tau)
        q = one_hot(inst, x)
        q[rows] = soft
        losses.append(loss_value(inst, q))
        dsoft = loss_grad_wrt_q(inst, q)[rows]
        dz[e, rows] = softmax_rows_backward(dsoft, soft) / tau
    dz /= len(cases)
    grads = _backward_batch(params, hyper, cache, dz)
    return float(np.mean(losses)), grads


def _adam_update(model: RepairModel, grads, cfg: TrainConfig):
    if model._adam is None:
        model._adam = {
            "m": {k: np.zeros_like(v) for k, v in model.params.items()},
            "v": {k: np.zeros_like(v) for k, v in model.params.items()},
            "t": 0,
        }
    st = model._adam
    st["t"] += 1
    b1c = 1.0 - cfg.beta1 ** st["t"]
    b2c = 1.0 - cfg.beta2 ** st["t"]
    for k, p in model.params.items():
        g = grads[k]
        st["m"][k] = cfg.beta1 * st["m"][k] + (1.0 - cfg.beta1) * g
        st["v"][k] = cfg.beta2 * st["v"][k] + (1.0 - cfg.beta2) * (g * g)
        p -= cfg.learning_rate * (st["m"][k] / b1c) / (np.sqrt(st["v"][k] / b2c) + cfg.eps)


def train_step(model: RepairModel, batch: list[CspInstance], cfg: TrainConfig,
               rng: np.random.Generator) -> tuple[RepairModel, float]:
    """One self-supervised update on a batch of same-size instances.

    Per instance: draw a random assignment and repair mask, run the model,
    splice the relaxed samples at masked positions into the one-hot
    assignment, and descend the penalty loss. Mutates the model in place and
    returns it with the mean batch loss.
    """
    if not batch:
        raise ConfigError("training batch must be nonempty")
    sizes = {inst.n for inst in batch}
    if len(sizes) != 1:
        raise ConfigError("all instances in a batch must have the same size")
    if max(sizes) > model.hyper.n_max:
        raise CapacityError(
            f"instance has {max(sizes)} variables, model capacity is {model.hyper.n_max}")
    if any(inst.domain_size != model.hyper.domain_size for inst in batch):
        raise ConfigError("instance domain size does not match the model")
    cases = []
    gumbels = []
    for inst in batch:
        x, mask = sample_training_case(inst, cfg.destroy_rate, rng)
        cases.append((inst, x, mask))
        gumbels.append(gumbel_noise(rng, (inst.n, inst.domain_size)))
    loss, grads = _training_loss_and_grads(model.params, model.hyper, cases, gumbels, cfg.tau)
    if not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads.values()):
        raise TrainingFault(f"non-finite loss or gradient at optimizer step (loss={loss})")
    _adam_update(model, grads, cfg)
    return model, loss


def train(model: RepairModel, dataset: list[CspInstance], cfg: TrainConfig,
          callback: Callable[[int, float], None] | None = None) -> list[float]:
    """Run cfg.steps updates sampling batches from the dataset with replacement."""
    if not dataset:
        raise ConfigError("training dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    history = []
    for step in range(cfg.steps):
        idx = rng.integers(0, len(dataset), size=cfg.batch_size)
        batch = [dataset[i] for i in idx]
        step_cfg = cfg
        if cfg.tau_schedule is not None:
            step_cfg = replace(cfg, tau=float(cfg.tau_schedule(step)), tau_schedule=None)
        _, loss = train_step(model, batch, step_cfg, rng)
        history.append(loss)
        if callback is not None:
            callback(step, loss)
    return history


# ---------------------------------------------------------------------------
# serialization: magic, version, hyper block, tensors as little-endian f32


def save_model(model: RepairModel, sink) -> None:
    """Write the model to a path or binary file object."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    h = model.hyper
    flags = 1 if h.use_conflict else 0
    buf.write(struct.pack("<7I", FORMAT_VERSION, h.n_layers, h.width, h.n_heads,
                          h.n_max, h.domain_size, flags))
    buf.write(struct.pack("<I", _KIND_IDS[h.kind]))
    for name, shape in param_spec(h):
        arr = model.params[name]
        if arr.shape != shape:
            raise ModelFormatError(f"parameter {name} has shape {arr.shape}, expected {shape}")
        buf.write(arr.astype("<f4").tobytes())
    data = buf.getvalue()
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as fh:
            fh.write(data)


def load_model(source) -> RepairModel:
    """Read a model from a path or binary file object."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise ModelFormatError("bad magic: not a repair-model file")
    header_len = 4 + 8 * 4
    if len(data) < header_len:
        raise ModelFormatError("truncated header")
    version, n_layers, width, n_heads, n_max, domain_size, flags, kind_id = struct.unpack(
        "<8I", data[4:header_len])
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    if kind_id not in _IDS_KIND:
        raise ModelFormatError(f"unknown problem kind id {kind_id}")
    try:
        hyper = ModelHyper(domain_size=domain_size, kind=_IDS_KIND[kind_id],
                           n_layers=n_layers, width=width, n_heads=n_heads,
                           n_max=n_max, use_conflict=bool(flags & 1))
    except ConfigError as exc:
        raise ModelFormatError(f"inconsistent hyperparameters: {exc}") from exc
    params = {}
    offset = header_len
    for name, shape in param_spec(hyper):
        nbytes = 4 * int(np.prod(shape))
        if offset + nbytes > len(data):
            raise ModelFormatError(f"truncated tensor data at {name}")
        arr = np.frombuffer(data[offset:offset + nbytes], dtype="<f4").reshape(shape)
        params[name] = arr.astype(np.float64)
        offset += nbytes
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after tensor data")
    for name, arr in params.items():
        if not np.all(np.isfinite(arr)):
            raise ModelFormatError(f"non-finite values in tensor {name}")
    return RepairModel(hyper, params)
