"""The three color+depth fusion regressors.

All share a pair of convolutional towers (one per modality, identical except
for the first layer's input channels) and a fully connected head ending in a
single unbounded angular-velocity output; they differ only in where the two
modality streams are joined:

* conemb — flattened conv features of both towers are concatenated (width 2F)
  and fed straight to the head.
* emb    — each tower's features are first projected to an embedding of width
  E; the two embeddings are concatenated (width 2E). Fewer parameters than
  conemb whenever F > E.
* gated  — the two embeddings are blended by a learned pair of weights
  (softmax over two logits, so they sum to 1), giving a fused vector of
  width E.
"""

from dataclasses import dataclass, field

import numpy as np

from fusionnav.checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint
from fusionnav.nn import (
    ParamState,
    ShapeError,
    concat_backward,
    concat_forward,
    conv2d_backward,
    conv2d_forward,
    conv_output_size,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
    softmax_backward,
    softmax_forward,
)

FUSION_KINDS = ("conemb", "emb", "gated")

DESK_CONV_SPEC = ((8, 5, 2, 2), (16, 5, 2, 2), (32, 3, 2, 1))


@dataclass(frozen=True)
class ModelConfig:
    input_h: int = 60
    input_w: int = 80
    color_channels: int = 3
    depth_channels: int = 1
    conv_spec: tuple = DESK_CONV_SPEC
    embed_dim: int = 256
    head_widths: tuple = (512, 64, 1)
    fusion_kind: str = "conemb"

    def __post_init__(self):
        if self.fusion_kind not in FUSION_KINDS:
            raise ShapeError(
                f"unknown fusion kind {self.fusion_kind!r}, expected one of {FUSION_KINDS}"
            )
        if not self.head_widths or self.head_widths[-1] != 1:
            raise ShapeError(f"head must end in width 1, got {self.head_widths}")
        h, w = self.tower_output_hw()
        if h < 1 or w < 1:
            raise ShapeError(
                f"conv spec {self.conv_spec} collapses a {self.input_h}x{self.input_w} "
                f"input to {h}x{w}"
            )

    def tower_output_hw(self):
        h, w = self.input_h, self.input_w
        for _, k, s, p in self.conv_spec:
            h = conv_output_size(h, k, s, p)
            w = conv_output_size(w, k, s, p)
        return h, w

    @property
    def flat_features(self) -> int:
        """F: flattened per-tower conv output size."""
        h, w = self.tower_output_hw()
        return self.conv_spec[-1][0] * h * w

    @property
    def fused_width(self) -> int:
        """Width of the vector entering the head."""
        if self.fusion_kind == "conemb":
            return 2 * self.flat_features
        if self.fusion_kind == "emb":
            return 2 * self.embed_dim
        return self.embed_dim


def desk_config(fusion_kind: str) -> ModelConfig:
    return ModelConfig(fusion_kind=fusion_kind)


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


@dataclass
class FusionNet:
    config: ModelConfig
    params: dict = field(default_factory=dict)
    dtype: np.dtype = np.float32

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, config: ModelConfig, seed: int, dtype=np.float32) -> "FusionNet":
        """Create a net with seeded Glorot-uniform weights and zero biases.

        Parameters are created in a fixed order, so the same (config, seed)
        always yields bitwise-identical parameters.
        """
        rng = np.random.default_rng(seed)
        dtype = np.dtype(dtype)
        net = cls(config=config, dtype=dtype)

        def add_conv(name, c_in, c_out, k):
            fan_in, fan_out = c_in * k * k, c_out * k * k
            net.params[f"{name}.w"] = ParamState(
                value=_glorot(rng, (c_out, c_in, k, k), fan_in, fan_out, dtype)
            )
            net.params[f"{name}.b"] = ParamState(value=np.zeros(c_out, dtype=dtype))

        def add_linear(name, f_in, f_out):
            net.params[f"{name}.w"] = ParamState(
                value=_glorot(rng, (f_in, f_out), f_in, f_out, dtype)
            )
            net.params[f"{name}.b"] = ParamState(value=np.zeros(f_out, dtype=dtype))

        for prefix, channels in (("color", config.color_channels), ("depth", config.depth_channels)):
            c_in = channels
            for i, (c_out, k, _, _) in enumerate(config.conv_spec):
                add_conv(f"{prefix}.conv{i}", c_in, c_out, k)
                c_in = c_out
        flat = config.flat_features
        if config.fusion_kind in ("emb", "gated"):
            add_linear("color.embed", flat, config.embed_dim)
            add_linear("depth.embed", flat, config.embed_dim)
        if config.fusion_kind == "gated":
            add_linear("gate", 2 * config.embed_dim, 2)
        width = config.fused_width
        for i, out_width in enumerate(config.head_widths):
            add_linear(f"head{i}", width, out_width)
            width = out_width
        return net

    # -- bookkeeping --------------------------------------------------------

    def count_params(self) -> int:
        return sum(p.value.size for p in self.params.values())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def param_states(self):
        return list(self.params.values())

    # -- forward / backward -------------------------------------------------

    def _check_inputs(self, color, depth):
        cfg = self.config
        want_c = (color.shape[1:] if color.ndim == 4 else None)
        if color.ndim != 4 or depth.ndim != 4 or color.shape[0] != depth.shape[0]:
            raise ShapeError(
                f"expected [N,C,H,W] color/depth with equal N, got "
                f"{color.shape} and {depth.shape}"
            )
        expect_color = (cfg.color_channels, cfg.input_h, cfg.input_w)
        expect_depth = (cfg.depth_channels, cfg.input_h, cfg.input_w)
        if color.shape[1:] != expect_color or depth.shape[1:] != expect_depth:
            raise ShapeError(
                f"input shapes {color.shape[1:]} / {depth.shape[1:]} do not match "
                f"model config {expect_color} / {expect_depth}"
            )

    def _tower_forward(self, prefix, x):
        caches = []
        out = x
        for i, (_, k, s, p) in enumerate(self.config.conv_spec):
            out, c_conv = conv2d_forward(
                out,
                self.params[f"{prefix}.conv{i}.w"].value,
                self.params[f"{prefix}.conv{i}.b"].value,
                stride=s,
                padding=p,
            )
            out, c_relu = relu_forward(out)
            caches.append((c_conv, c_relu))
        shape = out.shape
        flat = out.reshape(shape[0], -1)
        return flat, (caches, shape)

    def _tower_backward(self, prefix, dflat, cache, input_grads):
        caches, shape = cache
        dout = dflat.reshape(shape)
        for i in reversed(range(len(self.config.conv_spec))):
            c_conv, c_relu = caches[i]
            dout = relu_backward(dout, c_relu)
            # the first layer's input gradient is only needed for checking
            need_dx = input_grads or i > 0
            dout, dw, db = conv2d_backward(dout, c_conv, need_dx=need_dx)
            self.params[f"{prefix}.conv{i}.w"].grad += dw
            self.params[f"{prefix}.conv{i}.b"].grad += db
        return dout

    def _embed_forward(self, prefix, flat):
        out, c_lin = linear_forward(
            flat,
            self.params[f"{prefix}.embed.w"].value,
            self.params[f"{prefix}.embed.b"].value,
        )
        out, c_relu = relu_forward(out)
        return out, (c_lin, c_relu)

    def _embed_backward(self, prefix, dout, cache):
        c_lin, c_relu = cache
        dout = relu_backward(dout, c_relu)
        dflat, dw, db = linear_backward(dout, c_lin)
        self.params[f"{prefix}.embed.w"].grad += dw
        self.params[f"{prefix}.embed.b"].grad += db
        return dflat

    def _head_forward(self, x):
        caches = []
        n_layers = len(self.config.head_widths)
        for i in range(n_layers):
            x, c_lin = linear_forward(
                x, self.params[f"head{i}.w"].value, self.params[f"head{i}.b"].value
            )
            c_relu = None
            if i < n_layers - 1:
                x, c_relu = relu_forward(x)
            caches.append((c_lin, c_relu))
        return x, caches

    def _head_backward(self, dout, caches):
        for i in reversed(range(len(self.config.head_widths))):
            c_lin, c_relu = caches[i]
            if c_relu is not None:
                dout = relu_backward(dout, c_relu)
            dout, dw, db = linear_backward(dout, c_lin)
            self.params[f"head{i}.w"].grad += dw
            self.params[f"head{i}.b"].grad += db
        return dout

    def forward(self, color, depth, with_cache=False):
        """Predict one angular velocity (rad/s) per batch row.

        Inputs are [N,3,H,W] and [N,1,H,W] with pixel values in [0, 1].
        """
        color = np.asarray(color, dtype=self.dtype)
        depth = np.asarray(depth, dtype=self.dtype)
        self._check_inputs(color, depth)
        flat_c, tower_c = self._tower_forward("color", color)
        flat_d, tower_d = self._tower_forward("depth", depth)
        kind = self.config.fusion_kind
        if kind == "conemb":
            fused, c_fuse = concat_forward(flat_c, flat_d)
        elif kind == "emb":
            e_c, c_ec = self._embed_forward("color", flat_c)
            e_d, c_ed = self._embed_forward("depth", flat_d)
            fused, c_cat = concat_forward(e_c, e_d)
            c_fuse = (c_ec, c_ed, c_cat)
        else:  # gated
            e_c, c_ec = self._embed_forward("color", flat_c)
            e_d, c_ed = self._embed_forward("depth", flat_d)
            both, c_cat = concat_forward(e_c, e_d)
            logits, c_gate = linear_forward(
                both, self.params["gate.w"].value, self.params["gate.b"].value
            )
            weights, c_soft = softmax_forward(logits)
            fused = weights[:, 0:1] * e_c + weights[:, 1:2] * e_d
            c_fuse = (c_ec, c_ed, c_cat, c_gate, c_soft, weights, e_c, e_d)
        out, c_head = self._head_forward(fused)
        cache = (tower_c, tower_d, c_fuse, c_head)
        if with_cache:
            return out, cache
        return out

    def forward_gate_weights(self, color, depth):
        """Gated nets only: the (w_color, w_depth) blend per batch row."""
        if self.config.fusion_kind != "gated":
            raise ShapeError("gate weights only exist for the gated fusion kind")
        color = np.asarray(color, dtype=self.dtype)
        depth = np.asarray(depth, dtype=self.dtype)
        self._check_inputs(color, depth)
        flat_c, _ = self._tower_forward("color", color)
        flat_d, _ = self._tower_forward("depth", depth)
        e_c, _ = self._embed_forward("color", flat_c)
        e_d, _ = self._embed_forward("depth", flat_d)
        both, _ = concat_forward(e_c, e_d)
        logits, _ = linear_forward(
            both, self.params["gate.w"].value, self.params["gate.b"].value
        )
        weights, _ = softmax_forward(logits)
        return weights

    def backward(self, dout, cache, input_grads=False):
        """Accumulate parameter gradients; returns (dcolor, ddepth), which
        are None unless input_grads is set (training never needs them)."""
        tower_c, tower_d, c_fuse, c_head = cache
        dfused = self._head_backward(dout, c_head)
        kind = self.config.fusion_kind
        if kind == "conemb":
            dflat_c, dflat_d = concat_backward(dfused, c_fuse)
        elif kind == "emb":
            c_ec, c_ed, c_cat = c_fuse
            de_c, de_d = concat_backward(dfused, c_cat)
            dflat_c = self._embed_backward("color", de_c, c_ec)
            dflat_d = self._embed_backward("depth", de_d, c_ed)
        else:  # gated
            c_ec, c_ed, c_cat, c_gate, c_soft, weights, e_c, e_d = c_fuse
            de_c = weights[:, 0:1] * dfused
            de_d = weights[:, 1:2] * dfused
            dweights = np.concatenate(
                [(dfused * e_c).sum(axis=1, keepdims=True),
                 (dfused * e_d).sum(axis=1, keepdims=True)],
                axis=1,
            )
            dlogits = softmax_backward(dweights, c_soft)
            dboth, dgw, dgb = linear_backward(dlogits, c_gate)
            self.params["gate.w"].grad += dgw
            self.params["gate.b"].grad += dgb
            de_c_cat, de_d_cat = concat_backward(dboth, c_cat)
            dflat_c = self._embed_backward("color", de_c + de_c_cat, c_ec)
            dflat_d = self._embed_backward("depth", de_d + de_d_cat, c_ed)
        dcolor = self._tower_backward("color", dflat_c, tower_c, input_grads)
        ddepth = self._tower_backward("depth", dflat_d, tower_d, input_grads)
        return dcolor, ddepth

    # -- reporting ----------------------------------------------------------

    def describe(self) -> str:
        """Layer-by-layer report; per-line param counts sum to count_params()."""
        cfg = self.config
        lines = [
            f"fusion_kind={cfg.fusion_kind} "
            f"input=color[{cfg.color_channels}x{cfg.input_h}x{cfg.input_w}] "
            f"depth[{cfg.depth_channels}x{cfg.input_h}x{cfg.input_w}]"
        ]

        def param_count(name):
            return (
                self.params[f"{name}.w"].value.size + self.params[f"{name}.b"].value.size
            )

        for prefix, channels in (("color", cfg.color_channels), ("depth", cfg.depth_channels)):
            c_in, h, w = channels, cfg.input_h, cfg.input_w
            for i, (c_out, k, s, p) in enumerate(cfg.conv_spec):
                h = conv_output_size(h, k, s, p)
                w = conv_output_size(w, k, s, p)
                lines.append(
                    f"{prefix}.conv{i}  conv {c_in}->{c_out} k{k} s{s} p{p}  "
                    f"out={c_out}x{h}x{w}  params={param_count(f'{prefix}.conv{i}')}"
                )
                c_in = c_out
            lines.append(f"{prefix}.flatten  out={cfg.flat_features}  params=0")
            if cfg.fusion_kind in ("emb", "gated"):
                lines.append(
                    f"{prefix}.embed  linear {cfg.flat_features}->{cfg.embed_dim}  "
                    f"out={cfg.embed_dim}  params={param_count(f'{prefix}.embed')}"
                )
        if cfg.fusion_kind == "conemb":
            lines.append(f"fusion  concat  out={cfg.fused_width}  params=0")
        elif cfg.fusion_kind == "emb":
            lines.append(f"fusion  concat  out={cfg.fused_width}  params=0")
        else:
            lines.append(
                f"gate  linear {2 * cfg.embed_dim}->2 + softmax  out=2  "
                f"params={param_count('gate')}"
            )
            lines.append(f"fusion  weighted-sum  out={cfg.fused_width}  params=0")
        width = cfg.fused_width
        for i, out_width in enumerate(cfg.head_widths):
            act = "" if i == len(cfg.head_widths) - 1 else " + relu"
            lines.append(
                f"head{i}  linear {width}->{out_width}{act}  out={out_width}  "
                f"params={param_count(f'head{i}')}"
            )
            width = out_width
        lines.append(f"total params: {self.count_params()}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# persistence


def _config_block(config: ModelConfig) -> dict:
    return {
        "fusion_kind": config.fusion_kind,
        "input_h": str(config.input_h),
        "input_w": str(config.input_w),
        "color_channels": str(config.color_channels),
        "depth_channels": str(config.depth_channels),
        "conv_spec": ";".join(",".join(str(v) for v in layer) for layer in config.conv_spec),
        "embed_dim": str(config.embed_dim),
        "head_widths": ",".join(str(v) for v in config.head_widths),
    }


def _config_from_block(block: dict) -> ModelConfig:
    try:
        return ModelConfig(
            input_h=int(block["input_h"]),
            input_w=int(block["input_w"]),
            color_channels=int(block["color_channels"]),
            depth_channels=int(block["depth_channels"]),
            conv_spec=tuple(
                tuple(int(v) for v in layer.split(","))
                for layer in block["conv_spec"].split(";")
            ),
            embed_dim=int(block["embed_dim"]),
            head_widths=tuple(int(v) for v in block["head_widths"].split(",")),
            fusion_kind=block["fusion_kind"],
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"invalid model config block: {exc}") from exc


def save_model(net: FusionNet, path) -> None:
    tensors = {name: p.value for name, p in net.params.items()}
    save_checkpoint(path, tensors, config=_config_block(net.config))


def load_model(path) -> FusionNet:
    tensors, block = load_checkpoint(path)
    config = _config_from_block(block)
    net = FusionNet.build(config, seed=0)
    if set(tensors) != set(net.params):
        missing = set(net.params) ^ set(tensors)
        raise CheckpointFormatError(f"checkpoint/config parameter mismatch: {sorted(missing)}")
    for name, arr in tensors.items():
        want = net.params[name].value.shape
        if arr.shape != want:
            raise CheckpointFormatError(
                f"tensor {name!r} has shape {arr.shape}, config implies {want}"
            )
        net.params[name] = ParamState(value=arr.astype(net.dtype, copy=False))
    return net
