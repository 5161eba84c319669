"""Forward pass of the attention-gated NAFNet restoration network in numpy.

Tensors are float64 arrays shaped (N, C, H, W). Convolutions are written as
a fixed sequence of per-tap einsum contractions so results do not depend on
BLAS threading.
"""
from __future__ import annotations

import dataclasses
import os
import struct
from dataclasses import dataclass

import numpy as np

LN_EPS = 1e-6


@dataclass
class ConvParams:
    weight: np.ndarray  # (out, in // groups, k, k)
    bias: np.ndarray  # (out,)
    groups: int = 1
    stride: int = 1

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        out, in_g, k, k2 = self.weight.shape
        if k != k2 or k not in (1, 3):
            raise ValueError(f"kernel must be 1x1 or 3x3, got {k}x{k2}")
        if self.bias.shape != (out,):
            raise ValueError(f"bias length {self.bias.shape} != out channels {out}")
        if out % self.groups:
            raise ValueError("out channels not divisible by groups")

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1] * self.groups

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    @classmethod
    def zeros(cls, out: int, inp: int, k: int = 1, groups: int = 1, stride: int = 1) -> "ConvParams":
        return cls(np.zeros((out, inp // groups, k, k)), np.zeros(out), groups, stride)


def _check4(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"expected (N, C, H, W) tensor, got shape {x.shape}")
    return x


def conv2d(x, p: ConvParams) -> np.ndarray:
    """Grouped cross-correlation with zero padding k // 2."""
    x = _check4(x)
    n, c, h, w = x.shape
    if c != p.in_channels:
        raise ValueError(f"input has {c} channels, conv expects {p.in_channels}")
    k, s, g = p.kernel, p.stride, p.groups
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    ho = (h + 2 * pad - k) // s + 1
    wo = (w + 2 * pad - k) // s + 1
    cin_g = c // g
    cout_g = p.out_channels // g
    xg = xp.reshape(n, g, cin_g, h + 2 * pad, w + 2 * pad)
    wg = p.weight.reshape(g, cout_g, cin_g, k, k)
    out = np.zeros((n, g, cout_g, ho, wo))
    for ky in range(k):
        for kx in range(k):
            patch = xg[:, :, :, ky : ky + s * (ho - 1) + 1 : s, kx : kx + s * (wo - 1) + 1 : s]
            out += np.einsum("goi,ngihw->ngohw", wg[:, :, :, ky, kx], patch)
    out = out.reshape(n, p.out_channels, ho, wo)
    return out + p.bias[None, :, None, None]


def layer_norm(x, gamma, beta, eps: float = LN_EPS) -> np.ndarray:
    """Normalize over channels at each (n, y, x), then scale and shift per channel."""
    x = _check4(x)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ValueError("gamma/beta length must equal channel count")
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    y = (x - mu) / np.sqrt(var + eps)
    return gamma[None, :, None, None] * y + beta[None, :, None, None]


def simple_gate(x) -> np.ndarray:
    x = _check4(x)
    c = x.shape[1]
    if c % 2:
        raise ValueError(f"SimpleGate needs an even channel count, got {c}")
    return x[:, : c // 2] * x[:, c // 2 :]


def sca(x, w: ConvParams) -> np.ndarray:
    """Simple channel attention: global average pool, one 1x1 conv, rescale."""
    x = _check4(x)
    if w.kernel != 1 or w.in_channels != x.shape[1] or w.out_channels != x.shape[1]:
        raise ValueError("SCA needs a 1x1 conv mapping C -> C")
    pooled = x.mean(axis=(2, 3), keepdims=True)
    return x * conv2d(pooled, w)


@dataclass
class AttentionGateParams:
    w_e: np.ndarray  # (D, C_e)
    w_d: np.ndarray  # (D, C_d)
    b_e: np.ndarray  # (D,)
    psi: np.ndarray  # (D,)
    b_psi: float = 0.0

    def __post_init__(self):
        self.w_e = np.asarray(self.w_e, dtype=np.float64)
        self.w_d = np.asarray(self.w_d, dtype=np.float64)
        self.b_e = np.asarray(self.b_e, dtype=np.float64)
        self.psi = np.asarray(self.psi, dtype=np.float64)
        self.b_psi = float(self.b_psi)
        d = self.w_e.shape[0]
        if self.w_d.shape[0] != d or self.b_e.shape != (d,) or self.psi.shape != (d,):
            raise ValueError("W_e, W_d, b_e and psi must share the intermediate width")

    @property
    def d_init(self) -> int:
        return self.w_e.shape[0]

    @classmethod
    def zeros(cls, c_e: int, c_d: int, d_init: int, b_psi: float = 1.0) -> "AttentionGateParams":
        return cls(np.zeros((d_init, c_e)), np.zeros((d_init, c_d)), np.zeros(d_init), np.zeros(d_init), b_psi)


def attention_gate(x_e, x_d, p: AttentionGateParams) -> np.ndarray:
    """Gate the decoder feature with a per-pixel scalar computed from both paths.

    attn = psi . (W_e x_e + W_d x_d + b_e) + b_psi, both activations identity;
    output = attn * x_d, attn broadcast over x_d's channels.
    """
    x_e = _check4(x_e)
    x_d = _check4(x_d)
    if x_e.shape[0] != x_d.shape[0] or x_e.shape[2:] != x_d.shape[2:]:
        raise ValueError(f"spatial mismatch {x_e.shape} vs {x_d.shape}")
    if p.w_e.shape[1] != x_e.shape[1] or p.w_d.shape[1] != x_d.shape[1]:
        raise ValueError("channel count does not match gate weights")
    q = np.einsum("dc,nchw->ndhw", p.w_e, x_e) + np.einsum("dc,nchw->ndhw", p.w_d, x_d)
    q += p.b_e[None, :, None, None]
    attn = np.einsum("d,ndhw->nhw", p.psi, q)[:, None] + p.b_psi
    return attn * x_d


@dataclass
class NAFBlockParams:
    norm1_gamma: np.ndarray
    norm1_beta: np.ndarray
    conv1: ConvParams  # 1x1, c -> 2c
    conv2: ConvParams  # 3x3 depthwise, 2c
    sca: ConvParams  # 1x1, c -> c
    conv3: ConvParams  # 1x1, c -> c
    beta: np.ndarray
    norm2_gamma: np.ndarray
    norm2_beta: np.ndarray
    conv4: ConvParams  # 1x1, c -> 2c
    conv5: ConvParams  # 1x1, c -> c
    gamma: np.ndarray

    @property
    def channels(self) -> int:
        return len(self.beta)

    def check(self) -> None:
        c = self.channels
        expect = {
            "conv1": (2 * c, c, 1), "conv2": (2 * c, 2 * c, 3), "sca": (c, c, 1),
            "conv3": (c, c, 1), "conv4": (2 * c, c, 1), "conv5": (c, c, 1),
        }
        for name, (o, i, k) in expect.items():
            cp = getattr(self, name)
            if (cp.out_channels, cp.in_channels, cp.kernel) != (o, i, k):
                raise ValueError(f"{name}: expected {o}<-{i} {k}x{k}, got "
                                 f"{cp.out_channels}<-{cp.in_channels} {cp.kernel}x{cp.kernel}")
        if self.conv2.groups != 2 * c:
            raise ValueError("conv2 must be depthwise")

    @classmethod
    def zeros(cls, c: int) -> "NAFBlockParams":
        one, zero = np.ones(c), np.zeros(c)
        return cls(
            one.copy(), zero.copy(), ConvParams.zeros(2 * c, c), ConvParams.zeros(2 * c, 2 * c, 3, groups=2 * c),
            ConvParams.zeros(c, c), ConvParams.zeros(c, c), one.copy(),
            one.copy(), zero.copy(), ConvParams.zeros(2 * c, c), ConvParams.zeros(c, c), one.copy(),
        )


def nafblock(x, p: NAFBlockParams) -> np.ndarray:
    """Two residual sub-blocks: spatial mixing with SCA, then the gated FFN."""
    x = _check4(x)
    if x.shape[1] != p.channels:
        raise ValueError(f"block expects {p.channels} channels, got {x.shape[1]}")
    p.check()
    t = layer_norm(x, p.norm1_gamma, p.norm1_beta)
    t = conv2d(t, p.conv1)
    t = conv2d(t, p.conv2)
    t = simple_gate(t)
    t = sca(t, p.sca)
    t = conv2d(t, p.conv3)
    y = x + t * p.beta[None, :, None, None]
    t = layer_norm(y, p.norm2_gamma, p.norm2_beta)
    t = conv2d(t, p.conv4)
    t = simple_gate(t)
    t = conv2d(t, p.conv5)
    return y + t * p.gamma[None, :, None, None]


@dataclass(frozen=True)
class ANAFNetConfig:
    in_channels: int = 3
    width: int = 16
    enc_blocks: tuple = (1, 1)
    middle_blocks: int = 1
    dec_blocks: tuple = (1, 1)
    d_init: int = 0  # 0 -> half the decoder channel count

    def __post_init__(self):
        if len(self.enc_blocks) != len(self.dec_blocks):
            raise ValueError("encoder and decoder depth must match")
        if self.width < 1 or self.in_channels < 1:
            raise ValueError("widths must be positive")

    @property
    def depth(self) -> int:
        return len(self.enc_blocks)

    def gate_width(self, decoder_channels: int) -> int:
        return self.d_init if self.d_init > 0 else max(1, decoder_channels // 2)


@dataclass
class ANAFNetParams:
    config: ANAFNetConfig
    intro: ConvParams
    encoders: list
    downs: list
    middle: list
    ups: list
    gates: list
    decoders: list
    ending: ConvParams


def zero_params(config: ANAFNetConfig, b_psi: float = 1.0) -> ANAFNetParams:
    """All-zero weights (identity norms, unit residual scales, gates at b_psi)."""
    c = config.width
    encoders, downs, chans = [], [], []
    for nb in config.enc_blocks:
        encoders.append([NAFBlockParams.zeros(c) for _ in range(nb)])
        downs.append(ConvParams.zeros(2 * c, c, 3, stride=2))
        chans.append(c)
        c *= 2
    middle = [NAFBlockParams.zeros(c) for _ in range(config.middle_blocks)]
    ups, gates, decoders = [], [], []
    for nb, skip_c in zip(config.dec_blocks, reversed(chans)):
        ups.append(ConvParams.zeros(c // 2, c))
        c //= 2
        gates.append(AttentionGateParams.zeros(skip_c, c, config.gate_width(c), b_psi))
        decoders.append([NAFBlockParams.zeros(c) for _ in range(nb)])
    return ANAFNetParams(
        config,
        ConvParams.zeros(config.width, config.in_channels, 3),
        encoders, downs, middle, ups, gates, decoders,
        ConvParams.zeros(config.in_channels, config.width, 3),
    )


def _arrays(obj):
    """Parameter arrays in declaration order (the file layout)."""
    if isinstance(obj, np.ndarray):
        yield obj
    elif isinstance(obj, list):
        for item in obj:
            yield from _arrays(item)
    elif isinstance(obj, (ANAFNetConfig, int, str)):
        return
    elif dataclasses.is_dataclass(obj):
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            if isinstance(obj, AttentionGateParams) and f.name == "b_psi":
                yield np.array([val])
            elif isinstance(val, (np.ndarray, list)) or dataclasses.is_dataclass(val):
                yield from _arrays(val)


def parameter_count(params: ANAFNetParams) -> int:
    return sum(a.size for a in _arrays(params))


def random_params(config: ANAFNetConfig, seed: int = 0, scale: float = 0.5) -> ANAFNetParams:
    """Seeded random weights for structural checks (not a trained model)."""
    params = zero_params(config)
    rng = np.random.default_rng(seed)
    _fill(params, lambda a: rng.normal(0.0, scale / np.sqrt(max(a.shape[-1] if a.ndim < 4 else a[0].size, 1)), a.shape))
    return params


def _fill(obj, draw) -> None:
    """Replace every parameter array with ``draw(old)``, visiting in the same
    declaration order as ``_arrays``."""
    if isinstance(obj, list):
        for item in obj:
            _fill(item, draw)
        return
    if not dataclasses.is_dataclass(obj) or isinstance(obj, ANAFNetConfig):
        return
    for f in dataclasses.fields(obj):
        val = getattr(obj, f.name)
        if isinstance(obj, AttentionGateParams) and f.name == "b_psi":
            setattr(obj, f.name, float(np.asarray(draw(np.zeros(1))).ravel()[0]))
        elif isinstance(val, np.ndarray):
            setattr(obj, f.name, np.asarray(draw(val), dtype=np.float64).reshape(val.shape))
        elif isinstance(val, list) or dataclasses.is_dataclass(val):
            _fill(val, draw)


def upsample_nearest(x) -> np.ndarray:
    return np.repeat(np.repeat(_check4(x), 2, axis=2), 2, axis=3)


def anafnet_forward(x, params: ANAFNetParams) -> np.ndarray:
    """U-shaped forward pass with attention-gated skip connections.

    Each decoder stage upsamples (nearest + 1x1 conv), gates the upsampled
    feature against the matching encoder feature, adds the encoder feature
    back, then runs its blocks. The network output is added to the input.
    """
    x = _check4(x)
    cfg = params.config
    f = 2**cfg.depth
    if x.shape[2] % f or x.shape[3] % f:
        raise ValueError(f"spatial dims {x.shape[2:]} must be divisible by {f}")
    if x.shape[1] != cfg.in_channels:
        raise ValueError(f"expected {cfg.in_channels} input channels, got {x.shape[1]}")
    t = conv2d(x, params.intro)
    skips = []
    for blocks, down in zip(params.encoders, params.downs):
        for b in blocks:
            t = nafblock(t, b)
        skips.append(t)
        t = conv2d(t, down)
    for b in params.middle:
        t = nafblock(t, b)
    for up, gate, blocks, skip in zip(params.ups, params.gates, params.decoders, reversed(skips)):
        t = conv2d(upsample_nearest(t), up)
        t = skip + attention_gate(skip, t, gate)
        for b in blocks:
            t = nafblock(t, b)
    return conv2d(t, params.ending) + x


# --- parameter file -------------------------------------------------------------

PARAM_MAGIC = b"ANAF"
_PHEAD = struct.Struct("<4sIIIIII")


def save_params(path, params: ANAFNetParams) -> None:
    """magic, version, in_channels, width, depth, middle_blocks, d_init,
    enc_blocks[depth], dec_blocks[depth] (uint32), then every parameter array
    as little-endian float32 in declaration order."""
    cfg = params.config
    flat = np.concatenate([a.ravel() for a in _arrays(params)]).astype("<f4")
    with open(os.fspath(path), "wb") as fh:
        fh.write(_PHEAD.pack(PARAM_MAGIC, 1, cfg.in_channels, cfg.width, cfg.depth, cfg.middle_blocks, cfg.d_init))
        fh.write(np.array(list(cfg.enc_blocks) + list(cfg.dec_blocks), dtype="<u4").tobytes())
        fh.write(flat.tobytes())


def load_params(path) -> ANAFNetParams:
    with open(os.fspath(path), "rb") as fh:
        data = fh.read()
    if len(data) < _PHEAD.size or data[:4] != PARAM_MAGIC:
        raise ValueError(f"{path}: not an ANAFNet parameter file")
    _, version, cin, width, depth, middle, d_init = _PHEAD.unpack_from(data)
    if version != 1:
        raise ValueError(f"{path}: unsupported version {version}")
    off = _PHEAD.size
    blocks = np.frombuffer(data, dtype="<u4", count=2 * depth, offset=off)
    off += 8 * depth
    cfg = ANAFNetConfig(cin, width, tuple(int(b) for b in blocks[:depth]), middle,
                        tuple(int(b) for b in blocks[depth:]), d_init)
    params = zero_params(cfg)
    flat = np.frombuffer(data, dtype="<f4", offset=off).astype(np.float64)
    need = parameter_count(params)
    if flat.size != need:
        raise ValueError(f"{path}: expected {need} floats, found {flat.size}")
    it = iter(np.split(flat, np.cumsum([a.size for a in _arrays(params)])[:-1]))
    _fill(params, lambda a: next(it))
    return params


def image_to_tensor(img) -> np.ndarray:
    img = np.asarray(img)
    arr = img.astype(np.float64) / 255.0 if img.dtype == np.uint8 else img.astype(np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.transpose(2, 0, 1)[None]


def tensor_to_image(t) -> np.ndarray:
    arr = np.clip(np.rint(t[0].transpose(1, 2, 0) * 255.0), 0, 255).astype(np.uint8)
    return arr[:, :, 0] if arr.shape[2] == 1 else arr


def restore_image(img, params: ANAFNetParams) -> np.ndarray:
    """Run the network on a uint8 image, reflect-padding to the stride multiple."""
    x = image_to_tensor(img)
    f = 2**params.config.depth
    h, w = x.shape[2:]
    ph, pw = (-h) % f, (-w) % f
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="reflect" if min(h, w) > max(ph, pw) else "edge")
    y = anafnet_forward(x, params)[:, :, :h, :w]
    return tensor_to_image(y)
