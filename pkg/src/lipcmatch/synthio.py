"""Image files, synthetic scenes, impulse noise, vertical lighting drift.

File formats: 8-bit RGB PNG and binary PPM (P6, maxval 255), nothing else.
Scene generation is pure: the same SceneSpec (seed included) always yields
byte-identical pixels. The random generator is PCG64 via
numpy.random.default_rng, a named algorithm with stable cross-platform
output for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .algebra import lipc_scalar_mul, lipc_scalar_mul_rows
from .model import EPS_GAMUT, M_DEFAULT, MixingModel, ensure_image
from .solver import scaling_is_monotone


class ImageFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# image files


def load_image(path: str) -> np.ndarray:
    """8-bit RGB PNG or binary PPM -> float64 (H, W, 3) in clamped gamut.

    Byte v maps to intensity v; 0 then clamps up to the gamut margin.
    """
    with open(path, "rb") as fh:
        head = fh.read(32)
    if head[:8] == b"\x89PNG\r\n\x1a\n":
        arr = _load_png(path, head)
    elif head[:2] == b"P6":
        arr = _load_ppm(path)
    else:
        raise ImageFormatError(f"{path}: not an 8-bit RGB PNG or binary PPM")
    out = arr.astype(np.float64)
    np.clip(out, EPS_GAMUT, M_DEFAULT - EPS_GAMUT, out=out)
    return out


def _load_png(path: str, head: bytes) -> np.ndarray:
    # IHDR is always the first chunk: bit depth at byte 24, colour type at 25
    if len(head) < 26:
        raise ImageFormatError(f"{path}: truncated PNG")
    bit_depth, colour_type = head[24], head[25]
    if bit_depth != 8:
        raise ImageFormatError(
            f"{path}: unsupported PNG bit depth {bit_depth} (need 8)")
    if colour_type != 2:
        raise ImageFormatError(
            f"{path}: unsupported PNG colour type {colour_type} (need RGB)")
    from PIL import Image
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageFormatError(f"{path}: expected 3 channels")
    return arr


def _load_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, i = [], 0
    while len(tokens) < 4:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise ImageFormatError(f"{path}: truncated PPM header")
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    if tokens[0] != b"P6":
        raise ImageFormatError(f"{path}: not a binary (P6) PPM")
    w, h, maxval = (int(t) for t in tokens[1:4])
    if maxval != 255:
        raise ImageFormatError(f"{path}: PPM maxval {maxval} unsupported (need 255)")
    i += 1
    payload = data[i:i + 3 * w * h]
    if len(payload) != 3 * w * h:
        raise ImageFormatError(f"{path}: truncated PPM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)


def save_image(img: np.ndarray, path: str) -> None:
    """Quantizes to 8 bits (round half away handled by rint) and writes
    PNG or PPM by file extension."""
    img = ensure_image(img)
    q = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    lower = path.lower()
    if lower.endswith(".png"):
        from PIL import Image
        Image.fromarray(q, mode="RGB").save(path, format="PNG")
    elif lower.endswith((".ppm", ".pnm")):
        with open(path, "wb") as fh:
            fh.write(f"P6\n{q.shape[1]} {q.shape[0]}\n255\n".encode())
            fh.write(q.tobytes())
    else:
        raise ImageFormatError(f"{path}: unsupported extension (png/ppm only)")


# ---------------------------------------------------------------------------
# scene specification


@dataclass(frozen=True)
class TemplateSpec:
    kind: str = "procedural"      # procedural | file
    seed: int | None = None       # procedural: defaults to the scene seed
    path: str | None = None       # file
    value_lo: float = 25.0
    value_hi: float = 165.0
    symmetry: float = 0.85        # vertical bulk symmetry in [0, 1]
    jitter: float = 12.0          # per-pixel texture amplitude
    green_margin: float = 18.0    # keeps pixels in the monotone subdomain
    vfreq_lo: float = 0.4         # vertical frequency band, cycles per tile
    vfreq_hi: float = 1.6


@dataclass(frozen=True)
class DriftSpec:
    kind: str = "none"            # none | per-row-alpha | global-alpha
    alpha_top: float = 1.0
    alpha_bottom: float = 1.0
    alpha: float = 1.0


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"            # none | impulse
    density: float = 0.0
    sigma2: float = 0.0


@dataclass(frozen=True)
class SceneSpec:
    kind: str = "tiled-template"  # tiled-template | one-dim-signal | ball-grid
    width: int = 64
    height: int = 64
    tile_width: int = 16
    tile_height: int = 16
    spacing: int = 0
    template: TemplateSpec = field(default_factory=TemplateSpec)
    drift: DriftSpec = field(default_factory=DriftSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("tiled-template", "one-dim-signal", "ball-grid"):
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if not (0.0 <= self.noise.density <= 1.0):
            raise ValueError("noise density must be in [0, 1]")
        for a in (self.drift.alpha_top, self.drift.alpha_bottom, self.drift.alpha):
            if not a > 0:
                raise ValueError("drift alpha values must be positive")
        if min(self.width, self.height, self.tile_width, self.tile_height) < 1:
            raise ValueError("sizes must be positive")
        if self.spacing < 0:
            raise ValueError("spacing must be >= 0")


def scene_spec_to_json(spec: SceneSpec) -> str:
    return json.dumps(asdict(spec), indent=2) + "\n"


def scene_spec_from_json(text: str) -> SceneSpec:
    raw = json.loads(text)
    return SceneSpec(
        kind=raw.get("kind", "tiled-template"),
        width=int(raw.get("width", 64)),
        height=int(raw.get("height", 64)),
        tile_width=int(raw.get("tile_width", 16)),
        tile_height=int(raw.get("tile_height", 16)),
        spacing=int(raw.get("spacing", 0)),
        template=TemplateSpec(**raw.get("template", {})),
        drift=DriftSpec(**raw.get("drift", {})),
        noise=NoiseSpec(**raw.get("noise", {})),
        seed=int(raw.get("seed", 0)),
    )


# ---------------------------------------------------------------------------
# generators


def make_template(model: MixingModel, width: int = 16, height: int = 16,
                  seed: int = 0, value_lo: float = 25.0,
                  value_hi: float = 165.0, symmetry: float = 0.85,
                  jitter: float = 12.0, green_margin: float = 18.0,
                  vfreq_lo: float = 0.4, vfreq_hi: float = 1.6) -> np.ndarray:
    """Procedural textured tile with 8-bit integer values.

    Low-frequency cosine structure gives bulk shape (optionally blended
    toward vertical mirror symmetry; vfreq_lo/vfreq_hi bound the vertical
    frequencies in cycles per tile), per-pixel jitter gives the contrasty
    texture that pins sandwich contacts. The green channel leads the other
    two by green_margin: that puts the slowest-decaying transmittance
    component on positive mixing coefficients for every output channel, so
    the scaling curves of the tile's pixels stay monotone far beyond any
    contact scale a scene can realize (scaling preserves the component
    order, so lighting drift cannot break this). Leftover failures are
    pulled toward the grey axis, which is monotone as well.
    """
    rng = np.random.default_rng([int(seed), 0x7E])
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.empty((height, width, 3))
    for ch in (0, 2):
        base = np.zeros((height, width))
        for _ in range(3):
            fx = rng.uniform(0.4, 1.6)
            fy = rng.uniform(vfreq_lo, vfreq_hi)
            phx, phy = rng.uniform(0, 2 * np.pi, size=2)
            base += rng.uniform(0.5, 1.0) * (
                np.cos(2 * np.pi * fx * xx / width + phx)
                * np.cos(2 * np.pi * fy * yy / height + phy))
        span = base.max() - base.min()
        if span > 0:
            base = (base - base.min()) / span
        img[..., ch] = value_lo + base * (value_hi - value_lo)
    img[..., 1] = np.maximum(img[..., 0], img[..., 2]) + green_margin
    sym = 0.5 * (img + img[::-1])
    img = symmetry * sym + (1.0 - symmetry) * img
    img += rng.uniform(-1.0, 1.0, size=img.shape) * jitter
    img[..., 1] = np.maximum(img[..., 1],
                             np.maximum(img[..., 0], img[..., 2]) + 4.0)
    img = np.clip(np.rint(img), 5.0, 210.0)

    flat = img.reshape(-1, 3)
    grey = np.full(3, 90.0)
    for _ in range(64):
        ok = scaling_is_monotone(model, flat, k_max=50.0)
        if ok.all():
            break
        flat[~ok] = np.rint(0.6 * flat[~ok] + 0.4 * grey)
    else:
        raise RuntimeError("template generation failed to reach the "
                           "monotone scaling subdomain")
    return flat.reshape(height, width, 3)


def _monotone_colour(model: MixingModel, rng, lo: float, hi: float) -> np.ndarray:
    for _ in range(256):
        c = np.rint(rng.uniform(lo, hi, size=3))
        if scaling_is_monotone(model, c[None, :], k_max=200.0)[0]:
            return c
    raise RuntimeError("no monotone colour found")


def random_monotone_colours(model: MixingModel, rng, n: int,
                            lo: float = 1.0, hi: float = 255.0,
                            k_max: float = 100.0) -> np.ndarray:
    """Uniform gamut colours rejection-sampled into the monotone scaling
    subdomain, the validity domain of the vectorial algebra. A small
    percentage of uniform draws fall outside it and are redrawn."""
    out = np.empty((n, 3))
    have = 0
    for _ in range(256):
        if have >= n:
            break
        draw = rng.uniform(lo, hi, size=(max(n - have, 64), 3))
        keep = draw[scaling_is_monotone(model, draw, k_max=k_max)]
        take = min(len(keep), n - have)
        out[have:have + take] = keep[:take]
        have += take
    if have < n:
        raise RuntimeError("rejection sampling failed to fill the request")
    return out


def random_monotone_image(model: MixingModel, rng, width: int, height: int,
                          lo: float = 1.0, hi: float = 255.0,
                          k_max: float = 100.0) -> np.ndarray:
    """Random test image whose every pixel scales monotonically."""
    cols = random_monotone_colours(model, rng, width * height, lo, hi, k_max)
    return cols.reshape(height, width, 3)


def add_noise(img: np.ndarray, density: float, sigma2: float,
              seed: int) -> np.ndarray:
    """Impulse-placed Gaussian noise: floor(density * W * H) distinct sites,
    independent N(0, sigma2) per channel, clamped to gamut. Every other
    pixel is returned bit-identical."""
    img = ensure_image(img)
    if not (0.0 <= density <= 1.0):
        raise ValueError("density must be in [0, 1]")
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    h, w = img.shape[:2]
    n = int(np.floor(density * w * h))
    out = img.copy()
    if n == 0:
        return out
    rng = np.random.default_rng(seed)
    sites = rng.choice(w * h, size=n, replace=False)
    flat = out.reshape(-1, 3)
    flat[sites] = np.clip(
        flat[sites] + rng.normal(0.0, np.sqrt(sigma2), size=(n, 3)),
        EPS_GAMUT, M_DEFAULT - EPS_GAMUT)
    return out


def apply_drift(model: MixingModel, img: np.ndarray, alpha_top: float,
                alpha_bottom: float) -> np.ndarray:
    """Vertical lighting drift: row y is scaled by
    exp(lerp(ln alpha_top, ln alpha_bottom, y / (H - 1))).
    A single-row image gets alpha_top."""
    img = ensure_image(img)
    if not (alpha_top > 0 and alpha_bottom > 0):
        raise ValueError("alpha values must be positive")
    h = img.shape[0]
    if alpha_top == alpha_bottom:
        # uniform drift is global scaling; skip exp(log(.)) so it matches
        # lipc_scalar_mul bit for bit
        alphas = np.full(h, alpha_top)
    else:
        frac = np.zeros(1) if h == 1 else np.arange(h) / (h - 1)
        alphas = np.exp(np.log(alpha_top) * (1 - frac)
                        + np.log(alpha_bottom) * frac)
    return lipc_scalar_mul_rows(model, alphas, img)


def _resolve_template(model: MixingModel, spec: SceneSpec) -> np.ndarray:
    t = spec.template
    if t.kind == "file":
        if not t.path:
            raise ValueError("template kind 'file' needs a path")
        img = load_image(t.path)
    elif t.kind == "procedural":
        seed = spec.seed if t.seed is None else t.seed
        img = make_template(model, spec.tile_width, spec.tile_height,
                            seed=seed, value_lo=t.value_lo, value_hi=t.value_hi,
                            symmetry=t.symmetry, jitter=t.jitter,
                            green_margin=t.green_margin,
                            vfreq_lo=t.vfreq_lo, vfreq_hi=t.vfreq_hi)
    else:
        raise ValueError(f"unknown template kind {t.kind!r}")
    th, tw = img.shape[:2]
    if tw > spec.tile_width or th > spec.tile_height:
        raise ValueError(
            f"template {tw}x{th} larger than tile "
            f"{spec.tile_width}x{spec.tile_height}")
    return img


def synth_scene(model: MixingModel,
                spec: SceneSpec) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Builds the scene and its ground-truth match centres.

    Pipeline: lay out content, apply drift, apply noise. Ground truth lists
    the template centre (tile origin plus floor-centre anchor) of every
    complete tile; noise and drift do not move it.
    """
    if spec.kind == "tiled-template":
        img, centres = _build_tiled(model, spec)
    elif spec.kind == "one-dim-signal":
        img, centres = _build_signal(spec)
    elif spec.kind == "ball-grid":
        img, centres = _build_balls(model, spec)
    else:
        raise ValueError(f"unknown scene kind {spec.kind!r}")

    d = spec.drift
    if d.kind == "per-row-alpha":
        img = apply_drift(model, img, d.alpha_top, d.alpha_bottom)
    elif d.kind == "global-alpha":
        img = lipc_scalar_mul(model, d.alpha, img)
    elif d.kind != "none":
        raise ValueError(f"unknown drift kind {d.kind!r}")

    n = spec.noise
    if n.kind == "impulse":
        # independent noise stream derived from the scene seed
        noise_seed = (spec.seed * 2654435761 + 0xA5) % (2 ** 63)
        img = add_noise(img, n.density, n.sigma2, seed=noise_seed)
    elif n.kind != "none":
        raise ValueError(f"unknown noise kind {n.kind!r}")
    return img, centres


def _grid_origins(spec: SceneSpec) -> list[tuple[int, int]]:
    step_x = spec.tile_width + spec.spacing
    step_y = spec.tile_height + spec.spacing
    return [(x, y)
            for y in range(0, spec.height - spec.tile_height + 1, step_y)
            for x in range(0, spec.width - spec.tile_width + 1, step_x)]


def _build_tiled(model, spec):
    template = _resolve_template(model, spec)
    th, tw = template.shape[:2]
    img = np.full((spec.height, spec.width, 3), 40.0)
    centres = []
    for x0, y0 in _grid_origins(spec):
        img[y0:y0 + th, x0:x0 + tw] = template
        centres.append((x0 + (tw - 1) // 2, y0 + (th - 1) // 2))
    return img, centres


def _build_signal(spec):
    rng = np.random.default_rng([spec.seed, 0x1D])
    steps = rng.normal(0.0, 1.0, size=(spec.width, 3)).cumsum(axis=0)
    kernel = np.ones(5) / 5.0
    for ch in range(3):
        steps[:, ch] = np.convolve(steps[:, ch], kernel, mode="same")
    lo, hi = steps.min(), steps.max()
    span = hi - lo if hi > lo else 1.0
    vals = 30.0 + (steps - lo) / span * 170.0
    return np.rint(vals).reshape(1, spec.width, 3), []


def _build_balls(model, spec):
    rng = np.random.default_rng([spec.seed, 0xB4])
    background = np.full(3, 20.0)
    ball = _monotone_colour(model, rng, 70.0, 190.0)
    img = np.full((spec.height, spec.width, 3), background)
    tw, th = spec.tile_width, spec.tile_height
    radius = 0.38 * min(tw, th)
    centres = []
    for x0, y0 in _grid_origins(spec):
        cx, cy = x0 + (tw - 1) // 2, y0 + (th - 1) // 2
        yy, xx = np.mgrid[y0:y0 + th, x0:x0 + tw]
        rr = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        inside = rr <= radius
        shade = (1.0 - 0.25 * np.clip(rr / max(radius, 1e-9), 0, 1))[..., None]
        patch = img[y0:y0 + th, x0:x0 + tw]
        patch[inside] = np.rint(ball * shade[inside])
        centres.append((cx, cy))
    return img, centres
