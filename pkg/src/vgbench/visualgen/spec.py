"""Visual seeds: sampling every appearance factor from ``(seed, factor)`` keyed streams.

Each factor draws from its own Philox stream keyed on ``(seed, factor_code)``
(see :mod:`vgbench.seeding`), so turning one factor on or off can never shift
another factor's values. Seed 0 is the canonical look, regardless of toggles.
"""

from dataclasses import dataclass, field, fields, asdict, replace
import math

from ..envcore import ConfigError, DOMAINS
from ..seeding import keyed_rng, string_code

FACTORS = ("light", "camera", "body_color", "target_color", "floor", "background", "reflectance")

APPLICABLE = {
    "cartpole": frozenset({"light", "camera", "body_color", "floor", "background", "reflectance"}),
    "reacher": frozenset(FACTORS),
}

TEXTURE_FAMILIES = ("checker", "stripes", "noise", "linear", "radial")

CAMERA_SHIFT = 0.06  # fraction of frame
CAMERA_ROTATION = 0.09  # radians
CAMERA_ZOOM = (0.92, 1.08)
BRIGHTNESS = (0.7, 1.3)
SHADING = (0.0, 0.4)
REFLECTANCE = (0.0, 0.3)

RGB = tuple[float, float, float]


@dataclass(frozen=True)
class FactorToggles:
    light: bool = True
    camera: bool = True
    body_color: bool = True
    target_color: bool = True
    floor: bool = True
    background: bool = True
    reflectance: bool = True

    @classmethod
    def none(cls) -> "FactorToggles":
        return cls(**{f: False for f in FACTORS})

    @classmethod
    def only(cls, *names: str) -> "FactorToggles":
        unknown = set(names) - set(FACTORS)
        if unknown:
            raise ConfigError(f"unknown factor(s): {sorted(unknown)}")
        return cls(**{f: f in names for f in FACTORS})

    @classmethod
    def parse(cls, text: str) -> "FactorToggles":
        """``"all"``, ``"none"`` or a comma list such as ``"floor,camera"``."""
        text = text.strip().lower()
        if text in ("all", ""):
            return cls()
        if text == "none":
            return cls.none()
        return cls.only(*[t.strip() for t in text.split(",") if t.strip()])

    def enabled(self) -> tuple[str, ...]:
        return tuple(f for f in FACTORS if getattr(self, f))

    def masked(self, domain: str) -> "FactorToggles":
        allowed = APPLICABLE[domain]
        return FactorToggles(**{f: getattr(self, f) and f in allowed for f in FACTORS})

    def to_string(self) -> str:
        on = self.enabled()
        if len(on) == len(FACTORS):
            return "all"
        return ",".join(on) if on else "none"


@dataclass(frozen=True)
class TextureSpec:
    family: str
    params: tuple[float, ...]
    colors: tuple[RGB, RGB]


@dataclass(frozen=True)
class CameraSpec:
    translate_x: float = 0.0
    translate_y: float = 0.0
    rotation: float = 0.0
    zoom: float = 1.0


@dataclass(frozen=True)
class LightSpec:
    brightness: float = 1.0
    shading: float = 0.2
    direction: float = -math.pi / 4


@dataclass(frozen=True)
class VisualSpec:
    """Concrete appearance. Equality compares appearance only (not seed/toggles)."""

    floor: TextureSpec
    background: TextureSpec
    body_color: RGB
    target_color: RGB
    camera: CameraSpec
    lighting: LightSpec
    reflectance: float
    visual_seed: int = field(default=0, compare=False)
    toggles: FactorToggles = field(default_factory=FactorToggles, compare=False)

    def describe(self) -> dict:
        """Plain-data view of every factor value (used for manifests)."""
        out = {"visual_seed": self.visual_seed, "toggles": self.toggles.to_string()}
        for f in fields(self):
            if f.name in ("visual_seed", "toggles"):
                continue
            v = getattr(self, f.name)
            out[f.name] = asdict(v) if hasattr(v, "__dataclass_fields__") else v
        return out


CANONICAL_FLOOR = TextureSpec("checker", (6.0, 0.0, 0.0, 0.0), ((0.25, 0.33, 0.42), (0.14, 0.20, 0.27)))
CANONICAL_BACKGROUND = TextureSpec("linear", (math.pi / 2, 1.2, 0.0), ((0.42, 0.62, 0.82), (0.10, 0.14, 0.22)))
CANONICAL_BODY = (0.7, 0.5, 0.3)
CANONICAL_TARGET = (0.6, 0.25, 0.25)
CANONICAL_REFLECTANCE = 0.15


def canonical_spec(toggles: FactorToggles | None = None) -> VisualSpec:
    return VisualSpec(
        floor=CANONICAL_FLOOR,
        background=CANONICAL_BACKGROUND,
        body_color=CANONICAL_BODY,
        target_color=CANONICAL_TARGET,
        camera=CameraSpec(),
        lighting=LightSpec(),
        reflectance=CANONICAL_REFLECTANCE,
        visual_seed=0,
        toggles=toggles if toggles is not None else FactorToggles(),
    )


def factor_rng(seed: int, factor: str):
    return keyed_rng(seed, string_code("factor:" + factor))


def _sample_texture(rng) -> TextureSpec:
    family = TEXTURE_FAMILIES[int(rng.integers(len(TEXTURE_FAMILIES)))]
    u = rng.uniform
    if family == "checker":
        params = (u(3.0, 12.0), u(-math.pi / 4, math.pi / 4), u(0.0, 1.0), u(0.0, 1.0))
    elif family == "stripes":
        params = (u(3.0, 16.0), u(0.0, math.pi), u(0.0, 1.0), u(0.25, 0.75))
    elif family == "noise":
        params = (u(2.0, 10.0), float(rng.integers(0, 2**31)), u(0.0, 1.0), u(0.0, 1.0))
    elif family == "linear":
        params = (u(0.0, 2 * math.pi), u(0.5, 2.0), u(-0.3, 0.3))
    else:
        params = (u(0.2, 0.8), u(0.2, 0.8), u(0.3, 1.0))
    c = rng.uniform(0.0, 1.0, size=(2, 3))
    colors = (tuple(float(v) for v in c[0]), tuple(float(v) for v in c[1]))
    return TextureSpec(family, tuple(float(p) for p in params), colors)


def _rgb(rng) -> RGB:
    return tuple(float(v) for v in rng.uniform(0.0, 1.0, size=3))


def sample_factor(seed: int, factor: str):
    """Value of one factor for a nonzero seed, independent of all other factors."""
    rng = factor_rng(seed, factor)
    if factor == "floor" or factor == "background":
        return _sample_texture(rng)
    if factor == "body_color" or factor == "target_color":
        return _rgb(rng)
    if factor == "camera":
        return CameraSpec(
            translate_x=float(rng.uniform(-CAMERA_SHIFT, CAMERA_SHIFT)),
            translate_y=float(rng.uniform(-CAMERA_SHIFT, CAMERA_SHIFT)),
            rotation=float(rng.uniform(-CAMERA_ROTATION, CAMERA_ROTATION)),
            zoom=float(rng.uniform(*CAMERA_ZOOM)),
        )
    if factor == "light":
        return LightSpec(
            brightness=float(rng.uniform(*BRIGHTNESS)),
            shading=float(rng.uniform(*SHADING)),
            direction=float(rng.uniform(-math.pi, math.pi)),
        )
    if factor == "reflectance":
        return float(rng.uniform(*REFLECTANCE))
    raise ConfigError(f"unknown factor {factor!r}")


_FIELD = {
    "light": "lighting",
    "camera": "camera",
    "body_color": "body_color",
    "target_color": "target_color",
    "floor": "floor",
    "background": "background",
    "reflectance": "reflectance",
}


def sample_visual_spec(seed: int, toggles: FactorToggles, domain: str) -> VisualSpec:
    if seed < 0:
        raise ValueError("visual seed must be non-negative")
    if domain not in DOMAINS:
        raise ConfigError(f"unknown domain {domain!r}")
    toggles = toggles.masked(domain)
    spec = canonical_spec(toggles)
    if seed == 0:
        return spec
    updates = {_FIELD[f]: sample_factor(seed, f) for f in toggles.enabled()}
    return replace(spec, visual_seed=seed, **updates)
