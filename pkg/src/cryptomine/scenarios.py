"""Scenario descriptions, run profiles and the named preset registry."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .mine import MineConfig

SOURCE_TYPES = ("uniform", "ge", "constant", "mixed_one_constant", "nibble")
SCHEMES = (
    "none", "otp", "otp_with_key", "xor_repeat", "caesar", "spn",
    "aes128_ecb", "aes128_ctr", "huncc",
)
PROBE_VIEWS = ("fixed_message", "all_messages")
# default uniformity sweep grid
TABLE1_ALPHAS = (0.01, 0.02, 0.03, 0.05, 0.075, 0.10, 0.15, 0.20, 0.5)
TABLE1_SCHEMES = ("huncc", "aes128_ctr", "aes128_ecb")


class ConfigError(ValueError):
    """Invalid or unknown scenario configuration."""


@dataclass(frozen=True)
class SourceSpec:
    type: str = "uniform"
    alpha: float | None = None
    # byte used by constant sources and by the fixed message of mixed_one_constant
    value: int = 0xFF
    fixed_link: int = 0

    def __post_init__(self) -> None:
        if self.type not in SOURCE_TYPES:
            raise ConfigError(f"unknown source type {self.type!r}")
        if self.type == "ge":
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise ConfigError("ge source needs alpha in [0, 1]")
        elif self.alpha is not None:
            raise ConfigError(f"alpha is only valid for ge sources, not {self.type!r}")
        if not 0 <= self.value <= 255:
            raise ConfigError("constant value must be an octet")


@dataclass(frozen=True)
class Profile:
    name: str
    n_samples: int
    wide_n_samples: int
    batch_size: int
    epochs: int
    long_epochs: int


PROFILES = {
    "quick": Profile("quick", 20_000, 100_000, 2_000, 300, 300),
    "paper": Profile("paper", 100_000, 500_000, 10_000, 2_000, 5_000),
}


@dataclass
class Scenario:
    """A fully specified experiment: plaintext source, cryptosystem and estimator settings.

    ``n_links`` > 1 gives HUNCC-scale samples (link-major concatenation of
    ``n_links`` messages of ``msg_len`` bytes). ``probe_view`` selects what the
    adversary sees as x in the individual-secrecy probe.
    """

    name: str
    source: SourceSpec = field(default_factory=SourceSpec)
    scheme: str = "none"
    n_links: int = 1
    msg_len: int = 16
    n_encrypted: int = 1
    probe_view: str | None = None
    long_training: bool = False
    n_samples: int | None = None
    seed: int = 0
    mine: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if isinstance(self.source, dict):
            self.source = _build(SourceSpec, self.source, "source")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.n_links < 1 or self.msg_len < 1:
            raise ConfigError("n_links and msg_len must be positive")
        if self.scheme == "huncc" and not 1 <= self.n_encrypted <= self.n_links:
            raise ConfigError("need 1 <= n_encrypted <= n_links")
        if self.scheme in ("spn", "aes128_ecb", "huncc") and self.msg_len % 16:
            raise ConfigError(f"{self.scheme} needs msg_len a multiple of 16")
        if self.probe_view is not None:
            if self.probe_view not in PROBE_VIEWS:
                raise ConfigError(f"unknown probe_view {self.probe_view!r}")
            if self.source.type != "mixed_one_constant":
                raise ConfigError("probe_view needs a mixed_one_constant source")
        if self.source.type == "mixed_one_constant" and not 0 <= self.source.fixed_link < self.n_links:
            raise ConfigError("fixed_link out of range")
        bad = set(self.mine) - {f.name for f in dataclasses.fields(MineConfig)} - {"input_dim"}
        if bad or "input_dim" in self.mine:
            raise ConfigError(f"invalid mine overrides: {sorted(bad | ({'input_dim'} & set(self.mine)))}")
        if self.n_samples is not None and self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")

    @property
    def wide(self) -> bool:
        return self.n_links > 1

    @property
    def dx(self) -> int:
        if self.probe_view == "fixed_message":
            return self.msg_len
        return self.n_links * self.msg_len

    @property
    def dy(self) -> int:
        d = self.n_links * self.msg_len
        return 2 * d if self.scheme == "otp_with_key" else d

    def resolved_samples(self, profile: Profile) -> int:
        if self.n_samples is not None:
            return self.n_samples
        return profile.wide_n_samples if self.wide else profile.n_samples

    def mine_config(self, profile: Profile) -> MineConfig:
        n = self.resolved_samples(profile)
        base = dict(
            input_dim=self.dx + self.dy,
            batch_size=min(profile.batch_size, n),
            epochs=profile.long_epochs if self.long_training else profile.epochs,
            seed=self.seed,
            eval_every=1,
        )
        base.update(self.mine)
        return MineConfig(**base)

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _build(cls, data: dict[str, Any], where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    data = dict(data)
    if "source" in data:
        data["source"] = _build(SourceSpec, data["source"], "source")
    if "mine" in data and "hidden" in data["mine"]:
        data["mine"] = {**data["mine"], "hidden": tuple(data["mine"]["hidden"])}
    if "name" not in data:
        raise ConfigError("scenario needs a name")
    return _build(Scenario, data, "scenario")


def load_scenario_file(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# presets


def _uniform(scheme: str, **kw) -> Scenario:
    return Scenario(name=kw.pop("name", scheme), scheme=scheme, **kw)


def huncc_scenario(alpha: float | None, scheme: str = "huncc", seed: int = 0,
                   n_samples: int | None = None, n_encrypted: int = 1) -> Scenario:
    """8 links x 16 bytes, as used for the uniformity sweep."""
    source = SourceSpec("uniform") if alpha is None else SourceSpec("ge", alpha=alpha)
    tag = "uniform" if alpha is None else f"ge{alpha:g}"
    return Scenario(name=f"{scheme}_{tag}", source=source, scheme=scheme, n_links=8,
                    n_encrypted=n_encrypted, long_training=True, n_samples=n_samples, seed=seed)


def probe_scenario(view: str = "fixed_message", seed: int = 0, n_samples: int | None = None,
                   n_encrypted: int = 1, fixed_link: int = 0) -> Scenario:
    return Scenario(
        name=f"probe_{view}",
        source=SourceSpec("mixed_one_constant", value=0xFF, fixed_link=fixed_link),
        scheme="huncc", n_links=8, n_encrypted=n_encrypted, probe_view=view,
        long_training=True, n_samples=n_samples, seed=seed,
    )


PRESETS: dict[str, Any] = {
    "none": lambda: _uniform("none"),
    "otp": lambda: _uniform("otp"),
    "otp_with_key": lambda: _uniform("otp_with_key"),
    "xor_repeat": lambda: _uniform("xor_repeat"),
    "caesar": lambda: _uniform("caesar", long_training=True),
    "spn": lambda: _uniform("spn", long_training=True),
    "aes128_ecb": lambda: _uniform("aes128_ecb", long_training=True),
    "aes128_ctr": lambda: _uniform("aes128_ctr", long_training=True),
    "aes128_ecb_ge": lambda: _uniform("aes128_ecb", name="aes128_ecb_ge",
                                      source=SourceSpec("ge", alpha=0.02), long_training=True),
    "nibble_identity": lambda: Scenario(name="nibble_identity", source=SourceSpec("nibble")),
    "huncc_uniform": lambda: huncc_scenario(None),
    "probe": lambda: probe_scenario("fixed_message"),
    "probe_all": lambda: probe_scenario("all_messages"),
}

GROUPS = {
    "fig1": ("none", "otp", "otp_with_key", "xor_repeat"),
    "fig2": ("aes128_ecb", "aes128_ctr", "spn", "caesar", "aes128_ecb_ge"),
    "probe": ("probe",),
}


def resolve(name_or_path: str, seed: int = 0) -> list[Scenario]:
    """Scenarios for a preset name, a preset group, or a JSON config file."""
    if name_or_path in GROUPS:
        return [PRESETS[n]().with_seed(seed) for n in GROUPS[name_or_path]]
    if name_or_path in PRESETS:
        return [PRESETS[name_or_path]().with_seed(seed)]
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise ConfigError(f"scenario file {path} not found")
        return [load_scenario_file(path)]
    raise ConfigError(
        f"unknown scenario {name_or_path!r}; presets: {sorted(PRESETS)}, groups: {sorted(GROUPS)}"
    )


@dataclass(frozen=True)
class SweepSpec:
    alphas: tuple[float, ...] = TABLE1_ALPHAS
    schemes: tuple[str, ...] = TABLE1_SCHEMES
    seeds: tuple[int, ...] = (0,)
    n_samples: int | None = None

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not alphas:
            raise ConfigError("sweep needs at least one alpha")
        if any(not 0.0 < a <= 0.5 for a in alphas):
            raise ConfigError("sweep alphas must lie in (0, 0.5]")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigError("sweep alphas must be strictly increasing")
        bad = set(self.schemes) - set(TABLE1_SCHEMES)
        if bad:
            raise ConfigError(f"sweep schemes must be among {TABLE1_SCHEMES}, got {sorted(bad)}")
        if not self.seeds:
            raise ConfigError("sweep needs at least one seed")


SWEEPS = {"table1": SweepSpec()}


def resolve_sweep(name_or_path: str) -> SweepSpec:
    if name_or_path in SWEEPS:
        return SWEEPS[name_or_path]
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"unknown sweep spec {name_or_path!r}; presets: {sorted(SWEEPS)}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return _build(SweepSpec, data, "sweep spec")
