"""``key = value`` text files and the pipeline configuration."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path


def read_kv(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def write_kv(record: dict, path) -> None:
    lines = [f"{key} = {value}" for key, value in record.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


@dataclass
class PipelineConfig:
    station_file: str | None = None
    data_file: str | None = None
    out_dir: str = "out"
    method: str = "CSI"
    max_missing_frac: float = 0.04
    train_fraction: float = 0.72
    validation_fraction: float = 0.08
    test_fraction: float = 0.20
    p_max: int = 5
    q_max: int = 2
    arma_order: str = "auto"
    architecture: str = "auto"
    endo_architecture: str = "auto"
    hidden: str = "10"
    sweep_grid: list[int] = field(default_factory=lambda: [5, 10, 15])
    seeds: list[int] = field(default_factory=lambda: [0])
    max_epochs: int = 1000
    max_fail: int = 5
    cloud_threshold: float = 0.50
    other_threshold: float = 0.15
    alpha: float = 0.05
    max_endo_lags: int = 10
    max_exo_lags: int = 10
    season_scheme: str = "meteorological"
    compare_methods: list[str] = field(default_factory=lambda: ["none", "CI", "CSI", "CSI_PC"])

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        kv = read_kv(path)
        base = Path(path).parent
        cfg = cls()
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, value in kv.items():
            if key not in types:
                raise ValueError(f"{path}: unknown config key {key!r}")
            setattr(cfg, key, _coerce(types[key], value))
        for key in ("station_file", "data_file", "out_dir"):
            value = getattr(cfg, key)
            if value is not None and not Path(value).is_absolute():
                setattr(cfg, key, str(base / value))
        return cfg

    def validate(self) -> None:
        if not self.seeds:
            raise ValueError("seeds must be a non-empty list")
        total = self.train_fraction + self.validation_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {total}, expected 1")

    def to_record(self) -> dict[str, str]:
        rec = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, list):
                value = " ".join(str(v) for v in value)
            rec[f.name] = "" if value is None else str(value)
        return rec


def _coerce(type_name, value: str):
    type_name = str(type_name)
    if type_name.startswith("list[int]"):
        return _int_list(value)
    if type_name.startswith("list[str]"):
        return value.replace(",", " ").split()
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    if value == "":
        return None
    return value
