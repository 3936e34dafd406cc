"""Config files (TOML sections) with CLI-flag override precedence."""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path

import tomli

from .gateway import GatewayConfig
from .navigator import NavigatorConfig
from .pipeline import PipelineConfig
from .reasoning import ReasonerConfig
from .tools import ToolBackendConfig


def _build(cls, section: dict, base_dir: Path):
    """Instantiate a config dataclass from a TOML section, ignoring
    unknown keys and resolving relative paths against the config file."""
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in section.items():
        if key not in known:
            continue
        if key in ("cache_dir", "mock_script") and isinstance(value, str) and value:
            p = Path(value)
            value = p if p.is_absolute() else base_dir / p
        if isinstance(value, str) and not value:
            value = None
        kwargs[key] = value
    return cls(**kwargs)


def load_config(path: str | Path | None = None) -> tuple[PipelineConfig, dict]:
    """Load a pipeline config plus harness extras ([run] section)."""
    if path is None:
        return PipelineConfig(), {}
    path = Path(path)
    data = tomli.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    gateway_default = data.get("gateway", {})
    cfg = PipelineConfig(
        navigator=_build(NavigatorConfig, data.get("navigator", {}), base),
        reasoner=_build(ReasonerConfig, data.get("reasoner", {}), base),
        tools=_build(ToolBackendConfig, data.get("tools", {}), base),
        navigator_gateway=_build(
            GatewayConfig, {**gateway_default, **data.get("navigator_gateway", {})}, base
        ),
        reasoner_gateway=_build(
            GatewayConfig, {**gateway_default, **data.get("reasoner_gateway", {})}, base
        ),
        ablations=frozenset(data.get("run", {}).get("ablations", [])),
        inflight_cap=data.get("run", {}).get("inflight_cap"),
    )
    extras = {
        "parallelism": data.get("run", {}).get("parallelism", 1),
        "score_mode": data.get("run", {}).get("score_mode", "exact_norm"),
    }
    return cfg, extras


def apply_flag_overrides(
    cfg: PipelineConfig,
    te: int | None = None,
    ta: int | None = None,
    temperature: float | None = None,
    chunk_size: int | None = None,
    no_lens: bool = False,
    no_reasoning: bool = False,
    no_sampling: bool = False,
    no_ocr: bool = False,
    oracle_pages: tuple[int, ...] | None = None,
    oracle_mode: bool = False,
    navigator_model: str | None = None,
    reasoner_model: str | None = None,
    backend: str | None = None,
    mock_script: str | None = None,
    tools_mode: str | None = None,
    cache_dir: str | None = None,
) -> PipelineConfig:
    """CLI flags win over the config file; unset flags leave it alone."""
    nav, rea = cfg.navigator, cfg.reasoner
    if te is not None:
        nav = replace(nav, t_e=te)
    if chunk_size is not None:
        nav = replace(nav, chunk_size=chunk_size, force_chunk=True)
    if temperature is not None:
        nav = replace(nav, temperature=temperature)
        rea = replace(rea, temperature=temperature)
    if ta is not None:
        rea = replace(rea, t_a=ta)

    nav_gw, rea_gw = cfg.navigator_gateway, cfg.reasoner_gateway
    if backend is not None:
        nav_gw = replace(nav_gw, backend=backend)
        rea_gw = replace(rea_gw, backend=backend)
    if mock_script is not None:
        nav_gw = replace(nav_gw, mock_script=Path(mock_script))
        rea_gw = replace(rea_gw, mock_script=Path(mock_script))
    if navigator_model is not None:
        nav_gw = replace(nav_gw, model_name=navigator_model)
    if reasoner_model is not None:
        rea_gw = replace(rea_gw, model_name=reasoner_model)

    tools = cfg.tools
    if tools_mode is not None or cache_dir is not None:
        tools = ToolBackendConfig(
            mode=tools_mode or tools.mode,
            endpoint=tools.endpoint,
            cache_dir=Path(cache_dir) if cache_dir else tools.cache_dir,
        )

    ablations = set(cfg.ablations)
    for flag, name in (
        (no_lens, "no_lens"),
        (no_reasoning, "no_reasoning"),
        (no_sampling, "no_sampling"),
        (no_ocr, "no_ocr"),
    ):
        if flag:
            ablations.add(name)
    pages = cfg.oracle_pages
    if oracle_pages is not None:
        ablations.add("oracle_pages")
        pages = tuple(oracle_pages)
    if oracle_mode:
        ablations.add("oracle_pages")

    return replace(
        cfg,
        navigator=nav,
        reasoner=rea,
        tools=tools,
        navigator_gateway=nav_gw,
        reasoner_gateway=rea_gw,
        ablations=frozenset(ablations),
        oracle_pages=pages,
    )
