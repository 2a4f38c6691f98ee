"""End-to-end dialogue generation: outline, value variation, template surface.

One dialogue is a pure function of (assets, master seed, index): every random
draw flows from random.Random(f"{seed}:{index}"), so corpora are byte-stable
regardless of worker count and regenerable from the seed alone.  Backend
entity tables are sampled once at asset-load time from the master seed, so
the whole corpus shares one database per service.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .backend import Backend, load_backend
from .dialogue import Dialogue, validate_dialogue
from .paraphrase import (
    TemplateSet,
    VariationTable,
    check_templates,
    render_templates,
    validate_paraphrase,
    vary_values,
)
from .schema import ServiceSchema, load_schema_dir
from .simulator import (
    AutomatonConfig,
    ScenarioCatalog,
    generate_outline,
    sample_scenario,
    validate_catalog,
    validate_outline,
)


class GenerationError(Exception):
    """A dialogue failed to generate or validate; message carries the index."""


@dataclass
class GenerationAssets:
    schemas: dict[str, ServiceSchema]
    backends: dict[str, Backend]
    catalog: ScenarioCatalog
    templates: TemplateSet
    variations: VariationTable
    automaton: AutomatonConfig


def _read_json(path: str | Path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GenerationError(f"{path}: not valid JSON ({exc})")


def load_assets(schemas_dir: str | Path,
                backends_dir: str | Path,
                scenarios_file: str | Path,
                templates_file: str | Path,
                variations_file: str | Path | None = None,
                automaton_file: str | Path | None = None,
                seed: int = 0) -> GenerationAssets:
    """Load and cross-validate everything generation needs."""
    schemas = load_schema_dir(schemas_dir)
    if not schemas:
        raise GenerationError(f"no schemas found under {schemas_dir}")

    backend_rng = random.Random(f"{seed}:backend")
    backends = {}
    for name, schema in schemas.items():
        path = Path(backends_dir) / f"{name}.json"
        if not path.exists():
            continue
        backends[name] = load_backend(schema, _read_json(path), backend_rng)

    catalog = ScenarioCatalog.from_dict(_read_json(scenarios_file))
    problems = validate_catalog(catalog, {
        name: schemas[name] for name in schemas if name in backends
    })
    if problems:
        raise GenerationError(
            "scenario catalog invalid:\n" + "\n".join(f"  {p}" for p in problems)
        )

    templates = TemplateSet.from_dict(_read_json(templates_file))
    tpl_problems = check_templates(templates)
    if tpl_problems:
        raise GenerationError(
            "template set invalid:\n" + "\n".join(f"  {p}" for p in tpl_problems)
        )

    if variations_file is not None:
        variations = VariationTable.from_dict(_read_json(variations_file))
    else:
        variations = VariationTable()

    if automaton_file is not None:
        automaton = AutomatonConfig.from_dict(_read_json(automaton_file))
    else:
        automaton = AutomatonConfig()

    return GenerationAssets(
        schemas=schemas,
        backends=backends,
        catalog=catalog,
        templates=templates,
        variations=variations,
        automaton=automaton,
    )


def build_dialogue(assets: GenerationAssets, index: int, seed: int) -> Dialogue:
    """Generate, vary, render, and validate dialogue number `index`."""
    rng = random.Random(f"{seed}:{index}")
    dialogue_id = f"{index + 1:05d}"
    try:
        scenario = sample_scenario(assets.catalog, rng)
        outline = generate_outline(
            scenario, assets.backends, assets.automaton, rng,
            dialogue_id=dialogue_id, catalog=assets.catalog,
        )
        problems = validate_outline(outline, assets.schemas)
        if problems:
            raise GenerationError("outline invalid: " + "; ".join(problems[:3]))
        varied = vary_values(outline, assets.variations, rng)
        aliases = varied.metadata.get("value_variations", {})
        problems = validate_outline(varied, assets.schemas, aliases=aliases)
        if problems:
            raise GenerationError("varied outline invalid: " + "; ".join(problems[:3]))
        rendered = render_templates(varied, assets.templates, assets.schemas)
        problems = validate_dialogue(rendered, assets.schemas)
        if problems:
            raise GenerationError("rendered dialogue invalid: " + "; ".join(problems[:3]))
        for turn in rendered.turns:
            if turn.speaker != "USER":
                continue
            check = validate_paraphrase(turn, turn.utterance, assets.schemas)
            if not check.accepted:
                raise GenerationError(
                    f"rendered turn dropped values {check.missing}: {turn.utterance!r}"
                )
        return rendered
    except GenerationError as exc:
        raise GenerationError(f"dialogue {index} (id {dialogue_id}): {exc}") from exc
    except Exception as exc:
        raise GenerationError(f"dialogue {index} (id {dialogue_id}): {exc}") from exc


def generate_corpus(assets: GenerationAssets, num: int, seed: int,
                    workers: int = 1) -> list[Dialogue]:
    """Generate dialogues 0..num-1; output is identical for any worker count."""
    if num < 0:
        raise ValueError("num must be non-negative")
    if workers <= 1:
        return [build_dialogue(assets, i, seed) for i in range(num)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: build_dialogue(assets, i, seed), range(num)))
