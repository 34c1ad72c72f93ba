"""Assets that maintain the fine-grid reference cache."""

import pandas as pd
from dagster import AssetExecutionContext, Output, asset

from stokes_control.config import RunConfig, validate_run_config
from stokes_control.references import generate_reference
from stokes_control.resources import ReferenceCacheResource


@asset(
    description="Scott-Vogelius reference solutions for every (example, nu, alpha) of the sweep",
    group_name="references",
)
def reference_solutions(
    context: AssetExecutionContext,
    config: RunConfig,
    reference_cache: ReferenceCacheResource,
) -> Output[pd.DataFrame]:
    """Load cached references, generating missing ones when allowed."""
    validate_run_config(config)
    cache = reference_cache
    if not config.generate_references and cache.allow_generate:
        cache = ReferenceCacheResource(cache_dir=reference_cache.cache_dir, allow_generate=False)

    rows = []
    generated = 0
    for example in config.examples:
        for nu in config.nu:
            for alpha in config.alpha:
                level = config.reference_level
                existed = cache.exists(example, nu, alpha, level)

                def build(example=example, nu=nu, alpha=alpha):
                    context.log.info(f"Generating reference ex{example} nu={nu:g} alpha={alpha:g} n={level}")
                    return generate_reference(
                        example,
                        nu,
                        alpha,
                        level,
                        tolerance=config.tolerance,
                        degree=config.assembly_degree,
                        data_degree=config.data_degree,
                        threads=config.threads,
                    )

                reference = cache.ensure(
                    example, nu, alpha, level, build, config.assembly_degree, config.data_degree
                )
                generated += not existed
                rows.append(
                    {
                        "example": int(example),
                        "nu": float(nu),
                        "alpha": float(alpha),
                        "level": int(level),
                        "velocity_dofs": int(reference.space.ndofs),
                        "path": str(cache.path_for(example, nu, alpha, level)),
                    }
                )

    manifest = pd.DataFrame(rows)
    context.log.info(f"{len(manifest)} references ready ({generated} generated)")
    return Output(
        manifest,
        metadata={
            "references": len(manifest),
            "generated": generated,
            "reference_level": config.reference_level,
        },
    )


def get_assets():
    return [reference_solutions]
