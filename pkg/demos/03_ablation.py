"""Every variant on the whole synthetic suite.

The gate ladder adds one condition at a time: A3 needs a visible mask, A4
also a confident one, A5 also a well filled box, A6 also a well covered
mask. McByte is A6 plus camera compensation. A1 and A2 use the mask ratio
as the whole cost, which only works this well because oracle masks are
perfect.
"""
# %%
from mcbyte.metrics import evaluate, format_table, mean_report, tracks_from_records
from mcbyte.pipeline import ALL_VARIANTS, PipelineConfig, run_sequence
from mcbyte.synth import bundled_suite, generate, gt_of, scene_inputs

scenes = [generate(s) for s in bundled_suite()]

# %%
rows = []
for variant in ALL_VARIANTS:
    reports = [evaluate(gt_of(sc), tracks_from_records(
        run_sequence(scene_inputs(sc), PipelineConfig(variant=variant)))) for sc in scenes]
    rows.append((variant.value, mean_report(reports)))
print(format_table(rows, label="variant"))

# %% [markdown]
# The lowconf scene shows the price of the confidence gate: its masks are
# correct but reported at confidence 0.3, so A4 onwards ignores them.
