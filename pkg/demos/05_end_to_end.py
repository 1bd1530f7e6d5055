# Score the bundled fixture video trace against its specification.
#
# With live endpoints the same call takes frames and a VLM client instead of a
# stored trace, and an LLM client instead of the spec file:
#   neusv evaluate --prompt "..." --frames frames/ \
#       --llm-endpoint URL --llm-model NAME --vlm-endpoint URL --vlm-model NAME

# %%
from neusv.io import data_path, load_profile, load_spec_file, load_trace
from neusv.pipeline import EvaluationConfig, evaluate

prompt, specs = load_spec_file(data_path("fixtures/spec.json"))
trace = load_trace(data_path("fixtures/trace.json"))
print(prompt)
print(trace.props.ids, trace.windows.shape)

# %%
report = evaluate(EvaluationConfig(load_profile()), prompt, specs=specs, trace=trace,
                  trace_source="trace.json")
for mode, out in sorted(report.modes.items()):
    print(f"{mode:26s} P={out.satisfaction_probability:.4f}  score={out.score:.3f}")
print("final score:", report.final_score)

# %% a stricter detector threshold lowers every calibrated confidence
strict = evaluate(EvaluationConfig(load_profile(), gamma_fp=0.8), prompt, specs=specs, trace=trace)
print("final at gamma_fp=0.8:", strict.final_score)
