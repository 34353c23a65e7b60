"""
Runtime self-checks
===================

The same suite as ``fssmsc check``: finite-difference gradients, trace-ratio
optimality against random sampling, feasibility along a run, and monotone
descent when the penalty is raised above the descent threshold.
"""

from fssmsc import cli, diagnostics, pipeline, solver

ds, lm, cs = pipeline.prepare(cli.builtin_check_dataset(), 0.2, 12, seed=0)
for result in diagnostics.run_checks(ds, lm, cs, solver.SolverConfig()):
    print(result.line())

# below the threshold the descent check does not apply
print(diagnostics.check_descent(ds, lm, cs, solver.SolverConfig(), lam=1e-3).line())
