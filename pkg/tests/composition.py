"""Direct module composition used as the reference for gateway responses."""

from itinopt.catalog import green_flags
from itinopt.costmodel import reprice_catalog
from itinopt.domain import Itinerary, evaluate
from itinopt.exceptions import NoFeasibleSolution, OptimizerFailed
from itinopt.greedy import AnnealConfig, anneal_refine, greedy_optimize
from itinopt.nsga2 import GaConfig, run_nsga2, scalarize
from itinopt.preferences import compile, matching_rate, prune


def _plan(it, priced, original):
    ids = [seg.options[c].id for seg, c in zip(priced.segments, it.choices)]
    choices = [[o.id for o in seg.options].index(i) for seg, i in zip(original.segments, ids)]
    cost, time_, em = evaluate(it, priced)
    return {"choices": choices, "option_ids": ids, "objectives": {"cost": cost, "time": time_, "emissions": em}}


def expected_response(catalog, request, cost_model):
    """The response body a gateway should give for ``request``, minus timings."""
    prefs = request.prefs
    diagnostics = []
    pruned = prune(catalog, compile(prefs), diagnostics)
    priced = reprice_catalog(pruned, cost_model, request.pricing_ctx)
    priced_full = reprice_catalog(catalog, cost_model, request.pricing_ctx)
    alternatives = []
    best = None
    if request.mode == "pareto":
        try:
            outcome = run_nsga2(priced, prefs, request.ga_config or GaConfig())
            best = outcome.recommended
            front = outcome.pareto_front
            scores = scalarize(front, prefs.objective_weights)
            order = sorted(range(len(front)), key=lambda i: (scores[i], front[i].itinerary.choices))
            alternatives = [front[i].itinerary for i in order[:10]]
        except NoFeasibleSolution as exc:
            diagnostics.append(f"pareto front empty ({exc}); fell back to greedy")
    if best is None:
        res = greedy_optimize(priced, prefs)
        if not res.completed:
            raise OptimizerFailed(f"greedy stuck at segment {res.stuck_segment}")
        if request.mode == "greedy_annealed":
            res = anneal_refine(res, priced, prefs, request.anneal_config or AnnealConfig())
        best = res.itinerary
    rec = _plan(best, priced, catalog)
    original_choices = Itinerary(tuple(rec["choices"]))
    flags = green_flags(priced_full)
    return {
        "request_id": request.request_id,
        "mode": request.mode,
        "recommended": rec,
        "alternatives": [_plan(a, priced, catalog) for a in alternatives],
        "match_report": matching_rate(original_choices, priced_full, prefs).to_dict(),
        "green": any(flags[s][c] for s, c in enumerate(original_choices.choices)),
        "diagnostics": diagnostics,
        "complete": True,
    }
