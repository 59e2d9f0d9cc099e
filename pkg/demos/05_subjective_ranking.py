"""Simulated pairwise study, participant screening and Thurstone Case V scales."""
import numpy as np

from salrate import ranking
from salrate.frames_io import ComparisonRecord, Outcome

truth = {"uniform": 0.0, "center": 0.35, "model_a": 0.9, "model_b": 1.2}
rng = np.random.default_rng(5)
records = ranking.simulate_case_v(truth, 120, rng, tie_band=0.15)

# every participant also answers a planted check; a few get it wrong
checks = {("check", "uniform", "model_b", Outcome.B_WINS)}
people = sorted({r.participant_id for r in records})
for k, who in enumerate(people):
    answer = Outcome.A_WINS if k % 9 == 0 else Outcome.B_WINS
    records.append(ComparisonRecord("check", "uniform", "model_b", answer, who))

kept = ranking.filter_participants(records, checks)
print("kept %d of %d judgments" % (len(kept), len(records)))

result = ranking.bootstrap_ci(kept, level=0.85, n_boot=500, seed=0)
print(result.to_csv())
for m, s in sorted(zip(result.methods, result.scale), key=lambda t: t[1]):
    centred = truth[m] - np.mean(list(truth.values()))
    print("%-8s estimated %+.3f  true %+.3f" % (m, s, centred))
