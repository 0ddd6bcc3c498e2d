"""
Validity filtration against a scripted backend
==============================================

"""

import tempfile

from phytosub import data_path
from phytosub.corpus import load_corpus, load_substitutions
from phytosub.filtration import ValidityLabel, run_filtration, summarize_runs
from phytosub.gateway import Gateway, GatewayConfig, MockBackend, VirtualClock

records = load_substitutions(data_path("exemplars.jsonl"))
corpus = load_corpus(data_path("recipes.jsonl"))

# the mock answers by prompt hash, the virtual clock makes throttling instant
gateway = Gateway(MockBackend.from_file(data_path("exemplar_mock.json")), GatewayConfig(), VirtualClock())

out = tempfile.mkdtemp()
runs = run_filtration(records, corpus, gateway, runs=3, out_dir=out)

run = runs[0]
for label in ValidityLabel:
    print(label.value, [f"{r.source} -> {r.target}" for r in run.bucket(label)])

print(summarize_runs(runs).format())
print("run files in", out)
