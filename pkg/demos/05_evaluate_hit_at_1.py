"""
Cluster-aware Hit@1 and a frequency baseline
============================================

"""

from phytosub import data_path
from phytosub.corpus import load_substitutions, split_records
from phytosub.evaluation import baseline_predictions, evaluate_runs, hit_at_1, parse_predictions, train_frequency_baseline
from phytosub.normalize import cluster_ingredients

preds = parse_predictions(data_path("predictions_20.jsonl"))

# exact matching is strict, clusters forgive plurals and curated look-alikes
print("no groups:     ", hit_at_1(preds).hit_at_1)
clusters = cluster_ingredients([], data_path("curated_clusters.csv"))
print("curated groups:", hit_at_1(preds, clusters).hit_at_1)

# several runs pool into a mean ± std row
print(evaluate_runs([preds, preds[:10], preds[10:]], clusters).format_table("Synthetic", "Fixture"))

records = load_substitutions(data_path("mini_corpus.jsonl"))
model = train_frequency_baseline(split_records(records, "train"))
test = baseline_predictions(model, split_records(records, "test"))
print("baseline Hit@1:", hit_at_1(test, clusters).hit_at_1)
