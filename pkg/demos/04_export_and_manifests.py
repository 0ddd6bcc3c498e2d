"""
Fine-tuning files and training manifests
========================================

"""

import tempfile
from pathlib import Path

from phytosub import data_path
from phytosub.corpus import load_corpus, load_substitutions, split_records
from phytosub.finetune import all_manifests, export_chat, export_prompt_completion, read_jsonl

corpus = load_corpus(data_path("recipes.jsonl"))
train = split_records(load_substitutions(data_path("substitutions.jsonl")), "train")
out = Path(tempfile.mkdtemp())

report = export_prompt_completion(train, corpus, out / "prompt.jsonl")
row = read_jsonl(out / "prompt.jsonl")[0]
print(row["prompt"][-120:])
print(repr(row["completion"]))
print("estimated tokens:", report.token_estimates)

export_chat(train, corpus, out / "chat.jsonl")
print([m["role"] for m in read_jsonl(out / "chat.jsonl")[0]["messages"]])

# manifests describe training runs, nothing is trained here
for m in all_manifests(out):
    print(f"{m.model_kind.value:16}{m.dataset_variant.value:12}{m.epochs:>3}{m.steps:>6}{m.batch_size:>4}")
