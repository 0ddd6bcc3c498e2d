"""
Assigning food categories
=========================

"""

import tempfile
from pathlib import Path

from phytosub import data_path
from phytosub.categorize import categorize_all, parse_category
from phytosub.gateway import Gateway, GatewayConfig, MockBackend, VirtualClock

# model answers are repaired onto the closed category list
print(parse_category("vegetables."), parse_category("rocket fuel"))

gateway = Gateway(MockBackend.from_file(data_path("category_mock.json")), GatewayConfig(), VirtualClock())
out = Path(tempfile.mkdtemp()) / "categorized.csv"
result = categorize_all(data_path("ingredients.csv"), out, gateway)

# the duplicated carrot row costs one query, not two
print(result.to_dict())
print(out.read_text())
