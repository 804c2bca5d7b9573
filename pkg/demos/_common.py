import json
from pathlib import Path

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def config(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())
