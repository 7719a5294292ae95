from typing import List
import json


def cli_params_from_dict(d) -> List[str]:
    cli_params = []
    for k, v in d.items():
        cli_params.append(f"--{k}")
        cli_params.append(str(v))
    return cli_params


def write_scenario(path, *faults, name="scenario") -> str:
    path.write_text(json.dumps({"name": name, "faults": list(faults)}))
    return str(path)


def read_report(path) -> dict:
    with open(path) as f:
        return json.load(f)
