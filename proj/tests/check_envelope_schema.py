# Copyright 2026 The casediag Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Validates envelopes read from a sample generator against the published schema."""
import json
import subprocess
import sys

import jsonschema


def main() -> int:
    schema_path, generator = sys.argv[1], sys.argv[2]
    with open(schema_path, encoding="utf-8") as f:
        schema = json.load(f)
    validator = jsonschema.Draft202012Validator(schema)
    jsonschema.Draft202012Validator.check_schema(schema)
    out = subprocess.run([generator], check=True, capture_output=True, text=True).stdout
    envelopes = [json.loads(line) for line in out.splitlines() if line.strip()]
    states = {e["state"] for e in envelopes}
    failures = 0
    for e in envelopes:
        errors = list(validator.iter_errors(e))
        for err in errors:
            print(f"FAIL {e['id']}: {err.message}")
        failures += bool(errors)
        if json.loads(json.dumps(e)) != e:
            print(f"FAIL {e['id']}: round trip changed the envelope")
            failures += 1
    for missing in ({"AwaitingAnswer", "Complete", "Aborted"} - states):
        print(f"FAIL no sample in state {missing}")
        failures += 1
    broken = dict(envelopes[0])
    del broken["id"]
    broken["bandit_id"] = "leak"
    if validator.is_valid(broken):
        print("FAIL schema accepted an envelope without id and with an extra key")
        failures += 1
    print(f"{len(envelopes)} envelopes checked, {failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
