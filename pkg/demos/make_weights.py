"""Write a seeded random weight file in the remoni-hdl-v1 JSON format.

The file exercises the model path end to end (`remoni edge run --model`,
`remoni replay --model`); the weights are not trained, so scores hover
near 0.5.

Run: python3 demos/make_weights.py [out.json] [seed]
"""

import json
import sys

from remoni.fall_detector import dump_weights, random_weights

out = sys.argv[1] if len(sys.argv) > 1 else "demo_weights.json"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 42

doc = dump_weights(random_weights(seed))
with open(out, "w") as f:
    json.dump(doc, f)
values = sum(len(layer["values"]) for layer in doc["layers"])
print(f"wrote {out}: arch {doc['arch']}, {len(doc['layers'])} layers, {values} parameters")
