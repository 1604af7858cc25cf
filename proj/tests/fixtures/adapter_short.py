import json
import sys

for line in sys.stdin:
    json.loads(line)
    sys.stdout.write(json.dumps({"v": 1, "tokens": ["a", "b"], "probs": [0.6, 0.3]}) + "\n")
    sys.stdout.flush()
