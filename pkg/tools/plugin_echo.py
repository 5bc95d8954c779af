"""
Reference plugin backend for the line-delimited JSON protocol of backends/plugin.py.

Reads one request per line on stdin and answers one response per line on stdout, serving
every capability from the deterministic stubs. Useful as a template for wrapping a real
model and for exercising the plugin path end to end:

  "translator": {"kind": "plugin", "transport": "subprocess",
                 "command": ["python", "tools/plugin_echo.py"]}

  --fail-op OP   answer every request for OP with {"ok": false} (error-path testing)
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from backends.plugin import decode_image, encode_image  # noqa: E402
from backends.stubs import (                            # noqa: E402
    stub_captioner, stub_embedder, stub_imagegen, stub_lm, stub_paraphraser, stub_translator,
)


class EchoPlugin:
    def __init__(self, args):
        self.translator = stub_translator(args.translator)
        self.paraphraser = stub_paraphraser(args.paraphraser)
        self.captioner = stub_captioner()
        self.imagegen = stub_imagegen(args.imagegen)
        self.embedder = stub_embedder(args.dim)
        self.lm = stub_lm(args.vocab_size)
        self.fail_op = args.fail_op

    def handle(self, op: str, p: dict, seed):
        if op == "translate":
            return self.translator.translate(p["text"], p["source"], p["target"])
        if op == "paraphrase":
            return self.paraphraser.paraphrase(p["text"], p["template"], int(seed or 0))
        if op == "caption":
            return self.captioner.caption(decode_image(p["image"]))
        if op == "generate":
            img = self.imagegen.generate(decode_image(p["image"]), p["prompt"], p["strength"], int(seed or 0))
            return encode_image(img)
        if op == "embed":
            return self.embedder.embed(p["text"]).tolist()
        if op == "tokenize":
            return self.lm.tokenize(p["text"])
        if op == "score":
            return self.lm.score(p["tokens"]).tolist()
        raise KeyError(f"unknown op {op!r}")

    def respond(self, line: str) -> dict:
        try:
            message = json.loads(line)
            op = message["op"]
            if op == self.fail_op:
                return {"ok": False, "error": f"{op} disabled by --fail-op"}
            return {"ok": True, "result": self.handle(op, message.get("payload", {}), message.get("seed"))}
        except Exception as e:
            return {"ok": False, "error": f"{type(e).__name__}: {e}"}


def main():
    p = argparse.ArgumentParser(description="Stub-backed JSON-line plugin.")
    p.add_argument("--translator", default="identity")
    p.add_argument("--paraphraser", default="suffix_tag")
    p.add_argument("--imagegen", default="identity")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--vocab-size", type=int, default=50)
    p.add_argument("--fail-op")
    plugin = EchoPlugin(p.parse_args())

    for line in sys.stdin:
        if line.strip():
            sys.stdout.write(json.dumps(plugin.respond(line)) + "\n")
            sys.stdout.flush()


if __name__ == "__main__":
    main()
