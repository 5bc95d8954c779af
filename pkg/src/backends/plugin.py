"""
Plugin backends speaking a line-delimited JSON protocol.

Request  : {"op": str, "payload": {...}, "seed": int | null}
Response : {"ok": true, "result": ...}  or  {"ok": false, "error": str}

Two transports carry the same messages:
  SubprocessTransport  one JSON object per line over a child process's stdin/stdout
  HttpTransport        one POST per request, JSON body in both directions

Images travel as base64-encoded PNG. Plugins are SERIALIZED: a child process answers one
request at a time, so the pipeline wraps them with backends.base.serialized().
"""

import base64
import io
import json
import subprocess
import threading

import numpy as np
import requests
from PIL import Image

from errors import BackendError
from dataset.images import ImageTensor, from_uint8, to_uint8
from backends.base import ConcurrencyClass


def encode_image(img: ImageTensor) -> str:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(data: str) -> ImageTensor:
    try:
        with Image.open(io.BytesIO(base64.b64decode(data))) as im:
            return from_uint8(np.asarray(im.convert("RGB")))
    except (OSError, ValueError) as e:
        raise BackendError(f"plugin returned an undecodable image: {e}") from e


class SubprocessTransport:
    def __init__(self, command: list[str], timeout_s: float = 120.0):
        self.command = list(command)
        self.timeout_s = timeout_s
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise BackendError(f"cannot start plugin {self.command}: {e}") from e

    def request(self, message: dict) -> dict:
        with self._lock:
            if self._proc.poll() is not None:
                raise BackendError(f"plugin {self.command[0]} exited with code {self._proc.returncode}")
            try:
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
                line = self._proc.stdout.readline()
            except OSError as e:
                raise BackendError(f"plugin pipe broken: {e}") from e
        if not line:
            raise BackendError(f"plugin {self.command[0]} closed its output")
        try:
            return json.loads(line)
        except json.JSONDecodeError as e:
            raise BackendError(f"plugin sent invalid JSON: {line[:80]!r}") from e

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=self.timeout_s)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class HttpTransport:
    def __init__(self, endpoint: str, timeout_s: float = 120.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self._session = requests.Session()

    def request(self, message: dict) -> dict:
        try:
            r = self._session.post(self.endpoint, json=message, timeout=self.timeout_s)
            r.raise_for_status()
            return r.json()
        except requests.RequestException as e:
            raise BackendError(f"plugin endpoint {self.endpoint} failed: {e}") from e
        except ValueError as e:
            raise BackendError(f"plugin endpoint {self.endpoint} sent invalid JSON") from e

    def close(self):
        self._session.close()


class PluginBackend:
    """Base adapter: one call() per protocol round trip."""
    concurrency = ConcurrencyClass.SERIALIZED

    def __init__(self, transport, name: str = "plugin"):
        self.transport = transport
        self.name = name

    def call(self, op: str, payload: dict, seed: int | None = None):
        response = self.transport.request({"op": op, "payload": payload, "seed": seed})
        if not isinstance(response, dict) or "ok" not in response:
            raise BackendError(f"{self.name}: malformed response to {op!r}")
        if not response["ok"]:
            raise BackendError(f"{self.name}: {op} failed: {response.get('error', 'unknown error')}")
        return response.get("result")

    def close(self):
        self.transport.close()


class PluginTranslator(PluginBackend):
    def translate(self, text: str, source: str, target: str) -> str:
        return str(self.call("translate", {"text": text, "source": source, "target": target}))


class PluginParaphraser(PluginBackend):
    def paraphrase(self, text: str, template: str, seed: int) -> str:
        return str(self.call("paraphrase", {"text": text, "template": template}, seed))


class PluginCaptioner(PluginBackend):
    def caption(self, image: ImageTensor) -> str:
        return str(self.call("caption", {"image": encode_image(image)}))


class PluginImageGen(PluginBackend):
    def generate(self, image: ImageTensor, prompt: str, strength: float, seed: int) -> ImageTensor:
        out = decode_image(self.call("generate", {
            "image": encode_image(image), "prompt": prompt, "strength": strength,
        }, seed))
        if not out.same_size(image):
            raise BackendError(f"{self.name}: generated image is {out.shape}, expected {image.shape}")
        return out


class PluginEmbedder(PluginBackend):
    def __init__(self, transport, dim: int, name: str = "plugin"):
        super().__init__(transport, name)
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.asarray(self.call("embed", {"text": text}), dtype=np.float64)
        if vec.shape != (self.dim,):
            raise BackendError(f"{self.name}: embedding has shape {vec.shape}, expected ({self.dim},)")
        return vec


class PluginScorer(PluginBackend):
    def tokenize(self, text: str) -> list[str]:
        return [str(t) for t in self.call("tokenize", {"text": text})]

    def score(self, tokens: list[str]) -> np.ndarray:
        return np.asarray(self.call("score", {"tokens": list(tokens)}), dtype=np.float64)


PLUGIN_CLASSES = {
    "translator":  PluginTranslator,
    "paraphraser": PluginParaphraser,
    "captioner":   PluginCaptioner,
    "imagegen":    PluginImageGen,
    "embedder":    PluginEmbedder,
    "scorer":      PluginScorer,
}
