"""Encrypted envelopes between named service nodes.

Hybrid scheme: a fresh AES-256-GCM content key encrypts the payload;
the content key is wrapped for the recipient via ephemeral-static
X25519 key agreement (HKDF-SHA256 derives the wrapping key); the
sender signs (sender, recipient, nonce, ciphertext) with Ed25519. A
node's published key material is the 64-byte concatenation of its
Ed25519 and X25519 public keys. Relay hops only ever see envelopes;
payload plaintext exists at the two endpoints alone.
"""

import base64
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)

from .errors import (
    DecryptionFailure,
    DuplicateNodeId,
    GraphFormatError,
    NotRecipient,
    SignatureInvalid,
    UnknownRecipient,
    Unreachable,
)

SCHEME = "x25519-aesgcm-ed25519/v1"
REGISTRY_HEADER = "# textmentor-registry v1"

_SIGN_KEY_BYTES = 32
_WRAP_INFO = b"textmentor envelope key wrap v1"
_NONCE_BYTES = 12


@dataclass(frozen=True)
class NodeIdentity:
    """Public half of a node: id plus 64 bytes of key material."""

    node_id: str
    public_key: bytes

    def __post_init__(self):
        if not self.node_id:
            raise ValueError("node_id must be non-empty")
        if len(self.public_key) != 2 * _SIGN_KEY_BYTES:
            raise ValueError("public key must be 64 bytes (ed25519 || x25519)")

    def verify_key(self) -> Ed25519PublicKey:
        return Ed25519PublicKey.from_public_bytes(self.public_key[:_SIGN_KEY_BYTES])

    def exchange_key(self) -> X25519PublicKey:
        return X25519PublicKey.from_public_bytes(self.public_key[_SIGN_KEY_BYTES:])


@dataclass(frozen=True)
class Envelope:
    envelope_id: str
    sender: str
    recipient: str
    wrapped_key: bytes
    ciphertext: bytes
    nonce: bytes
    signature: bytes

    def to_wire(self) -> bytes:
        data = {
            "envelope_id": self.envelope_id,
            "sender": self.sender,
            "recipient": self.recipient,
            "wrapped_key": _b64(self.wrapped_key),
            "ciphertext": _b64(self.ciphertext),
            "nonce": _b64(self.nonce),
            "signature": _b64(self.signature),
            "scheme": SCHEME,
        }
        return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("ascii")

    @classmethod
    def from_wire(cls, data: bytes):
        try:
            obj = json.loads(data.decode("ascii"))
            return cls(
                envelope_id=obj["envelope_id"],
                sender=obj["sender"],
                recipient=obj["recipient"],
                wrapped_key=_unb64(obj["wrapped_key"]),
                ciphertext=_unb64(obj["ciphertext"]),
                nonce=_unb64(obj["nonce"]),
                signature=_unb64(obj["signature"]),
            )
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            raise GraphFormatError(f"malformed envelope frame: {exc}") from None


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


def _signed_payload(sender: str, recipient: str, nonce: bytes, ciphertext: bytes) -> bytes:
    parts = [sender.encode("utf-8"), recipient.encode("utf-8"), nonce, ciphertext]
    out = [b"tmenv1"]
    for part in parts:
        out.append(len(part).to_bytes(4, "big"))
        out.append(part)
    return b"".join(out)


class Node:
    """A named endpoint holding its private keys and an inbox."""

    def __init__(self, node_id: str, sign_key=None, dh_key=None):
        if not node_id:
            raise ValueError("node_id must be non-empty")
        self.node_id = node_id
        self._sign_key = sign_key or Ed25519PrivateKey.generate()
        self._dh_key = dh_key or X25519PrivateKey.generate()
        self.identity = NodeIdentity(
            node_id=node_id,
            public_key=(
                self._sign_key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
                + self._dh_key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
            ),
        )

    # --- key persistence -------------------------------------------------

    def private_material(self) -> dict:
        return {
            "node_id": self.node_id,
            "scheme": SCHEME,
            "sign": _b64(
                self._sign_key.private_bytes(
                    Encoding.Raw, PrivateFormat.Raw, NoEncryption()
                )
            ),
            "dh": _b64(
                self._dh_key.private_bytes(
                    Encoding.Raw, PrivateFormat.Raw, NoEncryption()
                )
            ),
        }

    @classmethod
    def from_private_material(cls, data: dict):
        return cls(
            node_id=data["node_id"],
            sign_key=Ed25519PrivateKey.from_private_bytes(_unb64(data["sign"])),
            dh_key=X25519PrivateKey.from_private_bytes(_unb64(data["dh"])),
        )

    # --- envelope operations ----------------------------------------------

    def seal(self, recipient: NodeIdentity, payload: bytes) -> Envelope:
        """Encrypt payload to the recipient and sign the envelope."""
        content_key = AESGCM.generate_key(bit_length=256)
        nonce = os.urandom(_NONCE_BYTES)
        ciphertext = AESGCM(content_key).encrypt(nonce, payload, None)

        ephemeral = X25519PrivateKey.generate()
        ephemeral_pub = ephemeral.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        shared = ephemeral.exchange(recipient.exchange_key())
        kek = HKDF(
            algorithm=SHA256(),
            length=32,
            salt=None,
            info=_WRAP_INFO + ephemeral_pub + recipient.public_key,
        ).derive(shared)
        wrap_nonce = os.urandom(_NONCE_BYTES)
        wrapped = AESGCM(kek).encrypt(wrap_nonce, content_key, None)
        wrapped_key = ephemeral_pub + wrap_nonce + wrapped

        signature = self._sign_key.sign(
            _signed_payload(self.node_id, recipient.node_id, nonce, ciphertext)
        )
        return Envelope(
            envelope_id=uuid.uuid4().hex,
            sender=self.node_id,
            recipient=recipient.node_id,
            wrapped_key=wrapped_key,
            ciphertext=ciphertext,
            nonce=nonce,
            signature=signature,
        )

    def open(self, envelope: Envelope, sender: NodeIdentity) -> bytes:
        """Verify the signature, unwrap the content key, decrypt."""
        if envelope.recipient != self.node_id:
            raise NotRecipient(
                f"envelope addressed to {envelope.recipient!r}, not {self.node_id!r}"
            )
        if sender.node_id != envelope.sender:
            raise SignatureInvalid("sender identity does not match envelope")
        try:
            sender.verify_key().verify(
                envelope.signature,
                _signed_payload(
                    envelope.sender, envelope.recipient, envelope.nonce, envelope.ciphertext
                ),
            )
        except InvalidSignature:
            raise SignatureInvalid("envelope signature does not verify") from None
        try:
            ephemeral_pub = envelope.wrapped_key[:_SIGN_KEY_BYTES]
            wrap_nonce = envelope.wrapped_key[
                _SIGN_KEY_BYTES : _SIGN_KEY_BYTES + _NONCE_BYTES
            ]
            wrapped = envelope.wrapped_key[_SIGN_KEY_BYTES + _NONCE_BYTES :]
            shared = self._dh_key.exchange(X25519PublicKey.from_public_bytes(ephemeral_pub))
            kek = HKDF(
                algorithm=SHA256(),
                length=32,
                salt=None,
                info=_WRAP_INFO + ephemeral_pub + self.identity.public_key,
            ).derive(shared)
            content_key = AESGCM(kek).decrypt(wrap_nonce, wrapped, None)
            return AESGCM(content_key).decrypt(envelope.nonce, envelope.ciphertext, None)
        except Exception:
            raise DecryptionFailure("envelope could not be decrypted") from None


class Registry:
    """node_id -> published identity; registration is serialized."""

    def __init__(self):
        self._identities = {}
        self._lock = threading.Lock()

    def register(self, identity: NodeIdentity):
        with self._lock:
            if identity.node_id in self._identities:
                raise DuplicateNodeId(f"node id {identity.node_id!r} already registered")
            self._identities[identity.node_id] = identity

    def get(self, node_id: str) -> NodeIdentity:
        try:
            return self._identities[node_id]
        except KeyError:
            raise UnknownRecipient(f"no registered node {node_id!r}") from None

    def node_ids(self) -> list:
        return sorted(self._identities)

    def save(self, path):
        lines = [REGISTRY_HEADER]
        for node_id in sorted(self._identities):
            identity = self._identities[node_id]
            lines.append(f"{node_id} {_b64(identity.public_key)}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        registry = cls()
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0].strip() != REGISTRY_HEADER:
            raise GraphFormatError(f"{path}: not a registry file")
        for line in lines[1:]:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            node_id, _, key_b64 = line.partition(" ")
            registry.register(NodeIdentity(node_id=node_id, public_key=_unb64(key_b64)))
        return registry


def generate_identity(node_id: str, registry: Registry = None) -> Node:
    """Fresh keypair; registers the public part when a registry is given."""
    node = Node(node_id)
    if registry is not None:
        registry.register(node.identity)
    return node


def seal(sender: Node, recipient_id: str, payload: bytes, registry: Registry) -> Envelope:
    """Registry-backed convenience around Node.seal."""
    return sender.seal(registry.get(recipient_id), payload)


def open_envelope(recipient: Node, envelope: Envelope, registry: Registry) -> bytes:
    """Registry-backed convenience around Node.open."""
    try:
        sender = registry.get(envelope.sender)
    except UnknownRecipient:
        raise SignatureInvalid(f"unknown sender {envelope.sender!r}") from None
    return recipient.open(envelope, sender)


@dataclass(frozen=True)
class Receipt:
    envelope_id: str
    recipient: str
    attempts: int


class InProcessTransport:
    """Delivers envelope wire frames to in-process inboxes.

    The transport only ever touches serialized envelopes; captured
    frames are retained when instrumented so confidentiality tests can
    assert the absence of payload plaintext.
    """

    def __init__(self, capture: bool = False):
        self._inboxes = {}
        self._offline = set()
        self.capture = capture
        self.captured = []
        self._lock = threading.Lock()

    def attach(self, node_id: str, inbox):
        with self._lock:
            self._inboxes[node_id] = inbox

    def set_offline(self, node_id: str, offline: bool = True):
        with self._lock:
            if offline:
                self._offline.add(node_id)
            else:
                self._offline.discard(node_id)

    def deliver(self, envelope: Envelope) -> bool:
        frame = envelope.to_wire()
        if self.capture:
            self.captured.append(frame)
        with self._lock:
            if envelope.recipient in self._offline:
                return False
            inbox = self._inboxes.get(envelope.recipient)
        if inbox is None:
            return False
        inbox.put(Envelope.from_wire(frame))
        return True


class Router:
    """The relay hop: at-least-once delivery with bounded retries."""

    def __init__(self, registry: Registry, transport, retries: int = 3, backoff: float = 0.05):
        self.registry = registry
        self.transport = transport
        self.retries = retries
        self.backoff = backoff

    def route(self, envelope: Envelope) -> Receipt:
        self.registry.get(envelope.recipient)  # raises UnknownRecipient
        for attempt in range(1, self.retries + 1):
            if self.transport.deliver(envelope):
                return Receipt(
                    envelope_id=envelope.envelope_id,
                    recipient=envelope.recipient,
                    attempts=attempt,
                )
            if attempt < self.retries:
                time.sleep(self.backoff * attempt)
        raise Unreachable(
            f"recipient {envelope.recipient!r} unreachable after {self.retries} attempts"
        )
