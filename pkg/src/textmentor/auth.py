"""Bearer tokens signed by a configured issuer key.

A token is ``tm1.<base64url payload>.<base64url signature>`` where the
payload is JSON {"sub": subject, "exp": unix seconds} and the
signature is Ed25519 over the version tag plus payload bytes. This is
the stand-in for the identity provider's login barrier: the service
only ever verifies tokens against the issuer public key it was
configured with.
"""

import base64
import json
import time
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
    load_pem_private_key,
    load_pem_public_key,
)

from .errors import TokenExpired, TokenInvalid

TOKEN_VERSION = "tm1"


@dataclass(frozen=True)
class AccessToken:
    subject: str
    expiry: int  # unix seconds


def _b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _unb64url(text: str) -> bytes:
    padding = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + padding)


def mint_token(subject: str, issuer_key: Ed25519PrivateKey, ttl_seconds: int = 3600,
               now: int = None) -> str:
    if not subject:
        raise ValueError("subject must be non-empty")
    now = int(time.time()) if now is None else int(now)
    payload = json.dumps(
        {"sub": subject, "exp": now + int(ttl_seconds)}, sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    signature = issuer_key.sign(TOKEN_VERSION.encode("ascii") + b"." + payload)
    return f"{TOKEN_VERSION}.{_b64url(payload)}.{_b64url(signature)}"


def verify_token(raw: str, issuer_public_key: Ed25519PublicKey, now: int = None) -> AccessToken:
    """Validated AccessToken, or TokenInvalid / TokenExpired."""
    try:
        version, payload_b64, signature_b64 = raw.strip().split(".")
    except (AttributeError, ValueError):
        raise TokenInvalid("token is not in version.payload.signature form") from None
    if version != TOKEN_VERSION:
        raise TokenInvalid(f"unsupported token version {version!r}")
    try:
        payload = _unb64url(payload_b64)
        signature = _unb64url(signature_b64)
    except (ValueError, TypeError):
        raise TokenInvalid("token encoding is not valid base64url") from None
    try:
        issuer_public_key.verify(signature, TOKEN_VERSION.encode("ascii") + b"." + payload)
    except InvalidSignature:
        raise TokenInvalid("token signature does not verify") from None
    try:
        claims = json.loads(payload.decode("utf-8"))
        subject = claims["sub"]
        expiry = int(claims["exp"])
    except (ValueError, KeyError, TypeError):
        raise TokenInvalid("token payload is malformed") from None
    if not isinstance(subject, str) or not subject:
        raise TokenInvalid("token subject is missing")
    now = int(time.time()) if now is None else int(now)
    if expiry < now:
        raise TokenExpired(f"token expired at {expiry}")
    return AccessToken(subject=subject, expiry=expiry)


# --- issuer key handling ------------------------------------------------


def generate_issuer_key() -> Ed25519PrivateKey:
    return Ed25519PrivateKey.generate()


def issuer_key_pem(key: Ed25519PrivateKey) -> bytes:
    return key.private_bytes(Encoding.PEM, PrivateFormat.PKCS8, NoEncryption())


def issuer_public_pem(key: Ed25519PrivateKey) -> bytes:
    return key.public_key().public_bytes(Encoding.PEM, PublicFormat.SubjectPublicKeyInfo)


def load_issuer_key(pem: bytes) -> Ed25519PrivateKey:
    return load_pem_private_key(pem, password=None)


def load_issuer_public_key(pem: bytes) -> Ed25519PublicKey:
    return load_pem_public_key(pem)
