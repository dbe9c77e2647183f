"""TLS interception support: per-host leaf certificates under a local CA.

Interception is strictly opt-in. The caller supplies a CA certificate and
key that the client already trusts; the proxy then mints short-lived leaf
certificates per intercepted hostname and terminates TLS itself.
"""

from __future__ import annotations

import datetime
import ipaddress
import ssl
import tempfile
import threading
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.x509.oid import NameOID

_KEY_SIZE = 2048
_LEAF_DAYS = 7


def generate_ca(common_name: str = "slimweb mitm CA") -> tuple[bytes, bytes]:
    """Create a self-signed CA; returns (cert_pem, key_pem)."""
    key = rsa.generate_private_key(public_exponent=65537, key_size=_KEY_SIZE)
    name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, common_name)])
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(minutes=5))
        .not_valid_after(now + datetime.timedelta(days=3650))
        .add_extension(x509.BasicConstraints(ca=True, path_length=0), critical=True)
        .add_extension(
            x509.KeyUsage(
                digital_signature=True, key_cert_sign=True, crl_sign=True,
                content_commitment=False, key_encipherment=False,
                data_encipherment=False, key_agreement=False,
                encipher_only=False, decipher_only=False,
            ),
            critical=True,
        )
        .sign(key, hashes.SHA256())
    )
    cert_pem = cert.public_bytes(serialization.Encoding.PEM)
    key_pem = key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.TraditionalOpenSSL,
        serialization.NoEncryption(),
    )
    return cert_pem, key_pem


class CertMinter:
    """Mints and caches per-host leaf certs signed by the given CA."""

    def __init__(self, ca_cert_path: str | Path, ca_key_path: str | Path):
        self._ca_cert = x509.load_pem_x509_certificate(
            Path(ca_cert_path).read_bytes()
        )
        self._ca_key = serialization.load_pem_private_key(
            Path(ca_key_path).read_bytes(), password=None
        )
        self._leaf_key = rsa.generate_private_key(
            public_exponent=65537, key_size=_KEY_SIZE
        )
        self._lock = threading.Lock()
        self._contexts: dict[str, ssl.SSLContext] = {}

    def _mint(self, hostname: str) -> bytes:
        try:
            san: x509.GeneralName = x509.IPAddress(ipaddress.ip_address(hostname))
        except ValueError:
            san = x509.DNSName(hostname)
        now = datetime.datetime.now(datetime.timezone.utc)
        cert = (
            x509.CertificateBuilder()
            .subject_name(x509.Name([
                x509.NameAttribute(NameOID.COMMON_NAME, hostname[:64])
            ]))
            .issuer_name(self._ca_cert.subject)
            .public_key(self._leaf_key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + datetime.timedelta(days=_LEAF_DAYS))
            .add_extension(
                x509.BasicConstraints(ca=False, path_length=None), critical=True
            )
            .add_extension(x509.SubjectAlternativeName([san]), critical=False)
            .sign(self._ca_key, hashes.SHA256())
        )
        return cert.public_bytes(serialization.Encoding.PEM)

    def context_for(self, hostname: str) -> ssl.SSLContext:
        """Server-side SSL context presenting a cert for ``hostname``."""
        with self._lock:
            ctx = self._contexts.get(hostname)
            if ctx is not None:
                return ctx
            cert_pem = self._mint(hostname)
            key_pem = self._leaf_key.private_bytes(
                serialization.Encoding.PEM,
                serialization.PrivateFormat.TraditionalOpenSSL,
                serialization.NoEncryption(),
            )
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            # load_cert_chain only takes paths; hand it a throwaway file
            with tempfile.NamedTemporaryFile(suffix=".pem") as fh:
                fh.write(cert_pem + key_pem)
                fh.flush()
                ctx.load_cert_chain(fh.name)
            self._contexts[hostname] = ctx
            return ctx
