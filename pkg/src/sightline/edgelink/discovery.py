"""Finding the edge host by service name.

Two transports answer the same question, "who serves this name?":
``SimulatedMulticast`` is an in-process registry used by tests and the
simulator, ``UdpMulticast`` sends a query datagram to a multicast group and
collects replies until the time budget runs out.

Datagrams are ASCII: ``SLQ1 <name>`` for a query and
``SLR1 <name> <address>`` for a reply.
"""
from __future__ import annotations

import socket
import struct
import threading
import time
from typing import Protocol

from ..core import SightlineError

DEFAULT_GROUP = "239.255.77.77"
DEFAULT_PORT = 5454


class DiscoveryError(SightlineError):
    pass


class DiscoveryTimeout(DiscoveryError):
    pass


class DiscoveryConflict(DiscoveryError):
    def __init__(self, service_name: str, addresses):
        self.addresses = sorted(addresses)
        super().__init__(f"{len(self.addresses)} hosts answer for {service_name!r}: "
                         + ", ".join(self.addresses))


class DiscoveryTransport(Protocol):
    def query(self, service_name: str, timeout_ms: int) -> list:
        """Addresses of every responder for ``service_name``."""


class SimulatedMulticast:
    def __init__(self):
        self._responders: dict = {}
        self._lock = threading.Lock()

    def register(self, service_name: str, address: str) -> None:
        with self._lock:
            self._responders.setdefault(service_name, set()).add(address)

    def unregister(self, service_name: str, address: str) -> None:
        with self._lock:
            self._responders.get(service_name, set()).discard(address)

    def query(self, service_name: str, timeout_ms: int) -> list:
        with self._lock:
            return sorted(self._responders.get(service_name, ()))


def discover(service_name: str, transport: DiscoveryTransport, timeout_ms: int = 500) -> str:
    """The single address serving ``service_name``.

    No responder is a DiscoveryTimeout; more than one distinct address is a
    DiscoveryConflict listing them all.
    """
    found = sorted(set(transport.query(service_name, timeout_ms)))
    if not found:
        raise DiscoveryTimeout(f"no host answered for {service_name!r} within {timeout_ms} ms")
    if len(found) > 1:
        raise DiscoveryConflict(service_name, found)
    return found[0]


def _query_datagram(name: str) -> bytes:
    return f"SLQ1 {name}".encode("ascii")


class UdpMulticast:
    """Query side of the UDP transport."""

    def __init__(self, group: str = DEFAULT_GROUP, port: int = DEFAULT_PORT, ttl: int = 1):
        self.group, self.port, self.ttl = group, port, ttl

    def query(self, service_name: str, timeout_ms: int) -> list:
        found = set()
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP) as s:
            s.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, self.ttl)
            s.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
            s.bind(("", 0))
            s.sendto(_query_datagram(service_name), (self.group, self.port))
            deadline = time.monotonic() + timeout_ms / 1000
            while True:
                left = deadline - time.monotonic()
                if left <= 0:
                    break
                s.settimeout(left)
                try:
                    data, _ = s.recvfrom(1024)
                except socket.timeout:
                    break
                parts = data.decode("ascii", "replace").split()
                if len(parts) == 3 and parts[0] == "SLR1" and parts[1] == service_name:
                    found.add(parts[2])
        return sorted(found)


class UdpResponder:
    """Answers queries for one service name from a background thread."""

    def __init__(self, service_name: str, address: str, group: str = DEFAULT_GROUP,
                 port: int = DEFAULT_PORT):
        self.service_name, self.address = service_name, address
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        if hasattr(socket, "SO_REUSEPORT"):
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
        self.sock.bind(("", port))
        mreq = struct.pack("4s4s", socket.inet_aton(group), socket.inet_aton("0.0.0.0"))
        self.sock.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
        self.sock.settimeout(0.05)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)

    def start(self) -> "UdpResponder":
        self._thread.start()
        return self

    def _serve(self) -> None:
        want = _query_datagram(self.service_name)
        reply = f"SLR1 {self.service_name} {self.address}".encode("ascii")
        while not self._stop.is_set():
            try:
                data, peer = self.sock.recvfrom(1024)
            except socket.timeout:
                continue
            except OSError:
                break
            if data == want:
                self.sock.sendto(reply, peer)

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=1)
        self.sock.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
