"""Shaping backends: tc/netem command rendering, execution, and a simulated link.

The shaping layout mirrors common practice for bidirectional control from a
single host: upload is limited by an HTB class on the egress device, ingress
traffic is redirected to an ifb device where download is limited the same
way, and the round-trip latency is split half on each side so a full RTT is
experienced end to end. A netem qdisc under each HTB class adds the delay.
"""

from __future__ import annotations

import os
import shlex
import subprocess
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import BackendError
from .kde import EmulationParams


def default_ifb() -> str:
    """ifb device used when none is given; ERRANT_IFB overrides it."""
    return os.environ.get("ERRANT_IFB", "ifb0")


def _ms(value: float) -> str:
    # netem takes fractional milliseconds; trim trailing zeros
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return text or "0"


def _kbit(value: float) -> int:
    # HTB rates are whole kbit; never render a zero rate
    return max(1, round(value))


def render_commands(
    params: EmulationParams,
    egress_iface: str,
    ifb_iface: str,
    latency_std_ms: Optional[float] = None,
    all_egress: bool = False,
) -> list[str]:
    """Render the command sequence imposing ``params`` on an interface pair.

    ``params.latency_ms`` is the round-trip time; each direction gets half of
    it unless ``all_egress`` puts the whole delay on the egress side. With
    ``latency_std_ms`` the netem delay becomes normally distributed around
    the mean, split the same way.
    """
    if not egress_iface or not ifb_iface:
        raise ValueError("interface names must be non-empty")
    if all_egress:
        egress_delay, ifb_delay = params.latency_ms, 0.0
        egress_std, ifb_std = latency_std_ms, None
    else:
        egress_delay = ifb_delay = params.latency_ms / 2.0
        egress_std = ifb_std = (
            latency_std_ms / 2.0 if latency_std_ms is not None else None
        )

    def netem(delay: float, std: Optional[float]) -> str:
        clause = f"delay {_ms(delay)}ms"
        if std is not None:
            clause += f" {_ms(std)}ms distribution normal"
        return clause

    upload = _kbit(params.upload_kbps)
    download = _kbit(params.download_kbps)
    return [
        f"ip link set dev {ifb_iface} up",
        f"tc qdisc add dev {egress_iface} handle ffff: ingress",
        f"tc filter add dev {egress_iface} parent ffff: "
        f"matchall action mirred egress redirect dev {ifb_iface}",
        f"tc qdisc add dev {egress_iface} root handle 1: htb default 1",
        f"tc class add dev {egress_iface} parent 1: classid 1:1 htb rate {upload}kbit",
        f"tc qdisc add dev {egress_iface} parent 1:1 handle 10: "
        f"netem {netem(egress_delay, egress_std)}",
        f"tc qdisc add dev {ifb_iface} root handle 1: htb default 1",
        f"tc class add dev {ifb_iface} parent 1: classid 1:1 htb rate {download}kbit",
        f"tc qdisc add dev {ifb_iface} parent 1:1 handle 10: "
        f"netem {netem(ifb_delay, ifb_std)}",
    ]


def render_clear_commands(egress_iface: str, ifb_iface: str) -> list[str]:
    """Commands removing every installed rule; failures on absent rules are benign."""
    return [
        f"tc qdisc del dev {egress_iface} root",
        f"tc qdisc del dev {egress_iface} ingress",
        f"tc qdisc del dev {ifb_iface} root",
    ]


def dry_run_apply(
    params: EmulationParams, egress_iface: str = "eth0", ifb_iface: Optional[str] = None
) -> list[str]:
    """Render the apply sequence without executing anything."""
    return render_commands(params, egress_iface, ifb_iface or default_ifb())


class ShapingBackend:
    """Base contract: apply replaces any configured state; clear is idempotent."""

    def __init__(self) -> None:
        self.configured: Optional[EmulationParams] = None

    def apply(self, params: EmulationParams) -> None:
        raise NotImplementedError

    def apply_gaussian_latency(
        self, params: EmulationParams, latency_mean_ms: float, latency_std_ms: float
    ) -> None:
        raise NotImplementedError

    def clear(self) -> None:
        raise NotImplementedError


class _CommandBackend(ShapingBackend):
    """Shared flow for backends that speak rendered command lines."""

    def __init__(
        self,
        egress_iface: str,
        ifb_iface: Optional[str] = None,
        all_egress: bool = False,
    ) -> None:
        super().__init__()
        if not egress_iface:
            raise ValueError("egress interface name must be non-empty")
        self.egress_iface = egress_iface
        self.ifb_iface = ifb_iface or default_ifb()
        self.all_egress = all_egress

    def apply(self, params: EmulationParams) -> None:
        commands = render_commands(
            params, self.egress_iface, self.ifb_iface, all_egress=self.all_egress
        )
        self._replace(commands, params)

    def apply_gaussian_latency(
        self, params: EmulationParams, latency_mean_ms: float, latency_std_ms: float
    ) -> None:
        effective = EmulationParams(params.download_kbps, params.upload_kbps, latency_mean_ms)
        commands = render_commands(
            effective,
            self.egress_iface,
            self.ifb_iface,
            latency_std_ms=latency_std_ms,
            all_egress=self.all_egress,
        )
        self._replace(commands, effective)

    def _replace(self, commands: list[str], params: EmulationParams) -> None:
        if self.configured is not None:
            # replace semantics: tear down old rules before installing new ones
            self._execute(
                render_clear_commands(self.egress_iface, self.ifb_iface),
                tolerate_errors=True,
            )
        self._execute(commands, tolerate_errors=False)
        self.configured = params

    def clear(self) -> None:
        self._execute(
            render_clear_commands(self.egress_iface, self.ifb_iface),
            tolerate_errors=True,
        )
        self.configured = None

    def _execute(self, commands: list[str], tolerate_errors: bool) -> None:
        raise NotImplementedError


class DryRunBackend(_CommandBackend):
    """Records the exact command sequence instead of executing it."""

    def __init__(
        self,
        egress_iface: str = "eth0",
        ifb_iface: Optional[str] = None,
        all_egress: bool = False,
    ) -> None:
        super().__init__(egress_iface, ifb_iface, all_egress)
        self.log: list[str] = []

    def _execute(self, commands: list[str], tolerate_errors: bool) -> None:
        self.log.extend(commands)


def _shell_runner(command: str) -> tuple[int, str]:
    completed = subprocess.run(
        shlex.split(command), capture_output=True, text=True, check=False
    )
    return completed.returncode, completed.stderr.strip()


class TcBackend(_CommandBackend):
    """Executes rendered commands through the system tc/ip binaries.

    ``runner`` maps a command line to (exit status, stderr); tests inject a
    fake one. Failures during rule removal are tolerated (the rules may not
    exist yet), failures while installing rules raise :class:`BackendError`.
    """

    def __init__(
        self,
        egress_iface: str,
        ifb_iface: Optional[str] = None,
        all_egress: bool = False,
        runner: Optional[Callable[[str], tuple[int, str]]] = None,
    ) -> None:
        super().__init__(egress_iface, ifb_iface, all_egress)
        self._runner = runner or _shell_runner

    def _execute(self, commands: list[str], tolerate_errors: bool) -> None:
        for command in commands:
            status, stderr = self._runner(command)
            if status != 0 and not tolerate_errors:
                detail = f" ({stderr})" if stderr else ""
                raise BackendError(
                    f"command failed with status {status}: {command}{detail}"
                )


@dataclass(frozen=True)
class SimulatedLink:
    """Fluid-model link: startup handshakes, then a rate-limited transfer."""

    download_rate_kbps: float
    upload_rate_kbps: float
    rtt_ms: float
    setup_rtts: int = 2

    def __post_init__(self) -> None:
        if self.download_rate_kbps <= 0 or self.upload_rate_kbps <= 0:
            raise ValueError("link rates must be positive")
        if self.rtt_ms < 0:
            raise ValueError("rtt must be nonnegative")
        if self.setup_rtts < 0:
            raise ValueError("setup_rtts must be nonnegative")


def simulate_download(link: SimulatedLink, size_bytes: float) -> tuple[float, float]:
    """Fluid-model download of ``size_bytes``; returns (duration s, avg speed kbit/s).

    The transfer spends ``setup_rtts`` round trips on connection setup and
    then moves data at exactly the link's download rate.
    """
    if size_bytes <= 0:
        raise ValueError("size_bytes must be positive")
    size_kbit = size_bytes * 8.0 / 1000.0
    duration = link.setup_rtts * (link.rtt_ms / 1000.0) + size_kbit / link.download_rate_kbps
    return duration, size_kbit / duration


class SimulatedBackend(ShapingBackend):
    """Backend that retargets an in-process fluid link instead of interfaces.

    The fluid model is deterministic, so a Gaussian latency request pins the
    link at the mean latency.
    """

    def __init__(self, setup_rtts: int = 2) -> None:
        super().__init__()
        self.setup_rtts = setup_rtts
        self.link: Optional[SimulatedLink] = None

    def apply(self, params: EmulationParams) -> None:
        self.link = SimulatedLink(
            params.download_kbps, params.upload_kbps, params.latency_ms, self.setup_rtts
        )
        self.configured = params

    def apply_gaussian_latency(
        self, params: EmulationParams, latency_mean_ms: float, latency_std_ms: float
    ) -> None:
        effective = EmulationParams(params.download_kbps, params.upload_kbps, latency_mean_ms)
        self.apply(effective)

    def clear(self) -> None:
        self.link = None
        self.configured = None

    def download(self, size_bytes: float) -> tuple[float, float]:
        """Simulate one download over the currently applied link."""
        if self.link is None:
            raise BackendError("no parameters applied; nothing to download through")
        return simulate_download(self.link, size_bytes)
