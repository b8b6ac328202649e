"""Plugin registry: name -> factory, resolved once at startup.

Lookups are case-sensitive exact matches so configuration audits are
unambiguous. An unknown name fails startup; the gateway must not serve
traffic with a partially resolved plugin pair.
"""

from __future__ import annotations

from typing import Callable

from qpu_gatekeeper.plugins.base import SitePlugin, VendorPlugin
from qpu_gatekeeper.plugins.records import PluginConfig

VendorFactory = Callable[[str], VendorPlugin]  # arg: vendor_base_url
SiteFactory = Callable[[str], SitePlugin]  # arg: site_backend_url


class UnknownPlugin(Exception):
    """Configured plugin name is not registered."""


class PluginRegistry:
    def __init__(self) -> None:
        self._vendors: dict[str, VendorFactory] = {}
        self._sites: dict[str, SiteFactory] = {}

    def register_vendor(self, name: str, factory: VendorFactory) -> None:
        self._vendors[name] = factory

    def register_site(self, name: str, factory: SiteFactory) -> None:
        self._sites[name] = factory

    def vendor_names(self) -> list[str]:
        return sorted(self._vendors)

    def site_names(self) -> list[str]:
        return sorted(self._sites)

    def load(self, config: PluginConfig) -> tuple[VendorPlugin, SitePlugin]:
        """Instantiate the configured plugin pair, bound to their URLs.

        Raises:
            UnknownPlugin: either name is unregistered (exact match).
        """
        try:
            vendor_factory = self._vendors[config.vendor_plugin_name]
        except KeyError:
            raise UnknownPlugin(
                f"vendor plugin {config.vendor_plugin_name!r} not registered; "
                f"known: {self.vendor_names()}"
            ) from None
        try:
            site_factory = self._sites[config.site_plugin_name]
        except KeyError:
            raise UnknownPlugin(
                f"site plugin {config.site_plugin_name!r} not registered; "
                f"known: {self.site_names()}"
            ) from None
        return vendor_factory(config.vendor_base_url), site_factory(config.site_backend_url)


def default_registry() -> PluginRegistry:
    """Registry with the built-in plugins registered."""
    # Imported here so the registry module stays import-light.
    from qpu_gatekeeper.mockdevice.plugin import MockVendorPlugin
    from qpu_gatekeeper.plugins.reference_site import ReferenceSitePlugin

    registry = PluginRegistry()
    registry.register_vendor("mock", lambda url: MockVendorPlugin(base_url=url))
    registry.register_site("reference-site", lambda url: ReferenceSitePlugin(backend_url=url))
    return registry
