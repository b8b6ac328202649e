"""qpu-gatekeeper: transparent policy gateway suite for a shared quantum device.

The suite is a set of small cooperating services:

- ``gateway``     -- the transparent reverse proxy in front of the device API
- ``accounting``  -- the site backend owning budgets, reservations, job records
- ``ledger``      -- atomic per-user outstanding-shot fairness accounting
- ``mockdevice``  -- a stand-in device replicating the upstream job API
- ``reporter``    -- background daemon archiving results and closing out jobs
- ``artifacts``   -- long-term object storage keyed by job id
- ``authn``       -- token issuer / validator stub
- ``plugins``     -- vendor- and site-plugin contracts and registry
"""

__version__ = "0.1.0"
