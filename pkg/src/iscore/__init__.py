"""Interactive scores with timed conditional branching.

Authoring model and validator (`model`), text/JSON front ends (`dsl`),
edition-phase analysis (`edition`), the deterministic performance engine
(`engine`), exhaustive trace enumeration (`oracle`), the qualitative
interval-relation encoder (`encode`), and the CLI/session server
(`cli`, `server`).
"""

__version__ = "0.1.0"
