"""stagelink: a real-time avatar-control stage server.

Capture streams, replay clips, gamepad nudges and an autonomous pathfinder
are blended per body region onto a neutral character, retargeted onto a show
avatar, and coordinated across operator stations over a decentralized typed
event bus. ``stage-server --help`` is the entry point.
"""

__version__ = "0.1.0"
