# models/constant.py

TOOL_VERSION = "1.0.0"

# Binary artifact containers: 8 magic bytes, uint32 header length, JSON header, payload
DATASET_MAGIC = b"FTSDATA\x00"
CHECKPOINT_MAGIC = b"FTSCKPT\x00"
ATTACK_MAGIC = b"FTSATCK\x00"

DATASET_VERSION = 1
CHECKPOINT_VERSION = 1
ATTACK_VERSION = 1
REPORT_VERSION = 1

# Reference bins below this magnitude are excluded from the log-scale spectrum loss
SPECTRUM_EPS = 1e-12
