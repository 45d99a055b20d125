from .checksums import canonical_json, config_hash, sha256_bytes, sha256_file
from .geometry import bearing, bearings, wrap_angle, wrap_angles
