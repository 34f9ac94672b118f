# Every random decision flows from the single `seed` setting; each
# subsystem gets its own stream at a fixed offset.
SYNTH = 0
MASK = 1
INIT = 2
SHUFFLE = 3
KMEANS = 4

_STRIDE = 1000


def derive_seed(seed: int, offset: int) -> int:
    return int(seed) + offset * _STRIDE
