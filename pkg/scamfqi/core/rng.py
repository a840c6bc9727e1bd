# scamfqi/core/rng.py - named counter-based random streams
import numpy as np

ENV_CHANNEL = 0


def stream(seed: int, episode: int, channel: int) -> np.random.Generator:
    """Philox generator keyed by (seed, episode, channel).

    Channel 0 drives the environment, channel i + 1 drives agent i. Streams
    never depend on the order episodes are run in, so parallel collection
    reproduces serial output.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(episode), int(channel)))
    return np.random.Generator(np.random.Philox(seq))


def agent_channel(agent: int) -> int:
    return agent + 1


def derive_seed(seed: int, *labels: int) -> int:
    """Stable integer seed for sub-tasks (tree fitting, bootstrap)."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(x) for x in labels))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw using exactly one uniform."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)
