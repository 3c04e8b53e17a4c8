"""History buffer of generated images shown to the discriminators.

Until the pool is full every query stores and returns the new image. Once
full, half the queries (coin flip) swap a stored image out for the new one
and return the old; the other half return the new image untouched.
"""

from __future__ import annotations

import random

import torch


class ImagePool:
    def __init__(self, capacity: int = 50, seed: int = 0):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self.images = []
        self._rng = random.Random(seed)

    def query(self, image: torch.Tensor) -> torch.Tensor:
        """Return the image to feed the discriminator for this fake."""
        if self.capacity == 0:
            return image
        out = []
        for item in image.detach():
            item = item.unsqueeze(0)
            if len(self.images) < self.capacity:
                self.images.append(item.clone())
                out.append(item)
            elif self._rng.random() < 0.5:
                idx = self._rng.randrange(self.capacity)
                old = self.images[idx]
                self.images[idx] = item.clone()
                out.append(old)
            else:
                out.append(item)
        return torch.cat(out, dim=0)
