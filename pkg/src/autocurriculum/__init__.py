"""Neural auto-curricula for two-player zero-sum games."""
