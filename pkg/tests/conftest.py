import math

import pytest


class PlantedEmbeddingProvider:
    """Fixed unit vector per exact text; raises on unknown text."""

    def __init__(self, vectors: dict):
        self._vectors = {text: list(vec) for text, vec in vectors.items()}
        self.provider_id = "planted"

    def embed(self, texts):
        return [list(self._vectors[text]) for text in texts]


def planted_pair_provider(source: str, cosines: dict[str, float]):
    """Provider where cosine(source, text) equals the planted value.

    The source maps to (1, 0) and each text to (c, sqrt(1 - c^2)), both
    unit vectors, so their cosine is exactly c up to float error.
    """
    vectors = {source: [1.0, 0.0]}
    for text, c in cosines.items():
        vectors[text] = [c, math.sqrt(1.0 - c * c)]
    return PlantedEmbeddingProvider(vectors)


def apec_response(
    correction: str,
    analysis: str = "La adaptación tiene frases largas.",
    final: str = "Sin comentarios adicionales.",
) -> str:
    return (
        "# Análisis de la adaptación\n"
        f"{analysis}\n\n"
        "# Corrección\n"
        f"{correction}\n\n"
        "# Final\n"
        f"{final}"
    )


@pytest.fixture
def hash_embedder():
    from apec.similarity import HashEmbeddingProvider

    return HashEmbeddingProvider(dim=32)
