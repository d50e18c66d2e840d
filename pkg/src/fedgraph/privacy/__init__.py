"""Differential privacy, budget accounting, secret sharing and Paillier encryption."""

from .accounting import ADVANCED, LITERAL, PrivacyLedger, compose_budget
from .dp import DPNoiseConfig, clip_update, gaussian_mechanism, implied_epsilon, noise_sigma
from .paillier import (
    PaillierKeypair,
    add_ciphertexts,
    decrypt,
    decrypt_vector,
    encrypt,
    encrypt_vector,
    paillier_keygen,
)
from .secagg import SecretShares, reconstruct, secure_sum, share
