"""Byte-level BPE tokenizer toolkit: trainer, codec, chat template,
corpus mixture sampler and bytes-per-token benchmark."""

__version__ = "0.1.0"
