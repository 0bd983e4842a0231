import json

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

from sectembed import content_key

CHARS = "abcdefghijklmnopqrstuvwxyz0123456789"


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    """A small randomly initialized BERT saved locally, so tests need no hub."""
    path = tmp_path_factory.mktemp("tinybert")
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=5 + 2 * len(CHARS),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
    )
    model = BertModel(config)
    model.eval()

    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += list(CHARS)
    vocab += [f"##{c}" for c in CHARS]
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), model_max_length=128)

    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return str(path)


def make_manifest(path, texts):
    lines = [json.dumps({"key": content_key(t), "text": t}) for t in texts]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


@pytest.fixture
def sample_texts():
    return [f"sec {i} heading w{i % 7} body t{i}" for i in range(24)]
