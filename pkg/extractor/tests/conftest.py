import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

# small closed vocabulary keeps the trained tokenizer deterministic and makes
# most corpus words single tokens
EN_LINES = [
    "red foxes chase mice",
    "old crows steal seeds",
    "wet dogs shake water",
    "red crows chase seeds",
    "old foxes steal mice",
    "wet dogs chase water",
    "red dogs steal mice",
    "old foxes shake seeds",
    "wet crows chase water",
    "red foxes steal seeds",
    "old dogs shake mice",
    "wet crows steal water",
]

# training lines repeat one bigram so the byte-level BPE merges it into a
# two-character token
ZH_TRAIN_LINES = [
    "木马水火",
    "马木火水",
    "水火木马",
    "火水马木",
    "木马火水",
    "水木马火",
    "木马水火",
    "火木马水",
]


def build_checkpoint(directory: Path, lines, vocab_size: int) -> str:
    from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    directory.mkdir(parents=True, exist_ok=True)
    tok = Tokenizer(models.BPE())
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=vocab_size,
        min_frequency=1,
        special_tokens=["<|endoftext|>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(lines, trainer)
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tok,
        unk_token="<|endoftext|>",
        bos_token="<|endoftext|>",
        eos_token="<|endoftext|>",
    )
    tokenizer.save_pretrained(directory)

    config = GPT2Config(
        vocab_size=len(tokenizer),
        n_positions=512,
        n_embd=32,
        n_layer=2,
        n_head=2,
        n_inner=48,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    torch.manual_seed(0)
    model = GPT2LMHeadModel(config)
    model.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def en_corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpora") / "en.txt"
    path.write_text("\n".join(EN_LINES) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def en_checkpoint(tmp_path_factory):
    return build_checkpoint(tmp_path_factory.mktemp("ckpt_en"), EN_LINES, vocab_size=400)


@pytest.fixture(scope="session")
def zh_checkpoint(tmp_path_factory):
    # 257 alphabet+special, 8 intra-character byte merges, then exactly one
    # cross-character merge (the dominant bigram of the training lines)
    return build_checkpoint(tmp_path_factory.mktemp("ckpt_zh"), ZH_TRAIN_LINES, vocab_size=266)
