#!/usr/bin/env python3
"""Builds the reference fixtures for the tokenizer and transformer tests.

Trains three tiny byte-level BPE tokenizers (GPT-2, Llama-3 and Qwen2
pre-tokenization rules), writes randomly initialised Llama and Qwen2
checkpoints that use them, and records what the Hugging Face implementations
produce: token ids for a list of strings, next-token probabilities, attention
weights and last-layer hidden states for one sequence.

Output: tests/data/hf/<name>/ (tokenizer.json, config.json,
model.safetensors, expected.json). Re-running with the same seed reproduces
the files.
"""

import argparse
import json
import pathlib
import random

import torch
from tokenizers import Regex, Tokenizer, decoders, models, normalizers, pre_tokenizers, trainers
from transformers import LlamaConfig, LlamaForCausalLM, Qwen2Config, Qwen2ForCausalLM

LLAMA3_PATTERN = (r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}"
                  r"| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+")
QWEN2_PATTERN = (r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}"
                 r"| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+")

ENCODE_CASES = [
    "",
    "Hello world",
    "  leading spaces and trailing  ",
    "Natalia sold clips to 48 of her friends in April.",
    "She sold 1234567 items; total = 12,345.67 dollars!",
    "It's what they'll do, isn't it? I'M SURE.",
    "line one\nline two\n\n\tindented\r\nwindows",
    "The answer is \\boxed{\\frac{1}{2}}.",
    "café naïve résumé — “quotes” 東京 😀",
    "x^2 + 3x - 4 = 0 => x = 1 or x = -4",
    "####  42",
    "<|endoftext|>special<|endoftext|> tokens",
    "(A) yes (B) no",
    "numbers 0 00 000 0000 1.5e10",
    "   ",
    "a\n \n b",
]


def corpus(seed: int) -> list[str]:
    rng = random.Random(seed)
    names = ["Natalia", "James", "Weng", "Betty", "Julie", "Tom", "Ann"]
    items = ["clips", "apples", "pages", "dollars", "marbles", "cookies", "tickets"]
    lines = []
    for _ in range(3000):
        a, b = rng.randint(1, 999), rng.randint(1, 99)
        n, it = rng.choice(names), rng.choice(items)
        lines.append(f"{n} has {a} {it}. She gives away {b}. How many {it} are left? "
                     f"{a} - {b} = {a - b}. The answer is \\boxed{{{a - b}}}.")
    lines += ENCODE_CASES
    lines += ["It's isn't they're we've I'm you'll he'd", "café naïve résumé 東京 😀 “”—"]
    return lines


def train_tokenizer(kind: str, seed: int) -> Tokenizer:
    tok = Tokenizer(models.BPE(ignore_merges=(kind == "llama3")))
    if kind == "gpt2":
        tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    else:
        pattern = LLAMA3_PATTERN if kind == "llama3" else QWEN2_PATTERN
        tok.pre_tokenizer = pre_tokenizers.Sequence([
            pre_tokenizers.Split(Regex(pattern), behavior="isolated", invert=False),
            pre_tokenizers.ByteLevel(add_prefix_space=False, use_regex=False),
        ])
        if kind == "qwen2":
            tok.normalizer = normalizers.NFC()
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(vocab_size=320, special_tokens=["<|endoftext|>"],
                                  initial_alphabet=pre_tokenizers.ByteLevel.alphabet(), show_progress=False)
    tok.train_from_iterator(corpus(seed), trainer=trainer)
    return tok


def make_model(kind: str, vocab: int, eos: int):
    common = dict(hidden_size=32, intermediate_size=64, num_hidden_layers=2, num_attention_heads=4,
                  num_key_value_heads=2, vocab_size=vocab, max_position_embeddings=256, eos_token_id=eos,
                  attn_implementation="eager")
    if kind == "qwen2":
        cfg = Qwen2Config(tie_word_embeddings=True, rope_theta=1e6, rms_norm_eps=1e-6, **common)
        model = Qwen2ForCausalLM(cfg)
    else:
        scaling = {"rope_type": "llama3", "factor": 8.0, "low_freq_factor": 1.0, "high_freq_factor": 4.0,
                   "original_max_position_embeddings": 16}
        cfg = LlamaConfig(rope_scaling=scaling, rope_theta=10000.0, **common)
        model = LlamaForCausalLM(cfg)
    with torch.no_grad():
        for p in model.parameters():
            p.normal_(0.0, 0.35)  # large enough that attention is far from uniform
    model.eval()
    return model


def reference_outputs(model, ids: list[int]) -> dict:
    with torch.no_grad():
        out = model(torch.tensor([ids]), output_attentions=True, output_hidden_states=True)
    probs = torch.softmax(out.logits[0].double(), dim=-1)
    return {
        "ids": ids,
        "probs": probs.tolist(),
        "attentions": [a[0].tolist() for a in out.attentions],  # [layer][head][query][key]
        "hidden": out.hidden_states[-1][0].tolist(),
    }


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests/data/hf"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    root = pathlib.Path(args.out)
    torch.manual_seed(args.seed)

    specs = [("llama", "llama3", torch.float32), ("llama-bf16", "llama3", torch.bfloat16),
             ("qwen2", "qwen2", torch.float32), ("gpt2-tok", "gpt2", None)]
    tokenizers_cache = {}
    for name, kind, dtype in specs:
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        if kind not in tokenizers_cache:
            tokenizers_cache[kind] = train_tokenizer(kind, args.seed)
        tok = tokenizers_cache[kind]
        tok.save(str(d / "tokenizer.json"))
        expected = {"encode": [{"text": t, "ids": tok.encode(t).ids} for t in ENCODE_CASES]}
        if dtype is not None:
            eos = tok.token_to_id("<|endoftext|>")
            model = make_model("qwen2" if name == "qwen2" else "llama", tok.get_vocab_size(), eos)
            if dtype == torch.bfloat16:
                model.to(torch.bfloat16).save_pretrained(d)
                # reload so non-persistent buffers (rotary frequencies) are rebuilt in f32
                cls = Qwen2ForCausalLM if name == "qwen2" else LlamaForCausalLM
                model = cls.from_pretrained(d, dtype=torch.float32, attn_implementation="eager").eval()
            else:
                model.save_pretrained(d)
            ids = tok.encode("Natalia sold 48 clips. 48 / 2 = 24. The answer is \\boxed{72}.").ids
            expected["forward"] = reference_outputs(model, ids)
        (d / "expected.json").write_text(json.dumps(expected))
        print("wrote", d)


if __name__ == "__main__":
    main()
